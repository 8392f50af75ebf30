// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/checkpoint.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "oracles.hpp"
#include "slotfill/config.hpp"
#include "slotfill/trainer.hpp"

namespace slotfill {
namespace {

namespace fs = std::filesystem;

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::vector<char>& b) {
  std::ofstream(p, std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    fixture_ = testing::micro_fixture();
    cfg_.model = fixture_.config;
    model_ = std::make_unique<SlotModel>(cfg_.model, fixture_.vocab.size(), 17);
    path_ = fs::temp_directory_path() / ("slotfill_ckpt_" + std::to_string(::getpid()) + ".ckpt");
    save_checkpoint(path_, model_->params(), make_checkpoint_meta(cfg_, fixture_.vocab, fixture_.labels),
                    checkpoint_fingerprint(cfg_, fixture_.vocab, fixture_.labels));
  }
  void TearDown() override { fs::remove(path_); }

  testing::MicroFixture fixture_;
  Config cfg_;
  std::unique_ptr<SlotModel> model_;
  fs::path path_;
};

TEST_F(CheckpointTest, RoundTripIsBitExact) {
  const Checkpoint ck = read_checkpoint(path_);
  verify_fingerprint(ck, checkpoint_fingerprint(cfg_, fixture_.vocab, fixture_.labels));
  SlotModel other(cfg_.model, fixture_.vocab.size(), 99);
  restore_parameters(other.params(), ck);
  const auto a = model_->params().all();
  const auto b = other.params().all();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i]->value.shape(), b[i]->value.shape());
    EXPECT_EQ(std::memcmp(a[i]->value.raw(), b[i]->value.raw(), a[i]->value.numel() * sizeof(double)), 0)
        << a[i]->name;
  }
  EXPECT_EQ(ck.meta.vocab, fixture_.vocab.tokens());
  EXPECT_EQ(ck.meta.label_names.size(), fixture_.labels.size());
  EXPECT_EQ(ck.meta.config_text, dump_config(cfg_));
}

TEST_F(CheckpointTest, CorruptPayloadByteReportsOffset) {
  auto bytes = read_bytes(path_);
  bytes[bytes.size() - 5] ^= 0x40;
  write_bytes(path_, bytes);
  try {
    read_checkpoint(path_);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
  }
}

TEST_F(CheckpointTest, TruncationRejected) {
  auto bytes = read_bytes(path_);
  for (std::size_t keep : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    write_bytes(path_, std::vector<char>(bytes.begin(), bytes.begin() + static_cast<long>(keep)));
    EXPECT_THROW(read_checkpoint(path_), CheckpointError) << keep;
  }
}

TEST_F(CheckpointTest, BadMagicAndVersionRejected) {
  auto bytes = read_bytes(path_);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  write_bytes(path_, bad_magic);
  EXPECT_THROW(read_checkpoint(path_), CheckpointError);
  auto bad_version = bytes;
  bad_version[4] = static_cast<char>(kCheckpointVersion + 1);
  write_bytes(path_, bad_version);
  try {
    read_checkpoint(path_);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST_F(CheckpointTest, FingerprintMismatchRefused) {
  const Checkpoint ck = read_checkpoint(path_);
  Vocabulary altered = fixture_.vocab;
  altered.add("extra");
  EXPECT_THROW(verify_fingerprint(ck, checkpoint_fingerprint(cfg_, altered, fixture_.labels)), CheckpointError);
  Config wider = cfg_;
  wider.model.boundary.hidden = 16;
  EXPECT_THROW(verify_fingerprint(ck, checkpoint_fingerprint(wider, fixture_.vocab, fixture_.labels)), CheckpointError);
}

TEST_F(CheckpointTest, DuplicateNamesRejected) {
  // Rename the second tensor to the first one's name, keeping lengths equal.
  auto bytes = read_bytes(path_);
  const auto all = model_->params().all();
  const std::string first = all[0]->name, second = all[1]->name;
  ASSERT_EQ(first.size(), second.size());
  const std::string text(bytes.begin(), bytes.end());
  const auto pos = text.find(second);
  ASSERT_NE(pos, std::string::npos);
  std::copy(first.begin(), first.end(), bytes.begin() + static_cast<long>(pos));
  write_bytes(path_, bytes);
  try {
    read_checkpoint(path_);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos) << e.what();
  }
}

TEST_F(CheckpointTest, MissingParameterRefused) {
  Checkpoint ck = read_checkpoint(path_);
  ck.tensors.pop_back();
  SlotModel other(cfg_.model, fixture_.vocab.size(), 1);
  EXPECT_THROW(restore_parameters(other.params(), ck), CheckpointError);
}

TEST(CheckpointFile, MissingFileRejected) {
  EXPECT_THROW(read_checkpoint("/nonexistent/model.ckpt"), CheckpointError);
}

}  // namespace
}  // namespace slotfill
