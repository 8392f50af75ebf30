// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every primitive in execution order, so the record is already
// topologically sorted: backward() walks it once in reverse. Parameters live
// outside the tape and are attached as leaves with Tape::param(); their
// gradients are accumulated into Parameter::grad when backward() finishes.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slotfill/rng.hpp"
#include "slotfill/tensor.hpp"

namespace slotfill {

/// Learning-rate group. Encoder weights and task heads train at separate rates.
enum class ParamGroup : std::uint8_t { kEncoder = 0, kHead = 1 };

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  ParamGroup group = ParamGroup::kHead;
  bool trainable = true;

  void zero_grad() { grad = Tensor(value.shape(), 0.0); }
};

/// Owns parameters with stable addresses, in registration order.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor init, ParamGroup group);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr && id_ >= 0; }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

  const Tensor& value() const;
  /// Gradient after Tape::backward(); an empty tensor when none flowed here.
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  /// With record_gradients = false the tape only evaluates values; used for
  /// inference and for finite-difference probes.
  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  Var constant(Tensor value);
  /// A free-standing differentiable leaf (not tied to a Parameter).
  Var leaf(Tensor value);
  /// Attaches a parameter without copying it; repeated calls return the same
  /// node. The parameter must not change while the tape is in use.
  Var param(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  void backward(Var loss);

  /// Records a computed node. `fn` receives the node id and must add this
  /// node's gradient contribution into its inputs via grad_for().
  Var record(Tensor value, std::vector<int> inputs, BackwardFn fn);

  const Tensor& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.param ? n.param->value : n.value;
  }
  const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  /// Zero-initialized accumulator for node `id`, allocated on first use.
  Tensor& grad_for(int id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> inputs;
    BackwardFn backward;
    /// Parameter nodes read the parameter's storage directly.
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  Var push(Node node);

  bool recording_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

/// Primitive operations. Each one records its own backward rule.
namespace ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
/// Elementwise product with a constant tensor of equal shape.
Var mul_const(Var a, const Tensor& m);
Var scale(Var a, double s);
/// x + bias, with bias a 1 x cols row broadcast over rows.
Var add_row(Var x, Var bias);

Var matmul(Var a, Var b);
/// a * b^T.
Var matmul_nt(Var a, Var b);
/// x * w + b; `b` may be an invalid Var for no bias.
Var linear(Var x, Var w, Var b);

Var gather_rows(Var x, std::vector<std::size_t> index);
/// Row k of the result is the mean of rows groups[k] of x.
Var mean_rows(Var x, std::vector<std::vector<std::size_t>> groups);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var x, std::size_t begin, std::size_t end);

Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
/// Exact (erf) GELU.
Var gelu(Var x);
Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var exp(Var x);
Var softmax_rows(Var x);
/// Inverted dropout; identity when `training` is false or p == 0.
Var dropout(Var x, double p, Rng& rng, bool training);
/// Each row divided by its L2 norm; all-zero rows stay zero.
Var l2_normalize_rows(Var x);
Var sum(Var x);
/// Identity forward, zero gradient backward.
Var stop_gradient(Var x);

/// LSTM cell on pre-activation gates [B x 4h] in (i, f, g, o) order and the
/// previous cell state [B x h]. Returns [B x 2h] = (h_new | c_new).
Var lstm_cell(Var gates, Var c_prev);

/// log-sum-exp over the entries where mask is nonzero (row-major over x).
Var masked_log_sum_exp(Var x, const std::vector<std::uint8_t>& mask);
/// Per-row masked log-sum-exp; rows with an empty mask yield 0 and no gradient.
Var masked_log_sum_exp_rows(Var x, const std::vector<std::uint8_t>& mask);

/// Sum over rows r of -log softmax(logits[r, begin_r:end_r])[target_r].
/// Targets are absolute column indices inside the row's range.
Var cross_entropy_rows(Var logits, std::vector<std::size_t> targets,
                       std::vector<std::size_t> col_begin, std::vector<std::size_t> col_end);

/// Layout of a packed multi-sequence attention input: `batch` sequences of
/// `seq_len` rows each, stacked row-wise.
struct AttentionLayout {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::size_t heads = 1;
};

/// Scaled dot-product multi-head attention on packed qkv [B*S x 3d].
/// mask has B*S*S entries (1 = row may attend column). Rows with no permitted
/// column produce zeros. If `probs_out` is non-null it receives the
/// post-softmax weights as a [B*H*S x S] tensor.
Var masked_attention(Var qkv, AttentionLayout layout, const std::vector<std::uint8_t>& mask,
                     Tensor* probs_out = nullptr);

}  // namespace ad
}  // namespace slotfill
