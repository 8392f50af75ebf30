// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace slotfill {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

MapC as_mat(const Tensor& t) {
  return MapC(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
Map as_mat(Tensor& t) {
  return Map(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw PreconditionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                            " vs " + shape_string(b.shape()));
  }
}

Tensor like(const Tensor& t, double fill = 0.0) { return Tensor::matrix(t.rows(), t.cols(), fill); }

// out = a * b, one row at a time, so each output row depends only on its own
// input row and never on where that row sits in the batch.
template <typename B>
void row_product(const Tensor& a, const B& b, Tensor& out) {
  const MapC am = as_mat(a);
  Map om = as_mat(out);
  for (Eigen::Index i = 0; i < am.rows(); ++i) om.row(i).noalias() = am.row(i) * b;
}

// Applies an elementwise map; `df(x, y)` gives dy/dx from input and output.
template <typename F, typename DF>
Var unary(Var x, F f, DF df) {
  Tape& t = x.tape();
  const Tensor& xv = x.value();
  Tensor out = like(xv);
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = f(xv[i]);
  const int xi = x.id();
  return t.record(std::move(out), {xi}, [xi, df](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv2 = tp.value(xi);
    const Tensor& yv = tp.value(self);
    Tensor& gx = tp.grad_for(xi);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * df(xv2[i], yv[i]);
  });
}

}  // namespace

// ---------------------------------------------------------------- store

Parameter& ParameterStore::add(std::string name, Tensor init, ParamGroup group) {
  if (index_.count(name)) throw PreconditionError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = std::move(init);
  p->group = group;
  p->zero_grad();
  index_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterStore::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParameterStore::get(std::string_view name) {
  Parameter* p = find(name);
  if (!p) throw PreconditionError("unknown parameter: " + std::string(name));
  return *p;
}

const Parameter& ParameterStore::get(std::string_view name) const {
  const Parameter* p = find(name);
  if (!p) throw PreconditionError("unknown parameter: " + std::string(name));
  return *p;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

// ---------------------------------------------------------------- tape

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = recording_;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.param = &p;
  n.needs_grad = recording_ && p.trainable;
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Tensor value, std::vector<int> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (recording_) {
    for (int i : inputs) {
      if (nodes_[static_cast<std::size_t>(i)].needs_grad) {
        n.needs_grad = true;
        break;
      }
    }
  }
  if (n.needs_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
  }
  return push(std::move(n));
}

Tensor& Tape::grad_for(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor(value(id).shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw PreconditionError("backward: loss belongs to another tape");
  if (!recording_) throw PreconditionError("backward: tape was created without gradient recording");
  if (nodes_.empty()) throw PreconditionError("backward: empty tape");
  if (backward_done_) throw PreconditionError("backward: already run on this tape");
  const Tensor& lv = value(loss.id());
  if (lv.numel() != 1) {
    throw PreconditionError("backward: loss must be scalar, got shape " + shape_string(lv.shape()));
  }
  backward_done_ = true;
  if (!needs_grad(loss.id())) return;
  grad_for(loss.id())[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
  }
  for (auto& n : nodes_) {
    if (n.param == nullptr || n.grad.empty()) continue;
    Parameter& p = *n.param;
    if (p.grad.numel() != p.value.numel()) p.zero_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) p.grad[i] += n.grad[i];
  }
}

// ---------------------------------------------------------------- ops

namespace ad {

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  as_mat(out) += as_mat(b.value());
  const int ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ai)) as_mat(t.grad_for(ai)) += as_mat(g);
    if (t.needs_grad(bi)) as_mat(t.grad_for(bi)) += as_mat(g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  as_mat(out) -= as_mat(b.value());
  const int ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ai)) as_mat(t.grad_for(ai)) += as_mat(g);
    if (t.needs_grad(bi)) as_mat(t.grad_for(bi)) -= as_mat(g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  as_mat(out).array() *= as_mat(b.value()).array();
  const int ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ai)) {
      as_mat(t.grad_for(ai)).array() += as_mat(g).array() * as_mat(t.value(bi)).array();
    }
    if (t.needs_grad(bi)) {
      as_mat(t.grad_for(bi)).array() += as_mat(g).array() * as_mat(t.value(ai)).array();
    }
  });
}

Var mul_const(Var a, const Tensor& m) {
  require_same_shape(a.value(), m, "mul_const");
  Tensor out = a.value();
  as_mat(out).array() *= as_mat(m).array();
  const int ai = a.id();
  Tensor saved = a.tape().recording() ? m : Tensor();
  return a.tape().record(std::move(out), {ai}, [ai, saved = std::move(saved)](Tape& t, int self) {
    as_mat(t.grad_for(ai)).array() += as_mat(t.grad(self)).array() * as_mat(saved).array();
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  as_mat(out) *= s;
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [ai, s](Tape& t, int self) {
    as_mat(t.grad_for(ai)) += s * as_mat(t.grad(self));
  });
}

Var add_row(Var x, Var bias) {
  const Tensor& xv = x.value();
  require(bias.value().rows() == 1 && bias.value().cols() == xv.cols(),
          "add_row: bias must be 1 x " + std::to_string(xv.cols()));
  Tensor out = xv;
  as_mat(out).rowwise() += as_mat(bias.value()).row(0);
  const int xi = x.id(), bi = bias.id();
  return x.tape().record(std::move(out), {xi, bi}, [xi, bi](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(xi)) as_mat(t.grad_for(xi)) += as_mat(g);
    if (t.needs_grad(bi)) as_mat(t.grad_for(bi)) += as_mat(g).colwise().sum();
  });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.cols() == bv.rows(), "matmul: inner dimensions " + std::to_string(av.cols()) + " and " +
                                      std::to_string(bv.rows()) + " differ");
  Tensor out = Tensor::matrix(av.rows(), bv.cols());
  row_product(av, as_mat(bv), out);
  const int ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ai)) as_mat(t.grad_for(ai)).noalias() += as_mat(g) * as_mat(t.value(bi)).transpose();
    if (t.needs_grad(bi)) as_mat(t.grad_for(bi)).noalias() += as_mat(t.value(ai)).transpose() * as_mat(g);
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.cols() == bv.cols(), "matmul_nt: column counts differ");
  Tensor out = Tensor::matrix(av.rows(), bv.rows());
  row_product(av, as_mat(bv).transpose(), out);
  const int ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {ai, bi}, [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ai)) as_mat(t.grad_for(ai)).noalias() += as_mat(g) * as_mat(t.value(bi));
    if (t.needs_grad(bi)) as_mat(t.grad_for(bi)).noalias() += as_mat(g).transpose() * as_mat(t.value(ai));
  });
}

Var linear(Var x, Var w, Var b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require(xv.cols() == wv.rows(), "linear: input width " + std::to_string(xv.cols()) +
                                      " does not match weight rows " + std::to_string(wv.rows()));
  Tensor out = Tensor::matrix(xv.rows(), wv.cols());
  row_product(xv, as_mat(wv), out);
  const bool has_bias = b.valid();
  if (has_bias) {
    require(b.value().numel() == wv.cols(), "linear: bias width mismatch");
    as_mat(out).rowwise() += as_mat(b.value()).row(0);
  }
  const int xi = x.id(), wi = w.id(), bi = has_bias ? b.id() : -1;
  std::vector<int> inputs{xi, wi};
  if (has_bias) inputs.push_back(bi);
  return x.tape().record(std::move(out), std::move(inputs), [xi, wi, bi](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(xi)) as_mat(t.grad_for(xi)).noalias() += as_mat(g) * as_mat(t.value(wi)).transpose();
    if (t.needs_grad(wi)) as_mat(t.grad_for(wi)).noalias() += as_mat(t.value(xi)).transpose() * as_mat(g);
    if (bi >= 0 && t.needs_grad(bi)) as_mat(t.grad_for(bi)) += as_mat(g).colwise().sum();
  });
}

Var gather_rows(Var x, std::vector<std::size_t> index) {
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  Tensor out = Tensor::matrix(index.size(), c);
  for (std::size_t k = 0; k < index.size(); ++k) {
    require(index[k] < xv.rows(), "gather_rows: index " + std::to_string(index[k]) + " out of range");
    std::copy_n(xv.raw() + index[k] * c, c, out.raw() + k * c);
  }
  const int xi = x.id();
  return x.tape().record(std::move(out), {xi}, [xi, c, index = std::move(index)](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_for(xi);
    for (std::size_t k = 0; k < index.size(); ++k) {
      const double* src = g.raw() + k * c;
      double* dst = gx.raw() + index[k] * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var mean_rows(Var x, std::vector<std::vector<std::size_t>> groups) {
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  Tensor out = Tensor::matrix(groups.size(), c);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    require(!groups[k].empty(), "mean_rows: empty group " + std::to_string(k));
    const double inv = 1.0 / static_cast<double>(groups[k].size());
    for (std::size_t r : groups[k]) {
      require(r < xv.rows(), "mean_rows: row index out of range");
      for (std::size_t j = 0; j < c; ++j) out(k, j) += xv(r, j) * inv;
    }
  }
  const int xi = x.id();
  return x.tape().record(std::move(out), {xi}, [xi, c, groups = std::move(groups)](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_for(xi);
    for (std::size_t k = 0; k < groups.size(); ++k) {
      const double inv = 1.0 / static_cast<double>(groups[k].size());
      for (std::size_t r : groups[k]) {
        for (std::size_t j = 0; j < c; ++j) gx(r, j) += g(k, j) * inv;
      }
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    require(p.rows() == r, "concat_cols: row counts differ");
    total += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Tensor out = Tensor::matrix(r, total);
  std::size_t off = 0;
  for (const Var& p : parts) {
    as_mat(out).middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(p.cols())) =
        as_mat(p.value());
    off += p.cols();
  }
  auto ids_copy = ids;
  return parts[0].tape().record(std::move(out), std::move(ids_copy),
                                [ids, widths](Tape& t, int self) {
                                  const Tensor& g = t.grad(self);
                                  std::size_t o = 0;
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (t.needs_grad(ids[k])) {
                                      as_mat(t.grad_for(ids[k])) +=
                                          as_mat(g).middleCols(static_cast<Eigen::Index>(o),
                                                               static_cast<Eigen::Index>(widths[k]));
                                    }
                                    o += widths[k];
                                  }
                                });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> heights;
  for (const Var& p : parts) {
    require(p.cols() == c, "concat_rows: column counts differ");
    total += p.rows();
    ids.push_back(p.id());
    heights.push_back(p.rows());
  }
  Tensor out = Tensor::matrix(total, c);
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().raw(), p.value().numel(), out.raw() + off * c);
    off += p.rows();
  }
  auto ids_copy = ids;
  return parts[0].tape().record(std::move(out), std::move(ids_copy),
                                [ids, heights, c](Tape& t, int self) {
                                  const Tensor& g = t.grad(self);
                                  std::size_t o = 0;
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (t.needs_grad(ids[k])) {
                                      Tensor& gk = t.grad_for(ids[k]);
                                      const double* src = g.raw() + o * c;
                                      for (std::size_t i = 0; i < heights[k] * c; ++i) gk[i] += src[i];
                                    }
                                    o += heights[k];
                                  }
                                });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  require(begin <= end && end <= xv.cols(), "slice_cols: range out of bounds");
  Tensor out = Tensor::matrix(xv.rows(), end - begin);
  as_mat(out) = as_mat(xv).middleCols(static_cast<Eigen::Index>(begin),
                                      static_cast<Eigen::Index>(end - begin));
  const int xi = x.id();
  return x.tape().record(std::move(out), {xi}, [xi, begin, end](Tape& t, int self) {
    as_mat(t.grad_for(xi)).middleCols(static_cast<Eigen::Index>(begin),
                                      static_cast<Eigen::Index>(end - begin)) += as_mat(t.grad(self));
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  require(gamma.value().numel() == c && beta.value().numel() == c, "layer_norm: affine width mismatch");
  Tensor out = Tensor::matrix(r, c);
  Tensor xhat = Tensor::matrix(r, c);
  std::vector<double> rstd(r);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xv(i, j);
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xv(i, j) - mu) * (xv(i, j) - mu);
    var /= static_cast<double>(c);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat(i, j) = (xv(i, j) - mu) * rstd[i];
      out(i, j) = xhat(i, j) * gv[j] + bv[j];
    }
  }
  const int xi = x.id(), gi = gamma.id(), bi = beta.id();
  if (!x.tape().recording()) return x.tape().record(std::move(out), {xi, gi, bi}, nullptr);
  return x.tape().record(
      std::move(out), {xi, gi, bi},
      [xi, gi, bi, r, c, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& gv2 = t.value(gi);
        if (t.needs_grad(gi)) {
          Tensor& gg = t.grad_for(gi);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gg[j] += g(i, j) * xhat(i, j);
        }
        if (t.needs_grad(bi)) {
          Tensor& gb = t.grad_for(bi);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gb[j] += g(i, j);
        }
        if (t.needs_grad(xi)) {
          Tensor& gx = t.grad_for(xi);
          const double inv_c = 1.0 / static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = g(i, j) * gv2[j];
              m1 += d;
              m2 += d * xhat(i, j);
            }
            m1 *= inv_c;
            m2 *= inv_c;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = g(i, j) * gv2[j];
              gx(i, j) += rstd[i] * (d - m1 - xhat(i, j) * m2);
            }
          }
        }
      });
}

Var gelu(Var x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [kInvSqrt2Pi](double v, double) {
        return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var softmax_rows(Var x) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out = like(xv);
  for (std::size_t i = 0; i < r; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) m = std::max(m, xv(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out(i, j) = std::exp(xv(i, j) - m);
      s += out(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) out(i, j) /= s;
  }
  const int xi = x.id();
  return x.tape().record(std::move(out), {xi}, [xi, r, c](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_for(xi);
    for (std::size_t i = 0; i < r; ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < c; ++j) d += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < c; ++j) gx(i, j) += y(i, j) * (g(i, j) - d);
    }
  });
}

Var dropout(Var x, double p, Rng& rng, bool training) {
  require(p >= 0.0 && p < 1.0, "dropout: rate must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  const Tensor& xv = x.value();
  Tensor mask = like(xv);
  const double keep = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.numel(); ++i) mask[i] = rng.bernoulli(p) ? 0.0 : keep;
  return mul_const(x, mask);
}

Var l2_normalize_rows(Var x) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out = like(xv);
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    norms[i] = l2_norm(xv.row_span(i));
    if (norms[i] == 0.0) continue;
    for (std::size_t j = 0; j < c; ++j) out(i, j) = xv(i, j) / norms[i];
  }
  const int xi = x.id();
  return x.tape().record(std::move(out), {xi}, [xi, r, c, norms = std::move(norms)](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_for(xi);
    for (std::size_t i = 0; i < r; ++i) {
      if (norms[i] == 0.0) continue;
      double d = 0.0;
      for (std::size_t j = 0; j < c; ++j) d += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < c; ++j) gx(i, j) += (g(i, j) - y(i, j) * d) / norms[i];
    }
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const int xi = x.id();
  return x.tape().record(Tensor::scalar(s), {xi}, [xi](Tape& t, int self) {
    const double g = t.grad(self)[0];
    Tensor& gx = t.grad_for(xi);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
}

Var stop_gradient(Var x) { return x.tape().constant(x.value()); }

Var lstm_cell(Var gates, Var c_prev) {
  const Tensor& gv = gates.value();
  const Tensor& cv = c_prev.value();
  const std::size_t b = gv.rows(), h = cv.cols();
  require(gv.cols() == 4 * h && cv.rows() == b, "lstm_cell: gates must be B x 4h with c_prev B x h");
  // act holds i, f, g, o after their nonlinearities, then tanh(c).
  Tensor act = Tensor::matrix(b, 5 * h);
  Tensor out = Tensor::matrix(b, 2 * h);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t k = 0; k < h; ++k) {
      const double i = 1.0 / (1.0 + std::exp(-gv(r, k)));
      const double f = 1.0 / (1.0 + std::exp(-gv(r, h + k)));
      const double g = std::tanh(gv(r, 2 * h + k));
      const double o = 1.0 / (1.0 + std::exp(-gv(r, 3 * h + k)));
      const double c = f * cv(r, k) + i * g;
      const double tc = std::tanh(c);
      act(r, k) = i;
      act(r, h + k) = f;
      act(r, 2 * h + k) = g;
      act(r, 3 * h + k) = o;
      act(r, 4 * h + k) = tc;
      out(r, k) = o * tc;
      out(r, h + k) = c;
    }
  }
  const int gi = gates.id(), ci = c_prev.id();
  if (!gates.tape().recording()) return gates.tape().record(std::move(out), {gi, ci}, nullptr);
  return gates.tape().record(std::move(out), {gi, ci}, [gi, ci, b, h, act = std::move(act)](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& cp = t.value(ci);
    const bool need_g = t.needs_grad(gi), need_c = t.needs_grad(ci);
    Tensor* gg = need_g ? &t.grad_for(gi) : nullptr;
    Tensor* gc = need_c ? &t.grad_for(ci) : nullptr;
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t k = 0; k < h; ++k) {
        const double i = act(r, k), f = act(r, h + k), gg_ = act(r, 2 * h + k), o = act(r, 3 * h + k);
        const double tc = act(r, 4 * h + k);
        const double dh = g(r, k);
        const double dc = g(r, h + k) + dh * o * (1.0 - tc * tc);
        if (gg) {
          (*gg)(r, k) += dc * gg_ * i * (1.0 - i);
          (*gg)(r, h + k) += dc * cp(r, k) * f * (1.0 - f);
          (*gg)(r, 2 * h + k) += dc * i * (1.0 - gg_ * gg_);
          (*gg)(r, 3 * h + k) += dh * tc * o * (1.0 - o);
        }
        if (gc) (*gc)(r, k) += dc * f;
      }
    }
  });
}

Var masked_log_sum_exp(Var x, const std::vector<std::uint8_t>& mask) {
  const Tensor& xv = x.value();
  require(mask.size() == xv.numel(), "masked_log_sum_exp: mask size mismatch");
  double m = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    if (mask[i]) {
      m = std::max(m, xv[i]);
      ++count;
    }
  }
  require(count > 0, "masked_log_sum_exp: empty mask");
  double s = 0.0;
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    if (mask[i]) s += std::exp(xv[i] - m);
  }
  const double lse = m + std::log(s);
  const int xi = x.id();
  return x.tape().record(Tensor::scalar(lse), {xi}, [xi, mask, lse](Tape& t, int self) {
    const double g = t.grad(self)[0];
    const Tensor& xv2 = t.value(xi);
    Tensor& gx = t.grad_for(xi);
    for (std::size_t i = 0; i < xv2.numel(); ++i) {
      if (mask[i]) gx[i] += g * std::exp(xv2[i] - lse);
    }
  });
}

Var masked_log_sum_exp_rows(Var x, const std::vector<std::uint8_t>& mask) {
  const Tensor& xv = x.value();
  require(mask.size() == xv.numel(), "masked_log_sum_exp_rows: mask size mismatch");
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out = Tensor::matrix(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      if (mask[i * c + j]) m = std::max(m, xv(i, j));
    }
    if (!std::isfinite(m)) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask[i * c + j]) s += std::exp(xv(i, j) - m);
    }
    out[i] = m + std::log(s);
  }
  const int xi = x.id();
  return x.tape().record(std::move(out), {xi}, [xi, mask, r, c](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    const Tensor& xv2 = t.value(xi);
    Tensor& gx = t.grad_for(xi);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        if (mask[i * c + j]) gx(i, j) += g[i] * std::exp(xv2(i, j) - y[i]);
      }
    }
  });
}

Var cross_entropy_rows(Var logits, std::vector<std::size_t> targets, std::vector<std::size_t> col_begin,
                       std::vector<std::size_t> col_end) {
  const Tensor& lv = logits.value();
  const std::size_t r = lv.rows();
  require(targets.size() == r && col_begin.size() == r && col_end.size() == r,
          "cross_entropy_rows: one target and range per row required");
  double total = 0.0;
  std::vector<double> lse(r);
  for (std::size_t i = 0; i < r; ++i) {
    require(col_begin[i] < col_end[i] && col_end[i] <= lv.cols(), "cross_entropy_rows: bad column range");
    require(targets[i] >= col_begin[i] && targets[i] < col_end[i], "cross_entropy_rows: target outside range");
    auto row = lv.row_span(i).subspan(col_begin[i], col_end[i] - col_begin[i]);
    lse[i] = log_sum_exp(row);
    total += lse[i] - lv(i, targets[i]);
  }
  const int li = logits.id();
  return logits.tape().record(
      Tensor::scalar(total), {li},
      [li, targets = std::move(targets), col_begin = std::move(col_begin), col_end = std::move(col_end),
       lse = std::move(lse)](Tape& t, int self) {
        const double g = t.grad(self)[0];
        const Tensor& lv2 = t.value(li);
        Tensor& gl = t.grad_for(li);
        for (std::size_t i = 0; i < targets.size(); ++i) {
          for (std::size_t j = col_begin[i]; j < col_end[i]; ++j) gl(i, j) += g * std::exp(lv2(i, j) - lse[i]);
          gl(i, targets[i]) -= g;
        }
      });
}

Var masked_attention(Var qkv, AttentionLayout layout, const std::vector<std::uint8_t>& mask, Tensor* probs_out) {
  const Tensor& xv = qkv.value();
  const std::size_t B = layout.batch, S = layout.seq_len, H = layout.heads;
  require(H > 0 && xv.rows() == B * S && xv.cols() % 3 == 0, "masked_attention: qkv must be B*S x 3d");
  const std::size_t d = xv.cols() / 3;
  require(d % H == 0, "masked_attention: model width not divisible by head count");
  require(mask.size() == B * S * S, "masked_attention: mask must hold B*S*S entries");
  const std::size_t dh = d / H;
  const double scale_f = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto S_ = static_cast<Eigen::Index>(S);
  const auto dh_ = static_cast<Eigen::Index>(dh);
  const auto ld = static_cast<Eigen::Index>(3 * d);

  using Strided = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
  using StridedMut = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

  auto probs = std::make_shared<Tensor>(Tensor::matrix(B * H * S, S));
  Tensor out = Tensor::matrix(B * S, d);
  for (std::size_t b = 0; b < B; ++b) {
    const double* base = xv.raw() + b * S * 3 * d;
    for (std::size_t hd = 0; hd < H; ++hd) {
      Strided q(base + hd * dh, S_, dh_, Eigen::OuterStride<>(ld));
      Strided k(base + d + hd * dh, S_, dh_, Eigen::OuterStride<>(ld));
      Strided v(base + 2 * d + hd * dh, S_, dh_, Eigen::OuterStride<>(ld));
      Map p(probs->raw() + (b * H + hd) * S * S, S_, S_);
      for (std::size_t i = 0; i < S; ++i) {
        const std::uint8_t* mrow = mask.data() + (b * S + i) * S;
        const auto ii = static_cast<Eigen::Index>(i);
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < S; ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          p(ii, jj) = mrow[j] ? q.row(ii).dot(k.row(jj)) * scale_f : 0.0;
          if (mrow[j]) m = std::max(m, p(ii, jj));
        }
        double s = 0.0;
        for (std::size_t j = 0; j < S; ++j) {
          double& pij = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          pij = mrow[j] ? std::exp(pij - m) : 0.0;
          s += pij;
        }
        if (s > 0.0) p.row(static_cast<Eigen::Index>(i)) /= s;
      }
      StridedMut o(out.raw() + b * S * d + hd * dh, S_, dh_, Eigen::OuterStride<>(static_cast<Eigen::Index>(d)));
      for (Eigen::Index i = 0; i < S_; ++i) {
        auto oi = o.row(i);
        oi.setZero();
        for (Eigen::Index j = 0; j < S_; ++j) {
          const double pij = p(i, j);
          if (pij != 0.0) oi.noalias() += pij * v.row(j);
        }
      }
    }
  }
  if (probs_out) *probs_out = *probs;
  const int xi = qkv.id();
  if (!qkv.tape().recording()) return qkv.tape().record(std::move(out), {xi}, nullptr);
  return qkv.tape().record(std::move(out), {xi}, [=](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& xv2 = t.value(xi);
    Tensor& gx = t.grad_for(xi);
    RowMat dp(S_, S_);
    for (std::size_t b = 0; b < B; ++b) {
      const double* base = xv2.raw() + b * S * 3 * d;
      double* gbase = gx.raw() + b * S * 3 * d;
      for (std::size_t hd = 0; hd < H; ++hd) {
        Strided q(base + hd * dh, S_, dh_, Eigen::OuterStride<>(ld));
        Strided k(base + d + hd * dh, S_, dh_, Eigen::OuterStride<>(ld));
        Strided v(base + 2 * d + hd * dh, S_, dh_, Eigen::OuterStride<>(ld));
        StridedMut gq(gbase + hd * dh, S_, dh_, Eigen::OuterStride<>(ld));
        StridedMut gk(gbase + d + hd * dh, S_, dh_, Eigen::OuterStride<>(ld));
        StridedMut gv(gbase + 2 * d + hd * dh, S_, dh_, Eigen::OuterStride<>(ld));
        MapC p(probs->raw() + (b * H + hd) * S * S, S_, S_);
        Strided go(g.raw() + b * S * d + hd * dh, S_, dh_, Eigen::OuterStride<>(static_cast<Eigen::Index>(d)));
        gv.noalias() += p.transpose() * go;
        dp.noalias() = go * v.transpose();
        for (Eigen::Index i = 0; i < S_; ++i) {
          const double dot_row = (dp.row(i).array() * p.row(i).array()).sum();
          dp.row(i) = (p.row(i).array() * (dp.row(i).array() - dot_row)).matrix();
        }
        dp *= scale_f;
        gq.noalias() += dp * k;
        gk.noalias() += dp.transpose() * q;
      }
    }
  });
}

}  // namespace ad
}  // namespace slotfill
