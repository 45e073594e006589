#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "swd/tensor.hpp"

namespace swd {

/// A trainable array plus its gradient accumulator. Tape::param() binds one
/// into a forward pass; Tape::backward() adds into `grad`.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value)
      : name(std::move(name)), value(std::move(value)), grad(this->value.shape(), 0.0) {}

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run record of one forward pass. Nodes are appended in execution
/// order, so the append order is already a topological order and backward()
/// is a single reverse sweep.
///
/// A tape is confined to one thread. Separate tapes share nothing mutable
/// except the Parameter gradients they are bound to.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Untracked input; never receives a gradient.
  Var constant(Tensor value);
  /// Tracked leaf; its gradient is readable via grad() after backward().
  Var leaf(Tensor value);
  /// Tracked leaf bound to a Parameter; backward() accumulates into p.grad.
  Var param(Parameter& p);

  /// Reverse sweep from a scalar loss. Clears node gradients from any
  /// previous sweep first; Parameter gradients keep accumulating.
  void backward(Var loss);

  bool tracked(Var v) const;
  bool has_grad(Var v) const;
  /// Gradient of the last backward() w.r.t. v. Throws ArgumentError when v
  /// is untracked or was not reached.
  const Tensor& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

  // Op-authoring interface.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }
  /// Zero-initialised gradient buffer of an input, or nullptr if the input is
  /// not tracked (so backward rules can skip work for constants).
  Tensor* input_grad(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool tracked = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
};

// ---- primitive elementwise ops -------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
/// Throws DomainError on any non-positive input.
Var log(Var a);
/// Sum of all entries, as a rank-0 scalar.
Var sum(Var a);

// ---- structural and linear-algebra ops -----------------------------------

Var matmul(Var a, Var b);
/// X[m x n] plus a bias row b[1 x n] added to every row.
Var add_bias(Var x, Var bias);
/// Row-wise softmax with max subtraction. Masked entries (mask byte 0) are
/// exactly zero. An empty mask means all positions are live.
Var softmax_rows(Var x, std::span<const unsigned char> mask = {});
/// Row-wise log-softmax; masked entries are reported as 0 and get no gradient.
Var log_softmax_rows(Var x, std::span<const unsigned char> mask = {});
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(Var a, Var b, std::size_t axis);
Var slice_rows(Var x, std::size_t start, std::size_t count);
Var slice_cols(Var x, std::size_t start, std::size_t count);
/// out[i] = x[index[i]]; index -1 yields a zero row.
Var gather_rows(Var x, std::span<const std::ptrdiff_t> index);
/// Row lookup with vocabulary range checking (throws VocabularyError).
Var embedding_lookup(Var table, std::span<const int> ids);
/// out[s] = sum of rows r with segment[r] == s; segment -1 rows are dropped.
Var segment_sum(Var x, std::span<const std::ptrdiff_t> segment, std::size_t num_segments);
/// out[r] = factor[r] * x[r] for a column of per-row factors [R x 1].
Var scale_rows(Var x, Var factor);
/// out[r] = x[r, column[r]] as an [R x 1] column.
Var pick(Var x, std::span<const std::size_t> column);
Var reshape(Var x, Shape shape);
Var transpose(Var x);

// ---- verification ---------------------------------------------------------

using ScalarFn = std::function<Var(Tape&, Var)>;

/// Max over coordinates of |analytic - central difference| /
/// max(1, |analytic|, |numeric|) for a scalar-valued f at x.
double grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-5);

/// Same measure over every coordinate of the given parameters, for a loss
/// that binds them itself via Tape::param(). Parameter values are restored;
/// gradients are left zeroed.
double grad_check_parameters(const std::function<Var(Tape&)>& loss,
                             std::span<Parameter* const> params, double h = 1e-5);

}  // namespace swd
