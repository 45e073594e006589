#include "swd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "swd/errors.hpp"
#include "swd/kernels.hpp"

namespace swd {

const Tensor& Var::value() const {
  if (!tape_) throw ArgumentError("use of an unbound Var");
  return tape_->value(id_);
}

// ---- Tape -----------------------------------------------------------------

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.tracked = true;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.tracked = true;
  n.param = &p;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& v : inputs) {
    if (v.tape() != this) throw ArgumentError("op inputs come from different tapes");
    if (nodes_[v.id()].tracked) n.tracked = true;
  }
  if (n.tracked) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor* Tape::input_grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.tracked) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return &n.grad;
}

bool Tape::tracked(Var v) const { return nodes_.at(v.id()).tracked; }

bool Tape::has_grad(Var v) const { return nodes_.at(v.id()).has_grad; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (!n.tracked) throw ArgumentError("gradient requested for an untracked value");
  if (!n.has_grad) throw ArgumentError("value was not reached by the last backward pass");
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ArgumentError("loss belongs to a different tape");
  if (loss.value().numel() != 1) {
    throw DimensionError("backward() needs a scalar loss, got shape " +
                         shape_string(loss.value().shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  Node& root = nodes_[loss.id()];
  if (!root.tracked) return;
  root.grad = Tensor(root.value.shape(), 1.0);
  root.has_grad = true;

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param) {
      auto dst = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
}

// ---- helpers --------------------------------------------------------------

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw ArgumentError("use of an unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw ArgumentError("op inputs come from different tapes");
  return t;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

void require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
  }
}

template <class Forward, class Derivative>
Var unary(Var a, Forward f, Derivative d) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = f(x[i]);
  const std::size_t ia = a.id();
  // d(x, y) is the local derivative given input x and output y.
  return t.record(std::move(out), {a}, [ia, d](Tape& tp, std::size_t self) {
    Tensor* ga = tp.input_grad(ia);
    if (!ga) return;
    const Tensor& g = tp.out_grad(self);
    const Tensor& x = tp.value(ia);
    const Tensor& y = tp.value(self);
    for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * d(x[i], y[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool live(std::span<const unsigned char> mask, std::size_t i) { return mask.empty() || mask[i]; }

void require_mask(const Tensor& x, std::span<const unsigned char> mask, const char* op) {
  if (!mask.empty() && mask.size() != x.numel()) {
    throw DimensionError(std::string(op) + ": mask has " + std::to_string(mask.size()) +
                         " entries for shape " + shape_string(x.shape()));
  }
}

}  // namespace

// ---- elementwise ----------------------------------------------------------

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    for (std::size_t in : {ia, ib}) {
      if (Tensor* gi = tp.input_grad(in)) {
        for (std::size_t i = 0; i < g.numel(); ++i) (*gi)[i] += g[i];
      }
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (Tensor* ga = tp.input_grad(ia)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i];
    }
    if (Tensor* gb = tp.input_grad(ib)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*gb)[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (Tensor* ga = tp.input_grad(ia)) {
      const Tensor& vb = tp.value(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * vb[i];
    }
    if (Tensor* gb = tp.input_grad(ib)) {
      const Tensor& va = tp.value(ia);
      for (std::size_t i = 0; i < g.numel(); ++i) (*gb)[i] += g[i] * va[i];
    }
  });
}

Var neg(Var a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  const std::size_t ia = a.id();
  return t.record(Tensor::scalar(acc), {a}, [ia](Tape& tp, std::size_t self) {
    Tensor* ga = tp.input_grad(ia);
    if (!ga) return;
    const double g = tp.out_grad(self).item();
    for (double& v : ga->values()) v += g;
  });
}

// ---- linear algebra -------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_matrix(x, "matmul");
  require_matrix(y, "matmul");
  const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
  if (y.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(x.shape()) + " * " +
                         shape_string(y.shape()));
  }
  Tensor out = Tensor::matrix(m, n);
  kernels::matmul(x.values(), y.values(), out.values(), m, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib, m, k, n](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (Tensor* ga = tp.input_grad(ia)) {
      kernels::matmul_nt(g.values(), tp.value(ib).values(), ga->values(), m, n, k);
    }
    if (Tensor* gb = tp.input_grad(ib)) {
      kernels::matmul_tn(tp.value(ia).values(), g.values(), gb->values(), m, k, n);
    }
  });
}

Var add_bias(Var x, Var bias) {
  Tape& t = tape_of(x, bias);
  const Tensor& v = x.value();
  require_matrix(v, "add_bias");
  const std::size_t m = v.rows(), n = v.cols();
  if (bias.value().numel() != n) {
    throw DimensionError("add_bias: bias " + shape_string(bias.value().shape()) +
                         " does not match " + shape_string(v.shape()));
  }
  Tensor out = v;
  const Tensor& b = bias.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += b[j];
  }
  const std::size_t ix = x.id(), ib = bias.id();
  return t.record(std::move(out), {x, bias}, [ix, ib, m, n](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (Tensor* gx = tp.input_grad(ix)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*gx)[i] += g[i];
    }
    if (Tensor* gb = tp.input_grad(ib)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) (*gb)[j] += g.at(i, j);
      }
    }
  });
}

Var softmax_rows(Var x, std::span<const unsigned char> mask) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  require_matrix(v, "softmax_rows");
  require_mask(v, mask, "softmax_rows");
  const std::size_t m = v.rows(), n = v.cols();
  Tensor out = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (live(mask, i * n + j)) {
        hi = std::max(hi, v.at(i, j));
        any = true;
      }
    }
    if (!any) throw DegenerateInputError("softmax_rows: row " + std::to_string(i) + " is fully masked");
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (live(mask, i * n + j)) {
        out.at(i, j) = std::exp(v.at(i, j) - hi);
        total += out.at(i, j);
      }
    }
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) /= total;
  }
  const std::size_t ix = x.id();
  return t.record(std::move(out), {x}, [ix, m, n](Tape& tp, std::size_t self) {
    Tensor* gx = tp.input_grad(ix);
    if (!gx) return;
    const Tensor& g = tp.out_grad(self);
    const Tensor& y = tp.value(self);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y.at(i, j) * g.at(i, j);
      for (std::size_t j = 0; j < n; ++j) gx->at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
    }
  });
}

Var log_softmax_rows(Var x, std::span<const unsigned char> mask) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  require_matrix(v, "log_softmax_rows");
  require_mask(v, mask, "log_softmax_rows");
  const std::size_t m = v.rows(), n = v.cols();
  Tensor out = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (live(mask, i * n + j)) {
        hi = std::max(hi, v.at(i, j));
        any = true;
      }
    }
    if (!any) {
      throw DegenerateInputError("log_softmax_rows: row " + std::to_string(i) + " is fully masked");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (live(mask, i * n + j)) total += std::exp(v.at(i, j) - hi);
    }
    const double lse = hi + std::log(total);
    for (std::size_t j = 0; j < n; ++j) {
      if (live(mask, i * n + j)) out.at(i, j) = v.at(i, j) - lse;
    }
  }
  std::vector<unsigned char> saved(mask.begin(), mask.end());
  const std::size_t ix = x.id();
  return t.record(std::move(out), {x},
                  [ix, m, n, saved = std::move(saved)](Tape& tp, std::size_t self) {
                    Tensor* gx = tp.input_grad(ix);
                    if (!gx) return;
                    const Tensor& g = tp.out_grad(self);
                    const Tensor& y = tp.value(self);
                    for (std::size_t i = 0; i < m; ++i) {
                      double gsum = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        if (live(saved, i * n + j)) gsum += g.at(i, j);
                      }
                      for (std::size_t j = 0; j < n; ++j) {
                        if (live(saved, i * n + j)) {
                          gx->at(i, j) += g.at(i, j) - std::exp(y.at(i, j)) * gsum;
                        }
                      }
                    }
                  });
}

// ---- structural -----------------------------------------------------------

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ArgumentError("concat of zero tensors");
  Tape& t = tape_of(parts[0]);
  const std::size_t rank = parts[0].value().rank();
  if (rank != 1 && rank != 2) throw DimensionError("concat supports rank 1 and 2 only");
  if (axis >= rank) throw DimensionError("concat axis out of range");

  std::vector<std::size_t> ids;
  std::vector<std::size_t> extent;  // size of each part along the axis
  Shape out_shape = parts[0].value().shape();
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw ArgumentError("op inputs come from different tapes");
    const Shape& s = p.value().shape();
    if (s.size() != rank) throw DimensionError("concat: rank mismatch");
    for (std::size_t d = 0; d < rank; ++d) {
      if (d != axis && s[d] != out_shape[d]) {
        throw DimensionError("concat: incompatible shapes " + shape_string(parts[0].value().shape()) +
                             " and " + shape_string(s));
      }
    }
    out_shape[axis] += s[axis];
    ids.push_back(p.id());
    extent.push_back(s[axis]);
  }

  Tensor out(out_shape);
  // Treat rank 1 as a single row so both axes share one code path.
  const std::size_t rows = rank == 2 ? out_shape[0] : 1;
  const std::size_t cols = rank == 2 ? out_shape[1] : out_shape[0];
  const bool by_rows = rank == 2 && axis == 0;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& src = parts[k].value();
    if (by_rows) {
      std::copy(src.values().begin(), src.values().end(), out.values().begin() + offset * cols);
    } else {
      const std::size_t w = extent[k];
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(src.values().begin() + r * w, w, out.values().begin() + r * cols + offset);
      }
    }
    offset += extent[k];
  }

  return t.record(std::move(out), parts,
                  [ids = std::move(ids), extent = std::move(extent), rows, cols, by_rows](
                      Tape& tp, std::size_t self) {
                    const Tensor& g = tp.out_grad(self);
                    std::size_t off = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      const std::size_t w = extent[k];
                      if (Tensor* gi = tp.input_grad(ids[k])) {
                        if (by_rows) {
                          for (std::size_t i = 0; i < w * cols; ++i) (*gi)[i] += g[off * cols + i];
                        } else {
                          for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t c = 0; c < w; ++c) (*gi)[r * w + c] += g[r * cols + off + c];
                          }
                        }
                      }
                      off += w;
                    }
                  });
}

Var concat(Var a, Var b, std::size_t axis) {
  const Var parts[] = {a, b};
  return concat(std::span<const Var>(parts), axis);
}

Var slice_rows(Var x, std::size_t start, std::size_t count) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  require_matrix(v, "slice_rows");
  if (start + count > v.rows()) throw DimensionError("slice_rows out of range");
  const std::size_t n = v.cols();
  Tensor out(Shape{count, n},
             std::vector<double>(v.values().begin() + start * n, v.values().begin() + (start + count) * n));
  const std::size_t ix = x.id();
  return t.record(std::move(out), {x}, [ix, start, n](Tape& tp, std::size_t self) {
    Tensor* gx = tp.input_grad(ix);
    if (!gx) return;
    const Tensor& g = tp.out_grad(self);
    for (std::size_t i = 0; i < g.numel(); ++i) (*gx)[start * n + i] += g[i];
  });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  require_matrix(v, "slice_cols");
  if (start + count > v.cols()) throw DimensionError("slice_cols out of range");
  const std::size_t m = v.rows(), n = v.cols();
  Tensor out = Tensor::matrix(m, count);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < count; ++j) out.at(i, j) = v.at(i, start + j);
  }
  const std::size_t ix = x.id();
  return t.record(std::move(out), {x}, [ix, start, count, m, n](Tape& tp, std::size_t self) {
    Tensor* gx = tp.input_grad(ix);
    if (!gx) return;
    const Tensor& g = tp.out_grad(self);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < count; ++j) (*gx)[i * n + start + j] += g.at(i, j);
    }
  });
}

Var gather_rows(Var x, std::span<const std::ptrdiff_t> index) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  require_matrix(v, "gather_rows");
  const std::size_t n = v.cols();
  const auto rows = static_cast<std::ptrdiff_t>(v.rows());
  Tensor out = Tensor::matrix(index.size(), n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const std::ptrdiff_t r = index[i];
    if (r < -1 || r >= rows) {
      throw DimensionError("gather_rows: index " + std::to_string(r) + " outside [0, " +
                           std::to_string(rows) + ")");
    }
    if (r >= 0) std::copy_n(v.values().begin() + r * n, n, out.values().begin() + i * n);
  }
  std::vector<std::ptrdiff_t> saved(index.begin(), index.end());
  const std::size_t ix = x.id();
  return t.record(std::move(out), {x}, [ix, n, saved = std::move(saved)](Tape& tp, std::size_t self) {
    Tensor* gx = tp.input_grad(ix);
    if (!gx) return;
    const Tensor& g = tp.out_grad(self);
    for (std::size_t i = 0; i < saved.size(); ++i) {
      if (saved[i] < 0) continue;
      const std::size_t r = static_cast<std::size_t>(saved[i]);
      for (std::size_t j = 0; j < n; ++j) (*gx)[r * n + j] += g[i * n + j];
    }
  });
}

Var embedding_lookup(Var table, std::span<const int> ids) {
  require_matrix(table.value(), "embedding_lookup");
  const auto vocab = static_cast<long long>(table.value().rows());
  std::vector<std::ptrdiff_t> index(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab) {
      throw VocabularyError("token id " + std::to_string(ids[i]) + " outside vocabulary of size " +
                            std::to_string(vocab));
    }
    index[i] = ids[i];
  }
  return gather_rows(table, index);
}

Var segment_sum(Var x, std::span<const std::ptrdiff_t> segment, std::size_t num_segments) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  require_matrix(v, "segment_sum");
  if (segment.size() != v.rows()) throw DimensionError("segment_sum: one segment id per row required");
  const std::size_t n = v.cols();
  Tensor out = Tensor::matrix(num_segments, n);
  for (std::size_t r = 0; r < segment.size(); ++r) {
    const std::ptrdiff_t s = segment[r];
    if (s < -1 || s >= static_cast<std::ptrdiff_t>(num_segments)) {
      throw DimensionError("segment_sum: segment id " + std::to_string(s) + " out of range");
    }
    if (s < 0) continue;
    for (std::size_t j = 0; j < n; ++j) out.at(static_cast<std::size_t>(s), j) += v.at(r, j);
  }
  std::vector<std::ptrdiff_t> saved(segment.begin(), segment.end());
  const std::size_t ix = x.id();
  return t.record(std::move(out), {x}, [ix, n, saved = std::move(saved)](Tape& tp, std::size_t self) {
    Tensor* gx = tp.input_grad(ix);
    if (!gx) return;
    const Tensor& g = tp.out_grad(self);
    for (std::size_t r = 0; r < saved.size(); ++r) {
      if (saved[r] < 0) continue;
      const std::size_t s = static_cast<std::size_t>(saved[r]);
      for (std::size_t j = 0; j < n; ++j) (*gx)[r * n + j] += g[s * n + j];
    }
  });
}

Var scale_rows(Var x, Var factor) {
  Tape& t = tape_of(x, factor);
  const Tensor& v = x.value();
  require_matrix(v, "scale_rows");
  const std::size_t m = v.rows(), n = v.cols();
  if (factor.value().numel() != m) {
    throw DimensionError("scale_rows: " + std::to_string(factor.value().numel()) +
                         " factors for " + std::to_string(m) + " rows");
  }
  const Tensor& f = factor.value();
  Tensor out = v;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) *= f[i];
  }
  const std::size_t ix = x.id(), iff = factor.id();
  return t.record(std::move(out), {x, factor}, [ix, iff, m, n](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (Tensor* gx = tp.input_grad(ix)) {
      const Tensor& f = tp.value(iff);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gx->at(i, j) += f[i] * g.at(i, j);
      }
    }
    if (Tensor* gf = tp.input_grad(iff)) {
      const Tensor& v = tp.value(ix);
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += g.at(i, j) * v.at(i, j);
        (*gf)[i] += acc;
      }
    }
  });
}

Var pick(Var x, std::span<const std::size_t> column) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  require_matrix(v, "pick");
  const std::size_t m = v.rows(), n = v.cols();
  if (column.size() != m) throw DimensionError("pick: one column index per row required");
  Tensor out = Tensor::matrix(m, 1);
  for (std::size_t i = 0; i < m; ++i) {
    if (column[i] >= n) throw DimensionError("pick: column index out of range");
    out[i] = v.at(i, column[i]);
  }
  std::vector<std::size_t> saved(column.begin(), column.end());
  const std::size_t ix = x.id();
  return t.record(std::move(out), {x}, [ix, n, saved = std::move(saved)](Tape& tp, std::size_t self) {
    Tensor* gx = tp.input_grad(ix);
    if (!gx) return;
    const Tensor& g = tp.out_grad(self);
    for (std::size_t i = 0; i < saved.size(); ++i) (*gx)[i * n + saved[i]] += g[i];
  });
}

Var reshape(Var x, Shape shape) {
  Tape& t = tape_of(x);
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t ix = x.id();
  return t.record(std::move(out), {x}, [ix](Tape& tp, std::size_t self) {
    Tensor* gx = tp.input_grad(ix);
    if (!gx) return;
    const Tensor& g = tp.out_grad(self);
    for (std::size_t i = 0; i < g.numel(); ++i) (*gx)[i] += g[i];
  });
}

Var transpose(Var x) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  require_matrix(v, "transpose");
  const std::size_t m = v.rows(), n = v.cols();
  Tensor out = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = v.at(i, j);
  }
  const std::size_t ix = x.id();
  return t.record(std::move(out), {x}, [ix, m, n](Tape& tp, std::size_t self) {
    Tensor* gx = tp.input_grad(ix);
    if (!gx) return;
    const Tensor& g = tp.out_grad(self);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) gx->at(i, j) += g.at(j, i);
    }
  });
}

// ---- verification ---------------------------------------------------------

namespace {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double h) {
  Tensor analytic;
  {
    Tape tape;
    Var xv = tape.leaf(x);
    Var loss = f(tape, xv);
    tape.backward(loss);
    analytic = tape.has_grad(xv) ? tape.grad(xv) : Tensor(x.shape(), 0.0);
  }
  auto eval_at = [&](const Tensor& point) {
    Tape tape;
    return f(tape, tape.constant(point)).value().item();
  };
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t k = 0; k < x.numel(); ++k) {
    probe[k] = x[k] + h;
    const double up = eval_at(probe);
    probe[k] = x[k] - h;
    const double down = eval_at(probe);
    probe[k] = x[k];
    worst = std::max(worst, relative_error(analytic[k], (up - down) / (2.0 * h)));
  }
  return worst;
}

double grad_check_parameters(const std::function<Var(Tape&)>& loss,
                             std::span<Parameter* const> params, double h) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var l = loss(tape);
    tape.backward(l);
  }
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);

  auto eval = [&] {
    Tape tape;
    return loss(tape).value().item();
  };
  double worst = 0.0;
  for (std::size_t q = 0; q < params.size(); ++q) {
    Parameter& p = *params[q];
    for (std::size_t k = 0; k < p.value.numel(); ++k) {
      const double orig = p.value[k];
      p.value[k] = orig + h;
      const double up = eval();
      p.value[k] = orig - h;
      const double down = eval();
      p.value[k] = orig;
      worst = std::max(worst, relative_error(analytic[q][k], (up - down) / (2.0 * h)));
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return worst;
}

}  // namespace swd
