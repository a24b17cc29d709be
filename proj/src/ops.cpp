#include "mtseq/ops.hpp"

#include <algorithm>
#include <cmath>

#include "mtseq/errors.hpp"

namespace mtseq::ops {
namespace {

void same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

void require_matrix(const char* op, Var a) {
  if (a.value().rank() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

void require_vector(const char* op, Var a) {
  if (a.value().rank() != 1)
    throw ShapeError(std::string(op) + ": expected a vector, got " + shape_str(a.shape()));
}

void require_finite(const char* op, std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite input");
}

template <class F>
Var unary(Var a, F&& f, std::function<void(std::span<double>, std::span<const double>,
                                            std::span<const double>, std::span<const double>)>
                            vjp) {
  const auto& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const auto in = a.id();
  return a.tape().record(std::move(out), {a}, [in, vjp](Tape& t, NodeId self) {
    if (!t.needs_grad(in)) return;
    vjp(t.grad(in), t.grad(self), t.value(in).values(), t.value(self).values());
  });
}

}  // namespace

Var add(Var a, Var b) {
  same_shape("add", a, b);
  Tensor out = a.value();
  out.clear_grad();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, NodeId self) {
    auto g = t.grad(self);
    for (auto in : {ia, ib}) {
      if (!t.needs_grad(in)) continue;
      auto gi = t.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  same_shape("sub", a, b);
  Tensor out = a.value();
  out.clear_grad();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, NodeId self) {
    auto g = t.grad(self);
    if (t.needs_grad(ia)) {
      auto ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      auto gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  same_shape("mul", a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, NodeId self) {
    auto g = t.grad(self);
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    if (t.needs_grad(ia)) {
      auto ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.needs_grad(ib)) {
      auto gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double k) {
  return unary(
      a, [k](double x) { return k * x; },
      [k](std::span<double> gi, std::span<const double> g, std::span<const double>,
          std::span<const double>) {
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += k * g[i];
      });
}

Var add_row_broadcast(Var m, Var v) {
  require_matrix("add_row_broadcast", m);
  require_vector("add_row_broadcast", v);
  const auto& mv = m.value();
  const auto& vv = v.value();
  if (mv.cols() != vv.size())
    throw ShapeError("add_row_broadcast: matrix " + shape_str(mv.shape()) +
                     " vs row vector " + shape_str(vv.shape()));
  Tensor out(mv.shape());
  const auto cols = mv.cols();
  for (std::size_t r = 0; r < mv.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = mv[r * cols + c] + vv[c];
  const auto im = m.id(), iv = v.id();
  return m.tape().record(std::move(out), {m, v}, [im, iv, cols](Tape& t, NodeId self) {
    auto g = t.grad(self);
    if (t.needs_grad(im)) {
      auto gm = t.grad(im);
      for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
    }
    if (t.needs_grad(iv)) {
      auto gv = t.grad(iv);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i % cols] += g[i];
    }
  });
}

Var matmul(Var a, Var b) {
  require_matrix("matmul", a);
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols();
  if (bv.rows() != k)
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(av.shape()) + " x " +
                     shape_str(bv.shape()));
  const bool vec = bv.rank() == 1;
  const std::size_t n = vec ? 1 : bv.cols();
  Tensor out(vec ? Shape{m} : Shape{m, n});
  const double* A = av.values().data();
  const double* B = bv.values().data();
  double* C = out.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B + p * n;
      double* crow = C + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, m, k, n](Tape& t, NodeId self) {
    const double* G = t.grad(self).data();
    const double* A = t.value(ia).values().data();
    const double* B = t.value(ib).values().data();
    if (t.needs_grad(ia)) {
      // dA = dC * B^T
      double* GA = t.grad(ia).data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[p * n + j];
          GA[i * k + p] += s;
        }
    }
    if (t.needs_grad(ib)) {
      // dB = A^T * dC
      double* GB = t.grad(ib).data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          for (std::size_t j = 0; j < n; ++j) GB[p * n + j] += aip * G[i * n + j];
        }
    }
  });
}

Var transpose(Var a) {
  require_matrix("transpose", a);
  Tensor out = a.value().transposed();
  const auto ia = a.id();
  const std::size_t rows = a.value().rows(), cols = a.value().cols();
  return a.tape().record(std::move(out), {a}, [ia, rows, cols](Tape& t, NodeId self) {
    if (!t.needs_grad(ia)) return;
    auto g = t.grad(self);
    auto ga = t.grad(ia);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[c * rows + r];
  });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](std::span<double> gi, std::span<const double> g, std::span<const double>,
         std::span<const double> y) {
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * (1.0 - y[i] * y[i]);
      });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](std::span<double> gi, std::span<const double> g, std::span<const double>,
         std::span<const double> y) {
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * y[i] * (1.0 - y[i]);
      });
}

Var log(Var a) {
  for (double x : a.value().values())
    if (!(x > 0.0)) throw NumericError("log: non-positive input");
  return unary(
      a, [](double x) { return std::log(x); },
      [](std::span<double> gi, std::span<const double> g, std::span<const double> x,
         std::span<const double>) {
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] / x[i];
      });
}

Var concat(const std::vector<Var>& parts, Axis axis) {
  if (parts.empty()) throw ContractError("concat: no operands");
  const bool vectors = parts.front().value().rank() == 1;
  Tape& tape = parts.front().tape();
  if (vectors) {
    if (axis != Axis::rows) throw ShapeError("concat: vectors only concatenate along rows");
    std::vector<double> out;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
      require_vector("concat", p);
      offsets.push_back(out.size());
      const auto v = p.value().values();
      out.insert(out.end(), v.begin(), v.end());
    }
    std::vector<NodeId> ids;
    for (const auto& p : parts) ids.push_back(p.id());
    return tape.record(Tensor::vector(std::move(out)), parts,
                       [ids, offsets](Tape& t, NodeId self) {
                         auto g = t.grad(self);
                         for (std::size_t k = 0; k < ids.size(); ++k) {
                           if (!t.needs_grad(ids[k])) continue;
                           auto gi = t.grad(ids[k]);
                           for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[offsets[k] + i];
                         }
                       });
  }
  for (const auto& p : parts) require_matrix("concat", p);
  const auto& first = parts.front().value();
  std::size_t rows = 0, cols = 0;
  if (axis == Axis::rows) {
    cols = first.cols();
    for (const auto& p : parts) {
      if (p.value().cols() != cols)
        throw ShapeError("concat(rows): column mismatch " + shape_str(first.shape()) + " vs " +
                         shape_str(p.shape()));
      rows += p.value().rows();
    }
  } else {
    rows = first.rows();
    for (const auto& p : parts) {
      if (p.value().rows() != rows)
        throw ShapeError("concat(cols): row mismatch " + shape_str(first.shape()) + " vs " +
                         shape_str(p.shape()));
      cols += p.value().cols();
    }
  }
  Tensor out({rows, cols});
  // offsets: starting row (rows axis) or column (cols axis) of each part
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    offsets.push_back(off);
    for (std::size_t r = 0; r < v.rows(); ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) {
        if (axis == Axis::rows)
          out.at(off + r, c) = v.at(r, c);
        else
          out.at(r, off + c) = v.at(r, c);
      }
    off += axis == Axis::rows ? v.rows() : v.cols();
  }
  std::vector<NodeId> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return tape.record(std::move(out), parts, [ids, offsets, axis, cols](Tape& t, NodeId self) {
    auto g = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.needs_grad(ids[k])) continue;
      const auto& v = t.value(ids[k]);
      auto gi = t.grad(ids[k]);
      for (std::size_t r = 0; r < v.rows(); ++r)
        for (std::size_t c = 0; c < v.cols(); ++c) {
          const std::size_t src =
              axis == Axis::rows ? (offsets[k] + r) * cols + c : r * cols + offsets[k] + c;
          gi[r * v.cols() + c] += g[src];
        }
    }
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  const std::size_t d = rows.front().value().size();
  std::vector<double> out;
  out.reserve(d * rows.size());
  for (const auto& r : rows) {
    require_vector("stack_rows", r);
    if (r.value().size() != d)
      throw ShapeError("stack_rows: row length " + std::to_string(r.value().size()) +
                       " differs from " + std::to_string(d));
    const auto v = r.value().values();
    out.insert(out.end(), v.begin(), v.end());
  }
  std::vector<NodeId> ids;
  for (const auto& r : rows) ids.push_back(r.id());
  return rows.front().tape().record(Tensor::matrix(rows.size(), d, std::move(out)), rows,
                                    [ids, d](Tape& t, NodeId self) {
                                      auto g = t.grad(self);
                                      for (std::size_t k = 0; k < ids.size(); ++k) {
                                        if (!t.needs_grad(ids[k])) continue;
                                        auto gi = t.grad(ids[k]);
                                        for (std::size_t i = 0; i < d; ++i) gi[i] += g[k * d + i];
                                      }
                                    });
}

Var pick_row(Var m, std::size_t index) {
  require_matrix("pick_row", m);
  const auto& mv = m.value();
  if (index >= mv.rows())
    throw ContractError("pick_row: index " + std::to_string(index) + " out of range for " +
                        shape_str(mv.shape()));
  const std::size_t d = mv.cols();
  std::vector<double> row(mv.values().begin() + index * d, mv.values().begin() + (index + 1) * d);
  const auto im = m.id();
  return m.tape().record(Tensor::vector(std::move(row)), {m}, [im, index, d](Tape& t, NodeId self) {
    if (!t.needs_grad(im)) return;
    auto g = t.grad(self);
    auto gm = t.grad(im);
    for (std::size_t i = 0; i < d; ++i) gm[index * d + i] += g[i];
  });
}

Var slice(Var v, std::size_t offset, std::size_t length) {
  require_vector("slice", v);
  const auto& vv = v.value();
  if (length == 0 || offset + length > vv.size())
    throw ShapeError("slice: [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                     ") outside " + shape_str(vv.shape()));
  std::vector<double> out(vv.values().begin() + offset, vv.values().begin() + offset + length);
  const auto iv = v.id();
  return v.tape().record(Tensor::vector(std::move(out)), {v},
                         [iv, offset, length](Tape& t, NodeId self) {
                           if (!t.needs_grad(iv)) return;
                           auto g = t.grad(self);
                           auto gv = t.grad(iv);
                           for (std::size_t i = 0; i < length; ++i) gv[offset + i] += g[i];
                         });
}

Var dropout(Var a, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must lie in [0, 1)");
  if (rate == 0.0) return a;
  const double keep = 1.0 - rate;
  std::bernoulli_distribution survive(keep);
  const auto& av = a.value();
  std::vector<double> mask(av.size());
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    mask[i] = survive(rng) ? 1.0 / keep : 0.0;
    out[i] = av[i] * mask[i];
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, mask = std::move(mask)](Tape& t, NodeId self) {
    if (!t.needs_grad(ia)) return;
    auto g = t.grad(self);
    auto ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

Var softmax_temperature(Var z, double temperature) {
  require_vector("softmax_temperature", z);
  if (!(temperature > 0.0)) throw ContractError("softmax_temperature: T must be positive");
  const auto zv = z.value().values();
  require_finite("softmax_temperature", zv);
  const double mx = *std::max_element(zv.begin(), zv.end());
  Tensor out(z.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < zv.size(); ++i) {
    out[i] = std::exp((zv[i] - mx) / temperature);
    total += out[i];
  }
  for (std::size_t i = 0; i < zv.size(); ++i) out[i] /= total;
  const auto iz = z.id();
  return z.tape().record(std::move(out), {z}, [iz, temperature](Tape& t, NodeId self) {
    if (!t.needs_grad(iz)) return;
    auto g = t.grad(self);
    const auto y = t.value(self).values();
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
    auto gz = t.grad(iz);
    for (std::size_t i = 0; i < g.size(); ++i) gz[i] += y[i] * (g[i] - dot) / temperature;
  });
}

Var log_softmax(Var z) {
  require_vector("log_softmax", z);
  const auto zv = z.value().values();
  require_finite("log_softmax", zv);
  const double mx = *std::max_element(zv.begin(), zv.end());
  double total = 0.0;
  for (double x : zv) total += std::exp(x - mx);
  const double lse = mx + std::log(total);
  Tensor out(z.shape());
  for (std::size_t i = 0; i < zv.size(); ++i) out[i] = zv[i] - lse;
  const auto iz = z.id();
  return z.tape().record(std::move(out), {z}, [iz](Tape& t, NodeId self) {
    if (!t.needs_grad(iz)) return;
    auto g = t.grad(self);
    const auto y = t.value(self).values();
    double gsum = 0.0;
    for (double x : g) gsum += x;
    auto gz = t.grad(iz);
    for (std::size_t i = 0; i < g.size(); ++i) gz[i] += g[i] - std::exp(y[i]) * gsum;
  });
}

Var pick(Var v, std::size_t index) {
  const auto& vv = v.value();
  if (index >= vv.size())
    throw ContractError("pick: index " + std::to_string(index) + " out of range for " +
                        shape_str(vv.shape()));
  const auto iv = v.id();
  return v.tape().record(Tensor::scalar(vv[index]), {v}, [iv, index](Tape& t, NodeId self) {
    if (!t.needs_grad(iv)) return;
    t.grad(iv)[index] += t.grad(self)[0];
  });
}

Var nll_pick(Var log_probs, std::size_t index) { return scale(pick(log_probs, index), -1.0); }

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().values()) s += x;
  const auto ia = a.id();
  return a.tape().record(Tensor::scalar(s), {a}, [ia](Tape& t, NodeId self) {
    if (!t.needs_grad(ia)) return;
    const double g = t.grad(self)[0];
    for (auto& x : t.grad(ia)) x += g;
  });
}

Var sum_scalars(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw ContractError("sum_scalars: empty list");
  double s = 0.0;
  std::vector<NodeId> ids;
  for (const auto& v : scalars) {
    if (v.value().size() != 1)
      throw ShapeError("sum_scalars: operand of shape " + shape_str(v.shape()));
    s += v.value()[0];
    ids.push_back(v.id());
  }
  return scalars.front().tape().record(Tensor::scalar(s), scalars, [ids](Tape& t, NodeId self) {
    const double g = t.grad(self)[0];
    for (auto id : ids)
      if (t.needs_grad(id)) t.grad(id)[0] += g;
  });
}

Var frobenius_norm_sq(Var a) {
  require_matrix("frobenius_norm_sq", a);
  double s = 0.0;
  for (double x : a.value().values()) s += x * x;
  const auto ia = a.id();
  return a.tape().record(Tensor::scalar(s), {a}, [ia](Tape& t, NodeId self) {
    if (!t.needs_grad(ia)) return;
    const double g = t.grad(self)[0];
    const auto av = t.value(ia).values();
    auto ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * g * av[i];
  });
}

}  // namespace mtseq::ops
