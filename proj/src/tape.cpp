#include "navgen/tape.hpp"

#include <cmath>

namespace navgen {

namespace {

void require(bool cond, const char* op, const std::string& what) {
  if (!cond) throw data_error(std::string(op) + ": " + what);
}

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

void softmax_span(const double* in, double* out, size_t n) {
  double mx = in[0];
  for (size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    out[i] = std::exp(in[i] - mx);
    sum += out[i];
  }
  for (size_t i = 0; i < n; ++i) out[i] /= sum;
}

// dL/dx_i = p_i * (g_i - sum_j g_j p_j)
void softmax_backward_span(const double* p, const double* g, double* dx, size_t n) {
  double gp = 0.0;
  for (size_t i = 0; i < n; ++i) gp += g[i] * p[i];
  for (size_t i = 0; i < n; ++i) dx[i] += p[i] * (g[i] - gp);
}

}  // namespace

Val Tape::make(Array value, bool tracked, std::function<void(Tape&)> back, const char* op) {
  for (double v : value.data) {
    if (!std::isfinite(v)) throw data_error(std::string("non-finite value produced by op ") + op);
  }
  Node n;
  n.value = std::move(value);
  n.tracked = tracked && grad_enabled_;
  if (n.tracked) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Val{static_cast<int32_t>(nodes_.size() - 1)};
}

Array& Tape::gref(int32_t id) {
  Node& n = nodes_[id];
  if (n.grad.data.empty()) n.grad = Array::zeros(n.value.shape);
  return n.grad;
}

bool Tape::any_tracked(std::initializer_list<Val> vs) const {
  for (Val v : vs)
    if (nodes_[v.id].tracked) return true;
  return false;
}

void Tape::backward(Val loss) {
  require(val(loss).is_scalar(), "backward", "loss must be a scalar");
  for (Node& n : nodes_) n.grad = Array();
  gref(loss.id).data[0] = 1.0;
  for (int32_t i = static_cast<int32_t>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.tracked && n.back && !n.grad.data.empty()) n.back(*this);
  }
  // Tracked leaves never touched by the sweep report zero gradients.
  for (Node& n : nodes_) {
    if (n.tracked && n.grad.data.empty()) n.grad = Array::zeros(n.value.shape);
  }
}

Val Tape::input(Array value, bool track_grad) {
  return make(std::move(value), track_grad, nullptr, "input");
}

// ---------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------

Val Tape::add(Val a, Val b) {
  const Array& A = val(a);
  const Array& B = val(b);
  require(A.same_shape(B), "add", "shape mismatch " + A.shape_str() + " vs " + B.shape_str());
  Array out = A;
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] += B.data[i];
  Val r{};
  r = make(std::move(out), any_tracked({a, b}), nullptr, "add");
  if (tracked(r)) {
    nodes_[r.id].back = [r, a, b](Tape& t) {
      const Array& g = t.grad(r);
      if (t.tracked(a)) {
        Array& da = t.gref(a.id);
        for (size_t i = 0; i < g.numel(); ++i) da.data[i] += g.data[i];
      }
      if (t.tracked(b)) {
        Array& db = t.gref(b.id);
        for (size_t i = 0; i < g.numel(); ++i) db.data[i] += g.data[i];
      }
    };
  }
  return r;
}

Val Tape::sub(Val a, Val b) {
  const Array& A = val(a);
  const Array& B = val(b);
  require(A.same_shape(B), "sub", "shape mismatch " + A.shape_str() + " vs " + B.shape_str());
  Array out = A;
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] -= B.data[i];
  Val r = make(std::move(out), any_tracked({a, b}), nullptr, "sub");
  if (tracked(r)) {
    nodes_[r.id].back = [r, a, b](Tape& t) {
      const Array& g = t.grad(r);
      if (t.tracked(a)) {
        Array& da = t.gref(a.id);
        for (size_t i = 0; i < g.numel(); ++i) da.data[i] += g.data[i];
      }
      if (t.tracked(b)) {
        Array& db = t.gref(b.id);
        for (size_t i = 0; i < g.numel(); ++i) db.data[i] -= g.data[i];
      }
    };
  }
  return r;
}

Val Tape::mul(Val a, Val b) {
  const Array& A = val(a);
  const Array& B = val(b);
  require(A.same_shape(B), "mul", "shape mismatch " + A.shape_str() + " vs " + B.shape_str());
  Array out = A;
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] *= B.data[i];
  Val r = make(std::move(out), any_tracked({a, b}), nullptr, "mul");
  if (tracked(r)) {
    nodes_[r.id].back = [r, a, b](Tape& t) {
      const Array& g = t.grad(r);
      const Array& A2 = t.val(a);
      const Array& B2 = t.val(b);
      if (t.tracked(a)) {
        Array& da = t.gref(a.id);
        for (size_t i = 0; i < g.numel(); ++i) da.data[i] += g.data[i] * B2.data[i];
      }
      if (t.tracked(b)) {
        Array& db = t.gref(b.id);
        for (size_t i = 0; i < g.numel(); ++i) db.data[i] += g.data[i] * A2.data[i];
      }
    };
  }
  return r;
}

Val Tape::smul(Val a, double c) {
  Array out = val(a);
  for (double& v : out.data) v *= c;
  Val r = make(std::move(out), any_tracked({a}), nullptr, "smul");
  if (tracked(r)) {
    nodes_[r.id].back = [r, a, c](Tape& t) {
      const Array& g = t.grad(r);
      Array& da = t.gref(a.id);
      for (size_t i = 0; i < g.numel(); ++i) da.data[i] += c * g.data[i];
    };
  }
  return r;
}

Val Tape::scale(Val s, Val x) {
  const Array& S = val(s);
  require(S.is_scalar(), "scale", "first operand must be scalar");
  const double c = S.data[0];
  Array out = val(x);
  for (double& v : out.data) v *= c;
  Val r = make(std::move(out), any_tracked({s, x}), nullptr, "scale");
  if (tracked(r)) {
    nodes_[r.id].back = [r, s, x](Tape& t) {
      const Array& g = t.grad(r);
      const Array& X = t.val(x);
      const double c2 = t.val(s).data[0];
      if (t.tracked(s)) {
        double acc = 0.0;
        for (size_t i = 0; i < g.numel(); ++i) acc += g.data[i] * X.data[i];
        t.gref(s.id).data[0] += acc;
      }
      if (t.tracked(x)) {
        Array& dx = t.gref(x.id);
        for (size_t i = 0; i < g.numel(); ++i) dx.data[i] += c2 * g.data[i];
      }
    };
  }
  return r;
}

#define NAVGEN_UNARY(method, name, FWD, DERIV)                                   \
  Val Tape::method(Val a) {                                                     \
    Array out = val(a);                                                         \
    for (double& x : out.data) x = (FWD);                                       \
    Val r = make(std::move(out), any_tracked({a}), nullptr, name);              \
    if (tracked(r)) {                                                           \
      nodes_[r.id].back = [r, a](Tape& t) {                                     \
        const Array& g = t.grad(r);                                             \
        const Array& X = t.val(a);                                              \
        const Array& Y = t.val(r);                                              \
        (void)X;                                                                \
        (void)Y;                                                                \
        Array& da = t.gref(a.id);                                               \
        for (size_t i = 0; i < g.numel(); ++i) {                                \
          const double x = X.data[i];                                           \
          const double y = Y.data[i];                                           \
          (void)x;                                                              \
          (void)y;                                                              \
          da.data[i] += g.data[i] * (DERIV);                                    \
        }                                                                       \
      };                                                                        \
    }                                                                           \
    return r;                                                                   \
  }

NAVGEN_UNARY(sigmoid, "sigmoid", 1.0 / (1.0 + std::exp(-x)), y*(1.0 - y))
NAVGEN_UNARY(tanh_, "tanh", std::tanh(x), 1.0 - y * y)
NAVGEN_UNARY(softplus, "softplus", stable_softplus(x), 1.0 / (1.0 + std::exp(-x)))
NAVGEN_UNARY(log_, "log", std::log(x), 1.0 / x)
NAVGEN_UNARY(abs_, "abs", std::fabs(x), (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0)))
NAVGEN_UNARY(sin_, "sin", std::sin(x), std::cos(x))
NAVGEN_UNARY(cos_, "cos", std::cos(x), -std::sin(x))

#undef NAVGEN_UNARY

Val Tape::leaky_relu(Val a, double slope) {
  Array out = val(a);
  for (double& x : out.data) x = x > 0.0 ? x : slope * x;
  Val r = make(std::move(out), any_tracked({a}), nullptr, "leaky_relu");
  if (tracked(r)) {
    nodes_[r.id].back = [r, a, slope](Tape& t) {
      const Array& g = t.grad(r);
      const Array& X = t.val(a);
      Array& da = t.gref(a.id);
      for (size_t i = 0; i < g.numel(); ++i)
        da.data[i] += g.data[i] * (X.data[i] > 0.0 ? 1.0 : slope);
    };
  }
  return r;
}

// ---------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------

Val Tape::matmul(Val a, Val b) {
  const Array& A = val(a);
  const Array& B = val(b);
  require(A.is_matrix() && B.is_matrix(), "matmul", "operands must be matrices");
  require(A.cols() == B.rows(), "matmul",
          "inner dims differ: " + A.shape_str() + " vs " + B.shape_str());
  const size_t m = A.rows(), k = A.cols(), n = B.cols();
  Array out = Array::mat(m, n);
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < k; ++p) {
      const double av = A.at(i, p);
      if (av == 0.0) continue;
      const double* brow = &B.data[p * n];
      double* orow = &out.data[i * n];
      for (size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  Val r = make(std::move(out), any_tracked({a, b}), nullptr, "matmul");
  if (tracked(r)) {
    nodes_[r.id].back = [r, a, b, m, k, n](Tape& t) {
      const Array& g = t.grad(r);
      const Array& A2 = t.val(a);
      const Array& B2 = t.val(b);
      if (t.tracked(a)) {  // dA = g * B^T
        Array& da = t.gref(a.id);
        for (size_t i = 0; i < m; ++i)
          for (size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (size_t j = 0; j < n; ++j) acc += g.at(i, j) * B2.at(p, j);
            da.at(i, p) += acc;
          }
      }
      if (t.tracked(b)) {  // dB = A^T * g
        Array& db = t.gref(b.id);
        for (size_t p = 0; p < k; ++p)
          for (size_t i = 0; i < m; ++i) {
            const double av = A2.at(i, p);
            if (av == 0.0) continue;
            for (size_t j = 0; j < n; ++j) db.at(p, j) += av * g.at(i, j);
          }
      }
    };
  }
  return r;
}

Val Tape::matvec(Val m, Val v) {
  const Array& M = val(m);
  const Array& V = val(v);
  require(M.is_matrix() && V.is_vector(), "matvec", "need matrix and vector");
  require(M.cols() == V.numel(), "matvec",
          "dims differ: " + M.shape_str() + " vs " + V.shape_str());
  const size_t r_ = M.rows(), c = M.cols();
  Array out = Array::zeros({r_});
  for (size_t i = 0; i < r_; ++i) {
    double acc = 0.0;
    const double* row = &M.data[i * c];
    for (size_t j = 0; j < c; ++j) acc += row[j] * V.data[j];
    out.data[i] = acc;
  }
  Val r = make(std::move(out), any_tracked({m, v}), nullptr, "matvec");
  if (tracked(r)) {
    nodes_[r.id].back = [r, m, v, r_, c](Tape& t) {
      const Array& g = t.grad(r);
      const Array& M2 = t.val(m);
      const Array& V2 = t.val(v);
      if (t.tracked(m)) {
        Array& dm = t.gref(m.id);
        for (size_t i = 0; i < r_; ++i)
          for (size_t j = 0; j < c; ++j) dm.at(i, j) += g.data[i] * V2.data[j];
      }
      if (t.tracked(v)) {
        Array& dv = t.gref(v.id);
        for (size_t i = 0; i < r_; ++i)
          for (size_t j = 0; j < c; ++j) dv.data[j] += g.data[i] * M2.at(i, j);
      }
    };
  }
  return r;
}

Val Tape::vecmat(Val v, Val m) {
  const Array& V = val(v);
  const Array& M = val(m);
  require(V.is_vector() && M.is_matrix(), "vecmat", "need vector and matrix");
  require(V.numel() == M.rows(), "vecmat",
          "dims differ: " + V.shape_str() + " vs " + M.shape_str());
  const size_t k = M.rows(), n = M.cols();
  Array out = Array::zeros({n});
  for (size_t i = 0; i < k; ++i) {
    const double vi = V.data[i];
    if (vi == 0.0) continue;
    const double* row = &M.data[i * n];
    for (size_t j = 0; j < n; ++j) out.data[j] += vi * row[j];
  }
  Val r = make(std::move(out), any_tracked({v, m}), nullptr, "vecmat");
  if (tracked(r)) {
    nodes_[r.id].back = [r, v, m, k, n](Tape& t) {
      const Array& g = t.grad(r);
      const Array& V2 = t.val(v);
      const Array& M2 = t.val(m);
      if (t.tracked(v)) {
        Array& dv = t.gref(v.id);
        for (size_t i = 0; i < k; ++i) {
          double acc = 0.0;
          for (size_t j = 0; j < n; ++j) acc += M2.at(i, j) * g.data[j];
          dv.data[i] += acc;
        }
      }
      if (t.tracked(m)) {
        Array& dm = t.gref(m.id);
        for (size_t i = 0; i < k; ++i) {
          const double vi = V2.data[i];
          if (vi == 0.0 && !t.tracked(v)) continue;
          for (size_t j = 0; j < n; ++j) dm.at(i, j) += vi * g.data[j];
        }
      }
    };
  }
  return r;
}

Val Tape::dot(Val u, Val v) {
  const Array& U = val(u);
  const Array& V = val(v);
  require(U.is_vector() && V.is_vector() && U.numel() == V.numel(), "dot",
          "need equal-length vectors");
  double acc = 0.0;
  for (size_t i = 0; i < U.numel(); ++i) acc += U.data[i] * V.data[i];
  Val r = make(Array::scalar(acc), any_tracked({u, v}), nullptr, "dot");
  if (tracked(r)) {
    nodes_[r.id].back = [r, u, v](Tape& t) {
      const double g = t.grad(r).data[0];
      const Array& U2 = t.val(u);
      const Array& V2 = t.val(v);
      if (t.tracked(u)) {
        Array& du = t.gref(u.id);
        for (size_t i = 0; i < U2.numel(); ++i) du.data[i] += g * V2.data[i];
      }
      if (t.tracked(v)) {
        Array& dv = t.gref(v.id);
        for (size_t i = 0; i < V2.numel(); ++i) dv.data[i] += g * U2.data[i];
      }
    };
  }
  return r;
}

Val Tape::transpose(Val a) {
  const Array& A = val(a);
  require(A.is_matrix(), "transpose", "operand must be a matrix");
  const size_t m = A.rows(), n = A.cols();
  Array out = Array::mat(n, m);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out.at(j, i) = A.at(i, j);
  Val r = make(std::move(out), any_tracked({a}), nullptr, "transpose");
  if (tracked(r)) {
    nodes_[r.id].back = [r, a, m, n](Tape& t) {
      const Array& g = t.grad(r);
      Array& da = t.gref(a.id);
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) da.at(i, j) += g.at(j, i);
    };
  }
  return r;
}

Val Tape::outer(Val u, Val v) {
  const Array& U = val(u);
  const Array& V = val(v);
  require(U.is_vector() && V.is_vector(), "outer", "operands must be vectors");
  const size_t m = U.numel(), n = V.numel();
  Array out = Array::mat(m, n);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out.at(i, j) = U.data[i] * V.data[j];
  Val r = make(std::move(out), any_tracked({u, v}), nullptr, "outer");
  if (tracked(r)) {
    nodes_[r.id].back = [r, u, v, m, n](Tape& t) {
      const Array& g = t.grad(r);
      const Array& U2 = t.val(u);
      const Array& V2 = t.val(v);
      if (t.tracked(u)) {
        Array& du = t.gref(u.id);
        for (size_t i = 0; i < m; ++i) {
          double acc = 0.0;
          for (size_t j = 0; j < n; ++j) acc += g.at(i, j) * V2.data[j];
          du.data[i] += acc;
        }
      }
      if (t.tracked(v)) {
        Array& dv = t.gref(v.id);
        for (size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (size_t i = 0; i < m; ++i) acc += g.at(i, j) * U2.data[i];
          dv.data[j] += acc;
        }
      }
    };
  }
  return r;
}

// ---------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------

Val Tape::concat(const std::vector<Val>& parts) {
  require(!parts.empty(), "concat", "no parts");
  size_t total = 0;
  bool track = false;
  for (Val p : parts) {
    require(val(p).is_vector(), "concat", "parts must be vectors");
    total += val(p).numel();
    track = track || tracked(p);
  }
  Array out = Array::zeros({total});
  size_t off = 0;
  for (Val p : parts) {
    const Array& P = val(p);
    std::copy(P.data.begin(), P.data.end(), out.data.begin() + off);
    off += P.numel();
  }
  Val r = make(std::move(out), track, nullptr, "concat");
  if (tracked(r)) {
    std::vector<Val> ps = parts;
    nodes_[r.id].back = [r, ps](Tape& t) {
      const Array& g = t.grad(r);
      size_t off2 = 0;
      for (Val p : ps) {
        const size_t n = t.val(p).numel();
        if (t.tracked(p)) {
          Array& dp = t.gref(p.id);
          for (size_t i = 0; i < n; ++i) dp.data[i] += g.data[off2 + i];
        }
        off2 += n;
      }
    };
  }
  return r;
}

Val Tape::concat_cols(const std::vector<Val>& parts) {
  require(!parts.empty(), "concat_cols", "no parts");
  const size_t m = val(parts[0]).rows();
  size_t total = 0;
  bool track = false;
  for (Val p : parts) {
    require(val(p).is_matrix() && val(p).rows() == m, "concat_cols", "row counts differ");
    total += val(p).cols();
    track = track || tracked(p);
  }
  Array out = Array::mat(m, total);
  size_t off = 0;
  for (Val p : parts) {
    const Array& P = val(p);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < P.cols(); ++j) out.at(i, off + j) = P.at(i, j);
    off += P.cols();
  }
  Val r = make(std::move(out), track, nullptr, "concat_cols");
  if (tracked(r)) {
    std::vector<Val> ps = parts;
    nodes_[r.id].back = [r, ps, m](Tape& t) {
      const Array& g = t.grad(r);
      size_t off2 = 0;
      for (Val p : ps) {
        const size_t c = t.val(p).cols();
        if (t.tracked(p)) {
          Array& dp = t.gref(p.id);
          for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < c; ++j) dp.at(i, j) += g.at(i, off2 + j);
        }
        off2 += c;
      }
    };
  }
  return r;
}

Val Tape::stack_rows(const std::vector<Val>& parts) {
  require(!parts.empty(), "stack_rows", "no parts");
  const size_t c = val(parts[0]).numel();
  bool track = false;
  for (Val p : parts) {
    require(val(p).is_vector() && val(p).numel() == c, "stack_rows", "rows must match");
    track = track || tracked(p);
  }
  Array out = Array::mat(parts.size(), c);
  for (size_t i = 0; i < parts.size(); ++i) {
    const Array& P = val(parts[i]);
    std::copy(P.data.begin(), P.data.end(), out.data.begin() + i * c);
  }
  Val r = make(std::move(out), track, nullptr, "stack_rows");
  if (tracked(r)) {
    std::vector<Val> ps = parts;
    nodes_[r.id].back = [r, ps, c](Tape& t) {
      const Array& g = t.grad(r);
      for (size_t i = 0; i < ps.size(); ++i) {
        if (!t.tracked(ps[i])) continue;
        Array& dp = t.gref(ps[i].id);
        for (size_t j = 0; j < c; ++j) dp.data[j] += g.at(i, j);
      }
    };
  }
  return r;
}

Val Tape::cols(Val m, size_t offset, size_t len) {
  const Array& M = val(m);
  require(M.is_matrix(), "cols", "operand must be a matrix");
  require(offset + len <= M.cols(), "cols", "range out of bounds");
  Array out = Array::mat(M.rows(), len);
  for (size_t i = 0; i < M.rows(); ++i)
    for (size_t j = 0; j < len; ++j) out.at(i, j) = M.at(i, offset + j);
  Val r = make(std::move(out), any_tracked({m}), nullptr, "cols");
  if (tracked(r)) {
    nodes_[r.id].back = [r, m, offset, len](Tape& t) {
      const Array& g = t.grad(r);
      Array& dm = t.gref(m.id);
      for (size_t i = 0; i < g.rows(); ++i)
        for (size_t j = 0; j < len; ++j) dm.at(i, offset + j) += g.at(i, j);
    };
  }
  return r;
}

Val Tape::slice(Val v, size_t offset, size_t len) {
  const Array& V = val(v);
  require(V.is_vector(), "slice", "operand must be a vector");
  require(offset + len <= V.numel(), "slice", "range out of bounds");
  Array out = Array::zeros({len});
  std::copy(V.data.begin() + offset, V.data.begin() + offset + len, out.data.begin());
  Val r = make(std::move(out), any_tracked({v}), nullptr, "slice");
  if (tracked(r)) {
    nodes_[r.id].back = [r, v, offset, len](Tape& t) {
      const Array& g = t.grad(r);
      Array& dv = t.gref(v.id);
      for (size_t i = 0; i < len; ++i) dv.data[offset + i] += g.data[i];
    };
  }
  return r;
}

std::vector<Val> Tape::split(Val v, const std::vector<size_t>& sizes) {
  std::vector<Val> out;
  size_t off = 0;
  for (size_t s : sizes) {
    out.push_back(slice(v, off, s));
    off += s;
  }
  require(off == val(v).numel(), "split", "sizes do not cover the vector");
  return out;
}

Val Tape::row(Val m, size_t i) {
  const Array& M = val(m);
  require(M.is_matrix() && i < M.rows(), "row", "bad row index");
  const size_t c = M.cols();
  Array out = Array::zeros({c});
  std::copy(M.data.begin() + i * c, M.data.begin() + (i + 1) * c, out.data.begin());
  Val r = make(std::move(out), any_tracked({m}), nullptr, "row");
  if (tracked(r)) {
    nodes_[r.id].back = [r, m, i, c](Tape& t) {
      const Array& g = t.grad(r);
      Array& dm = t.gref(m.id);
      for (size_t j = 0; j < c; ++j) dm.at(i, j) += g.data[j];
    };
  }
  return r;
}

Val Tape::rows(Val m, std::vector<int32_t> indices) {
  const Array& M = val(m);
  require(M.is_matrix(), "rows", "operand must be a matrix");
  const size_t c = M.cols();
  Array out = Array::mat(indices.size(), c);
  for (size_t e = 0; e < indices.size(); ++e) {
    const int32_t i = indices[e];
    require(i >= 0 && static_cast<size_t>(i) < M.rows(), "rows", "index out of range");
    std::copy(M.data.begin() + i * c, M.data.begin() + (i + 1) * c, out.data.begin() + e * c);
  }
  Val r = make(std::move(out), any_tracked({m}), nullptr, "rows");
  if (tracked(r)) {
    nodes_[r.id].back = [r, m, idx = std::move(indices), c](Tape& t) {
      const Array& g = t.grad(r);
      Array& dm = t.gref(m.id);
      for (size_t e = 0; e < idx.size(); ++e)
        for (size_t j = 0; j < c; ++j) dm.at(idx[e], j) += g.at(e, j);
    };
  }
  return r;
}

Val Tape::add_rowvec(Val m, Val v) {
  const Array& M = val(m);
  const Array& V = val(v);
  require(M.is_matrix() && V.is_vector() && M.cols() == V.numel(), "add_rowvec",
          "shape mismatch");
  Array out = M;
  for (size_t i = 0; i < M.rows(); ++i)
    for (size_t j = 0; j < M.cols(); ++j) out.at(i, j) += V.data[j];
  Val r = make(std::move(out), any_tracked({m, v}), nullptr, "add_rowvec");
  if (tracked(r)) {
    nodes_[r.id].back = [r, m, v](Tape& t) {
      const Array& g = t.grad(r);
      if (t.tracked(m)) {
        Array& dm = t.gref(m.id);
        for (size_t i = 0; i < g.numel(); ++i) dm.data[i] += g.data[i];
      }
      if (t.tracked(v)) {
        Array& dv = t.gref(v.id);
        for (size_t i = 0; i < g.rows(); ++i)
          for (size_t j = 0; j < g.cols(); ++j) dv.data[j] += g.at(i, j);
      }
    };
  }
  return r;
}

Val Tape::scale_rows(Val m, Val v) {
  const Array& M = val(m);
  const Array& V = val(v);
  require(M.is_matrix() && V.is_vector() && M.rows() == V.numel(), "scale_rows",
          "shape mismatch");
  Array out = M;
  for (size_t i = 0; i < M.rows(); ++i)
    for (size_t j = 0; j < M.cols(); ++j) out.at(i, j) *= V.data[i];
  Val r = make(std::move(out), any_tracked({m, v}), nullptr, "scale_rows");
  if (tracked(r)) {
    nodes_[r.id].back = [r, m, v](Tape& t) {
      const Array& g = t.grad(r);
      const Array& M2 = t.val(m);
      const Array& V2 = t.val(v);
      if (t.tracked(m)) {
        Array& dm = t.gref(m.id);
        for (size_t i = 0; i < g.rows(); ++i)
          for (size_t j = 0; j < g.cols(); ++j) dm.at(i, j) += g.at(i, j) * V2.data[i];
      }
      if (t.tracked(v)) {
        Array& dv = t.gref(v.id);
        for (size_t i = 0; i < g.rows(); ++i) {
          double acc = 0.0;
          for (size_t j = 0; j < g.cols(); ++j) acc += g.at(i, j) * M2.at(i, j);
          dv.data[i] += acc;
        }
      }
    };
  }
  return r;
}

Val Tape::row_sums(Val m) {
  const Array& M = val(m);
  require(M.is_matrix(), "row_sums", "operand must be a matrix");
  Array out = Array::zeros({M.rows()});
  for (size_t i = 0; i < M.rows(); ++i) {
    double acc = 0.0;
    for (size_t j = 0; j < M.cols(); ++j) acc += M.at(i, j);
    out.data[i] = acc;
  }
  Val r = make(std::move(out), any_tracked({m}), nullptr, "row_sums");
  if (tracked(r)) {
    nodes_[r.id].back = [r, m](Tape& t) {
      const Array& g = t.grad(r);
      Array& dm = t.gref(m.id);
      for (size_t i = 0; i < dm.rows(); ++i)
        for (size_t j = 0; j < dm.cols(); ++j) dm.at(i, j) += g.data[i];
    };
  }
  return r;
}

// ---------------------------------------------------------------------
// reductions and nonlinear blocks
// ---------------------------------------------------------------------

Val Tape::sum_all(Val a) {
  const Array& A = val(a);
  double acc = 0.0;
  for (double x : A.data) acc += x;
  Val r = make(Array::scalar(acc), any_tracked({a}), nullptr, "sum");
  if (tracked(r)) {
    nodes_[r.id].back = [r, a](Tape& t) {
      const double g = t.grad(r).data[0];
      Array& da = t.gref(a.id);
      for (double& x : da.data) x += g;
    };
  }
  return r;
}

Val Tape::mean_all(Val a) {
  const Array& A = val(a);
  double acc = 0.0;
  for (double x : A.data) acc += x;
  const double inv = 1.0 / static_cast<double>(A.numel());
  Val r = make(Array::scalar(acc * inv), any_tracked({a}), nullptr, "mean");
  if (tracked(r)) {
    nodes_[r.id].back = [r, a, inv](Tape& t) {
      const double g = t.grad(r).data[0] * inv;
      Array& da = t.gref(a.id);
      for (double& x : da.data) x += g;
    };
  }
  return r;
}

Val Tape::pick(Val v, size_t i) {
  const Array& V = val(v);
  require(V.is_vector() && i < V.numel(), "pick", "index out of range");
  Val r = make(Array::scalar(V.data[i]), any_tracked({v}), nullptr, "pick");
  if (tracked(r)) {
    nodes_[r.id].back = [r, v, i](Tape& t) { t.gref(v.id).data[i] += t.grad(r).data[0]; };
  }
  return r;
}

Val Tape::softmax_vec(Val v) {
  const Array& V = val(v);
  require(V.is_vector() && V.numel() > 0, "softmax", "need nonempty vector");
  Array out = Array::zeros({V.numel()});
  softmax_span(V.data.data(), out.data.data(), V.numel());
  Val r = make(std::move(out), any_tracked({v}), nullptr, "softmax");
  if (tracked(r)) {
    nodes_[r.id].back = [r, v](Tape& t) {
      const Array& g = t.grad(r);
      const Array& p = t.val(r);
      Array& dv = t.gref(v.id);
      softmax_backward_span(p.data.data(), g.data.data(), dv.data.data(), p.numel());
    };
  }
  return r;
}

Val Tape::log_softmax_vec(Val v) {
  const Array& V = val(v);
  require(V.is_vector() && V.numel() > 0, "log_softmax", "need nonempty vector");
  const size_t n = V.numel();
  double mx = V.data[0];
  for (double x : V.data) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : V.data) sum += std::exp(x - mx);
  const double lse = mx + std::log(sum);
  Array out = Array::zeros({n});
  for (size_t i = 0; i < n; ++i) out.data[i] = V.data[i] - lse;
  Val r = make(std::move(out), any_tracked({v}), nullptr, "log_softmax");
  if (tracked(r)) {
    nodes_[r.id].back = [r, v, n](Tape& t) {
      const Array& g = t.grad(r);
      const Array& y = t.val(r);
      Array& dv = t.gref(v.id);
      double gsum = 0.0;
      for (size_t i = 0; i < n; ++i) gsum += g.data[i];
      for (size_t i = 0; i < n; ++i) dv.data[i] += g.data[i] - std::exp(y.data[i]) * gsum;
    };
  }
  return r;
}

Val Tape::masked_row_softmax(Val m, std::vector<uint8_t> allowed) {
  const Array& M = val(m);
  require(M.is_matrix(), "masked_row_softmax", "operand must be a matrix");
  require(allowed.size() == M.numel(), "masked_row_softmax", "mask size mismatch");
  const size_t rws = M.rows(), cls = M.cols();
  Array out = Array::mat(rws, cls);
  std::vector<double> buf(cls);
  for (size_t i = 0; i < rws; ++i) {
    size_t cnt = 0;
    for (size_t j = 0; j < cls; ++j)
      if (allowed[i * cls + j]) buf[cnt++] = M.at(i, j);
    require(cnt > 0, "masked_row_softmax", "row with no allowed entries");
    std::vector<double> p(cnt);
    softmax_span(buf.data(), p.data(), cnt);
    size_t c2 = 0;
    for (size_t j = 0; j < cls; ++j) out.at(i, j) = allowed[i * cls + j] ? p[c2++] : 0.0;
  }
  Val r = make(std::move(out), any_tracked({m}), nullptr, "masked_row_softmax");
  if (tracked(r)) {
    nodes_[r.id].back = [r, m, mk = std::move(allowed), rws, cls](Tape& t) {
      const Array& g = t.grad(r);
      const Array& p = t.val(r);
      Array& dm = t.gref(m.id);
      for (size_t i = 0; i < rws; ++i) {
        double gp = 0.0;
        for (size_t j = 0; j < cls; ++j)
          if (mk[i * cls + j]) gp += g.at(i, j) * p.at(i, j);
        for (size_t j = 0; j < cls; ++j)
          if (mk[i * cls + j]) dm.at(i, j) += p.at(i, j) * (g.at(i, j) - gp);
      }
    };
  }
  return r;
}

Val Tape::masked_fill(Val x, std::vector<uint8_t> masked, double fill_value) {
  const Array& X = val(x);
  require(masked.size() == X.numel(), "masked_fill", "mask size mismatch");
  Array out = X;
  for (size_t i = 0; i < out.numel(); ++i)
    if (masked[i]) out.data[i] = fill_value;
  Val r = make(std::move(out), any_tracked({x}), nullptr, "masked_fill");
  if (tracked(r)) {
    nodes_[r.id].back = [r, x, mk = std::move(masked)](Tape& t) {
      const Array& g = t.grad(r);
      Array& dx = t.gref(x.id);
      for (size_t i = 0; i < g.numel(); ++i)
        if (!mk[i]) dx.data[i] += g.data[i];
    };
  }
  return r;
}

Val Tape::group_softmax(Val v, std::vector<size_t> offsets) {
  const Array& V = val(v);
  require(V.is_vector(), "group_softmax", "operand must be a vector");
  require(!offsets.empty() && offsets.front() == 0 && offsets.back() == V.numel(),
          "group_softmax", "bad offsets");
  Array out = Array::zeros({V.numel()});
  for (size_t g = 0; g + 1 < offsets.size(); ++g) {
    const size_t b = offsets[g], e = offsets[g + 1];
    require(e > b, "group_softmax", "empty group");
    softmax_span(&V.data[b], &out.data[b], e - b);
  }
  Val r = make(std::move(out), any_tracked({v}), nullptr, "group_softmax");
  if (tracked(r)) {
    nodes_[r.id].back = [r, v, offs = std::move(offsets)](Tape& t) {
      const Array& g = t.grad(r);
      const Array& p = t.val(r);
      Array& dv = t.gref(v.id);
      for (size_t k = 0; k + 1 < offs.size(); ++k) {
        const size_t b = offs[k], e = offs[k + 1];
        softmax_backward_span(&p.data[b], &g.data[b], &dv.data[b], e - b);
      }
    };
  }
  return r;
}

Val Tape::group_weighted_rows(Val alpha, Val m, std::vector<int32_t> idx,
                              std::vector<size_t> offsets) {
  const Array& A = val(alpha);
  const Array& M = val(m);
  require(A.is_vector() && M.is_matrix(), "group_weighted_rows", "need vector and matrix");
  require(idx.size() == A.numel(), "group_weighted_rows", "index size mismatch");
  require(!offsets.empty() && offsets.front() == 0 && offsets.back() == A.numel(),
          "group_weighted_rows", "bad offsets");
  const size_t groups = offsets.size() - 1, c = M.cols();
  Array out = Array::mat(groups, c);
  for (size_t g = 0; g < groups; ++g) {
    for (size_t e = offsets[g]; e < offsets[g + 1]; ++e) {
      const double w = A.data[e];
      const double* row = &M.data[static_cast<size_t>(idx[e]) * c];
      double* orow = &out.data[g * c];
      for (size_t j = 0; j < c; ++j) orow[j] += w * row[j];
    }
  }
  Val r = make(std::move(out), any_tracked({alpha, m}), nullptr, "group_weighted_rows");
  if (tracked(r)) {
    nodes_[r.id].back = [r, alpha, m, ix = std::move(idx), offs = std::move(offsets), c](Tape& t) {
      const Array& g = t.grad(r);
      const Array& A2 = t.val(alpha);
      const Array& M2 = t.val(m);
      const size_t groups2 = offs.size() - 1;
      for (size_t k = 0; k < groups2; ++k) {
        const double* grow = &g.data[k * c];
        for (size_t e = offs[k]; e < offs[k + 1]; ++e) {
          const size_t ri = static_cast<size_t>(ix[e]);
          if (t.tracked(alpha)) {
            double acc = 0.0;
            const double* mrow = &M2.data[ri * c];
            for (size_t j = 0; j < c; ++j) acc += grow[j] * mrow[j];
            t.gref(alpha.id).data[e] += acc;
          }
          if (t.tracked(m)) {
            Array& dm = t.gref(m.id);
            const double w = A2.data[e];
            for (size_t j = 0; j < c; ++j) dm.at(ri, j) += w * grow[j];
          }
        }
      }
    };
  }
  return r;
}

Val Tape::layer_norm(Val x, Val gain, Val bias, double eps) {
  const Array& X = val(x);
  const Array& G = val(gain);
  const Array& B = val(bias);
  require(X.is_matrix(), "layer_norm", "input must be a matrix");
  const size_t n = X.rows(), c = X.cols();
  require(G.is_vector() && G.numel() == c && B.is_vector() && B.numel() == c, "layer_norm",
          "gain/bias must match feature width");
  Array out = Array::mat(n, c);
  Array xhat = Array::mat(n, c);
  std::vector<double> inv_std(n);
  for (size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (size_t j = 0; j < c; ++j) mu += X.at(i, j);
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (size_t j = 0; j < c; ++j) {
      const double d = X.at(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (size_t j = 0; j < c; ++j) {
      const double xh = (X.at(i, j) - mu) * is;
      xhat.at(i, j) = xh;
      out.at(i, j) = xh * G.data[j] + B.data[j];
    }
  }
  Val r = make(std::move(out), any_tracked({x, gain, bias}), nullptr, "layer_norm");
  if (tracked(r)) {
    nodes_[r.id].back = [r, x, gain, bias, xh = std::move(xhat), istd = std::move(inv_std), n,
                         c](Tape& t) {
      const Array& g = t.grad(r);
      const Array& G2 = t.val(gain);
      if (t.tracked(gain)) {
        Array& dg = t.gref(gain.id);
        for (size_t i = 0; i < n; ++i)
          for (size_t j = 0; j < c; ++j) dg.data[j] += g.at(i, j) * xh.at(i, j);
      }
      if (t.tracked(bias)) {
        Array& db = t.gref(bias.id);
        for (size_t i = 0; i < n; ++i)
          for (size_t j = 0; j < c; ++j) db.data[j] += g.at(i, j);
      }
      if (t.tracked(x)) {
        Array& dx = t.gref(x.id);
        const double inv_c = 1.0 / static_cast<double>(c);
        for (size_t i = 0; i < n; ++i) {
          double sum_dy = 0.0, sum_dy_xh = 0.0;
          for (size_t j = 0; j < c; ++j) {
            const double dy = g.at(i, j) * G2.data[j];
            sum_dy += dy;
            sum_dy_xh += dy * xh.at(i, j);
          }
          for (size_t j = 0; j < c; ++j) {
            const double dy = g.at(i, j) * G2.data[j];
            dx.at(i, j) +=
                istd[i] * (dy - inv_c * sum_dy - xh.at(i, j) * inv_c * sum_dy_xh);
          }
        }
      }
    };
  }
  return r;
}

}  // namespace navgen
