#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "navgen/array.hpp"

// Minimal reverse-mode computation tape. Every op computes its forward
// value eagerly, validates finiteness, and (when gradients are enabled
// and some parent is tracked) records a closure that scatters the output
// gradient back to its parents. Nodes are created in topological order,
// so backward() is a single reverse sweep.

namespace navgen {

struct Val {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  // -- leaves ---------------------------------------------------------
  Val input(Array value, bool track_grad);
  Val constant(Array value) { return input(std::move(value), false); }
  Val constant_scalar(double v) { return constant(Array::scalar(v)); }

  // -- elementwise ----------------------------------------------------
  Val add(Val a, Val b);
  Val sub(Val a, Val b);
  Val mul(Val a, Val b);           // same shape
  Val smul(Val a, double c);       // scale by compile-time constant
  Val scale(Val s, Val x);         // scalar node times tensor
  Val neg(Val a) { return smul(a, -1.0); }
  Val leaky_relu(Val a, double slope);
  Val sigmoid(Val a);
  Val tanh_(Val a);
  Val softplus(Val a);
  Val log_(Val a);
  Val abs_(Val a);
  Val sin_(Val a);
  Val cos_(Val a);

  // -- linear algebra -------------------------------------------------
  Val matmul(Val a, Val b);        // (m x k)(k x n)
  Val matvec(Val m, Val v);        // (m x k)(k) -> (m)
  Val vecmat(Val v, Val m);        // (k)(k x n) -> (n)
  Val dot(Val u, Val v);           // -> scalar
  Val transpose(Val a);
  Val outer(Val u, Val v);         // (m)(n) -> (m x n)

  // -- shape ----------------------------------------------------------
  Val concat(const std::vector<Val>& parts);          // vectors
  Val concat_cols(const std::vector<Val>& parts);     // matrices, same rows
  Val stack_rows(const std::vector<Val>& parts);      // vectors -> matrix
  Val slice(Val v, size_t offset, size_t len);        // vector slice
  Val cols(Val m, size_t offset, size_t len);         // contiguous column slice
  std::vector<Val> split(Val v, const std::vector<size_t>& sizes);
  Val row(Val m, size_t i);                            // matrix row as vector
  Val rows(Val m, std::vector<int32_t> indices);       // gather rows (embedding lookup)
  Val add_rowvec(Val m, Val v);                        // broadcast add over rows
  Val scale_rows(Val m, Val v);                        // out[i][j] = m[i][j]*v[i]
  Val row_sums(Val m);                                 // (r x c) -> (r)

  // -- reductions & nonlinear blocks -----------------------------------
  Val sum_all(Val a);
  Val mean_all(Val a);
  Val pick(Val v, size_t i);  // element of a vector, as scalar
  Val softmax_vec(Val v);
  Val log_softmax_vec(Val v);
  // Per-row softmax over entries with mask!=0; masked-out entries get
  // probability exactly 0 and receive no gradient.
  Val masked_row_softmax(Val m, std::vector<uint8_t> allowed);
  // out = allowed ? x : fill_value (no gradient through filled slots)
  Val masked_fill(Val x, std::vector<uint8_t> masked, double fill_value);
  // Softmax within contiguous groups of a vector; offsets has G+1 entries.
  Val group_softmax(Val v, std::vector<size_t> offsets);
  // out[g] = sum_{e in group g} alpha[e] * m[idx[e]], a (G x cols) matrix.
  Val group_weighted_rows(Val alpha, Val m, std::vector<int32_t> idx,
                          std::vector<size_t> offsets);
  Val layer_norm(Val x, Val gain, Val bias, double eps = 1e-5);

  // -- access ----------------------------------------------------------
  const Array& val(Val v) const { return nodes_[v.id].value; }
  const Array& grad(Val v) const { return nodes_[v.id].grad; }
  bool tracked(Val v) const { return nodes_[v.id].tracked; }
  size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar loss. Gradients of tracked leaves that
  // the loss does not reach stay zero.
  void backward(Val loss);

 private:
  struct Node {
    Array value;
    Array grad;
    bool tracked = false;
    std::function<void(Tape&)> back;
  };

  Val make(Array value, bool tracked, std::function<void(Tape&)> back, const char* op);
  Array& gref(int32_t id);
  bool any_tracked(std::initializer_list<Val> vs) const;

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

}  // namespace navgen
