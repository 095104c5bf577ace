#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "navgen/array.hpp"
#include "navgen/rng.hpp"
#include "navgen/tape.hpp"

// Named storage for all learnable arrays, with deterministic iteration
// order (registration order). Checkpoints serialize the full store to a
// single file: a text manifest of (name, shape, offset) followed by a
// little-endian float64 payload.

namespace navgen {

class ParamStore {
 public:
  Array& add(const std::string& name, Array init);
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  Array& get(const std::string& name);
  const Array& get(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  size_t count() const { return names_.size(); }
  size_t total_elements() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<Array> values_;
};

// Initializers (all draw from the provided Rng in a fixed order).
Array xavier_uniform(size_t rows, size_t cols, Rng& rng);
Array normal_embedding(size_t rows, size_t cols, Rng& rng);  // N(0, 1/cols)
Array zeros_vec(size_t n);

// Checkpoint I/O. `meta` is an opaque single-line string stored in the
// header (the CLI keeps the resolved model config there).
void save_checkpoint(const ParamStore& store, const std::string& meta, const std::string& path);
ParamStore load_checkpoint(const std::string& path, std::string* meta_out);

// Binds parameters into a tape as tracked leaves, memoized per name, and
// exposes their gradients after backward().
class ParamBinding {
 public:
  ParamBinding(Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {}

  Val operator()(const std::string& name);

  // Gradient of the bound leaf; zero array if the parameter was never
  // bound on this tape.
  Array grad_of(const std::string& name) const;

  const std::unordered_map<std::string, Val>& bound() const { return bound_; }
  Tape& tape() { return *tape_; }
  ParamStore& store() { return *store_; }

 private:
  Tape* tape_;
  ParamStore* store_;
  std::unordered_map<std::string, Val> bound_;
};

}  // namespace navgen
