#include "navgen/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace navgen {

Array& ParamStore::add(const std::string& name, Array init) {
  if (has(name)) throw config_error("duplicate parameter name: " + name);
  if (name.find(' ') != std::string::npos || name.find('\n') != std::string::npos)
    throw config_error("parameter names may not contain whitespace: " + name);
  index_[name] = names_.size();
  names_.push_back(name);
  values_.push_back(std::move(init));
  return values_.back();
}

Array& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw config_error("unknown parameter: " + name);
  return values_[it->second];
}

const Array& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw config_error("unknown parameter: " + name);
  return values_[it->second];
}

size_t ParamStore::total_elements() const {
  size_t n = 0;
  for (const Array& a : values_) n += a.numel();
  return n;
}

Array xavier_uniform(size_t rows, size_t cols, Rng& rng) {
  Array a = Array::mat(rows, cols);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& x : a.data) x = rng.uniform(-bound, bound);
  return a;
}

Array normal_embedding(size_t rows, size_t cols, Rng& rng) {
  Array a = Array::mat(rows, cols);
  const double sd = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& x : a.data) x = rng.normal() * sd;
  return a;
}

Array zeros_vec(size_t n) { return Array::zeros({n}); }

namespace {

void put_le_double(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_le_double(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& meta, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write checkpoint: " + path);
  out << "NAVGEN-CKPT-1\n";
  out << "meta " << meta << "\n";
  out << "count " << store.count() << "\n";
  size_t offset = 0;
  for (const std::string& name : store.names()) {
    const Array& a = store.get(name);
    out << name << ' ' << a.rank();
    for (size_t d : a.shape) out << ' ' << d;
    out << ' ' << offset << "\n";
    offset += a.numel() * 8;
  }
  out << "DATA\n";
  for (const std::string& name : store.names()) {
    const Array& a = store.get(name);
    for (double v : a.data) put_le_double(out, v);
  }
  if (!out) throw config_error("checkpoint write failed: " + path);
}

ParamStore load_checkpoint(const std::string& path, std::string* meta_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "NAVGEN-CKPT-1")
    throw data_error("bad checkpoint magic in " + path);
  if (!std::getline(in, line) || line.rfind("meta ", 0) != 0)
    throw data_error("checkpoint missing meta line");
  if (meta_out) *meta_out = line.substr(5);
  if (!std::getline(in, line) || line.rfind("count ", 0) != 0)
    throw data_error("checkpoint missing count line");
  const size_t count = std::stoull(line.substr(6));

  struct Entry {
    std::string name;
    std::vector<size_t> shape;
    size_t offset;
  };
  std::vector<Entry> entries;
  for (size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw data_error("checkpoint manifest truncated");
    std::istringstream ss(line);
    Entry e;
    size_t rank = 0;
    if (!(ss >> e.name >> rank)) throw data_error("bad manifest row: " + line);
    e.shape.resize(rank);
    for (size_t d = 0; d < rank; ++d)
      if (!(ss >> e.shape[d])) throw data_error("bad manifest row: " + line);
    if (!(ss >> e.offset)) throw data_error("bad manifest row: " + line);
    entries.push_back(std::move(e));
  }
  if (!std::getline(in, line) || line != "DATA") throw data_error("checkpoint missing DATA marker");

  const std::streampos payload_start = in.tellg();
  ParamStore store;
  for (const Entry& e : entries) {
    Array a = Array::zeros(e.shape);
    in.seekg(payload_start + static_cast<std::streamoff>(e.offset));
    for (double& v : a.data) v = get_le_double(in);
    if (!in) throw data_error("checkpoint payload truncated at " + e.name);
    store.add(e.name, std::move(a));
  }
  return store;
}

Val ParamBinding::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Val v = tape_->input(store_->get(name), true);
  bound_[name] = v;
  return v;
}

Array ParamBinding::grad_of(const std::string& name) const {
  auto it = bound_.find(name);
  if (it == bound_.end()) return Array::zeros(store_->get(name).shape);
  const Array& g = tape_->grad(it->second);
  if (g.data.empty()) return Array::zeros(store_->get(name).shape);
  return g;
}

}  // namespace navgen
