#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvdiff {

/// Activation tensor laid out [channels][batch][height][width], so a channel
/// block is one GEMM row and channel concatenation is vector append.
template <typename S>
struct Tensor {
  int c = 0;
  int n = 0;
  int h = 0;
  int w = 0;
  std::vector<S> v;

  Tensor() = default;
  Tensor(int channels, int batch, int height, int width, S fill = S{0})
      : c(channels), n(batch), h(height), w(width),
        v(static_cast<std::size_t>(channels) * batch * height * width, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t columns() const { return static_cast<std::size_t>(n) * h * w; }
  S* ptr(int ci, int ni) { return v.data() + (static_cast<std::size_t>(ci) * n + ni) * plane(); }
  const S* ptr(int ci, int ni) const { return v.data() + (static_cast<std::size_t>(ci) * n + ni) * plane(); }
  bool same_shape(const Tensor& o) const { return c == o.c && n == o.n && h == o.h && w == o.w; }
};

template <typename S>
void expect_shape(const Tensor<S>& t, int c, int n, int h, int w, const char* where) {
  if (t.c != c || t.n != n || t.h != h || t.w != w) {
    throw std::logic_error(std::string(where) + ": shape [" + std::to_string(t.c) + "," + std::to_string(t.n) +
                           "," + std::to_string(t.h) + "," + std::to_string(t.w) + "] != expected [" +
                           std::to_string(c) + "," + std::to_string(n) + "," + std::to_string(h) + "," +
                           std::to_string(w) + "]");
  }
}

template <typename S>
struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<S> data;
};

/// Ordered collection of named parameter tensors. Registration order is the
/// canonical order used by checkpoints and the optimizer.
template <typename S>
class ParamSet {
 public:
  std::size_t add(const std::string& name, std::vector<int> shape) {
    if (index_.count(name)) throw std::logic_error("duplicate parameter '" + name + "'");
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    index_[name] = entries_.size();
    entries_.push_back({name, std::move(shape), std::vector<S>(count, S{0})});
    return entries_.size() - 1;
  }

  std::size_t size() const { return entries_.size(); }
  NamedTensor<S>& operator[](std::size_t i) { return entries_[i]; }
  const NamedTensor<S>& operator[](std::size_t i) const { return entries_[i]; }
  S* data(std::size_t i) { return entries_[i].data.data(); }
  const S* data(std::size_t i) const { return entries_[i].data.data(); }

  const NamedTensor<S>& at(const std::string& name) const { return entries_[find(name)]; }
  NamedTensor<S>& at(const std::string& name) { return entries_[find(name)]; }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.data.size();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet out = *this;
    for (auto& e : out.entries_) std::fill(e.data.begin(), e.data.end(), S{0});
    return out;
  }

  template <typename To>
  ParamSet<To> cast() const {
    ParamSet<To> out;
    for (const auto& e : entries_) {
      const std::size_t i = out.add(e.name, e.shape);
      for (std::size_t k = 0; k < e.data.size(); ++k) out[i].data[k] = static_cast<To>(e.data[k]);
    }
    return out;
  }

  bool all_finite() const {
    for (const auto& e : entries_) {
      for (S x : e.data) {
        if (!std::isfinite(x)) return false;
      }
    }
    return true;
  }

  bool operator==(const ParamSet& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& a = entries_[i];
      const auto& b = o.entries_[i];
      if (a.name != b.name || a.shape != b.shape || a.data != b.data) return false;
    }
    return true;
  }

 private:
  std::size_t find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
    return it->second;
  }

  std::vector<NamedTensor<S>> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace pvdiff
