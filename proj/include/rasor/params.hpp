#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rasor/errors.hpp"
#include "rasor/rng.hpp"
#include "rasor/tensor.hpp"

namespace rasor {

/// Named collection of trainable tensors. Registration order is fixed, which
/// keeps optimizer state, checkpoints and gradient checks aligned.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };

  Tensor<T>& add(const std::string& name, Shape shape) {
    for (const auto& e : entries_)
      if (e->name == name)
        throw ContractError("duplicate parameter name: " + name);
    entries_.push_back(
        std::make_unique<Entry>(Entry{name, Tensor<T>(std::move(shape))}));
    entries_.back()->tensor.requires_grad = true;
    return entries_.back()->tensor;
  }

  Tensor<T>* find(const std::string& name) {
    for (auto& e : entries_)
      if (e->name == name) return &e->tensor;
    return nullptr;
  }

  std::size_t count() const { return entries_.size(); }
  Entry& entry(std::size_t i) { return *entries_[i]; }
  const Entry& entry(std::size_t i) const { return *entries_[i]; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e->tensor.size();
    return n;
  }

  void zero_grads() {
    for (auto& e : entries_) e->tensor.zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Entry>> entries_;
};

template <typename T>
void init_uniform(Tensor<T>& t, Rng& rng, double lo, double hi) {
  for (T& x : t.v) x = static_cast<T>(rng.uniform(lo, hi));
}

}  // namespace rasor
