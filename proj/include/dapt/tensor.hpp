#pragma once

#include <Eigen/Core>
#include <string>
#include <unordered_map>
#include <vector>

#include "dapt/common.hpp"

namespace dapt {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class ParamGroup { kBase, kAdapter, kHead };

inline const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::kBase: return "base";
    case ParamGroup::kAdapter: return "adapter";
    case ParamGroup::kHead: return "head";
  }
  return "?";
}

inline ParamGroup param_group_from_string(const std::string& s) {
  if (s == "base") return ParamGroup::kBase;
  if (s == "adapter") return ParamGroup::kAdapter;
  if (s == "head") return ParamGroup::kHead;
  fail("unknown parameter group '", s, "'");
}

template <class S>
struct Param {
  std::string name;
  ParamGroup group = ParamGroup::kBase;
  bool is_layer_norm = false;  // scale/shift of a layer norm
  bool trainable = true;
  Mat<S> value;
  Mat<S> grad;
};

// Flat registry of named tensors. Layers hold indices into the store, which
// keeps checkpointing, optimizer state, freezing and gradient checking all
// uniform: everything walks the same list.
template <class S>
class ParamStore {
 public:
  int add(std::string name, ParamGroup group, int rows, int cols,
          bool is_layer_norm = false) {
    require(rows > 0 && cols > 0, "bad shape for ", name, ": ", rows, "x", cols);
    const int id = static_cast<int>(items_.size());
    require(index_.emplace(name, id).second, "duplicate parameter '", name, "'");
    Param<S> p;
    p.name = std::move(name);
    p.group = group;
    p.is_layer_norm = is_layer_norm;
    p.value = Mat<S>::Zero(rows, cols);
    p.grad = Mat<S>::Zero(rows, cols);
    items_.push_back(std::move(p));
    return id;
  }

  int size() const { return static_cast<int>(items_.size()); }
  Param<S>& operator[](int id) { return items_[static_cast<size_t>(id)]; }
  const Param<S>& operator[](int id) const { return items_[static_cast<size_t>(id)]; }

  int find(const std::string& name) const {
    const auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  void zero_grads() {
    for (Param<S>& p : items_) p.grad.setZero();
  }

  long long total_scalars() const {
    long long n = 0;
    for (const Param<S>& p : items_) n += p.value.size();
    return n;
  }

  long long trainable_scalars() const {
    long long n = 0;
    for (const Param<S>& p : items_)
      if (p.trainable) n += p.value.size();
    return n;
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::vector<Param<S>> items_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace dapt
