#pragma once

// Dense row-major arrays and the framework-wide error type.
// Rank 0 = scalar (empty shape, one element), rank 1 = vector, rank 2 = matrix.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace rimeforge {

enum class Err {
  ShapeMismatch,
  DegenerateNorm,
  NonScalarLoss,
  NonFiniteGradient,
  NonFiniteEvaluation,
  NonFiniteLoss,
  BadConfig,
  SequenceTooLong,
  MissingRollout,
  EmptyGold,
  NonPositiveTemperature,
  DimensionMismatch,
  EmptyRolloutSet,
  StaleGroup,
  EmptyIndex,
  UnjudgedQuery,
  GroupTooSmall,
  CheckpointMismatch,
  ConfigError,
  DataError,
  IoError,
};

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool ok, Err code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

inline int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

template <typename T>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)), data(shape_numel(shape), T{0}) {}
  Tensor(std::vector<int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    require(shape_numel(shape) == static_cast<int64_t>(data.size()), Err::ShapeMismatch,
            "tensor data size does not match shape");
  }

  static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int64_t> s, T v) {
    Tensor t(std::move(s));
    for (T& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(T v) { return Tensor({}, {v}); }
  static Tensor row(std::vector<T> d) {
    const int64_t n = static_cast<int64_t>(d.size());
    return Tensor({1, n}, std::move(d));
  }
  static Tensor vec(std::vector<T> d) {
    const int64_t n = static_cast<int64_t>(d.size());
    return Tensor({n}, std::move(d));
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool is_scalar() const { return numel() == 1 && rank() == 0; }

  int64_t rows() const { return rank() == 2 ? shape[0] : (rank() == 1 ? 1 : 1); }
  int64_t cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? shape[0] : 1); }

  T& at(int64_t i, int64_t j) { return data[i * shape[1] + j]; }
  const T& at(int64_t i, int64_t j) const { return data[i * shape[1] + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.reserve(data.size());
    for (T v : data) out.data.push_back(static_cast<U>(v));
    return out;
  }
};

inline std::string shape_str(const std::vector<int64_t>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Named, ordered parameter set. Order is the declaration order and is the
// canonical order for checkpoints, gradients and optimizer state.
template <typename T>
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Tensor<T>> values;

  int find(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }

  Tensor<T>& add(std::string name, Tensor<T> value) {
    require(find(name) < 0, Err::BadConfig, "duplicate parameter name: " + name);
    names.push_back(std::move(name));
    values.push_back(std::move(value));
    return values.back();
  }

  Tensor<T>& operator[](const std::string& name) {
    int i = find(name);
    require(i >= 0, Err::BadConfig, "unknown parameter: " + name);
    return values[i];
  }
  const Tensor<T>& operator[](const std::string& name) const {
    int i = find(name);
    require(i >= 0, Err::BadConfig, "unknown parameter: " + name);
    return values[i];
  }

  size_t size() const { return names.size(); }

  int64_t total_count() const {
    int64_t n = 0;
    for (const auto& v : values) n += v.numel();
    return n;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    out.names = names;
    out.values.reserve(values.size());
    for (const auto& v : values) out.values.push_back(v.template cast<U>());
    return out;
  }
};

// Gradients aligned with a ParamStore's declaration order.
template <typename T>
using GradMap = std::vector<Tensor<T>>;

}  // namespace rimeforge
