#pragma once

// Parameter updates: plain gradient descent and Adam. Update arithmetic runs
// in double and is applied in declaration order, so a step is deterministic
// for a given (params, grads) regardless of the storage precision T.

#include <cmath>
#include <string>
#include <vector>

#include "rimeforge/tensor.hpp"

namespace rimeforge {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline OptimizerKind optimizer_kind_from(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  fail(Err::ConfigError, "unknown optimizer: " + s);
}

template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  const OptimizerConfig& config() const { return cfg_; }

  void step(ParamStore<T>& params, const GradMap<T>& grads) {
    require(grads.size() == params.size(), Err::ShapeMismatch, "optimizer: grad count mismatch");
    for (size_t p = 0; p < params.size(); ++p) {
      require(grads[p].same_shape(params.values[p]), Err::ShapeMismatch,
              "optimizer: grad shape mismatch for " + params.names[p]);
      for (T v : grads[p].data)
        require(std::isfinite(static_cast<double>(v)), Err::NonFiniteGradient,
                "optimizer: non-finite gradient in " + params.names[p]);
    }
    if (cfg_.kind == OptimizerKind::Sgd) {
      for (size_t p = 0; p < params.size(); ++p) {
        Tensor<T>& w = params.values[p];
        const Tensor<T>& g = grads[p];
        for (int64_t i = 0; i < w.numel(); ++i)
          w.data[i] = static_cast<T>(static_cast<double>(w.data[i]) -
                                     cfg_.lr * static_cast<double>(g.data[i]));
      }
      ++t_;
      return;
    }
    if (m_.empty()) {
      for (const auto& v : params.values) {
        m_.push_back(Tensor<double>::zeros(v.shape));
        v_.push_back(Tensor<double>::zeros(v.shape));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t p = 0; p < params.size(); ++p) {
      Tensor<T>& w = params.values[p];
      const Tensor<T>& g = grads[p];
      for (int64_t i = 0; i < w.numel(); ++i) {
        const double gi = static_cast<double>(g.data[i]);
        double& m = m_[p].data[i];
        double& v = v_[p].data[i];
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * gi;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * gi * gi;
        const double update = cfg_.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
        w.data[i] = static_cast<T>(static_cast<double>(w.data[i]) - update);
      }
    }
  }

 private:
  OptimizerConfig cfg_;
  int64_t t_ = 0;
  std::vector<Tensor<double>> m_, v_;
};

}  // namespace rimeforge
