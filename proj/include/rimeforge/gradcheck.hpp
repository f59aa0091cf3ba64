#pragma once

// Central finite-difference verification of analytic gradients.
// Relative error per coordinate: |analytic - central| / max(1, |analytic|, |central|).

#include <cmath>
#include <string>

#include "rimeforge/rng.hpp"
#include "rimeforge/tensor.hpp"

namespace rimeforge {

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst_param;
  int64_t worst_index = -1;
  int64_t coords_checked = 0;
};

// eval: (const ParamStore<double>&) -> double
// grad: (const ParamStore<double>&) -> GradMap<double>, aligned with params.
// When max_coords_per_param > 0 and a parameter has more coordinates, a
// deterministic random subset of that size is probed instead of all of them.
template <typename EvalFn, typename GradFn>
GradCheckResult grad_check(EvalFn&& eval, GradFn&& grad, ParamStore<double> params, double h,
                           int64_t max_coords_per_param = -1, uint64_t sample_seed = 0) {
  const GradMap<double> analytic = grad(params);
  require(analytic.size() == params.size(), Err::ShapeMismatch,
          "grad_check: gradient count mismatch");
  GradCheckResult res;
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor<double>& value = params.values[p];
    const Tensor<double>& g = analytic[p];
    require(g.same_shape(value), Err::ShapeMismatch, "grad_check: gradient shape mismatch");
    const int64_t n = value.numel();
    std::vector<int64_t> coords;
    if (max_coords_per_param > 0 && n > max_coords_per_param) {
      Rng rng(sample_seed, hash_str(params.names[p].c_str()));
      for (int64_t c = 0; c < max_coords_per_param; ++c)
        coords.push_back(static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(n))));
    } else {
      coords.resize(static_cast<size_t>(n));
      for (int64_t c = 0; c < n; ++c) coords[static_cast<size_t>(c)] = c;
    }
    for (int64_t c : coords) {
      const double orig = value.data[c];
      value.data[c] = orig + h;
      const double fp = eval(params);
      value.data[c] = orig - h;
      const double fm = eval(params);
      value.data[c] = orig;
      require(std::isfinite(fp) && std::isfinite(fm), Err::NonFiniteEvaluation,
              "grad_check: non-finite evaluation at " + params.names[p]);
      const double central = (fp - fm) / (2 * h);
      const double a = g.data[c];
      const double rel = std::abs(a - central) / std::max({1.0, std::abs(a), std::abs(central)});
      ++res.coords_checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = params.names[p];
        res.worst_index = c;
      }
    }
  }
  return res;
}

}  // namespace rimeforge
