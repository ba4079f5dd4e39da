#pragma once

#include "procap/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace procap::fx {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  int probes = 0;
};

/// Compares the analytic gradient of `loss` w.r.t. each tensor in `inputs`
/// with central differences on up to `max_probes` entries per tensor.
/// Relative error is |a - n| / max(|a| + |n|, floor).
inline GradCheckResult gradcheck(const std::vector<std::pair<std::string, ag::Tensor>>& inputs,
                                 const std::function<ag::Tensor()>& loss, int max_probes = 24,
                                 double h = 1e-5, double floor = 1e-6, std::uint64_t seed = 7) {
  for (auto [name, t] : inputs) {
    t.zero_grad();
    t.set_requires_grad(true);
  }
  ag::backward(loss());
  GradCheckResult r;
  std::mt19937_64 rng(seed);
  for (auto [name, t] : inputs) {
    const ag::Matrix analytic = t.has_grad() ? t.grad() : ag::Matrix::Zero(t.rows(), t.cols());
    const auto n = static_cast<std::size_t>(t.value().size());
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(n, static_cast<std::size_t>(max_probes)));
    for (std::size_t i : idx) {
      double& x = t.mutable_value().data()[i];
      const double saved = x;
      x = saved + h;
      const double up = loss().item();
      x = saved - h;
      const double down = loss().item();
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.data()[i];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), floor);
      ++r.probes;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst = name + "[" + std::to_string(i) + "] analytic=" + std::to_string(a) +
                  " numeric=" + std::to_string(numeric);
      }
    }
  }
  return r;
}

}  // namespace procap::fx
