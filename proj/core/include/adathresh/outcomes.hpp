#pragma once

#include <cstdint>
#include <vector>

#include "adathresh/design.hpp"
#include "adathresh/exposure.hpp"

namespace adathresh {

enum class ExposureEffect { linear, sigmoid, sine };

// Potential outcomes y_i(z_i, e_i) = alpha + beta_i z_i + gamma_i f(e_i) + eps_i
// with f(e) = e (linear), 1 + exp(-e) (sigmoid), or 1 - sin(pi e) (sine).
// The noise vector is drawn once from a seeded standard normal and then
// frozen: it is identical across assignments, replicates, and thresholds.
struct OutcomeModel {
  double alpha = 10.0;
  double beta = 10.0;
  double gamma = 0.0;
  ExposureEffect f_kind = ExposureEffect::linear;
  std::vector<double> epsilon;
  // Optional per-unit heterogeneous coefficients; empty means homogeneous.
  std::vector<double> beta_i;
  std::vector<double> gamma_i;

  static OutcomeModel make(double alpha, double beta, double gamma,
                           ExposureEffect f_kind, std::int32_t n,
                           double noise_sd, std::uint64_t noise_seed);

  double unit_beta(std::int32_t i) const {
    return beta_i.empty() ? beta : beta_i[i];
  }
  double unit_gamma(std::int32_t i) const {
    return gamma_i.empty() ? gamma : gamma_i[i];
  }
  // The gamma-free shape of the exposure effect.
  double f_unit(double e) const;
};

using OutcomeVector = std::vector<double>;

OutcomeVector evaluate(const OutcomeModel& model, const Assignment& a,
                       const ExposureProfile& e);

// tau = mean(beta_i) + mean(gamma_i) * (f(1) - f(0)).
double true_ate(const OutcomeModel& model);

}  // namespace adathresh
