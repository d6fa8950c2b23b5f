#include "adathresh/outcomes.hpp"

#include <cmath>

#include "adathresh/errors.hpp"
#include "adathresh/rng.hpp"

namespace adathresh {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

OutcomeModel OutcomeModel::make(double alpha, double beta, double gamma,
                                ExposureEffect f_kind, std::int32_t n,
                                double noise_sd, std::uint64_t noise_seed) {
  OutcomeModel m;
  m.alpha = alpha;
  m.beta = beta;
  m.gamma = gamma;
  m.f_kind = f_kind;
  m.epsilon.resize(n, 0.0);
  if (noise_sd != 0.0) {
    const std::uint64_t s = purpose_seed(noise_seed, rng_purpose::kNoise);
    for (std::int32_t i = 0; i < n; ++i)
      m.epsilon[i] = noise_sd * standard_normal(s, /*stream=*/0, i);
  }
  return m;
}

double OutcomeModel::f_unit(double e) const {
  switch (f_kind) {
    case ExposureEffect::linear: return e;
    case ExposureEffect::sigmoid: return 1.0 + std::exp(-e);
    case ExposureEffect::sine: return 1.0 - std::sin(kPi * e);
  }
  return e;
}

OutcomeVector evaluate(const OutcomeModel& model, const Assignment& a,
                       const ExposureProfile& e) {
  const auto n = static_cast<std::int32_t>(a.z.size());
  if (static_cast<std::int32_t>(model.epsilon.size()) != n)
    throw config_error("noise vector length does not match the graph");
  OutcomeVector y(n);
  for (std::int32_t i = 0; i < n; ++i) {
    const double fe = e.degree[i] == 0 ? 0.0 : model.f_unit(e.fraction(i));
    y[i] = model.alpha + model.unit_beta(i) * a.z[i] +
           model.unit_gamma(i) * fe + model.epsilon[i];
  }
  return y;
}

double true_ate(const OutcomeModel& model) {
  double beta_bar = model.beta;
  double gamma_bar = model.gamma;
  if (!model.beta_i.empty()) {
    beta_bar = 0.0;
    for (const double b : model.beta_i) beta_bar += b;
    beta_bar /= static_cast<double>(model.beta_i.size());
  }
  if (!model.gamma_i.empty()) {
    gamma_bar = 0.0;
    for (const double g : model.gamma_i) gamma_bar += g;
    gamma_bar /= static_cast<double>(model.gamma_i.size());
  }
  // f(1) - f(0) taken symbolically: sin(pi) does not round to zero in
  // floating point, but the sine contrast cancels exactly.
  double contrast = 1.0;
  switch (model.f_kind) {
    case ExposureEffect::linear: contrast = 1.0; break;
    case ExposureEffect::sigmoid: contrast = std::exp(-1.0) - 1.0; break;
    case ExposureEffect::sine: contrast = 0.0; break;
  }
  return beta_bar + gamma_bar * contrast;
}

}  // namespace adathresh
