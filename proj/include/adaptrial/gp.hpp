#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "adaptrial/errors.hpp"

namespace adaptrial {

/// RBF kernel hyperparameters. Both are standard-deviation scale, so the
/// prior covariance at zero distance is signal_amplitude^2.
struct KernelSpec {
  double length_scale = 2.0;
  double signal_amplitude = 1.0;
};

inline void validate(const KernelSpec& spec) {
  if (!(spec.length_scale > 0.0) || !std::isfinite(spec.length_scale))
    throw ValidationError("kernel.length_scale", "must be a positive finite real");
  if (!(spec.signal_amplitude > 0.0) || !std::isfinite(spec.signal_amplitude))
    throw ValidationError("kernel.signal_amplitude", "must be a positive finite real");
}

/// One (dose, outcome) pair.
struct Observation {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Trial data in observation order: index i is trial step i+1.
using ObservationSet = std::vector<Observation>;

/// k(x1,x2) = amplitude^2 * exp(-(x1-x2)^2 / (2 * length^2))
inline double rbf_kernel(double x1, double x2, const KernelSpec& spec) {
  const double d = x1 - x2;
  const double l = spec.length_scale;
  return spec.signal_amplitude * spec.signal_amplitude * std::exp(-d * d / (2.0 * l * l));
}

/// Diagonal jitter added before factorization. Stabilizes near-duplicate
/// doses; negligible against the default noise variance 0.01.
inline constexpr double kGramJitter = 1e-10;

/// Fitted GP state. Immutable after fit_posterior and safe to share across
/// threads for read-only prediction. An empty model is the prior.
///
/// `factor` is the lower Cholesky triangle of (K + noise^2 I + jitter I),
/// packed row-major: element (i,j), j <= i, lives at i*(i+1)/2 + j.
struct PosteriorModel {
  KernelSpec spec;
  double noise_std = 0.0;
  std::vector<double> train_x;
  std::vector<double> factor;
  std::vector<double> weights;

  std::size_t size() const { return train_x.size(); }
  bool empty() const { return train_x.empty(); }
  double factor_at(std::size_t i, std::size_t j) const { return factor[i * (i + 1) / 2 + j]; }
};

/// Builds the Gram matrix, factorizes it with jitter, and solves for the
/// weight vector. Empty data yields the prior model.
inline PosteriorModel fit_posterior(const ObservationSet& data, const KernelSpec& spec,
                                    double noise_std) {
  validate(spec);
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw ValidationError("noise_std", "must be a non-negative finite real");

  PosteriorModel model;
  model.spec = spec;
  model.noise_std = noise_std;
  const std::size_t n = data.size();
  if (n == 0) return model;

  model.train_x.resize(n);
  for (std::size_t i = 0; i < n; ++i) model.train_x[i] = data[i].x;

  // Packed lower triangle of K + (noise^2 + jitter) I.
  std::vector<double>& a = model.factor;
  a.resize(n * (n + 1) / 2);
  const double diag_add = noise_std * noise_std + kGramJitter;
  for (std::size_t i = 0, idx = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j, ++idx) {
      a[idx] = rbf_kernel(model.train_x[i], model.train_x[j], spec);
      if (i == j) a[idx] += diag_add;
    }
  }

  // In-place Cholesky on the packed triangle.
  for (std::size_t i = 0; i < n; ++i) {
    double* row_i = a.data() + i * (i + 1) / 2;
    for (std::size_t j = 0; j < i; ++j) {
      const double* row_j = a.data() + j * (j + 1) / 2;
      double s = row_i[j];
      for (std::size_t k = 0; k < j; ++k) s -= row_i[k] * row_j[k];
      row_i[j] = s / row_j[j];
    }
    double s = row_i[i];
    for (std::size_t k = 0; k < i; ++k) s -= row_i[k] * row_i[k];
    if (!(s > 0.0))
      throw FactorizationFailure("Gram matrix not positive definite after jitter; "
                                 "degenerate hyperparameters or duplicate doses with zero noise");
    row_i[i] = std::sqrt(s);
  }

  // alpha = (L L^T)^-1 y  via forward then backward substitution.
  std::vector<double>& w = model.weights;
  w.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = data[i].y;
    const double* row_i = a.data() + i * (i + 1) / 2;
    for (std::size_t k = 0; k < i; ++k) s -= row_i[k] * w[k];
    w[i] = s / row_i[i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = w[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a[k * (k + 1) / 2 + ii] * w[k];
    w[ii] = s / a[ii * (ii + 1) / 2 + ii];
  }
  return model;
}

/// mu(x) = k*(x)^T alpha; the prior model returns 0.
inline double posterior_mean(const PosteriorModel& model, double x) {
  double s = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i)
    s += model.weights[i] * rbf_kernel(x, model.train_x[i], model.spec);
  return s;
}

/// sigma(x) = sqrt(k(x,x) - k*(x)^T (K + noise^2 I)^-1 k*(x)), clamped at 0
/// against round-off. Excludes observation noise: this bands the latent
/// curve, not new outcomes. The prior model returns signal_amplitude.
inline double posterior_std(const PosteriorModel& model, double x) {
  const double kxx = rbf_kernel(x, x, model.spec);
  if (model.empty()) return std::sqrt(kxx);
  const std::size_t n = model.size();
  // v = L^-1 k*, then var = k(x,x) - v^T v.
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = rbf_kernel(x, model.train_x[i], model.spec);
  double vtv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = v[i];
    const double* row_i = model.factor.data() + i * (i + 1) / 2;
    for (std::size_t k = 0; k < i; ++k) s -= row_i[k] * v[k];
    v[i] = s / row_i[i];
    vtv += v[i] * v[i];
  }
  const double var = kxx - vtv;
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

/// d mu/dx = sum_i alpha_i (x_i - x)/l^2 k(x, x_i); analytic RBF derivative.
inline double posterior_mean_deriv(const PosteriorModel& model, double x) {
  const double l2 = model.spec.length_scale * model.spec.length_scale;
  double s = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double xi = model.train_x[i];
    s += model.weights[i] * ((xi - x) / l2) * rbf_kernel(x, xi, model.spec);
  }
  return s;
}

}  // namespace adaptrial
