#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace qdspin::fitting {

struct FitResult {
  std::map<std::string, double> parameters;
  std::map<std::string, double> uncertainties;  // 1 sigma
  double rss = 0.0;
  std::string model;
  bool converged = false;
  int iterations = 0;

  double at(const std::string& name) const;
  double sigma(const std::string& name) const;
};

// Damped least squares over a user model. Weights (optional) multiply the
// squared residuals; pass 1/sigma_i^2. Convergence: relative parameter step
// below 1e-9 or 200 iterations (flagged, never silent).
using ModelFn = std::function<double(double x, const std::vector<double>& p)>;

FitResult levenberg_fit(const ModelFn& model, const std::vector<std::string>& names,
                        std::vector<double> p0, const std::vector<double>& x,
                        const std::vector<double>& y,
                        const std::vector<double>& weights = {});

// y = offset + amplitude sin(2 pi f x + phase); frequency seeded from a
// spectral peak before refinement. Degenerate (flat) data is flagged.
FitResult fit_sinusoid(const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& weights = {});

// amp = a0 exp(-(t/t2star)^2)
FitResult fit_gaussian_decay(const std::vector<double>& t, const std::vector<double>& amp,
                             const std::vector<double>& weights = {});

// amp = a0 exp(-t/t2)
FitResult fit_exponential_decay(const std::vector<double>& t, const std::vector<double>& amp,
                                const std::vector<double>& weights = {});

// signal = baseline + height exp(-(x-center)^2 / (2 s^2)), fwhm reported
FitResult fit_gaussian_profile(const std::vector<double>& x, const std::vector<double>& y,
                               const std::vector<double>& weights = {});

struct EnvelopeSelection {
  std::string model;  // "gaussian", "exponential" or "inconclusive"
  double rss_ratio = 0.0;  // gaussian rss / exponential rss
  FitResult gaussian;
  FitResult exponential;
};

// Fits both decay models and picks the lower residual; ratios within 1% are
// inconclusive.
EnvelopeSelection select_envelope_model(const std::vector<double>& t,
                                        const std::vector<double>& amp);

// F = (1 + sqrt(v)) / 2 for two identical imperfect pulses.
double fidelity_from_visibility(double v);

}  // namespace qdspin::fitting
