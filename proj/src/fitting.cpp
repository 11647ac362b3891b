#include "qdspin/fitting.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "qdspin/errors.hpp"
#include "qdspin/units.hpp"

namespace qdspin::fitting {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double FitResult::at(const std::string& name) const {
  auto it = parameters.find(name);
  if (it == parameters.end()) throw DomainError("fit parameter not found: " + name);
  return it->second;
}

double FitResult::sigma(const std::string& name) const {
  auto it = uncertainties.find(name);
  if (it == uncertainties.end()) throw DomainError("fit uncertainty not found: " + name);
  return it->second;
}

namespace {

double rss_of(const ModelFn& model, const std::vector<double>& p, const std::vector<double>& x,
              const std::vector<double>& y, const std::vector<double>& w) {
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - model(x[i], p);
    rss += (w.empty() ? 1.0 : w[i]) * r * r;
  }
  return rss;
}

}  // namespace

FitResult levenberg_fit(const ModelFn& model, const std::vector<std::string>& names,
                        std::vector<double> p, const std::vector<double>& x,
                        const std::vector<double>& y, const std::vector<double>& weights) {
  if (x.size() != y.size()) throw DomainError("fit: x/y size mismatch");
  if (!weights.empty() && weights.size() != x.size())
    throw DomainError("fit: weight size mismatch");
  const int np = static_cast<int>(p.size());
  const int n = static_cast<int>(x.size());
  if (n < np) throw DomainError("fit: fewer points than parameters");

  FitResult out;

  double lambda = 1e-3;
  double rss = rss_of(model, p, x, y, weights);
  const int max_iter = 200;
  int iter = 0;
  bool converged = false;

  MatrixXd jac(n, np);
  VectorXd resid(n);

  for (; iter < max_iter; ++iter) {
    // numeric Jacobian, forward differences
    for (int j = 0; j < np; ++j) {
      const double h = 1e-7 * std::max(1e-12, std::abs(p[j]));
      std::vector<double> ph = p;
      ph[j] += h;
      for (int i = 0; i < n; ++i) {
        jac(i, j) = (model(x[i], ph) - model(x[i], p)) / h;
      }
    }
    for (int i = 0; i < n; ++i) resid(i) = y[i] - model(x[i], p);
    if (!weights.empty()) {
      for (int i = 0; i < n; ++i) {
        const double sw = std::sqrt(std::max(0.0, weights[i]));
        resid(i) *= sw;
        jac.row(i) *= sw;
      }
    }

    const MatrixXd jtj = jac.transpose() * jac;
    const VectorXd jtr = jac.transpose() * resid;

    bool improved = false;
    for (int attempt = 0; attempt < 16; ++attempt) {
      MatrixXd a = jtj;
      for (int j = 0; j < np; ++j) a(j, j) += lambda * std::max(jtj(j, j), 1e-30);
      const VectorXd step = a.ldlt().solve(jtr);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      std::vector<double> pt = p;
      for (int j = 0; j < np; ++j) pt[j] += step(j);
      const double rss_t = rss_of(model, pt, x, y, weights);
      if (rss_t <= rss && std::isfinite(rss_t)) {
        double rel_step = 0.0;
        for (int j = 0; j < np; ++j)
          rel_step = std::max(rel_step, std::abs(step(j)) / std::max(1e-12, std::abs(pt[j])));
        p = pt;
        rss = rss_t;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (rel_step < 1e-9) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (converged) break;
    if (!improved) {
      // vanishing gradient in a flat valley counts as converged
      if (jtr.norm() < 1e-12 * (1.0 + std::sqrt(rss))) converged = true;
      break;
    }
  }

  out.converged = converged;
  out.iterations = iter + 1;
  out.rss = rss;
  out.model = "custom";

  // covariance from the final Jacobian, scaled by reduced chi^2
  for (int j = 0; j < np; ++j) {
    const double h = 1e-7 * std::max(1e-12, std::abs(p[j]));
    std::vector<double> ph = p;
    ph[j] += h;
    for (int i = 0; i < n; ++i) jac(i, j) = (model(x[i], ph) - model(x[i], p)) / h;
  }
  if (!weights.empty()) {
    for (int i = 0; i < n; ++i) jac.row(i) *= std::sqrt(std::max(0.0, weights[i]));
  }
  MatrixXd jtj = jac.transpose() * jac;
  for (int j = 0; j < np; ++j) jtj(j, j) += 1e-300;
  const MatrixXd cov = jtj.inverse();
  const double dof = std::max(1, n - np);
  const double s2 = rss / dof;

  for (int j = 0; j < np; ++j) {
    out.parameters[names[j]] = p[j];
    const double var = cov(j, j) * s2;
    out.uncertainties[names[j]] = var > 0.0 && std::isfinite(var) ? std::sqrt(var) : 0.0;
  }
  return out;
}

namespace {

// spectral peak over a dense frequency grid (handles non-uniform x)
double spectral_peak_frequency(const std::vector<double>& x, const std::vector<double>& y) {
  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  const double span = *xmax_it - *xmin_it;
  if (span <= 0.0) return 0.0;

  double dx_min = span;
  std::vector<double> xs = x;
  std::sort(xs.begin(), xs.end());
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] - xs[i - 1] > 0.0) dx_min = std::min(dx_min, xs[i] - xs[i - 1]);

  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  const double f_max = 0.5 / dx_min;
  const double f_min = 0.25 / span;
  const int ngrid = 4000;

  double best_f = 0.0, best_p = -1.0;
  for (int k = 1; k <= ngrid; ++k) {
    const double f = f_min + (f_max - f_min) * k / ngrid;
    std::complex<double> s(0.0, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      s += (y[i] - mean) * std::exp(std::complex<double>(0.0, -units::kTwoPi * f * x[i]));
    }
    const double power = std::norm(s);
    if (power > best_p) {
      best_p = power;
      best_f = f;
    }
  }
  return best_f;
}

}  // namespace

FitResult fit_sinusoid(const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& weights) {
  if (x.size() < 8) throw DomainError("fit_sinusoid: need at least 8 points");

  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  if (*ymax - *ymin <= 0.0) {
    FitResult flat;
    flat.model = "sinusoid";
    flat.converged = false;
    flat.parameters = {{"amplitude", 0.0},
                       {"frequency", 0.0},
                       {"phase", 0.0},
                       {"offset", y.empty() ? 0.0 : y[0]}};
    flat.uncertainties = {{"amplitude", 0.0}, {"frequency", 0.0}, {"phase", 0.0}, {"offset", 0.0}};
    return flat;
  }

  const double f0 = spectral_peak_frequency(x, y);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();

  // linear LS for amplitude/phase at the seeded frequency
  double sc = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sc += (y[i] - mean) * std::cos(units::kTwoPi * f0 * x[i]);
    ss += (y[i] - mean) * std::sin(units::kTwoPi * f0 * x[i]);
  }
  const double amp0 = 2.0 * std::hypot(sc, ss) / x.size();
  const double phase0 = std::atan2(sc, ss);

  ModelFn model = [](double t, const std::vector<double>& p) {
    return p[3] + p[0] * std::sin(units::kTwoPi * p[1] * t + p[2]);
  };
  auto res = levenberg_fit(model, {"amplitude", "frequency", "phase", "offset"},
                           {amp0, f0, phase0, mean}, x, y, weights);
  res.model = "sinusoid";
  if (res.parameters["amplitude"] < 0.0) {
    res.parameters["amplitude"] = -res.parameters["amplitude"];
    res.parameters["phase"] += std::numbers::pi;
  }
  res.parameters["phase"] = std::remainder(res.parameters["phase"], units::kTwoPi);
  // a fit that collapsed to zero amplitude explains nothing
  if (res.parameters["amplitude"] < 1e-9 * std::abs(*ymax - *ymin)) res.converged = false;
  return res;
}

FitResult fit_gaussian_decay(const std::vector<double>& t, const std::vector<double>& amp,
                             const std::vector<double>& weights) {
  if (t.size() < 5) throw DomainError("fit_gaussian_decay: need at least 5 points");
  const double a0 = *std::max_element(amp.begin(), amp.end());
  const double tmax = *std::max_element(t.begin(), t.end());
  if (a0 <= 0.0) throw DomainError("fit_gaussian_decay: amplitudes must be positive-biased");

  // time-constant seed from the first crossing of a0/e
  double t2_seed = tmax > 0.0 ? 0.5 * tmax : 1.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (amp[i] < a0 / std::numbers::e && t[i] > 0.0) {
      t2_seed = t[i];
      break;
    }
  }

  ModelFn model = [](double x, const std::vector<double>& p) {
    const double z = x / p[1];
    return p[0] * std::exp(-z * z);
  };
  auto res = levenberg_fit(model, {"a0", "t2star"}, {a0, t2_seed}, t, amp, weights);
  res.model = "gaussian_decay";
  res.parameters["t2star"] = std::abs(res.parameters["t2star"]);
  if (res.at("t2star") > 100.0 * std::max(tmax, 1e-300)) res.converged = false;  // non-decaying
  return res;
}

FitResult fit_exponential_decay(const std::vector<double>& t, const std::vector<double>& amp,
                                const std::vector<double>& weights) {
  if (t.size() < 5) throw DomainError("fit_exponential_decay: need at least 5 points");
  const double a0 = *std::max_element(amp.begin(), amp.end());
  const double tmax = *std::max_element(t.begin(), t.end());
  if (a0 <= 0.0) throw DomainError("fit_exponential_decay: amplitudes must be positive-biased");

  double t2_seed = tmax > 0.0 ? 0.5 * tmax : 1.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (amp[i] < a0 / std::numbers::e && t[i] > 0.0) {
      t2_seed = t[i];
      break;
    }
  }

  ModelFn model = [](double x, const std::vector<double>& p) {
    return p[0] * std::exp(-x / p[1]);
  };
  auto res = levenberg_fit(model, {"a0", "t2"}, {a0, t2_seed}, t, amp, weights);
  res.model = "exponential_decay";
  res.parameters["t2"] = std::abs(res.parameters["t2"]);
  if (res.at("t2") > 100.0 * std::max(tmax, 1e-300)) res.converged = false;
  return res;
}

FitResult fit_gaussian_profile(const std::vector<double>& x, const std::vector<double>& y,
                               const std::vector<double>& weights) {
  if (x.size() < 5) throw DomainError("fit_gaussian_profile: need at least 5 points");
  const auto imax = std::distance(y.begin(), std::max_element(y.begin(), y.end()));
  const double baseline = *std::min_element(y.begin(), y.end());
  const double height = y[imax] - baseline;
  const double center = x[imax];

  // half-maximum crossing estimate for the width seed
  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  double half_width = 0.25 * (*xmax_it - *xmin_it);
  for (std::size_t i = imax; i < x.size(); ++i) {
    if (y[i] - baseline < 0.5 * height) {
      half_width = std::abs(x[i] - center);
      break;
    }
  }
  const double sigma0 = std::max(half_width / 1.1774, 1e-3 * (*xmax_it - *xmin_it));

  ModelFn model = [](double xx, const std::vector<double>& p) {
    const double z = (xx - p[1]) / p[2];
    return p[3] + p[0] * std::exp(-0.5 * z * z);
  };
  auto res = levenberg_fit(model, {"height", "center", "sigma", "baseline"},
                           {height, center, sigma0, baseline}, x, y, weights);
  res.model = "gaussian_profile";
  res.parameters["sigma"] = std::abs(res.parameters["sigma"]);
  res.parameters["fwhm"] = units::sigma_to_fwhm(res.parameters["sigma"]);
  res.uncertainties["fwhm"] = units::sigma_to_fwhm(res.uncertainties["sigma"]);

  // flag peaks pinned to the scan boundary
  const double margin = 0.02 * (*xmax_it - *xmin_it);
  if (res.at("center") <= *xmin_it + margin || res.at("center") >= *xmax_it - margin)
    res.converged = false;
  return res;
}

EnvelopeSelection select_envelope_model(const std::vector<double>& t,
                                        const std::vector<double>& amp) {
  EnvelopeSelection sel;
  sel.gaussian = fit_gaussian_decay(t, amp);
  sel.exponential = fit_exponential_decay(t, amp);
  if (!sel.gaussian.converged || !sel.exponential.converged) {
    sel.model = "inconclusive";
    sel.rss_ratio = 0.0;
    return sel;
  }
  sel.rss_ratio = sel.gaussian.rss / std::max(sel.exponential.rss, 1e-300);
  if (std::abs(sel.rss_ratio - 1.0) < 0.01) {
    sel.model = "inconclusive";
  } else {
    sel.model = sel.rss_ratio < 1.0 ? "gaussian" : "exponential";
  }
  return sel;
}

double fidelity_from_visibility(double v) {
  if (v < 0.0 || v > 1.0) throw DomainError("visibility outside [0,1]");
  return 0.5 * (1.0 + std::sqrt(v));
}

}  // namespace qdspin::fitting
