#include "dsbmm/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dsbmm/errors.hpp"

namespace dsbmm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTrunc = 0.64;
constexpr double kTruncRecip = 1.0 / kTrunc;

double log_norm_cdf(double x) {
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Mills ratio asymptotics
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * kPi) + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// n-th term of the alternating series for the J*(1, 0) density
double series_term(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kTrunc) return k * std::exp(-0.5 * k * k * x);
  if (x > 0.0) {
    const double e = -1.5 * (std::log(0.5 * kPi) + std::log(x)) + std::log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x;
    return std::exp(e);
  }
  return 0.0;
}

// probability of proposing from the truncated exponential piece
double exponential_mass(double z) {
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double b = std::sqrt(1.0 / kTrunc) * (kTrunc * z - 1.0);
  const double a = -std::sqrt(1.0 / kTrunc) * (kTrunc * z + 1.0);
  const double x0 = std::log(fz) + fz * kTrunc;
  const double xb = x0 - z + log_norm_cdf(b);
  const double xa = x0 + z + log_norm_cdf(a);
  const double q_over_p = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + q_over_p);
}

// inverse Gaussian(1/z, 1) truncated to (0, kTrunc)
double truncated_inverse_gaussian(double z, RngStream& rng) {
  double x = kTrunc + 1.0;
  if (kTruncRecip > z) {
    double alpha = 0.0;
    while (rng.uniform() > alpha) {
      double e1 = rng.exponential();
      double e2 = rng.exponential();
      while (e1 * e1 > 2.0 * e2 / kTrunc) {
        e1 = rng.exponential();
        e2 = rng.exponential();
      }
      x = 1.0 + e1 * kTrunc;
      x = kTrunc / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
    }
  } else {
    const double mu = 1.0 / z;
    while (x > kTrunc) {
      double y = rng.normal();
      y *= y;
      const double half_mu = 0.5 * mu;
      const double mu_y = mu * y;
      x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
      if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    }
  }
  return x;
}

}  // namespace

double sample_polya_gamma(double z, RngStream& rng) {
  if (!std::isfinite(z)) throw Error(ErrorCode::NonFiniteParameter, "PG(1, z) needs finite z");
  // PG(1, z) = J*(1, z/2) / 4
  const double h = 0.5 * std::fabs(z);
  const double fz = 0.125 * kPi * kPi + 0.5 * h * h;
  const double mass = exponential_mass(h);
  for (;;) {
    double x;
    if (rng.uniform() < mass) {
      x = kTrunc + rng.exponential() / fz;
    } else {
      x = truncated_inverse_gaussian(h, rng);
    }
    double s = series_term(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_term(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_term(n, x);
        if (y > s) break;
      }
    }
  }
}

double polya_gamma_mean(double z) {
  const double a = std::fabs(z);
  if (a < 1e-6) return 0.25 - a * a / 48.0;
  return std::tanh(0.5 * a) / (2.0 * a);
}

double sample_gamma(double shape, double scale, RngStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale)) {
    throw Error(ErrorCode::InvalidParameter, "gamma needs positive finite shape and scale");
  }
  return rng.gamma(shape) * scale;
}

double sample_gig(double a, double b, RngStream& rng) {
  if (!(a > 0.0) || !(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw Error(ErrorCode::InvalidParameter, "GIG(1/2, a, b) needs a > 0 and b >= 0");
  }
  const double mu = std::sqrt(a / std::max(b, 0.0));
  if (b == 0.0 || !(mu < 1e100)) {
    // density x^{-1/2} exp(-a x / 2): Gamma(1/2, rate a/2)
    return rng.gamma(0.5) * 2.0 / a;
  }
  // 1/X ~ GIG(-1/2, b, a) = inverse Gaussian(mean sqrt(a/b), shape a);
  // Michael-Schucany-Haas with the numerically stable root.
  const double lambda = a;
  const double n = rng.normal();
  const double y = n * n;
  const double big = mu + mu * mu * y / (2.0 * lambda) + mu / (2.0 * lambda) * std::sqrt(4.0 * mu * lambda * y + mu * mu * y * y);
  const double small = mu * mu / big;
  const double inv = (rng.uniform() <= mu / (mu + small)) ? small : big;
  return 1.0 / inv;
}

double sample_beta(double a, double b, RngStream& rng) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::InvalidParameter, "beta needs positive parameters");
  const double x = rng.gamma(a);
  const double y = rng.gamma(b);
  return x / (x + y);
}

double sample_inverse_gamma(double shape, double scale, RngStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale)) {
    throw Error(ErrorCode::InvalidParameter, "inverse gamma needs positive shape and scale");
  }
  return scale / rng.gamma(shape);
}

std::vector<double> sample_dirichlet(std::span<const double> conc, RngStream& rng) {
  if (conc.empty()) throw Error(ErrorCode::InvalidParameter, "empty Dirichlet concentration");
  for (double c : conc)
    if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorCode::InvalidParameter, "Dirichlet concentration must be > 0");
  std::vector<double> g(conc.size());
  double total = 0.0;
  for (std::size_t k = 0; k < conc.size(); ++k) {
    g[k] = rng.gamma(conc[k]);
    total += g[k];
  }
  for (double& v : g) v /= total;
  return g;
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, RngStream& rng) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw Error(ErrorCode::DimensionMismatch, "covariance shape does not match mean");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositiveDefinite, "covariance Cholesky failed");
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
  return mean + llt.matrixL() * z;
}

Eigen::VectorXd sample_mvn_canonical(const Eigen::VectorXd& b, const Eigen::MatrixXd& precision, RngStream& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositiveDefinite, "precision Cholesky failed");
  Eigen::VectorXd mean = llt.solve(b);
  Eigen::VectorXd z(b.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
  // P = L L' ; L' u = z gives u ~ N(0, P^{-1})
  return mean + llt.matrixU().solve(z);
}

int sample_categorical(std::span<const double> probs, RngStream& rng) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw Error(ErrorCode::NotASimplex, "negative or NaN probability");
    total += p;
  }
  if (probs.empty() || std::fabs(total - 1.0) > 1e-9) throw Error(ErrorCode::NotASimplex, "probabilities do not sum to 1");
  return sample_weighted(probs, rng);
}

int sample_weighted(std::span<const double> w, RngStream& rng) {
  double total = 0.0;
  for (double v : w) total += v;
  const double u = rng.uniform() * total;
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] > 0.0) last_positive = static_cast<int>(k);
    acc += w[k];
    if (u < acc) return static_cast<int>(k);
  }
  return last_positive;
}

}  // namespace dsbmm
