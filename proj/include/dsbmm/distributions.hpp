#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dsbmm/rng.hpp"

namespace dsbmm {

/// Exact draw from PG(1, z) by the alternating-series rejection sampler
/// (Devroye's method as adapted by Polson, Scott and Windle).
double sample_polya_gamma(double z, RngStream& rng);

/// E[PG(1, z)] = tanh(z/2) / (2z), with the z -> 0 limit 1/4.
double polya_gamma_mean(double z);

/// Draw from GIG(1/2, a, b), density proportional to
/// x^{-1/2} exp(-(a x + b / x) / 2). b = 0 reduces to Gamma(1/2, rate a/2).
double sample_gig(double a, double b, RngStream& rng);

/// Gamma with shape and *scale*.
double sample_gamma(double shape, double scale, RngStream& rng);
double sample_beta(double a, double b, RngStream& rng);
double sample_inverse_gamma(double shape, double scale, RngStream& rng);
std::vector<double> sample_dirichlet(std::span<const double> concentration, RngStream& rng);

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance, RngStream& rng);

/// Draws N(P^{-1} b, P^{-1}) given the precision P and linear term b,
/// through one Cholesky factorisation of P. Throws NotPositiveDefinite.
Eigen::VectorXd sample_mvn_canonical(const Eigen::VectorXd& b, const Eigen::MatrixXd& precision, RngStream& rng);

/// Index k with probability probs[k]. Probabilities must be nonnegative and
/// sum to 1 within 1e-9.
int sample_categorical(std::span<const double> probs, RngStream& rng);

/// Same, for unnormalised nonnegative weights (no simplex check).
int sample_weighted(std::span<const double> weights, RngStream& rng);

}  // namespace dsbmm
