#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dsbmm/panel.hpp"
#include "dsbmm/rng.hpp"

namespace dsbmm {

/// Connectivity and initial-partition parameters of one layer. beta holds
/// Q*Q coefficient vectors indexed q*Q + r; beta and sigma2 are empty on
/// unweighted layers.
struct LayerConnectivity {
  Eigen::MatrixXd nu;
  std::vector<Eigen::VectorXd> beta;
  Eigen::MatrixXd sigma2;
  Eigen::VectorXd alpha;

  const Eigen::VectorXd& beta_at(int q, int r) const { return beta[static_cast<std::size_t>(q) * nu.rows() + r]; }
  Eigen::VectorXd& beta_at(int q, int r) { return beta[static_cast<std::size_t>(q) * nu.rows() + r]; }
  bool operator==(const LayerConnectivity& o) const;
};

struct ConnectivityParams {
  std::vector<LayerConnectivity> layers;
  bool operator==(const ConnectivityParams& o) const = default;
};

/// Conjugate hyperparameters, one entry per layer where vector-valued.
/// beta_mean/beta_cov apply to every block pair of the layer.
struct EmissionPrior {
  std::vector<Eigen::VectorXd> beta_mean;
  std::vector<Eigen::MatrixXd> beta_cov;
  double d = 10.0;
  double e = 1.0;
  double b = 1.0;
  double c = 1.0;
  std::vector<Eigen::VectorXd> alpha_conc;
};

/// Length of the log-weight regressor of a weighted layer: covariate_dim,
/// or 1 (an implicit intercept) when the layer has no covariates.
int regressor_dim(const LayerSpec& spec);

/// Defaults: beta ~ N(0, I), sigma2 ~ IG(10/2, 1/2), nu ~ Beta(1, 1),
/// alpha ~ Dir(1).
EmissionPrior default_emission_prior(const std::vector<LayerSpec>& specs);

/// Parameters at prior-mean values.
ConnectivityParams initial_connectivity(const std::vector<LayerSpec>& specs, const EmissionPrior& prior);

/// Log density of one dyad-time. x may be empty when covariate_dim is 0.
/// Throws InconsistentEdge for d = 1 with y <= 0 on a weighted layer.
double edge_loglik(double y, bool d, std::span<const double> x, int q, int r, const LayerConnectivity& params,
                   const LayerSpec& spec);

/// Sum of the dyad terms involving node i at time t when Z_it = q, with
/// the other nodes' labels taken from z.
double node_loglik(int i, int t, int q, int layer, const MembershipState& z, const MultiLayerPanel& panel,
                   const LayerConnectivity& params);

/// Complete-data emission log-likelihood of one layer (dyads counted once
/// per ordered pair when directed, once per unordered pair when undirected).
double layer_emission_loglik(int layer, const MembershipState& z, const MultiLayerPanel& panel,
                             const LayerConnectivity& params);

/// Sum over i of log alpha_{Z_i1}.
double initial_loglik(int layer, const MembershipState& z, const LayerConnectivity& params);

/// Beta counts for a layer: present and eligible dyad-times per block pair.
struct PairCounts {
  Eigen::MatrixXd present;
  Eigen::MatrixXd total;
};
PairCounts pair_counts(int layer, const MembershipState& z, const MultiLayerPanel& panel);

/// Log-weight sufficient statistics per block pair (index q*Q + r).
struct RegressionStats {
  std::vector<Eigen::MatrixXd> xtx;
  std::vector<Eigen::VectorXd> xty;
  std::vector<double> yty;
  std::vector<long> count;
};
RegressionStats regression_stats(int layer, const MembershipState& z, const MultiLayerPanel& panel);

void update_nu(const MultiLayerPanel& panel, const MembershipState& z, const EmissionPrior& prior,
               ConnectivityParams& params, RngStream& rng);

/// sigma2 ~ IG((d + n)/2, (e + RSS(beta))/2) at the current beta, then
/// beta ~ N given the new sigma2. Throws SingularDesign if the posterior
/// precision cannot be factorised.
void update_beta_sigma(const MultiLayerPanel& panel, const MembershipState& z, const EmissionPrior& prior,
                       ConnectivityParams& params, RngStream& rng);

void update_alpha(const MembershipState& z, const EmissionPrior& prior, ConnectivityParams& params, RngStream& rng);

}  // namespace dsbmm
