#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dsbmm/design.hpp"
#include "dsbmm/panel.hpp"
#include "dsbmm/rng.hpp"

namespace dsbmm {

/// Multinomial transition coefficients. kappa[l] is (Q_l - 1) x (p + 1);
/// the reference block Q_l - 1 has an implicit zero row.
struct TransitionParams {
  std::vector<Eigen::MatrixXd> kappa;

  bool operator==(const TransitionParams& o) const;
};

/// Group-shrinkage state. zeta2[l] is (Q_l - 1) x n_groups; the entry for
/// the layer's own main-effect group is unused and held at zeta0^2.
struct ShrinkageState {
  std::vector<Eigen::MatrixXd> zeta2;
  std::vector<double> rho;

  /// gamma_U = rho * s(U).
  double gamma(int layer, const DesignLayout& layout, int group) const;
  bool operator==(const ShrinkageState& o) const;
};

/// Pólya-Gamma auxiliaries, omega[l][((i * (T-1)) + t - 1) * (Q_l - 1) + q]
/// for destination times t = 1..T-1.
struct AuxOmega {
  std::vector<std::vector<double>> omega;
  int n_nodes = 0;
  int n_times = 0;

  double& at(int l, int i, int t, int q, int q_minus_1) {
    return omega[l][(static_cast<std::size_t>(i) * (n_times - 1) + (t - 1)) * q_minus_1 + q];
  }
  double at(int l, int i, int t, int q, int q_minus_1) const {
    return omega[l][(static_cast<std::size_t>(i) * (n_times - 1) + (t - 1)) * q_minus_1 + q];
  }
  bool operator==(const AuxOmega& o) const = default;
};

enum class PriorMode { Normal, GroupLasso };

struct TransitionPrior {
  std::vector<Eigen::MatrixXd> mean;  // per layer, same shape as kappa
  double zeta0_sq = 10.0;
  double iota1 = 1.0;
  double iota2 = 0.6;
  PriorMode mode = PriorMode::GroupLasso;
};

/// Intercept -1, own-lag diagonal +1, everything else 0.
TransitionPrior default_transition_prior(const DesignLayout& layout, PriorMode mode = PriorMode::GroupLasso);

/// Softmax over destinations with the reference logit fixed at 0.
/// Throws DimensionMismatch.
std::vector<double> transition_probs(std::span<const double> design_row, const Eigen::MatrixXd& kappa_layer);

/// Linear predictors x'kappa_q of one joint state, one per non-reference q.
void state_logits(const DesignLayout& layout, int joint_index, const Eigen::MatrixXd& kappa_layer,
                  std::span<double> out);

/// Full table P_l(q | joint previous state): n_joint_states x Q_l.
Eigen::MatrixXd transition_table(const DesignLayout& layout, int layer, const Eigen::MatrixXd& kappa_layer);

/// Exact inverse of transition_table. Throws ZeroProbabilityEntry.
Eigen::MatrixXd kappa_from_table(const DesignLayout& layout, int layer, const Eigen::MatrixXd& table);

/// Prior variances on the diagonal of K for row q of a layer.
Eigen::VectorXd prior_variance(const DesignLayout& layout, int layer, int q, const ShrinkageState& shrinkage,
                               const TransitionPrior& prior);

/// Column indices exempt from shrinkage (intercept and own main effects).
bool shrinkage_exempt(const DesignLayout& layout, int layer, int column);

/// Observations of a layer's transition model: previous joint state and
/// destination label for every (i, t), t = 1..T-1, node-major.
struct TransitionData {
  std::vector<int> prev_state;
  std::vector<int> next_label;
};
TransitionData transition_data(const MembershipState& z, const DesignLayout& layout, int layer);

/// eta = x'kappa_q - log sum_{k != q} exp(x'kappa_k) per joint state.
Eigen::VectorXd partial_logit(const DesignLayout& layout, const Eigen::MatrixXd& kappa_layer, int q,
                              Eigen::VectorXd* log_normaliser = nullptr);

AuxOmega sample_omega(const MembershipState& z, const TransitionParams& kappa, const DesignLayout& layout,
                      RngStream& rng);

/// Gaussian full conditional of row q in canonical form.
struct KappaConditional {
  Eigen::MatrixXd precision;
  Eigen::VectorXd linear;
  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;
};

KappaConditional kappa_conditional(const TransitionData& data, const DesignLayout& layout, int layer, int q,
                                   const Eigen::MatrixXd& kappa_layer, const AuxOmega& omega,
                                   const ShrinkageState& shrinkage, const TransitionPrior& prior);

/// One systematic scan over the rows of every layer. With refresh_omega,
/// omega for row q is redrawn from PG(1, eta_q) at the current other rows
/// immediately before kappa_q; otherwise the supplied omega is used as is.
TransitionParams update_kappa(const MembershipState& z, const TransitionParams& current, AuxOmega& omega,
                              const ShrinkageState& shrinkage, const TransitionPrior& prior,
                              const DesignLayout& layout, RngStream& rng, bool refresh_omega = true);

/// zeta^2_{qU} ~ GIG(1/2, rho s(U), ||kappa_{U,q} - mean_{U,q}||^2) for every
/// shrinkage group; exempt entries left untouched.
void update_zeta(const TransitionParams& kappa, ShrinkageState& shrinkage, const TransitionPrior& prior,
                 const DesignLayout& layout, RngStream& rng);

/// Shape of the rho full conditional for one layer.
double rho_shape(const DesignLayout& layout, int layer, double iota1);
void update_rho(ShrinkageState& shrinkage, const TransitionPrior& prior, const DesignLayout& layout, RngStream& rng);

/// Shrinkage state at prior-mean values for a given rho.
ShrinkageState initial_shrinkage(const DesignLayout& layout, const TransitionPrior& prior);

/// Sum over observed transitions of log P_l(Z_it | Z_{i,t-1}).
double transition_loglik(const MembershipState& z, const TransitionParams& kappa, const DesignLayout& layout);

/// Number of free coefficients across all layers: sum_l (Q_l - 1)(p + 1).
int free_parameter_count(const DesignLayout& layout);

}  // namespace dsbmm
