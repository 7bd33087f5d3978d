#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dsbmm/design.hpp"
#include "dsbmm/emission.hpp"
#include "dsbmm/panel.hpp"
#include "dsbmm/rng.hpp"
#include "dsbmm/transition.hpp"

namespace dsbmm {

/// Row-normalised prediction and filter probabilities, T x Q.
struct FilterSequence {
  Eigen::MatrixXd predicted;
  Eigen::MatrixXd filtered;
};

struct FfbsOptions {
  /// Include the other layers' transition terms at t+1 in which this
  /// layer's state at t is a conditioning variable. Off reproduces the
  /// recursion that conditions only on the node's own chain.
  bool feedback = true;
  /// Random node order per layer and sweep instead of ascending.
  bool randomize_scan = false;
  /// Update all nodes of a layer from the pre-sweep state. Approximate.
  bool synchronous = false;
};

/// Transition tables P_l(q | joint previous state) for every layer.
std::vector<Eigen::MatrixXd> transition_tables(const TransitionParams& kappa, const DesignLayout& layout);

/// Emission log-likelihood of node i in one layer for every (t, q), T x Q.
Eigen::MatrixXd node_emission(int i, int layer, const MultiLayerPanel& panel, const MembershipState& z,
                              const LayerConnectivity& params);

/// Log of the cross-layer factors prod_{m != l} P_m(Z^m_{i,t+1} | state at t
/// with Z^l_it = q) for every (t, q); the row t = T-1 is zero.
Eigen::MatrixXd feedback_terms(int i, int layer, const MembershipState& z, const std::vector<Eigen::MatrixXd>& tables,
                               const DesignLayout& layout);

/// Forward pass given the per-(t,q) log evidence (emission plus any
/// feedback). Throws NumericalUnderflow when a filter row vanishes.
FilterSequence forward_filter(int i, int layer, const Eigen::MatrixXd& log_evidence, const MembershipState& z,
                              const Eigen::VectorXd& alpha, const std::vector<Eigen::MatrixXd>& tables,
                              const DesignLayout& layout);

FilterSequence forward_filter(int i, int layer, const MultiLayerPanel& panel, const MembershipState& z,
                              const ConnectivityParams& params, const TransitionParams& kappa,
                              const DesignLayout& layout, const FfbsOptions& options = {});

/// Backward draw of node i's chain in one layer.
std::vector<int> backward_sample(const FilterSequence& seq, int i, int layer, const MembershipState& z,
                                 const std::vector<Eigen::MatrixXd>& tables, const DesignLayout& layout,
                                 RngStream& rng);

std::vector<int> backward_sample(const FilterSequence& seq, int i, int layer, const MembershipState& z,
                                 const TransitionParams& kappa, const DesignLayout& layout, RngStream& rng);

/// One scan over (layer, node): layers ascending, nodes ascending unless
/// randomized; each chain is redrawn given the current values of all others.
MembershipState sample_memberships(const MultiLayerPanel& panel, const MembershipState& z,
                                   const ConnectivityParams& params, const TransitionParams& kappa,
                                   const DesignLayout& layout, RngStream& rng, const FfbsOptions& options = {});

}  // namespace dsbmm
