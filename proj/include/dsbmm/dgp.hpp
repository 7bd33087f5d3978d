#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dsbmm/design.hpp"
#include "dsbmm/emission.hpp"
#include "dsbmm/panel.hpp"
#include "dsbmm/rng.hpp"
#include "dsbmm/transition.hpp"

namespace dsbmm {

/// How dyad covariates are generated when a layer has covariate_dim > 0.
enum class CovariateLaw {
  /// i.i.d. standard normal entries.
  StandardNormal,
  /// Trade-style design (1, gdp_i, gdp_j, distance_ij); covariate_dim must be 4.
  Gravity,
};

struct GeneratorConfig {
  std::string name = "custom";
  std::vector<LayerSpec> specs;
  std::vector<Eigen::VectorXd> alpha;
  std::vector<Eigen::MatrixXd> nu;
  /// Per layer Q*Q coefficient vectors indexed q*Q + r (weighted layers).
  std::vector<std::vector<Eigen::VectorXd>> beta;
  std::vector<Eigen::MatrixXd> sigma2;
  /// Per layer n_joint_states x Q table; rows follow DesignLayout::joint_index.
  std::vector<Eigen::MatrixXd> transitions;
  CovariateLaw covariate_law = CovariateLaw::StandardNormal;

  DesignLayout layout() const;
  /// Connectivity parameters in the sampler's representation.
  ConnectivityParams connectivity() const;
};

struct GroundTruth {
  MembershipState memberships;
  TransitionParams kappa;
  GeneratorConfig config;
};

/// Throws InvalidConfig naming the first violated invariant.
void validate_config(const GeneratorConfig& config);

/// no_causality, unidirectional or bidirectional. Throws UnknownPreset and
/// TooFewNodes.
GeneratorConfig build_preset(std::string_view name, int n_nodes, int n_times);
std::vector<std::string> preset_names();

/// Two-layer trade-style configuration: a weighted directed layer with a
/// gravity design and an unweighted undirected layer.
GeneratorConfig trade_config();

TransitionParams transition_table_to_kappa(const GeneratorConfig& config);

std::pair<MultiLayerPanel, GroundTruth> simulate(const GeneratorConfig& config, int n_nodes, int n_times,
                                                 RngStream& rng);

/// Redraws every edge of a panel given memberships and parameters, keeping
/// the covariates already stored in it.
void simulate_edges(MultiLayerPanel& panel, const MembershipState& z, const ConnectivityParams& params,
                    RngStream& rng);

nlohmann::json config_to_json(const GeneratorConfig& config);
GeneratorConfig config_from_json(const nlohmann::json& j);

/// truth.json: memberships (1-based), kappa with layout description and the
/// full generator configuration.
nlohmann::json truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const nlohmann::json& j);

nlohmann::json kappa_to_json(const TransitionParams& kappa, const DesignLayout& layout);
TransitionParams kappa_from_json(const nlohmann::json& j);

}  // namespace dsbmm
