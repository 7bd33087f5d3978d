#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsbmm/design.hpp"
#include "dsbmm/emission.hpp"
#include "dsbmm/ffbs.hpp"
#include "dsbmm/panel.hpp"
#include "dsbmm/rng.hpp"
#include "dsbmm/transition.hpp"

namespace dsbmm {

struct PriorConfig {
  EmissionPrior emission;
  TransitionPrior transition;
};

/// Default hyperparameters for the given panel geometry.
PriorConfig default_prior(const std::vector<LayerSpec>& specs, PriorMode mode = PriorMode::GroupLasso);

struct FitConfig {
  long iterations = 2000;
  long burn_in = 1000;
  long thinning = 1;
  PriorMode prior_mode = PriorMode::GroupLasso;
  std::uint64_t seed = 1;
  bool randomize_scan = false;
  /// Include cross-layer transition factors in FFBS.
  bool feedback = true;
  /// Write the store every k iterations when an output directory is given
  /// (0: only at the end).
  long checkpoint_every = 0;
  int kmeans_restarts = 10;

  /// Throws InvalidParameter.
  void validate() const;
  bool retains(long iteration) const { return iteration > burn_in && (iteration - burn_in) % thinning == 0; }
  long retained_count() const { return iterations > burn_in ? (iterations - burn_in) / thinning : 0; }
};

/// Complete Markov state of one chain.
struct SamplerState {
  MembershipState z;
  ConnectivityParams params;
  TransitionParams kappa;
  ShrinkageState shrinkage;
  AuxOmega omega;
  long iteration = 0;
  RngStream rng;
};

/// Time-invariant k-means labels per layer on time-averaged indicator
/// profiles (out- and in-rows for directed layers). Appends to `warnings`
/// when a layer falls back to random balanced labels.
MembershipState kmeans_memberships(const MultiLayerPanel& panel, RngStream& rng, int restarts,
                                   std::vector<std::string>* warnings = nullptr);

SamplerState initialize(const MultiLayerPanel& panel, const FitConfig& config, const PriorConfig& prior,
                        std::vector<std::string>* warnings = nullptr);

/// One full sweep: sigma2 and beta, nu, alpha, kappa (omega refreshed per
/// row), zeta2 and rho (group-LASSO mode), then memberships by FFBS.
void gibbs_sweep(const MultiLayerPanel& panel, SamplerState& state, const PriorConfig& prior,
                 const DesignLayout& layout, const FfbsOptions& options);

/// Complete-data log-likelihood: emissions, initial labels and transitions.
double complete_loglik(const MultiLayerPanel& panel, const MembershipState& z, const ConnectivityParams& params,
                       const TransitionParams& kappa, const DesignLayout& layout);

/// Joint draw of (parameters, shrinkage, memberships) from the prior.
SamplerState sample_from_prior(const std::vector<LayerSpec>& specs, int n_nodes, int n_times,
                               const PriorConfig& prior, RngStream& rng);

struct ChainStore {
  FitConfig config;
  PriorConfig prior;
  std::vector<LayerSpec> specs;
  int n_nodes = 0;
  int n_times = 0;
  std::string panel_digest;
  std::vector<long> retained;
  std::vector<ConnectivityParams> connectivity;
  std::vector<TransitionParams> kappa;
  /// Empty in normal-prior mode.
  std::vector<ShrinkageState> shrinkage;
  std::vector<MembershipState> z;
  /// One entry per completed iteration.
  std::vector<double> loglik;
  SamplerState state;
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;

  DesignLayout layout() const;
  std::size_t size() const { return retained.size(); }
};

using ProgressFn = std::function<void(long iteration, double loglik)>;

/// Runs a chain. When `out` is non-empty the store (with a copy of the
/// panel) is written there at every checkpoint and at the end.
ChainStore run(const MultiLayerPanel& panel, const FitConfig& config, const std::filesystem::path& out = {},
               const ProgressFn& progress = {});
ChainStore run(const MultiLayerPanel& panel, const FitConfig& config, const PriorConfig& prior,
               const std::filesystem::path& out = {}, const ProgressFn& progress = {});

/// Continues a stored chain by `extra_iterations`, writing back to the same
/// directory. Throws CorruptCheckpoint.
ChainStore resume(const std::filesystem::path& store_path, long extra_iterations, const ProgressFn& progress = {});

/// Directory layout: meta.json, checkpoint.json, draws/*.csv, z_draws.bin,
/// timing.json, panel/.
void save_chain(const ChainStore& store, const std::filesystem::path& dir);
ChainStore load_chain(const std::filesystem::path& dir);

nlohmann::json prior_to_json(const PriorConfig& prior);
PriorConfig prior_from_json(const nlohmann::json& j);
nlohmann::json fit_config_to_json(const FitConfig& config);
FitConfig fit_config_from_json(const nlohmann::json& j);

}  // namespace dsbmm
