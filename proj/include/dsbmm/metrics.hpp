#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dsbmm/dgp.hpp"
#include "dsbmm/gibbs.hpp"

namespace dsbmm {

/// Hubert-Arabie adjusted Rand index. Throws LengthMismatch.
double global_ari(std::span<const int> a, std::span<const int> b);

/// Per (i, t, l) modal label over retained draws, ties to the smallest
/// label. Throws EmptyChain.
MembershipState map_membership(const ChainStore& chain);

/// Maximum-weight assignment on a square matrix; result[row] = column.
std::vector<int> max_assignment(const Eigen::MatrixXd& weight);

/// perm[l][estimated label] = truth label, maximizing pooled agreement.
using Permutation = std::vector<int>;
std::vector<Permutation> align_labels(const MembershipState& estimate, const MembershipState& truth);

MembershipState relabel(const MembershipState& z, const std::vector<Permutation>& perm);
ConnectivityParams relabel(const ConnectivityParams& params, const std::vector<LayerSpec>& specs,
                           const std::vector<Permutation>& perm);
/// Permutes through the transition tables and re-inverts.
TransitionParams relabel(const TransitionParams& kappa, const DesignLayout& layout,
                         const std::vector<Permutation>& perm);
/// Relabels every retained draw (memberships, connectivity, kappa).
ChainStore relabel(const ChainStore& chain, const std::vector<Permutation>& perm);

/// Type-7 sample quantile.
double quantile(std::vector<double> values, double p);

enum class Family { Nu, Beta, Sigma2, Kappa };
const char* family_name(Family f);

/// Mean squared error of posterior medians against the truth for one layer.
/// Undirected layers average over unordered block pairs. Returns nullopt
/// when the family does not apply to the layer. Throws EmptyChain.
std::optional<double> mse(const ChainStore& chain, const ConnectivityParams& truth_params,
                          const TransitionParams& truth_kappa, Family family, int layer);

/// Fraction of shrinkage-eligible kappa coefficients of a layer whose
/// equal-tailed interval contains the truth. Throws EmptyChain.
double cic(const ChainStore& chain, const TransitionParams& truth, int layer, double level = 0.95);

/// Entry (m, l) is 1 when some layer-l coefficient in a subset containing m
/// has an equal-tailed interval excluding zero. Throws EmptyChain.
Eigen::MatrixXi gbc(const ChainStore& chain, double level = 0.95);

/// Causality structure implied by generator tables.
Eigen::MatrixXi true_gbc(const GeneratorConfig& config, double tol = 1e-9);

struct Diagnostics {
  double ac1 = 0.0;
  double ac5 = 0.0;
  double geweke_z = 0.0;
  double geweke_p = 0.0;
  double heidelberger_p = 0.0;
};

double autocorrelation(std::span<const double> x, int lag);
/// Spectral density at frequency zero of an AR model chosen by AIC.
double spectrum0_ar(std::span<const double> x);
/// Cramér-von Mises distribution function of the Brownian bridge statistic.
double pcramer(double q);
/// Throws ConstantChain, InvalidParameter for fewer than 50 values.
Diagnostics diagnostics(std::span<const double> x);

struct ParameterDiagnostics {
  std::string name;
  std::optional<Diagnostics> values;
};

struct EvaluationReport {
  int n_layers = 0;
  std::size_t retained = 0;
  bool has_truth = false;
  std::vector<double> global_ari;
  /// family -> per layer (nullopt where not applicable)
  std::vector<std::pair<Family, std::vector<std::optional<double>>>> mse;
  std::vector<double> cic;
  Eigen::MatrixXi gbc;
  Eigen::MatrixXi true_gbc;
  bool gbc_retrieved = false;
  std::vector<Permutation> alignment;
  std::vector<ParameterDiagnostics> diagnostics;
};

EvaluationReport evaluate(const ChainStore& chain, const GroundTruth* truth, double level = 0.95);
nlohmann::json report_to_json(const EvaluationReport& report);
/// Flat `metric,layer,family,value` table.
std::string report_to_csv(const EvaluationReport& report);

}  // namespace dsbmm
