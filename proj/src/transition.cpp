#include "dsbmm/transition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dsbmm/distributions.hpp"
#include "dsbmm/errors.hpp"

namespace dsbmm {

namespace {

bool same_matrices(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].rows() != b[k].rows() || a[k].cols() != b[k].cols()) return false;
    if (a[k] != b[k]) return false;
  }
  return true;
}

}  // namespace

bool TransitionParams::operator==(const TransitionParams& o) const { return same_matrices(kappa, o.kappa); }

bool ShrinkageState::operator==(const ShrinkageState& o) const {
  return same_matrices(zeta2, o.zeta2) && rho == o.rho;
}

double ShrinkageState::gamma(int layer, const DesignLayout& layout, int group) const {
  return rho[layer] * layout.groups()[group].size;
}

TransitionPrior default_transition_prior(const DesignLayout& layout, PriorMode mode) {
  TransitionPrior prior;
  prior.mode = mode;
  for (int l = 0; l < layout.n_layers(); ++l) {
    const int qm1 = layout.n_blocks()[l] - 1;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(qm1, layout.row_length());
    const auto& own = layout.groups()[layout.main_group(l)];
    for (int q = 0; q < qm1; ++q) {
      m(q, 0) = -1.0;
      m(q, own.offset + q) = 1.0;
    }
    prior.mean.push_back(std::move(m));
  }
  return prior;
}

std::vector<double> transition_probs(std::span<const double> row, const Eigen::MatrixXd& kappa_layer) {
  if (static_cast<Eigen::Index>(row.size()) != kappa_layer.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "design row length " + std::to_string(row.size()) +
                                                  " vs kappa columns " + std::to_string(kappa_layer.cols()));
  }
  const Eigen::Index qm1 = kappa_layer.rows();
  std::vector<double> logits(qm1 + 1, 0.0);
  const Eigen::Map<const Eigen::VectorXd> x(row.data(), static_cast<Eigen::Index>(row.size()));
  for (Eigen::Index q = 0; q < qm1; ++q) logits[q] = kappa_layer.row(q).dot(x);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : logits) v /= total;
  return logits;
}

void state_logits(const DesignLayout& layout, int s, const Eigen::MatrixXd& kappa_layer, std::span<double> out) {
  const auto cols = layout.active_columns(s);
  for (Eigen::Index q = 0; q < kappa_layer.rows(); ++q) {
    double acc = 0.0;
    for (int c : cols) acc += kappa_layer(q, c);
    out[q] = acc;
  }
}

Eigen::MatrixXd transition_table(const DesignLayout& layout, int layer, const Eigen::MatrixXd& kappa_layer) {
  const int Q = layout.n_blocks()[layer];
  Eigen::MatrixXd table(layout.n_joint_states(), Q);
  std::vector<double> logits(Q, 0.0);
  for (int s = 0; s < layout.n_joint_states(); ++s) {
    state_logits(layout, s, kappa_layer, std::span<double>(logits.data(), Q - 1));
    logits[Q - 1] = 0.0;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (int q = 0; q < Q; ++q) total += std::exp(logits[q] - mx);
    for (int q = 0; q < Q; ++q) table(s, q) = std::exp(logits[q] - mx) / total;
  }
  return table;
}

Eigen::MatrixXd kappa_from_table(const DesignLayout& layout, int layer, const Eigen::MatrixXd& table) {
  const int Q = layout.n_blocks()[layer];
  if (table.rows() != layout.n_joint_states() || table.cols() != Q) {
    throw Error(ErrorCode::DimensionMismatch, "transition table shape does not match the layout");
  }
  for (int s = 0; s < table.rows(); ++s) {
    for (int q = 0; q < Q; ++q) {
      if (!(table(s, q) > 0.0)) {
        throw Error(ErrorCode::ZeroProbabilityEntry,
                    "layer " + std::to_string(layer + 1) + " row " + std::to_string(s) + " column " + std::to_string(q + 1));
      }
    }
  }
  const int L = layout.n_layers();
  std::vector<int> reference(L);
  for (int m = 0; m < L; ++m) reference[m] = layout.n_blocks()[m] - 1;

  Eigen::MatrixXd kappa = Eigen::MatrixXd::Zero(Q - 1, layout.row_length());
  auto log_odds = [&](const std::vector<int>& z, int q) {
    const int s = layout.joint_index(z);
    return std::log(table(s, q)) - std::log(table(s, Q - 1));
  };

  for (int q = 0; q < Q - 1; ++q) {
    kappa(q, 0) = log_odds(reference, q);
    for (int g = 0; g < static_cast<int>(layout.groups().size()); ++g) {
      const auto& grp = layout.groups()[g];
      const int k = static_cast<int>(grp.layers.size());
      std::vector<int> levels(k, 0);
      for (int within = 0; within < grp.size; ++within) {
        int rem = within;
        for (int a = k - 1; a >= 0; --a) {
          const int base = layout.n_blocks()[grp.layers[a]] - 1;
          levels[a] = rem % base;
          rem /= base;
        }
        // inclusion-exclusion over subsets V of U
        double acc = 0.0;
        for (unsigned mask = 0; mask < (1u << k); ++mask) {
          std::vector<int> z = reference;
          int bits = 0;
          for (int a = 0; a < k; ++a) {
            if (mask & (1u << a)) {
              z[grp.layers[a]] = levels[a];
              ++bits;
            }
          }
          acc += ((k - bits) % 2 == 0 ? 1.0 : -1.0) * log_odds(z, q);
        }
        kappa(q, grp.offset + within) = acc;
      }
    }
  }
  return kappa;
}

bool shrinkage_exempt(const DesignLayout& layout, int layer, int column) {
  if (column == 0) return true;
  const auto& own = layout.groups()[layout.main_group(layer)];
  return column >= own.offset && column < own.offset + own.size;
}

Eigen::VectorXd prior_variance(const DesignLayout& layout, int layer, int q, const ShrinkageState& shrinkage,
                               const TransitionPrior& prior) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(layout.row_length(), prior.zeta0_sq);
  if (prior.mode == PriorMode::Normal) return v;
  const int own = layout.main_group(layer);
  for (int g = 0; g < static_cast<int>(layout.groups().size()); ++g) {
    if (g == own) continue;
    const auto& grp = layout.groups()[g];
    v.segment(grp.offset, grp.size).setConstant(shrinkage.zeta2[layer](q, g));
  }
  return v;
}

TransitionData transition_data(const MembershipState& z, const DesignLayout& layout, int layer) {
  TransitionData data;
  const int N = z.n_nodes();
  const int T = z.n_times();
  if (T < 2) return data;
  data.prev_state.reserve(static_cast<std::size_t>(N) * (T - 1));
  data.next_label.reserve(static_cast<std::size_t>(N) * (T - 1));
  std::vector<int> joint(layout.n_layers());
  for (int i = 0; i < N; ++i) {
    for (int t = 1; t < T; ++t) {
      for (int m = 0; m < layout.n_layers(); ++m) joint[m] = z.at(i, t - 1, m);
      data.prev_state.push_back(layout.joint_index(joint));
      data.next_label.push_back(z.at(i, t, layer));
    }
  }
  return data;
}

Eigen::VectorXd partial_logit(const DesignLayout& layout, const Eigen::MatrixXd& kappa_layer, int q,
                              Eigen::VectorXd* log_normaliser) {
  const int S = layout.n_joint_states();
  const Eigen::Index qm1 = kappa_layer.rows();
  Eigen::VectorXd eta(S);
  if (log_normaliser) log_normaliser->resize(S);
  std::vector<double> logits(qm1);
  for (int s = 0; s < S; ++s) {
    state_logits(layout, s, kappa_layer, logits);
    // log(1 + sum_{k != q} exp(logit_k)), the 1 being the reference block
    double mx = 0.0;
    for (Eigen::Index k = 0; k < qm1; ++k)
      if (k != q) mx = std::max(mx, logits[k]);
    double total = std::exp(-mx);
    for (Eigen::Index k = 0; k < qm1; ++k)
      if (k != q) total += std::exp(logits[k] - mx);
    const double c = mx + std::log(total);
    eta[s] = logits[q] - c;
    if (log_normaliser) (*log_normaliser)[s] = c;
  }
  return eta;
}

AuxOmega sample_omega(const MembershipState& z, const TransitionParams& kappa, const DesignLayout& layout,
                      RngStream& rng) {
  AuxOmega out;
  out.n_nodes = z.n_nodes();
  out.n_times = z.n_times();
  for (int l = 0; l < layout.n_layers(); ++l) {
    const int qm1 = layout.n_blocks()[l] - 1;
    const auto data = transition_data(z, layout, l);
    std::vector<double> w(data.prev_state.size() * qm1);
    std::vector<Eigen::VectorXd> eta;
    for (int q = 0; q < qm1; ++q) eta.push_back(partial_logit(layout, kappa.kappa[l], q));
    for (std::size_t n = 0; n < data.prev_state.size(); ++n)
      for (int q = 0; q < qm1; ++q) w[n * qm1 + q] = sample_polya_gamma(eta[q][data.prev_state[n]], rng);
    out.omega.push_back(std::move(w));
  }
  return out;
}

Eigen::VectorXd KappaConditional::mean() const { return precision.llt().solve(linear); }

Eigen::MatrixXd KappaConditional::covariance() const {
  return precision.llt().solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
}

namespace {

// Prior terms plus the design-aggregated likelihood for row q. omega_of(n)
// supplies the auxiliary variable of observation n.
template <class OmegaOf>
KappaConditional assemble(const TransitionData& data, const DesignLayout& layout, int layer, int q,
                          const Eigen::VectorXd& log_norm, const ShrinkageState& shrinkage,
                          const TransitionPrior& prior, OmegaOf omega_of) {
  const int S = layout.n_joint_states();
  std::vector<double> omega_sum(S, 0.0), lin_sum(S, 0.0);
  for (std::size_t n = 0; n < data.prev_state.size(); ++n) {
    const int s = data.prev_state[n];
    const double w = omega_of(n);
    const double xi = (data.next_label[n] == q ? 1.0 : 0.0) - 0.5;
    omega_sum[s] += w;
    lin_sum[s] += xi + w * log_norm[s];
  }
  const Eigen::VectorXd var = prior_variance(layout, layer, q, shrinkage, prior);
  KappaConditional kc;
  kc.precision = var.cwiseInverse().asDiagonal();
  kc.linear = prior.mean[layer].row(q).transpose().cwiseQuotient(var);
  for (int s = 0; s < S; ++s) {
    if (omega_sum[s] == 0.0 && lin_sum[s] == 0.0) continue;
    const auto cols = layout.active_columns(s);
    for (int a : cols) {
      kc.linear[a] += lin_sum[s];
      for (int b : cols) kc.precision(a, b) += omega_sum[s];
    }
  }
  return kc;
}

}  // namespace

KappaConditional kappa_conditional(const TransitionData& data, const DesignLayout& layout, int layer, int q,
                                   const Eigen::MatrixXd& kappa_layer, const AuxOmega& omega,
                                   const ShrinkageState& shrinkage, const TransitionPrior& prior) {
  Eigen::VectorXd log_norm;
  partial_logit(layout, kappa_layer, q, &log_norm);
  const int qm1 = layout.n_blocks()[layer] - 1;
  return assemble(data, layout, layer, q, log_norm, shrinkage, prior,
                  [&](std::size_t n) { return omega.omega[layer][n * qm1 + q]; });
}

TransitionParams update_kappa(const MembershipState& z, const TransitionParams& current, AuxOmega& omega,
                              const ShrinkageState& shrinkage, const TransitionPrior& prior,
                              const DesignLayout& layout, RngStream& rng, bool refresh_omega) {
  TransitionParams next = current;
  for (int l = 0; l < layout.n_layers(); ++l) {
    const int qm1 = layout.n_blocks()[l] - 1;
    if (qm1 == 0) continue;
    const auto data = transition_data(z, layout, l);
    auto& w = omega.omega[l];
    if (w.size() != data.prev_state.size() * qm1) {
      throw Error(ErrorCode::DimensionMismatch, "omega does not match the membership panel");
    }
    for (int q = 0; q < qm1; ++q) {
      Eigen::VectorXd log_norm;
      const Eigen::VectorXd eta = partial_logit(layout, next.kappa[l], q, &log_norm);
      if (refresh_omega) {
        for (std::size_t n = 0; n < data.prev_state.size(); ++n)
          w[n * qm1 + q] = sample_polya_gamma(eta[data.prev_state[n]], rng);
      }
      const auto kc = assemble(data, layout, l, q, log_norm, shrinkage, prior,
                               [&](std::size_t n) { return w[n * qm1 + q]; });
      next.kappa[l].row(q) = sample_mvn_canonical(kc.linear, kc.precision, rng).transpose();
    }
  }
  return next;
}

void update_zeta(const TransitionParams& kappa, ShrinkageState& shrinkage, const TransitionPrior& prior,
                 const DesignLayout& layout, RngStream& rng) {
  for (int l = 0; l < layout.n_layers(); ++l) {
    const int qm1 = layout.n_blocks()[l] - 1;
    const int own = layout.main_group(l);
    for (int q = 0; q < qm1; ++q) {
      for (int g = 0; g < static_cast<int>(layout.groups().size()); ++g) {
        if (g == own) continue;
        const auto& grp = layout.groups()[g];
        if (grp.size == 0) continue;
        const double b =
            (kappa.kappa[l].row(q).segment(grp.offset, grp.size) - prior.mean[l].row(q).segment(grp.offset, grp.size))
                .squaredNorm();
        shrinkage.zeta2[l](q, g) = sample_gig(shrinkage.gamma(l, layout, g), b, rng);
      }
    }
  }
}

double rho_shape(const DesignLayout& layout, int layer, double iota1) {
  const int Q = layout.n_blocks()[layer];
  const int p = layout.n_effects();
  const int L = layout.n_layers();
  return iota1 + ((Q - 1) * (p - Q + 1) + ((1 << L) - 2) * (Q - 1)) / 2.0;
}

void update_rho(ShrinkageState& shrinkage, const TransitionPrior& prior, const DesignLayout& layout, RngStream& rng) {
  for (int l = 0; l < layout.n_layers(); ++l) {
    const int qm1 = layout.n_blocks()[l] - 1;
    if (qm1 == 0) continue;
    const int own = layout.main_group(l);
    double rate = 1.0 / prior.iota2;
    for (int q = 0; q < qm1; ++q) {
      for (int g = 0; g < static_cast<int>(layout.groups().size()); ++g) {
        if (g == own || layout.groups()[g].size == 0) continue;
        rate += shrinkage.zeta2[l](q, g) * layout.groups()[g].size / 2.0;
      }
    }
    shrinkage.rho[l] = sample_gamma(rho_shape(layout, l, prior.iota1), 1.0 / rate, rng);
  }
}

ShrinkageState initial_shrinkage(const DesignLayout& layout, const TransitionPrior& prior) {
  ShrinkageState s;
  const double rho = prior.iota1 * prior.iota2;
  for (int l = 0; l < layout.n_layers(); ++l) {
    const int qm1 = layout.n_blocks()[l] - 1;
    Eigen::MatrixXd z(qm1, static_cast<Eigen::Index>(layout.groups().size()));
    for (int g = 0; g < z.cols(); ++g) {
      const int size = layout.groups()[g].size;
      // prior mean of zeta^2 given rho: Gamma((s+1)/2, rate rho s / 2)
      const double v = (g == layout.main_group(l) || size == 0) ? prior.zeta0_sq : (size + 1.0) / (rho * size);
      z.col(g).setConstant(v);
    }
    s.zeta2.push_back(std::move(z));
    s.rho.push_back(rho);
  }
  return s;
}

double transition_loglik(const MembershipState& z, const TransitionParams& kappa, const DesignLayout& layout) {
  double total = 0.0;
  for (int l = 0; l < layout.n_layers(); ++l) {
    const Eigen::MatrixXd table = transition_table(layout, l, kappa.kappa[l]);
    const auto data = transition_data(z, layout, l);
    for (std::size_t n = 0; n < data.prev_state.size(); ++n) total += std::log(table(data.prev_state[n], data.next_label[n]));
  }
  return total;
}

int free_parameter_count(const DesignLayout& layout) {
  int total = 0;
  for (int q : layout.n_blocks()) total += (q - 1) * layout.row_length();
  return total;
}

}  // namespace dsbmm
