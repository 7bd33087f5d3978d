#include "dsbmm/ffbs.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "dsbmm/distributions.hpp"
#include "dsbmm/errors.hpp"

namespace dsbmm {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

int joint_at(const MembershipState& z, const DesignLayout& layout, int i, int t) {
  int idx = 0;
  for (int m = 0; m < layout.n_layers(); ++m) idx = idx * layout.n_blocks()[m] + z.at(i, t, m);
  return idx;
}

}  // namespace

std::vector<Eigen::MatrixXd> transition_tables(const TransitionParams& kappa, const DesignLayout& layout) {
  std::vector<Eigen::MatrixXd> out;
  for (int l = 0; l < layout.n_layers(); ++l) out.push_back(transition_table(layout, l, kappa.kappa[l]));
  return out;
}

Eigen::MatrixXd node_emission(int i, int layer, const MultiLayerPanel& panel, const MembershipState& z,
                              const LayerConnectivity& params) {
  const auto& spec = panel.spec(layer);
  const int Q = spec.n_blocks;
  const int T = panel.n_times();
  const int N = panel.n_nodes();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(T, Q);

  const Eigen::MatrixXd log_nu = params.nu.array().log();
  const Eigen::MatrixXd log_1m = (1.0 - params.nu.array()).log();
  Eigen::MatrixXd log_norm, inv_2s2;
  const bool fast_weights = spec.weighted && spec.covariate_dim == 0;
  if (spec.weighted) {
    log_norm = -(kHalfLog2Pi + 0.5 * params.sigma2.array().log());
    inv_2s2 = 0.5 / params.sigma2.array();
  }
  auto present = [&](int a, int b, int ii, int jj, int t) {
    // log density of a present edge ii -> jj with block pair (a, b)
    if (!spec.weighted) return log_nu(a, b);
    const double y = panel.y(layer, ii, jj, t);
    if (!(y > 0.0)) throw Error(ErrorCode::InconsistentEdge, "present edge with non-positive weight");
    const double ly = std::log(y);
    double mu;
    if (fast_weights) {
      mu = params.beta_at(a, b)[0];
    } else {
      const auto x = panel.x(layer, ii, jj, t);
      mu = 0.0;
      const auto& beta = params.beta_at(a, b);
      for (std::size_t k = 0; k < x.size(); ++k) mu += x[k] * beta[static_cast<Eigen::Index>(k)];
    }
    const double r = ly - mu;
    return log_nu(a, b) - ly + log_norm(a, b) - r * r * inv_2s2(a, b);
  };

  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < N; ++j) {
      if (j == i) continue;
      const int r = z.at(j, t, layer);
      const bool out_edge = panel.d(layer, i, j, t);
      for (int q = 0; q < Q; ++q) out(t, q) += out_edge ? present(q, r, i, j, t) : log_1m(q, r);
      if (spec.directed) {
        const bool in_edge = panel.d(layer, j, i, t);
        for (int q = 0; q < Q; ++q) out(t, q) += in_edge ? present(r, q, j, i, t) : log_1m(r, q);
      }
    }
  }
  return out;
}

Eigen::MatrixXd feedback_terms(int i, int layer, const MembershipState& z, const std::vector<Eigen::MatrixXd>& tables,
                               const DesignLayout& layout) {
  const int Q = layout.n_blocks()[layer];
  const int T = z.n_times();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(T, Q);
  for (int t = 0; t + 1 < T; ++t) {
    const int s = joint_at(z, layout, i, t);
    for (int q = 0; q < Q; ++q) {
      const int sq = layout.with_layer(s, layer, q);
      double acc = 0.0;
      for (int m = 0; m < layout.n_layers(); ++m) {
        if (m == layer) continue;
        acc += std::log(tables[m](sq, z.at(i, t + 1, m)));
      }
      out(t, q) = acc;
    }
  }
  return out;
}

FilterSequence forward_filter(int i, int layer, const Eigen::MatrixXd& log_evidence, const MembershipState& z,
                              const Eigen::VectorXd& alpha, const std::vector<Eigen::MatrixXd>& tables,
                              const DesignLayout& layout) {
  const int Q = layout.n_blocks()[layer];
  const int T = z.n_times();
  FilterSequence seq{Eigen::MatrixXd::Zero(T, Q), Eigen::MatrixXd::Zero(T, Q)};
  const auto& table = tables[layer];
  for (int t = 0; t < T; ++t) {
    if (t == 0) {
      seq.predicted.row(0) = alpha.transpose();
    } else {
      const int s = joint_at(z, layout, i, t - 1);
      for (int r = 0; r < Q; ++r) {
        const double f = seq.filtered(t - 1, r);
        if (f == 0.0) continue;
        const int sr = layout.with_layer(s, layer, r);
        for (int q = 0; q < Q; ++q) seq.predicted(t, q) += table(sr, q) * f;
      }
      seq.predicted.row(t) /= seq.predicted.row(t).sum();
    }
    const double mx = log_evidence.row(t).maxCoeff();
    double total = 0.0;
    for (int q = 0; q < Q; ++q) {
      const double v = seq.predicted(t, q) * std::exp(log_evidence(t, q) - mx);
      seq.filtered(t, q) = v;
      total += v;
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw Error(ErrorCode::NumericalUnderflow, "filter row vanished for node " + std::to_string(i + 1) + ", layer " +
                                                     std::to_string(layer + 1) + ", time " + std::to_string(t + 1));
    }
    seq.filtered.row(t) /= total;
  }
  return seq;
}

FilterSequence forward_filter(int i, int layer, const MultiLayerPanel& panel, const MembershipState& z,
                              const ConnectivityParams& params, const TransitionParams& kappa,
                              const DesignLayout& layout, const FfbsOptions& options) {
  const auto tables = transition_tables(kappa, layout);
  Eigen::MatrixXd ev = node_emission(i, layer, panel, z, params.layers[layer]);
  if (options.feedback) ev += feedback_terms(i, layer, z, tables, layout);
  return forward_filter(i, layer, ev, z, params.layers[layer].alpha, tables, layout);
}

std::vector<int> backward_sample(const FilterSequence& seq, int i, int layer, const MembershipState& z,
                                 const std::vector<Eigen::MatrixXd>& tables, const DesignLayout& layout,
                                 RngStream& rng) {
  const int Q = layout.n_blocks()[layer];
  const int T = static_cast<int>(seq.filtered.rows());
  std::vector<int> path(T);
  std::vector<double> w(Q);
  for (int q = 0; q < Q; ++q) w[q] = seq.filtered(T - 1, q);
  path[T - 1] = sample_weighted(w, rng);
  for (int t = T - 2; t >= 0; --t) {
    const int s = joint_at(z, layout, i, t);
    for (int r = 0; r < Q; ++r) w[r] = tables[layer](layout.with_layer(s, layer, r), path[t + 1]) * seq.filtered(t, r);
    path[t] = sample_weighted(w, rng);
  }
  return path;
}

std::vector<int> backward_sample(const FilterSequence& seq, int i, int layer, const MembershipState& z,
                                 const TransitionParams& kappa, const DesignLayout& layout, RngStream& rng) {
  return backward_sample(seq, i, layer, z, transition_tables(kappa, layout), layout, rng);
}

MembershipState sample_memberships(const MultiLayerPanel& panel, const MembershipState& z,
                                   const ConnectivityParams& params, const TransitionParams& kappa,
                                   const DesignLayout& layout, RngStream& rng, const FfbsOptions& options) {
  const auto tables = transition_tables(kappa, layout);
  MembershipState next = z;
  const int N = z.n_nodes();
  const int T = z.n_times();
  std::vector<int> order(N);
  for (int l = 0; l < z.n_layers(); ++l) {
    std::iota(order.begin(), order.end(), 0);
    if (options.randomize_scan) {
      for (int k = N - 1; k > 0; --k) std::swap(order[k], order[rng.below(static_cast<std::uint64_t>(k) + 1)]);
    }
    const MembershipState frozen = options.synchronous ? next : MembershipState{};
    const MembershipState& source = options.synchronous ? frozen : next;
    std::vector<std::vector<int>> drawn(options.synchronous ? N : 0);
    for (int i : order) {
      Eigen::MatrixXd ev = node_emission(i, l, panel, source, params.layers[l]);
      if (options.feedback) ev += feedback_terms(i, l, source, tables, layout);
      const auto seq = forward_filter(i, l, ev, source, params.layers[l].alpha, tables, layout);
      auto path = backward_sample(seq, i, l, source, tables, layout, rng);
      if (options.synchronous) {
        drawn[i] = std::move(path);
      } else {
        for (int t = 0; t < T; ++t) next.set(i, t, l, path[t]);
      }
    }
    if (options.synchronous) {
      for (int i = 0; i < N; ++i)
        for (int t = 0; t < T; ++t) next.set(i, t, l, drawn[i][t]);
    }
  }
  return next;
}

}  // namespace dsbmm
