#include "dsbmm/emission.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dsbmm/distributions.hpp"
#include "dsbmm/errors.hpp"

namespace dsbmm {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

bool same_shape_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

double regressor_dot(std::span<const double> x, const Eigen::VectorXd& beta) {
  if (x.empty()) return beta[0];
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] * beta[static_cast<Eigen::Index>(k)];
  return acc;
}

double lognormal_logpdf(double y, double mu, double sigma2) {
  const double ly = std::log(y);
  const double r = ly - mu;
  return -ly - kHalfLog2Pi - 0.5 * std::log(sigma2) - 0.5 * r * r / sigma2;
}

}  // namespace

bool LayerConnectivity::operator==(const LayerConnectivity& o) const {
  if (!same_shape_equal(nu, o.nu) || !same_shape_equal(sigma2, o.sigma2)) return false;
  if (alpha.size() != o.alpha.size() || alpha != o.alpha) return false;
  if (beta.size() != o.beta.size()) return false;
  for (std::size_t k = 0; k < beta.size(); ++k)
    if (beta[k].size() != o.beta[k].size() || beta[k] != o.beta[k]) return false;
  return true;
}

int regressor_dim(const LayerSpec& spec) { return spec.covariate_dim > 0 ? spec.covariate_dim : 1; }

EmissionPrior default_emission_prior(const std::vector<LayerSpec>& specs) {
  EmissionPrior prior;
  for (const auto& s : specs) {
    const int k = regressor_dim(s);
    prior.beta_mean.push_back(Eigen::VectorXd::Zero(k));
    prior.beta_cov.push_back(Eigen::MatrixXd::Identity(k, k));
    prior.alpha_conc.push_back(Eigen::VectorXd::Ones(s.n_blocks));
  }
  return prior;
}

ConnectivityParams initial_connectivity(const std::vector<LayerSpec>& specs, const EmissionPrior& prior) {
  ConnectivityParams params;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const auto& s = specs[l];
    const int Q = s.n_blocks;
    LayerConnectivity lc;
    lc.nu = Eigen::MatrixXd::Constant(Q, Q, prior.b / (prior.b + prior.c));
    lc.alpha = prior.alpha_conc[l] / prior.alpha_conc[l].sum();
    if (s.weighted) {
      lc.beta.assign(static_cast<std::size_t>(Q) * Q, prior.beta_mean[l]);
      // mean of IG(d/2, e/2)
      const double s2 = prior.d > 2.0 ? prior.e / (prior.d - 2.0) : prior.e;
      lc.sigma2 = Eigen::MatrixXd::Constant(Q, Q, s2);
    }
    params.layers.push_back(std::move(lc));
  }
  return params;
}

double edge_loglik(double y, bool d, std::span<const double> x, int q, int r, const LayerConnectivity& params,
                   const LayerSpec& spec) {
  const double nu = params.nu(q, r);
  if (!d) return std::log1p(-nu);
  if (!spec.weighted) return std::log(nu);
  if (!(y > 0.0)) throw Error(ErrorCode::InconsistentEdge, "present edge with non-positive weight " + std::to_string(y));
  return std::log(nu) + lognormal_logpdf(y, regressor_dot(x, params.beta_at(q, r)), params.sigma2(q, r));
}

double node_loglik(int i, int t, int q, int layer, const MembershipState& z, const MultiLayerPanel& panel,
                   const LayerConnectivity& params) {
  const auto& spec = panel.spec(layer);
  double total = 0.0;
  for (int j = 0; j < panel.n_nodes(); ++j) {
    if (j == i) continue;
    const int r = z.at(j, t, layer);
    total += edge_loglik(panel.y(layer, i, j, t), panel.d(layer, i, j, t), panel.x(layer, i, j, t), q, r, params, spec);
    if (spec.directed) {
      total += edge_loglik(panel.y(layer, j, i, t), panel.d(layer, j, i, t), panel.x(layer, j, i, t), r, q, params, spec);
    }
  }
  return total;
}

double layer_emission_loglik(int layer, const MembershipState& z, const MultiLayerPanel& panel,
                             const LayerConnectivity& params) {
  const auto& spec = panel.spec(layer);
  double total = 0.0;
  for (int t = 0; t < panel.n_times(); ++t) {
    for (int i = 0; i < panel.n_nodes(); ++i) {
      const int q = z.at(i, t, layer);
      for (int j = spec.directed ? 0 : i + 1; j < panel.n_nodes(); ++j) {
        if (j == i) continue;
        total += edge_loglik(panel.y(layer, i, j, t), panel.d(layer, i, j, t), panel.x(layer, i, j, t), q,
                             z.at(j, t, layer), params, spec);
      }
    }
  }
  return total;
}

double initial_loglik(int layer, const MembershipState& z, const LayerConnectivity& params) {
  double total = 0.0;
  for (int i = 0; i < z.n_nodes(); ++i) total += std::log(params.alpha[z.at(i, 0, layer)]);
  return total;
}

PairCounts pair_counts(int layer, const MembershipState& z, const MultiLayerPanel& panel) {
  const auto& spec = panel.spec(layer);
  const int Q = spec.n_blocks;
  PairCounts c{Eigen::MatrixXd::Zero(Q, Q), Eigen::MatrixXd::Zero(Q, Q)};
  for (int t = 0; t < panel.n_times(); ++t) {
    for (int i = 0; i < panel.n_nodes(); ++i) {
      for (int j = spec.directed ? 0 : i + 1; j < panel.n_nodes(); ++j) {
        if (j == i) continue;
        int q = z.at(i, t, layer), r = z.at(j, t, layer);
        if (!spec.directed && q > r) std::swap(q, r);
        c.total(q, r) += 1.0;
        if (panel.d(layer, i, j, t)) c.present(q, r) += 1.0;
      }
    }
  }
  return c;
}

RegressionStats regression_stats(int layer, const MembershipState& z, const MultiLayerPanel& panel) {
  const auto& spec = panel.spec(layer);
  const int Q = spec.n_blocks;
  const int k = regressor_dim(spec);
  RegressionStats st;
  st.xtx.assign(static_cast<std::size_t>(Q) * Q, Eigen::MatrixXd::Zero(k, k));
  st.xty.assign(static_cast<std::size_t>(Q) * Q, Eigen::VectorXd::Zero(k));
  st.yty.assign(static_cast<std::size_t>(Q) * Q, 0.0);
  st.count.assign(static_cast<std::size_t>(Q) * Q, 0);
  Eigen::VectorXd xv(k);
  for (int t = 0; t < panel.n_times(); ++t) {
    for (int i = 0; i < panel.n_nodes(); ++i) {
      for (int j = spec.directed ? 0 : i + 1; j < panel.n_nodes(); ++j) {
        if (j == i || !panel.d(layer, i, j, t)) continue;
        int q = z.at(i, t, layer), r = z.at(j, t, layer);
        if (!spec.directed && q > r) std::swap(q, r);
        const std::size_t cell = static_cast<std::size_t>(q) * Q + r;
        const double ly = std::log(panel.y(layer, i, j, t));
        if (spec.covariate_dim == 0) {
          xv[0] = 1.0;
        } else {
          const auto x = panel.x(layer, i, j, t);
          for (int a = 0; a < k; ++a) xv[a] = x[a];
        }
        st.xtx[cell].noalias() += xv * xv.transpose();
        st.xty[cell] += xv * ly;
        st.yty[cell] += ly * ly;
        ++st.count[cell];
      }
    }
  }
  return st;
}

void update_nu(const MultiLayerPanel& panel, const MembershipState& z, const EmissionPrior& prior,
               ConnectivityParams& params, RngStream& rng) {
  for (int l = 0; l < panel.n_layers(); ++l) {
    const auto& spec = panel.spec(l);
    const int Q = spec.n_blocks;
    const auto c = pair_counts(l, z, panel);
    auto& nu = params.layers[l].nu;
    for (int q = 0; q < Q; ++q) {
      for (int r = spec.directed ? 0 : q; r < Q; ++r) {
        nu(q, r) = sample_beta(c.present(q, r) + prior.b, c.total(q, r) - c.present(q, r) + prior.c, rng);
        if (!spec.directed) nu(r, q) = nu(q, r);
      }
    }
  }
}

void update_beta_sigma(const MultiLayerPanel& panel, const MembershipState& z, const EmissionPrior& prior,
                       ConnectivityParams& params, RngStream& rng) {
  for (int l = 0; l < panel.n_layers(); ++l) {
    const auto& spec = panel.spec(l);
    if (!spec.weighted) continue;
    const int Q = spec.n_blocks;
    const auto st = regression_stats(l, z, panel);
    const Eigen::MatrixXd prior_prec = prior.beta_cov[l].inverse();
    const Eigen::VectorXd prior_lin = prior_prec * prior.beta_mean[l];
    auto& lc = params.layers[l];
    for (int q = 0; q < Q; ++q) {
      for (int r = spec.directed ? 0 : q; r < Q; ++r) {
        const std::size_t cell = static_cast<std::size_t>(q) * Q + r;
        Eigen::VectorXd& beta = lc.beta_at(q, r);
        double rss = st.yty[cell] - 2.0 * beta.dot(st.xty[cell]) + beta.dot(st.xtx[cell] * beta);
        if (rss < 0.0) rss = 0.0;
        const double s2 = sample_inverse_gamma((prior.d + static_cast<double>(st.count[cell])) / 2.0,
                                               (prior.e + rss) / 2.0, rng);
        lc.sigma2(q, r) = s2;
        const Eigen::MatrixXd prec = prior_prec + st.xtx[cell] / s2;
        const Eigen::VectorXd lin = prior_lin + st.xty[cell] / s2;
        try {
          beta = sample_mvn_canonical(lin, prec, rng);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NotPositiveDefinite) throw;
          throw Error(ErrorCode::SingularDesign, "layer " + std::to_string(l + 1) + " block pair (" +
                                                     std::to_string(q + 1) + "," + std::to_string(r + 1) + ")");
        }
        if (!spec.directed && r != q) {
          lc.sigma2(r, q) = s2;
          lc.beta_at(r, q) = beta;
        }
      }
    }
  }
}

void update_alpha(const MembershipState& z, const EmissionPrior& prior, ConnectivityParams& params, RngStream& rng) {
  for (int l = 0; l < z.n_layers(); ++l) {
    const int Q = z.n_blocks()[l];
    std::vector<double> conc(prior.alpha_conc[l].data(), prior.alpha_conc[l].data() + Q);
    for (int i = 0; i < z.n_nodes(); ++i) conc[z.at(i, 0, l)] += 1.0;
    const auto a = sample_dirichlet(conc, rng);
    params.layers[l].alpha = Eigen::Map<const Eigen::VectorXd>(a.data(), Q);
  }
}

}  // namespace dsbmm
