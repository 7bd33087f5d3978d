#include "dsbmm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/distributions/normal.hpp>

#include "dsbmm/errors.hpp"

namespace dsbmm {

using nlohmann::json;

double global_ari(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "label vectors differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows, cols;
  for (std::size_t k = 0; k < a.size(); ++k) {
    cells[{a[k], b[k]}] += 1.0;
    rows[a[k]] += 1.0;
    cols[b[k]] += 1.0;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, v] : cells) index += c2(v);
  for (const auto& [k, v] : rows) sa += c2(v);
  for (const auto& [k, v] : cols) sb += c2(v);
  const double expected = sa * sb / c2(n);
  const double maximum = 0.5 * (sa + sb);
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

MembershipState map_membership(const ChainStore& chain) {
  if (chain.z.empty()) throw Error(ErrorCode::EmptyChain, "no retained membership draws");
  const auto& first = chain.z.front();
  MembershipState out = first;
  int qmax = 0;
  for (int q : first.n_blocks()) qmax = std::max(qmax, q);
  std::vector<int> counts(qmax);
  for (int t = 0; t < first.n_times(); ++t) {
    for (int i = 0; i < first.n_nodes(); ++i) {
      for (int l = 0; l < first.n_layers(); ++l) {
        std::fill(counts.begin(), counts.end(), 0);
        for (const auto& z : chain.z) ++counts[z.at(i, t, l)];
        int best = 0;
        for (int q = 1; q < first.n_blocks()[l]; ++q)
          if (counts[q] > counts[best]) best = q;
        out.set(i, t, l, best);
      }
    }
  }
  return out;
}

std::vector<int> max_assignment(const Eigen::MatrixXd& weight) {
  // Hungarian algorithm (potentials form) on cost = -weight.
  const int n = static_cast<int>(weight.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -weight(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> result(n);
  for (int j = 1; j <= n; ++j) result[p[j] - 1] = j - 1;
  return result;
}

std::vector<Permutation> align_labels(const MembershipState& estimate, const MembershipState& truth) {
  if (estimate.n_blocks() != truth.n_blocks() || estimate.n_nodes() != truth.n_nodes() ||
      estimate.n_times() != truth.n_times()) {
    throw Error(ErrorCode::DimensionMismatch, "membership shapes differ");
  }
  std::vector<Permutation> out;
  for (int l = 0; l < estimate.n_layers(); ++l) {
    const int Q = estimate.n_blocks()[l];
    Eigen::MatrixXd conf = Eigen::MatrixXd::Zero(Q, Q);
    for (int t = 0; t < estimate.n_times(); ++t)
      for (int i = 0; i < estimate.n_nodes(); ++i) conf(estimate.at(i, t, l), truth.at(i, t, l)) += 1.0;
    out.push_back(max_assignment(conf));
  }
  return out;
}

MembershipState relabel(const MembershipState& z, const std::vector<Permutation>& perm) {
  MembershipState out = z;
  for (int t = 0; t < z.n_times(); ++t)
    for (int i = 0; i < z.n_nodes(); ++i)
      for (int l = 0; l < z.n_layers(); ++l) out.set(i, t, l, perm[l][z.at(i, t, l)]);
  return out;
}

ConnectivityParams relabel(const ConnectivityParams& params, const std::vector<LayerSpec>& specs,
                           const std::vector<Permutation>& perm) {
  ConnectivityParams out = params;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const auto& src = params.layers[l];
    auto& dst = out.layers[l];
    const auto& p = perm[l];
    const int Q = specs[l].n_blocks;
    for (int q = 0; q < Q; ++q) {
      dst.alpha[p[q]] = src.alpha[q];
      for (int r = 0; r < Q; ++r) {
        dst.nu(p[q], p[r]) = src.nu(q, r);
        if (specs[l].weighted) {
          dst.sigma2(p[q], p[r]) = src.sigma2(q, r);
          dst.beta_at(p[q], p[r]) = src.beta_at(q, r);
        }
      }
    }
  }
  return out;
}

TransitionParams relabel(const TransitionParams& kappa, const DesignLayout& layout,
                         const std::vector<Permutation>& perm) {
  TransitionParams out;
  const int S = layout.n_joint_states();
  for (int l = 0; l < layout.n_layers(); ++l) {
    const Eigen::MatrixXd table = transition_table(layout, l, kappa.kappa[l]);
    Eigen::MatrixXd next(table.rows(), table.cols());
    for (int s = 0; s < S; ++s) {
      auto state = layout.joint_state(s);
      for (int m = 0; m < layout.n_layers(); ++m) state[m] = perm[m][state[m]];
      const int s2 = layout.joint_index(state);
      for (int q = 0; q < table.cols(); ++q) next(s2, perm[l][q]) = table(s, q);
    }
    out.kappa.push_back(kappa_from_table(layout, l, next));
  }
  return out;
}

ChainStore relabel(const ChainStore& chain, const std::vector<Permutation>& perm) {
  ChainStore out = chain;
  const DesignLayout layout = chain.layout();
  for (auto& z : out.z) z = relabel(z, perm);
  for (auto& c : out.connectivity) c = relabel(c, chain.specs, perm);
  for (auto& k : out.kappa) k = relabel(k, layout, perm);
  return out;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::EmptyChain, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

const char* family_name(Family f) {
  switch (f) {
    case Family::Nu: return "nu";
    case Family::Beta: return "beta";
    case Family::Sigma2: return "sigma2";
    case Family::Kappa: return "kappa";
  }
  return "?";
}

namespace {

template <typename Get>
std::vector<double> trace(std::size_t n, Get get) {
  std::vector<double> v(n);
  for (std::size_t d = 0; d < n; ++d) v[d] = get(d);
  return v;
}

}  // namespace

std::optional<double> mse(const ChainStore& chain, const ConnectivityParams& truth_params,
                          const TransitionParams& truth_kappa, Family family, int layer) {
  if (chain.size() == 0) throw Error(ErrorCode::EmptyChain, "no retained draws");
  const auto& spec = chain.specs.at(layer);
  const int Q = spec.n_blocks;
  const std::size_t D = chain.size();
  double total = 0.0;
  long count = 0;
  auto add = [&](double median, double truth) {
    total += (median - truth) * (median - truth);
    ++count;
  };
  if (family == Family::Kappa) {
    if (static_cast<int>(truth_kappa.kappa.size()) <= layer) throw Error(ErrorCode::MissingTruth, "kappa truth missing");
    const auto& tk = truth_kappa.kappa[layer];
    for (Eigen::Index q = 0; q < tk.rows(); ++q)
      for (Eigen::Index c = 0; c < tk.cols(); ++c)
        add(quantile(trace(D, [&](std::size_t d) { return chain.kappa[d].kappa[layer](q, c); }), 0.5), tk(q, c));
    return count ? std::optional<double>(total / count) : std::nullopt;
  }
  if (static_cast<int>(truth_params.layers.size()) <= layer) throw Error(ErrorCode::MissingTruth, "parameter truth missing");
  if (family != Family::Nu && !spec.weighted) return std::nullopt;
  const auto& tl = truth_params.layers[layer];
  for (int q = 0; q < Q; ++q) {
    for (int r = spec.directed ? 0 : q; r < Q; ++r) {
      if (family == Family::Nu) {
        add(quantile(trace(D, [&](std::size_t d) { return chain.connectivity[d].layers[layer].nu(q, r); }), 0.5), tl.nu(q, r));
      } else if (family == Family::Sigma2) {
        add(quantile(trace(D, [&](std::size_t d) { return chain.connectivity[d].layers[layer].sigma2(q, r); }), 0.5),
            tl.sigma2(q, r));
      } else {
        const auto& tb = tl.beta_at(q, r);
        for (Eigen::Index k = 0; k < tb.size(); ++k)
          add(quantile(trace(D, [&](std::size_t d) { return chain.connectivity[d].layers[layer].beta_at(q, r)[k]; }), 0.5),
              tb[k]);
      }
    }
  }
  return total / count;
}

double cic(const ChainStore& chain, const TransitionParams& truth, int layer, double level) {
  if (chain.size() == 0) throw Error(ErrorCode::EmptyChain, "no retained draws");
  if (static_cast<int>(truth.kappa.size()) <= layer) throw Error(ErrorCode::MissingTruth, "kappa truth missing");
  const DesignLayout layout = chain.layout();
  const auto& tk = truth.kappa[layer];
  const double a = (1.0 - level) / 2.0;
  long inside = 0, total = 0;
  for (Eigen::Index q = 0; q < tk.rows(); ++q) {
    for (int c = 0; c < layout.row_length(); ++c) {
      if (shrinkage_exempt(layout, layer, c)) continue;
      const auto v = trace(chain.size(), [&](std::size_t d) { return chain.kappa[d].kappa[layer](q, c); });
      const double lo = quantile(v, a), hi = quantile(v, 1.0 - a);
      ++total;
      if (tk(q, c) >= lo && tk(q, c) <= hi) ++inside;
    }
  }
  return total ? static_cast<double>(inside) / total : 1.0;
}

Eigen::MatrixXi gbc(const ChainStore& chain, double level) {
  if (chain.size() == 0) throw Error(ErrorCode::EmptyChain, "no retained draws");
  const DesignLayout layout = chain.layout();
  const int L = layout.n_layers();
  const double a = (1.0 - level) / 2.0;
  Eigen::MatrixXi out = Eigen::MatrixXi::Zero(L, L);
  for (int l = 0; l < L; ++l) {
    const int rows = layout.n_blocks()[l] - 1;
    for (const auto& g : layout.groups()) {
      for (int c = g.offset; c < g.offset + g.size; ++c) {
        for (int q = 0; q < rows; ++q) {
          const auto v = trace(chain.size(), [&](std::size_t d) { return chain.kappa[d].kappa[l](q, c); });
          const double lo = quantile(v, a), hi = quantile(v, 1.0 - a);
          if (lo <= 0.0 && hi >= 0.0) continue;
          for (int m : g.layers)
            if (m != l) out(m, l) = 1;
        }
      }
    }
  }
  return out;
}

Eigen::MatrixXi true_gbc(const GeneratorConfig& config, double tol) {
  const DesignLayout layout = config.layout();
  const int L = layout.n_layers();
  Eigen::MatrixXi out = Eigen::MatrixXi::Zero(L, L);
  for (int l = 0; l < L; ++l) {
    const auto& table = config.transitions[l];
    for (int m = 0; m < L; ++m) {
      if (m == l) continue;
      for (int s = 0; s < layout.n_joint_states() && !out(m, l); ++s) {
        for (int q = 0; q < layout.n_blocks()[m]; ++q) {
          const int s2 = layout.with_layer(s, m, q);
          if ((table.row(s) - table.row(s2)).cwiseAbs().maxCoeff() > tol) {
            out(m, l) = 1;
            break;
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- diagnostics

double autocorrelation(std::span<const double> x, int lag) {
  const std::size_t n = x.size();
  if (n <= static_cast<std::size_t>(lag)) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    den += (x[t] - mean) * (x[t] - mean);
    if (t + lag < n) num += (x[t] - mean) * (x[t + lag] - mean);
  }
  return den > 0.0 ? num / den : 0.0;
}

double spectrum0_ar(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  const int order_max = std::min(n - 1, static_cast<int>(std::floor(10.0 * std::log10(static_cast<double>(n)))));
  std::vector<double> acf(order_max + 1, 0.0);
  for (int k = 0; k <= order_max; ++k) {
    double s = 0.0;
    for (int t = 0; t + k < n; ++t) s += (x[t] - mean) * (x[t + k] - mean);
    acf[k] = s / n;
  }
  if (!(acf[0] > 0.0)) return 0.0;
  // Levinson-Durbin recursion with AIC order selection.
  std::vector<double> phi, best_phi;
  double var = acf[0];
  double best_aic = n * std::log(var);
  double best_var = var;
  for (int k = 1; k <= order_max; ++k) {
    double num = acf[k];
    for (int j = 1; j < k; ++j) num -= phi[j - 1] * acf[k - j];
    const double pk = num / var;
    std::vector<double> next(k);
    for (int j = 1; j < k; ++j) next[j - 1] = phi[j - 1] - pk * phi[k - j - 1];
    next[k - 1] = pk;
    phi = std::move(next);
    var *= (1.0 - pk * pk);
    if (!(var > 0.0)) break;
    const double aic = n * std::log(var) + 2.0 * k;
    if (aic < best_aic) {
      best_aic = aic;
      best_phi = phi;
      best_var = var;
    }
  }
  const int p = static_cast<int>(best_phi.size());
  const double var_pred = best_var * n / (n - (p + 1));
  double s = 1.0;
  for (double v : best_phi) s -= v;
  return var_pred / (s * s);
}

double pcramer(double q) {
  if (!(q > 0.0)) return 0.0;
  const double log_eps = std::log(1e-5);
  double total = 0.0;
  for (int k = 0; k <= 3; ++k) {
    const double z = std::tgamma(k + 0.5) * std::sqrt(4.0 * k + 1.0) /
                     (std::tgamma(k + 1.0) * std::pow(std::numbers::pi, 1.5) * std::sqrt(q));
    const double u = (4.0 * k + 1.0) * (4.0 * k + 1.0) / (16.0 * q);
    if (u > -log_eps) continue;
    total += z * std::exp(-u) * boost::math::cyl_bessel_k(0.25, u);
  }
  return total;
}

Diagnostics diagnostics(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 50) throw Error(ErrorCode::InvalidParameter, "diagnostics need at least 50 draws");
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) throw Error(ErrorCode::ConstantChain, "chain has zero variance");
  Diagnostics d;
  d.ac1 = autocorrelation(x, 1);
  d.ac5 = autocorrelation(x, 5);

  const boost::math::normal_distribution<double> norm;
  auto seg_stats = [&](std::size_t begin, std::size_t end) {
    const auto seg = x.subspan(begin, end - begin);
    double m = 0.0;
    for (double v : seg) m += v;
    m /= static_cast<double>(seg.size());
    return std::pair{m, spectrum0_ar(seg) / static_cast<double>(seg.size())};
  };
  const std::size_t n_a = static_cast<std::size_t>(std::floor(0.1 * n));
  const std::size_t b_start = n - static_cast<std::size_t>(std::floor(0.5 * n));
  const auto [ma, va] = seg_stats(0, n_a);
  const auto [mb, vb] = seg_stats(b_start, n);
  const double se = std::sqrt(va + vb);
  d.geweke_z = se > 0.0 ? (ma - mb) / se : (ma == mb ? 0.0 : std::numeric_limits<double>::infinity());
  d.geweke_p = std::isfinite(d.geweke_z) ? 2.0 * boost::math::cdf(boost::math::complement(norm, std::abs(d.geweke_z))) : 0.0;

  // Heidelberger-Welch: discard 10% steps up to half the chain until the
  // Cramér-von Mises test accepts stationarity.
  const double s0 = spectrum0_ar(x.subspan(n / 2));
  double p_value = 0.0;
  for (int step = 0; step * (n / 10) <= n / 2; ++step) {
    const auto y = x.subspan(step * (n / 10));
    const std::size_t m = y.size();
    double ybar = 0.0;
    for (double v : y) ybar += v;
    ybar /= static_cast<double>(m);
    double cum = 0.0, stat = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      cum += y[k];
      const double b = cum - ybar * static_cast<double>(k + 1);
      stat += b * b / (static_cast<double>(m) * s0);
    }
    stat /= static_cast<double>(m);
    p_value = std::isfinite(stat) ? 1.0 - pcramer(stat) : 0.0;
    if (p_value > 0.05) break;
  }
  d.heidelberger_p = std::clamp(p_value, 0.0, 1.0);
  return d;
}

// ---------------------------------------------------------------- report

namespace {

void add_diag(std::vector<ParameterDiagnostics>& out, std::string name, const std::vector<double>& v) {
  ParameterDiagnostics pd{std::move(name), std::nullopt};
  if (v.size() >= 50) {
    try {
      pd.values = diagnostics(v);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConstantChain) throw;
    }
  }
  out.push_back(std::move(pd));
}

std::string idx(std::initializer_list<long> parts) {
  std::string s = "[";
  bool first = true;
  for (long p : parts) {
    s += (first ? "" : ",") + std::to_string(p);
    first = false;
  }
  return s + "]";
}

json matrix_int_json(const Eigen::MatrixXi& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

EvaluationReport evaluate(const ChainStore& chain, const GroundTruth* truth, double level) {
  if (chain.size() == 0) throw Error(ErrorCode::EmptyChain, "no retained draws");
  EvaluationReport rep;
  const DesignLayout layout = chain.layout();
  const int L = layout.n_layers();
  rep.n_layers = L;
  rep.retained = chain.size();
  rep.has_truth = truth != nullptr;

  const ChainStore* used = &chain;
  ChainStore aligned;
  if (truth) {
    if (truth->memberships.n_nodes() != chain.n_nodes || truth->memberships.n_times() != chain.n_times ||
        static_cast<int>(truth->config.specs.size()) != L) {
      throw Error(ErrorCode::DimensionMismatch, "truth does not match the chain's panel");
    }
    for (int l = 0; l < L; ++l) {
      if (truth->config.specs[l].n_blocks != chain.specs[l].n_blocks ||
          truth->config.specs[l].covariate_dim != chain.specs[l].covariate_dim) {
        throw Error(ErrorCode::DimensionMismatch, "truth layer " + std::to_string(l + 1) + " differs from the chain");
      }
    }
    const MembershipState map = map_membership(chain);
    rep.alignment = align_labels(map, truth->memberships);
    aligned = relabel(chain, rep.alignment);
    used = &aligned;
    const MembershipState map_aligned = relabel(map, rep.alignment);
    const ConnectivityParams tp = truth->config.connectivity();
    for (int l = 0; l < L; ++l) {
      rep.global_ari.push_back(global_ari(map_aligned.layer_labels(l), truth->memberships.layer_labels(l)));
      rep.cic.push_back(cic(*used, truth->kappa, l, level));
    }
    for (Family f : {Family::Nu, Family::Beta, Family::Sigma2, Family::Kappa}) {
      std::vector<std::optional<double>> per;
      for (int l = 0; l < L; ++l) per.push_back(mse(*used, tp, truth->kappa, f, l));
      rep.mse.emplace_back(f, std::move(per));
    }
    rep.true_gbc = true_gbc(truth->config);
  }
  rep.gbc = gbc(*used, level);
  if (truth) rep.gbc_retrieved = rep.gbc == rep.true_gbc;

  const std::size_t D = used->size();
  for (int l = 0; l < L; ++l) {
    const auto& spec = used->specs[l];
    const int Q = spec.n_blocks;
    for (int q = 0; q < Q; ++q) {
      add_diag(rep.diagnostics, "alpha" + idx({l + 1, q + 1}),
               trace(D, [&](std::size_t d) { return used->connectivity[d].layers[l].alpha[q]; }));
      for (int r = spec.directed ? 0 : q; r < Q; ++r) {
        add_diag(rep.diagnostics, "nu" + idx({l + 1, q + 1, r + 1}),
                 trace(D, [&](std::size_t d) { return used->connectivity[d].layers[l].nu(q, r); }));
        if (!spec.weighted) continue;
        add_diag(rep.diagnostics, "sigma2" + idx({l + 1, q + 1, r + 1}),
                 trace(D, [&](std::size_t d) { return used->connectivity[d].layers[l].sigma2(q, r); }));
        const long K = used->connectivity[0].layers[l].beta_at(q, r).size();
        for (long k = 0; k < K; ++k)
          add_diag(rep.diagnostics, "beta" + idx({l + 1, q + 1, r + 1, k + 1}),
                   trace(D, [&](std::size_t d) { return used->connectivity[d].layers[l].beta_at(q, r)[k]; }));
      }
    }
    for (int q = 0; q + 1 < Q; ++q)
      for (int c = 0; c < layout.row_length(); ++c)
        add_diag(rep.diagnostics, "kappa" + idx({l + 1, q + 1, c + 1}),
                 trace(D, [&](std::size_t d) { return used->kappa[d].kappa[l](q, c); }));
    if (!used->shrinkage.empty())
      add_diag(rep.diagnostics, "rho" + idx({l + 1}), trace(D, [&](std::size_t d) { return used->shrinkage[d].rho[l]; }));
  }
  std::vector<double> ll;
  for (long it : used->retained)
    if (it >= 1 && static_cast<std::size_t>(it) <= used->loglik.size()) ll.push_back(used->loglik[it - 1]);
  add_diag(rep.diagnostics, "loglik", ll);
  return rep;
}

json report_to_json(const EvaluationReport& r) {
  json j{{"n_layers", r.n_layers}, {"retained", r.retained}, {"has_truth", r.has_truth}, {"gbc_matrix", matrix_int_json(r.gbc)}};
  if (r.has_truth) {
    j["global_ari"] = r.global_ari;
    json m = json::object();
    for (const auto& [f, per] : r.mse) {
      json a = json::array();
      for (const auto& v : per) a.push_back(opt_json(v));
      m[family_name(f)] = a;
    }
    j["mse"] = m;
    j["cic"] = r.cic;
    j["true_gbc_matrix"] = matrix_int_json(r.true_gbc);
    j["gbc_retrieved"] = r.gbc_retrieved;
    json al = json::array();
    for (const auto& p : r.alignment) {
      json a = json::array();
      for (int v : p) a.push_back(v + 1);
      al.push_back(a);
    }
    j["alignment"] = al;
  }
  json d = json::object();
  for (const auto& pd : r.diagnostics) {
    if (!pd.values) {
      d[pd.name] = nullptr;
      continue;
    }
    const auto& v = *pd.values;
    d[pd.name] = {{"ac1", v.ac1}, {"ac5", v.ac5}, {"geweke_z", v.geweke_z}, {"geweke_p", v.geweke_p},
                  {"heidelberger_p", v.heidelberger_p}};
  }
  j["diagnostics"] = d;
  return j;
}

std::string report_to_csv(const EvaluationReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "metric,layer,family,value\n";
  for (std::size_t l = 0; l < r.global_ari.size(); ++l) os << "global_ari," << l + 1 << ",," << r.global_ari[l] << "\n";
  for (const auto& [f, per] : r.mse)
    for (std::size_t l = 0; l < per.size(); ++l)
      if (per[l]) os << "mse," << l + 1 << "," << family_name(f) << "," << *per[l] << "\n";
  for (std::size_t l = 0; l < r.cic.size(); ++l) os << "cic," << l + 1 << ",," << r.cic[l] << "\n";
  for (Eigen::Index m = 0; m < r.gbc.rows(); ++m)
    for (Eigen::Index l = 0; l < r.gbc.cols(); ++l)
      if (m != l) os << "gbc_" << m + 1 << "_to," << l + 1 << ",," << r.gbc(m, l) << "\n";
  if (r.has_truth) os << "gbc_retrieved,,," << (r.gbc_retrieved ? 1 : 0) << "\n";
  return os.str();
}

}  // namespace dsbmm
