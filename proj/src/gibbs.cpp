#include "dsbmm/gibbs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "dsbmm/digest.hpp"
#include "dsbmm/distributions.hpp"
#include "dsbmm/errors.hpp"
#include "json_eigen.hpp"

namespace dsbmm {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::matrix_from;
using detail::matrix_json;
using detail::vector_from;
using detail::vector_json;

PriorConfig default_prior(const std::vector<LayerSpec>& specs, PriorMode mode) {
  std::vector<int> q;
  for (const auto& s : specs) q.push_back(s.n_blocks);
  return {default_emission_prior(specs), default_transition_prior(DesignLayout(q), mode)};
}

void FitConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidParameter, m); };
  if (iterations < 1) fail("iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) fail("burn-in must satisfy 0 <= burn_in < iterations");
  if (thinning < 1) fail("thinning must be >= 1");
  if (checkpoint_every < 0) fail("checkpoint interval must be >= 0");
  if (kmeans_restarts < 1) fail("k-means restarts must be >= 1");
}

DesignLayout ChainStore::layout() const {
  std::vector<int> q;
  for (const auto& s : specs) q.push_back(s.n_blocks);
  return DesignLayout(q);
}

// ---------------------------------------------------------------- k-means

namespace {

struct KMeansResult {
  std::vector<int> labels;
  double sse = std::numeric_limits<double>::infinity();
};

double sq_dist(const Eigen::MatrixXd& f, int i, const Eigen::MatrixXd& c, int k) {
  return (f.row(i) - c.row(k)).squaredNorm();
}

KMeansResult kmeans_once(const Eigen::MatrixXd& f, int Q, RngStream& rng) {
  const int N = static_cast<int>(f.rows());
  Eigen::MatrixXd centers(Q, f.cols());
  centers.row(0) = f.row(static_cast<int>(rng.below(N)));
  std::vector<double> d2(N);
  for (int k = 1; k < Q; ++k) {
    for (int i = 0; i < N; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) best = std::min(best, sq_dist(f, i, centers, c));
      d2[i] = best;
    }
    double total = 0.0;
    for (double v : d2) total += v;
    const int pick = total > 0.0 ? sample_weighted(d2, rng) : static_cast<int>(rng.below(N));
    centers.row(k) = f.row(pick);
  }

  KMeansResult res;
  res.labels.assign(N, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < N; ++i) {
      int best = 0;
      double bd = sq_dist(f, i, centers, 0);
      for (int k = 1; k < Q; ++k) {
        const double d = sq_dist(f, i, centers, k);
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      if (res.labels[i] != best) {
        res.labels[i] = best;
        changed = true;
      }
    }
    // empty clusters take the point farthest from its own center
    std::vector<int> count(Q, 0);
    for (int l : res.labels) ++count[l];
    for (int k = 0; k < Q; ++k) {
      if (count[k] > 0) continue;
      int far = -1;
      double fd = -1.0;
      for (int i = 0; i < N; ++i) {
        if (count[res.labels[i]] <= 1) continue;
        const double d = sq_dist(f, i, centers, res.labels[i]);
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      if (far < 0) break;
      --count[res.labels[far]];
      res.labels[far] = k;
      count[k] = 1;
      changed = true;
    }
    centers.setZero();
    for (int i = 0; i < N; ++i) centers.row(res.labels[i]) += f.row(i);
    for (int k = 0; k < Q; ++k)
      if (count[k] > 0) centers.row(k) /= count[k];
    if (!changed) break;
  }
  res.sse = 0.0;
  for (int i = 0; i < N; ++i) res.sse += sq_dist(f, i, centers, res.labels[i]);
  return res;
}

std::vector<int> balanced_random_labels(int N, int Q, RngStream& rng) {
  std::vector<int> labels(N);
  for (int i = 0; i < N; ++i) labels[i] = i % Q;
  for (int k = N - 1; k > 0; --k) std::swap(labels[k], labels[rng.below(static_cast<std::uint64_t>(k) + 1)]);
  return labels;
}

}  // namespace

MembershipState kmeans_memberships(const MultiLayerPanel& panel, RngStream& rng, int restarts,
                                   std::vector<std::string>* warnings) {
  const int N = panel.n_nodes();
  const int T = panel.n_times();
  std::vector<int> qs;
  for (const auto& s : panel.specs()) qs.push_back(s.n_blocks);
  MembershipState z(N, T, qs);
  for (int l = 0; l < panel.n_layers(); ++l) {
    const int Q = qs[l];
    std::vector<int> labels(N, 0);
    if (Q > 1) {
      const bool directed = panel.spec(l).directed;
      Eigen::MatrixXd f = Eigen::MatrixXd::Zero(N, directed ? 2 * N : N);
      for (int t = 0; t < T; ++t) {
        for (int i = 0; i < N; ++i) {
          for (int j = 0; j < N; ++j) {
            if (panel.d(l, i, j, t)) f(i, j) += 1.0 / T;
            if (directed && panel.d(l, j, i, t)) f(i, N + j) += 1.0 / T;
          }
        }
      }
      int n_distinct = 0;
      {
        std::vector<std::vector<double>> rows;
        for (int i = 0; i < N; ++i) {
          std::vector<double> r(f.cols());
          for (Eigen::Index c = 0; c < f.cols(); ++c) r[c] = f(i, c);
          rows.push_back(std::move(r));
        }
        std::sort(rows.begin(), rows.end());
        n_distinct = static_cast<int>(std::unique(rows.begin(), rows.end()) - rows.begin());
      }
      if (n_distinct < Q || N < Q) {
        labels = balanced_random_labels(N, Q, rng);
        if (warnings) {
          warnings->push_back(std::string(to_string(ErrorCode::DegenerateClustering)) + ": layer " +
                              std::to_string(l + 1) + " initialised with random balanced labels");
        }
      } else {
        KMeansResult best;
        for (int r = 0; r < restarts; ++r) {
          auto res = kmeans_once(f, Q, rng);
          if (res.sse < best.sse) best = std::move(res);
        }
        labels = std::move(best.labels);
      }
    }
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < N; ++i) z.set(i, t, l, labels[i]);
  }
  return z;
}

// ---------------------------------------------------------------- sweep

SamplerState initialize(const MultiLayerPanel& panel, const FitConfig& config, const PriorConfig& prior,
                        std::vector<std::string>* warnings) {
  SamplerState s;
  s.rng = RngStream(config.seed, 0);
  std::vector<int> qs;
  for (const auto& sp : panel.specs()) qs.push_back(sp.n_blocks);
  const DesignLayout layout(qs);
  s.z = kmeans_memberships(panel, s.rng, config.kmeans_restarts, warnings);
  s.params = initial_connectivity(panel.specs(), prior.emission);
  s.kappa.kappa = prior.transition.mean;
  s.shrinkage = initial_shrinkage(layout, prior.transition);
  s.omega = sample_omega(s.z, s.kappa, layout, s.rng);
  s.iteration = 0;
  return s;
}

void gibbs_sweep(const MultiLayerPanel& panel, SamplerState& s, const PriorConfig& prior, const DesignLayout& layout,
                 const FfbsOptions& options) {
  update_beta_sigma(panel, s.z, prior.emission, s.params, s.rng);
  update_nu(panel, s.z, prior.emission, s.params, s.rng);
  update_alpha(s.z, prior.emission, s.params, s.rng);
  s.kappa = update_kappa(s.z, s.kappa, s.omega, s.shrinkage, prior.transition, layout, s.rng, true);
  if (prior.transition.mode == PriorMode::GroupLasso) {
    update_zeta(s.kappa, s.shrinkage, prior.transition, layout, s.rng);
    update_rho(s.shrinkage, prior.transition, layout, s.rng);
  }
  s.z = sample_memberships(panel, s.z, s.params, s.kappa, layout, s.rng, options);
}

double complete_loglik(const MultiLayerPanel& panel, const MembershipState& z, const ConnectivityParams& params,
                       const TransitionParams& kappa, const DesignLayout& layout) {
  double total = transition_loglik(z, kappa, layout);
  for (int l = 0; l < panel.n_layers(); ++l) {
    total += layer_emission_loglik(l, z, panel, params.layers[l]);
    total += initial_loglik(l, z, params.layers[l]);
  }
  return total;
}

SamplerState sample_from_prior(const std::vector<LayerSpec>& specs, int n_nodes, int n_times, const PriorConfig& prior,
                               RngStream& rng) {
  std::vector<int> qs;
  for (const auto& s : specs) qs.push_back(s.n_blocks);
  const DesignLayout layout(qs);
  SamplerState st;
  const auto& ep = prior.emission;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const auto& sp = specs[l];
    const int Q = sp.n_blocks;
    LayerConnectivity lc;
    lc.nu.resize(Q, Q);
    for (int q = 0; q < Q; ++q) {
      for (int r = sp.directed ? 0 : q; r < Q; ++r) {
        lc.nu(q, r) = sample_beta(ep.b, ep.c, rng);
        lc.nu(r, q) = sp.directed ? lc.nu(r, q) : lc.nu(q, r);
      }
    }
    if (sp.weighted) {
      lc.beta.assign(static_cast<std::size_t>(Q) * Q, Eigen::VectorXd());
      lc.sigma2.resize(Q, Q);
      for (int q = 0; q < Q; ++q) {
        for (int r = sp.directed ? 0 : q; r < Q; ++r) {
          lc.sigma2(q, r) = sample_inverse_gamma(ep.d / 2.0, ep.e / 2.0, rng);
          lc.beta_at(q, r) = sample_mvn(ep.beta_mean[l], ep.beta_cov[l], rng);
          if (!sp.directed) {
            lc.sigma2(r, q) = lc.sigma2(q, r);
            lc.beta_at(r, q) = lc.beta_at(q, r);
          }
        }
      }
    }
    const auto a = sample_dirichlet(std::span<const double>(ep.alpha_conc[l].data(), Q), rng);
    lc.alpha = Eigen::Map<const Eigen::VectorXd>(a.data(), Q);
    st.params.layers.push_back(std::move(lc));
  }

  const auto& tp = prior.transition;
  st.shrinkage = initial_shrinkage(layout, tp);
  for (int l = 0; l < layout.n_layers(); ++l) {
    const int qm1 = qs[l] - 1;
    if (tp.mode == PriorMode::GroupLasso) {
      st.shrinkage.rho[l] = sample_gamma(tp.iota1, tp.iota2, rng);
      for (int q = 0; q < qm1; ++q) {
        for (int g = 0; g < static_cast<int>(layout.groups().size()); ++g) {
          const int size = layout.groups()[g].size;
          if (g == layout.main_group(l) || size == 0) continue;
          st.shrinkage.zeta2[l](q, g) = sample_gamma((size + 1.0) / 2.0, 2.0 / (st.shrinkage.rho[l] * size), rng);
        }
      }
    }
    Eigen::MatrixXd k(qm1, layout.row_length());
    for (int q = 0; q < qm1; ++q) {
      const Eigen::VectorXd var = prior_variance(layout, l, q, st.shrinkage, tp);
      for (int c = 0; c < layout.row_length(); ++c) k(q, c) = tp.mean[l](q, c) + std::sqrt(var[c]) * rng.normal();
    }
    st.kappa.kappa.push_back(std::move(k));
  }

  st.z = MembershipState(n_nodes, n_times, qs);
  const auto tables = transition_tables(st.kappa, layout);
  std::vector<double> row;
  for (int i = 0; i < n_nodes; ++i) {
    for (int l = 0; l < layout.n_layers(); ++l) {
      const auto& al = st.params.layers[l].alpha;
      st.z.set(i, 0, l, sample_weighted(std::span<const double>(al.data(), al.size()), rng));
    }
    for (int t = 1; t < n_times; ++t) {
      const auto prev = st.z.joint(i, t - 1);
      const int s = layout.joint_index(prev);
      for (int l = 0; l < layout.n_layers(); ++l) {
        row.assign(qs[l], 0.0);
        for (int q = 0; q < qs[l]; ++q) row[q] = tables[l](s, q);
        st.z.set(i, t, l, sample_weighted(row, rng));
      }
    }
  }
  st.omega = sample_omega(st.z, st.kappa, layout, rng);
  return st;
}

// ---------------------------------------------------------------- serialisation

namespace {

std::string mode_name(PriorMode m) { return m == PriorMode::Normal ? "normal" : "group_lasso"; }

PriorMode mode_from(const std::string& s) {
  if (s == "normal") return PriorMode::Normal;
  if (s == "group_lasso") return PriorMode::GroupLasso;
  throw Error(ErrorCode::InvalidParameter, "unknown prior mode '" + s + "'");
}

json specs_json(const std::vector<LayerSpec>& specs) {
  json out = json::array();
  for (const auto& s : specs) {
    out.push_back({{"layer_id", s.layer_id},
                   {"directed", s.directed},
                   {"weighted", s.weighted},
                   {"n_blocks", s.n_blocks},
                   {"covariate_dim", s.covariate_dim}});
  }
  return out;
}

std::vector<LayerSpec> specs_from(const json& j) {
  std::vector<LayerSpec> out;
  for (const auto& e : j) {
    out.push_back(LayerSpec{e.at("layer_id").get<int>(), e.at("directed").get<bool>(), e.at("weighted").get<bool>(),
                            e.at("n_blocks").get<int>(), e.at("covariate_dim").get<int>()});
  }
  return out;
}

json layout_json(const DesignLayout& layout) {
  json groups = json::array();
  for (const auto& g : layout.groups()) {
    json ls = json::array();
    for (int m : g.layers) ls.push_back(m + 1);
    groups.push_back({{"layers", ls}, {"offset", g.offset}, {"size", g.size}});
  }
  return {{"n_blocks", layout.n_blocks()}, {"row_length", layout.row_length()}, {"groups", groups}};
}

json connectivity_json(const ConnectivityParams& p) {
  json out = json::array();
  for (const auto& lc : p.layers) {
    json beta = json::array();
    for (const auto& b : lc.beta) beta.push_back(vector_json(b));
    out.push_back({{"nu", matrix_json(lc.nu)},
                   {"beta", beta},
                   {"sigma2", matrix_json(lc.sigma2)},
                   {"alpha", vector_json(lc.alpha)}});
  }
  return out;
}

ConnectivityParams connectivity_from(const json& j) {
  ConnectivityParams p;
  for (const auto& e : j) {
    LayerConnectivity lc;
    lc.nu = matrix_from(e.at("nu"));
    for (const auto& b : e.at("beta")) lc.beta.push_back(vector_from(b));
    lc.sigma2 = matrix_from(e.at("sigma2"));
    lc.alpha = vector_from(e.at("alpha"));
    p.layers.push_back(std::move(lc));
  }
  return p;
}

std::string subset_name(const DesignLayout& layout, int column) {
  if (column == 0) return "intercept";
  for (const auto& g : layout.groups()) {
    if (column >= g.offset && column < g.offset + g.size) {
      std::string s;
      for (std::size_t k = 0; k < g.layers.size(); ++k) s += (k ? "+" : "") + std::to_string(g.layers[k] + 1);
      return s;
    }
  }
  return "?";
}

int within_index(const DesignLayout& layout, int column) {
  if (column == 0) return 1;
  for (const auto& g : layout.groups())
    if (column >= g.offset && column < g.offset + g.size) return column - g.offset + 1;
  return 0;
}

class CsvWriter {
 public:
  explicit CsvWriter(const fs::path& path) : path_(path), tmp_(path.string() + ".tmp") {
    f_ = std::fopen(tmp_.c_str(), "wb");
    if (!f_) throw Error(ErrorCode::IoError, "cannot write " + tmp_.string());
  }
  ~CsvWriter() {
    if (f_) std::fclose(f_);
  }
  std::FILE* get() { return f_; }
  void commit() {
    if (std::fclose(f_) != 0) {
      f_ = nullptr;
      throw Error(ErrorCode::IoError, "write failed: " + tmp_.string());
    }
    f_ = nullptr;
    std::error_code ec;
    fs::rename(tmp_, path_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp_.string());
  }

 private:
  fs::path path_, tmp_;
  std::FILE* f_ = nullptr;
};

void write_text(const fs::path& path, const std::string& text) {
  CsvWriter w(path);
  std::fwrite(text.data(), 1, text.size(), w.get());
  w.commit();
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::CorruptCheckpoint, "missing " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": " + e.what());
  }
}

// Splits a CSV file (header skipped) into rows of fields.
std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::CorruptCheckpoint, "missing " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur.push_back(ch);
      }
    }
    fields.push_back(cur);
    rows.push_back(std::move(fields));
  }
  return rows;
}

double to_d(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw Error(ErrorCode::CorruptCheckpoint, "bad number '" + s + "'");
  return v;
}

long to_l(const std::string& s) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw Error(ErrorCode::CorruptCheckpoint, "bad integer '" + s + "'");
  return v;
}

json state_json(const SamplerState& s) {
  json z = json::array();
  for (int v : s.z.raw()) z.push_back(v + 1);
  json zeta = json::array();
  for (const auto& m : s.shrinkage.zeta2) zeta.push_back(matrix_json(m));
  json kappa = json::array();
  for (const auto& m : s.kappa.kappa) kappa.push_back(matrix_json(m));
  return {{"iteration", s.iteration},
          {"rng_state", s.rng.state()},
          {"rng_seed", s.rng.seed()},
          {"rng_stream", s.rng.stream_id()},
          {"memberships", z},
          {"connectivity", connectivity_json(s.params)},
          {"kappa", kappa},
          {"zeta2", zeta},
          {"rho", s.shrinkage.rho},
          {"omega", s.omega.omega}};
}

SamplerState state_from(const json& j, int n_nodes, int n_times, const std::vector<int>& qs) {
  SamplerState s;
  s.iteration = j.at("iteration").get<long>();
  s.rng = RngStream(j.at("rng_seed").get<std::uint64_t>(), j.at("rng_stream").get<std::uint64_t>());
  s.rng.restore(j.at("rng_state").get<std::string>());
  s.z = MembershipState(n_nodes, n_times, qs);
  const auto& zr = j.at("memberships");
  const int L = static_cast<int>(qs.size());
  if (static_cast<long>(zr.size()) != static_cast<long>(n_nodes) * n_times * L) {
    throw Error(ErrorCode::CorruptCheckpoint, "membership array has the wrong size");
  }
  std::size_t k = 0;
  for (int t = 0; t < n_times; ++t)
    for (int i = 0; i < n_nodes; ++i)
      for (int l = 0; l < L; ++l) s.z.set(i, t, l, zr[k++].get<int>() - 1);
  s.z.check();
  s.params = connectivity_from(j.at("connectivity"));
  for (const auto& m : j.at("kappa")) s.kappa.kappa.push_back(matrix_from(m));
  for (const auto& m : j.at("zeta2")) s.shrinkage.zeta2.push_back(matrix_from(m));
  s.shrinkage.rho = j.at("rho").get<std::vector<double>>();
  s.omega.omega = j.at("omega").get<std::vector<std::vector<double>>>();
  s.omega.n_nodes = n_nodes;
  s.omega.n_times = n_times;
  return s;
}

}  // namespace

json prior_to_json(const PriorConfig& p) {
  json bm = json::array(), bc = json::array(), ac = json::array(), km = json::array();
  for (const auto& v : p.emission.beta_mean) bm.push_back(vector_json(v));
  for (const auto& m : p.emission.beta_cov) bc.push_back(matrix_json(m));
  for (const auto& v : p.emission.alpha_conc) ac.push_back(vector_json(v));
  for (const auto& m : p.transition.mean) km.push_back(matrix_json(m));
  return {{"emission",
           {{"beta_mean", bm}, {"beta_cov", bc}, {"d", p.emission.d}, {"e", p.emission.e}, {"b", p.emission.b},
            {"c", p.emission.c}, {"alpha_conc", ac}}},
          {"transition",
           {{"kappa_mean", km},
            {"zeta0_sq", p.transition.zeta0_sq},
            {"iota1", p.transition.iota1},
            {"iota2", p.transition.iota2},
            {"mode", mode_name(p.transition.mode)}}}};
}

PriorConfig prior_from_json(const json& j) {
  PriorConfig p;
  const auto& e = j.at("emission");
  for (const auto& v : e.at("beta_mean")) p.emission.beta_mean.push_back(vector_from(v));
  for (const auto& m : e.at("beta_cov")) p.emission.beta_cov.push_back(matrix_from(m));
  for (const auto& v : e.at("alpha_conc")) p.emission.alpha_conc.push_back(vector_from(v));
  p.emission.d = e.at("d").get<double>();
  p.emission.e = e.at("e").get<double>();
  p.emission.b = e.at("b").get<double>();
  p.emission.c = e.at("c").get<double>();
  const auto& t = j.at("transition");
  for (const auto& m : t.at("kappa_mean")) p.transition.mean.push_back(matrix_from(m));
  p.transition.zeta0_sq = t.at("zeta0_sq").get<double>();
  p.transition.iota1 = t.at("iota1").get<double>();
  p.transition.iota2 = t.at("iota2").get<double>();
  p.transition.mode = mode_from(t.at("mode").get<std::string>());
  return p;
}

json fit_config_to_json(const FitConfig& c) {
  return {{"iterations", c.iterations},         {"burn_in", c.burn_in},
          {"thinning", c.thinning},             {"prior_mode", mode_name(c.prior_mode)},
          {"seed", c.seed},                     {"randomize_scan", c.randomize_scan},
          {"feedback", c.feedback},             {"checkpoint_every", c.checkpoint_every},
          {"kmeans_restarts", c.kmeans_restarts}};
}

FitConfig fit_config_from_json(const json& j) {
  FitConfig c;
  c.iterations = j.value("iterations", c.iterations);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.thinning = j.value("thinning", c.thinning);
  c.prior_mode = mode_from(j.value("prior_mode", std::string("group_lasso")));
  c.seed = j.value("seed", c.seed);
  c.randomize_scan = j.value("randomize_scan", c.randomize_scan);
  c.feedback = j.value("feedback", c.feedback);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.kmeans_restarts = j.value("kmeans_restarts", c.kmeans_restarts);
  return c;
}

void save_chain(const ChainStore& store, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "draws", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + (dir / "draws").string());
  const DesignLayout layout = store.layout();
  const bool lasso = store.config.prior_mode == PriorMode::GroupLasso;

  {
    CsvWriter nu(dir / "draws" / "nu.csv"), alpha(dir / "draws" / "alpha.csv"), beta(dir / "draws" / "beta.csv"),
        sigma(dir / "draws" / "sigma2.csv");
    std::fputs("iteration,layer,q,r,value\n", nu.get());
    std::fputs("iteration,layer,q,value\n", alpha.get());
    std::fputs("iteration,layer,q,r,k,value\n", beta.get());
    std::fputs("iteration,layer,q,r,value\n", sigma.get());
    for (std::size_t d = 0; d < store.size(); ++d) {
      const long it = store.retained[d];
      for (std::size_t l = 0; l < store.specs.size(); ++l) {
        const auto& lc = store.connectivity[d].layers[l];
        const int Q = store.specs[l].n_blocks;
        for (int q = 0; q < Q; ++q) {
          std::fprintf(alpha.get(), "%ld,%zu,%d,%.17g\n", it, l + 1, q + 1, lc.alpha[q]);
          for (int r = 0; r < Q; ++r) {
            std::fprintf(nu.get(), "%ld,%zu,%d,%d,%.17g\n", it, l + 1, q + 1, r + 1, lc.nu(q, r));
            if (!store.specs[l].weighted) continue;
            std::fprintf(sigma.get(), "%ld,%zu,%d,%d,%.17g\n", it, l + 1, q + 1, r + 1, lc.sigma2(q, r));
            const auto& b = lc.beta_at(q, r);
            for (Eigen::Index k = 0; k < b.size(); ++k)
              std::fprintf(beta.get(), "%ld,%zu,%d,%d,%ld,%.17g\n", it, l + 1, q + 1, r + 1, static_cast<long>(k + 1), b[k]);
          }
        }
      }
    }
    nu.commit();
    alpha.commit();
    beta.commit();
    sigma.commit();
  }
  {
    CsvWriter kappa(dir / "draws" / "kappa.csv");
    std::fputs("iteration,layer,q,subset,index,column,value\n", kappa.get());
    for (std::size_t d = 0; d < store.size(); ++d) {
      for (std::size_t l = 0; l < store.specs.size(); ++l) {
        const auto& k = store.kappa[d].kappa[l];
        for (Eigen::Index q = 0; q < k.rows(); ++q)
          for (int c = 0; c < layout.row_length(); ++c)
            std::fprintf(kappa.get(), "%ld,%zu,%ld,%s,%d,%d,%.17g\n", store.retained[d], l + 1, static_cast<long>(q + 1),
                         subset_name(layout, c).c_str(), within_index(layout, c), c + 1, k(q, c));
      }
    }
    kappa.commit();
  }
  if (lasso) {
    CsvWriter zeta(dir / "draws" / "zeta2.csv"), rho(dir / "draws" / "rho.csv");
    std::fputs("iteration,layer,q,subset,value\n", zeta.get());
    std::fputs("iteration,layer,value\n", rho.get());
    for (std::size_t d = 0; d < store.shrinkage.size(); ++d) {
      for (std::size_t l = 0; l < store.specs.size(); ++l) {
        const auto& z = store.shrinkage[d].zeta2[l];
        for (Eigen::Index q = 0; q < z.rows(); ++q) {
          for (int g = 0; g < static_cast<int>(layout.groups().size()); ++g) {
            if (g == layout.main_group(static_cast<int>(l)) || layout.groups()[g].size == 0) continue;
            std::fprintf(zeta.get(), "%ld,%zu,%ld,%s,%.17g\n", store.retained[d], l + 1, static_cast<long>(q + 1),
                         subset_name(layout, layout.groups()[g].offset).c_str(), z(q, g));
          }
        }
        std::fprintf(rho.get(), "%ld,%zu,%.17g\n", store.retained[d], l + 1, store.shrinkage[d].rho[l]);
      }
    }
    zeta.commit();
    rho.commit();
  } else {
    fs::remove(dir / "draws" / "zeta2.csv", ec);
    fs::remove(dir / "draws" / "rho.csv", ec);
  }
  {
    CsvWriter ll(dir / "draws" / "loglik.csv");
    std::fputs("iteration,loglik\n", ll.get());
    for (std::size_t k = 0; k < store.loglik.size(); ++k) std::fprintf(ll.get(), "%zu,%.17g\n", k + 1, store.loglik[k]);
    ll.commit();
  }
  {
    CsvWriter zb(dir / "z_draws.bin");
    std::fwrite("DSBMMZ01", 1, 8, zb.get());
    auto put32 = [&](std::uint32_t v) {
      const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
      std::fwrite(b, 1, 4, zb.get());
    };
    put32(static_cast<std::uint32_t>(store.n_nodes));
    put32(static_cast<std::uint32_t>(store.n_times));
    put32(static_cast<std::uint32_t>(store.specs.size()));
    for (const auto& s : store.specs) std::fputc(static_cast<unsigned char>(s.n_blocks), zb.get());
    std::vector<unsigned char> buf(static_cast<std::size_t>(store.n_nodes));
    for (const auto& z : store.z) {
      for (int l = 0; l < z.n_layers(); ++l) {
        for (int t = 0; t < z.n_times(); ++t) {
          for (int i = 0; i < z.n_nodes(); ++i) buf[i] = static_cast<unsigned char>(z.at(i, t, l) + 1);
          std::fwrite(buf.data(), 1, buf.size(), zb.get());
        }
      }
    }
    zb.commit();
  }
  write_text(dir / "checkpoint.json", state_json(store.state).dump() + "\n");
  write_text(dir / "timing.json", json{{"wall_seconds", store.wall_seconds}}.dump(2) + "\n");

  json meta{{"format", "dsbmm-chain/1"},
            {"config", fit_config_to_json(store.config)},
            {"prior", prior_to_json(store.prior)},
            {"specs", specs_json(store.specs)},
            {"n_nodes", store.n_nodes},
            {"n_times", store.n_times},
            {"layout", layout_json(layout)},
            {"panel_digest", store.panel_digest},
            {"retained", store.size()},
            {"last_iteration", store.state.iteration},
            {"rng_state_sha256", sha256_hex(store.state.rng.state())},
            {"warnings", store.warnings}};
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

ChainStore load_chain(const fs::path& dir) {
  if (!fs::exists(dir / "meta.json") || !fs::exists(dir / "checkpoint.json")) {
    throw Error(ErrorCode::CorruptCheckpoint, "no chain store at " + dir.string());
  }
  ChainStore st;
  try {
    const json meta = read_json(dir / "meta.json");
    st.config = fit_config_from_json(meta.at("config"));
    st.prior = prior_from_json(meta.at("prior"));
    st.specs = specs_from(meta.at("specs"));
    st.n_nodes = meta.at("n_nodes").get<int>();
    st.n_times = meta.at("n_times").get<int>();
    st.panel_digest = meta.at("panel_digest").get<std::string>();
    st.warnings = meta.at("warnings").get<std::vector<std::string>>();
    const long last = meta.at("last_iteration").get<long>();
    std::vector<int> qs;
    for (const auto& s : st.specs) qs.push_back(s.n_blocks);
    const DesignLayout layout(qs);
    st.state = state_from(read_json(dir / "checkpoint.json"), st.n_nodes, st.n_times, qs);
    if (st.state.iteration != last) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint and meta disagree");
    if (fs::exists(dir / "timing.json")) st.wall_seconds = read_json(dir / "timing.json").value("wall_seconds", 0.0);

    for (long it = 1; it <= last; ++it)
      if (st.config.retains(it)) st.retained.push_back(it);
    const std::size_t D = st.retained.size();
    if (meta.at("retained").get<std::size_t>() != D) throw Error(ErrorCode::CorruptCheckpoint, "retained count mismatch");
    std::unordered_map<long, std::size_t> slot;
    for (std::size_t d = 0; d < D; ++d) slot[st.retained[d]] = d;
    auto draw_of = [&](const std::string& s) {
      const auto f = slot.find(to_l(s));
      if (f == slot.end()) throw Error(ErrorCode::CorruptCheckpoint, "draw for unexpected iteration " + s);
      return f->second;
    };
    auto layer_of = [&](const std::string& s) {
      const long l = to_l(s) - 1;
      if (l < 0 || l >= static_cast<long>(st.specs.size())) throw Error(ErrorCode::CorruptCheckpoint, "bad layer " + s);
      return static_cast<std::size_t>(l);
    };

    ConnectivityParams shape = initial_connectivity(st.specs, st.prior.emission);
    st.connectivity.assign(D, shape);
    st.kappa.assign(D, TransitionParams{st.prior.transition.mean});
    for (const auto& r : read_csv(dir / "draws" / "nu.csv"))
      st.connectivity[draw_of(r.at(0))].layers[layer_of(r.at(1))].nu(to_l(r.at(2)) - 1, to_l(r.at(3)) - 1) = to_d(r.at(4));
    for (const auto& r : read_csv(dir / "draws" / "alpha.csv"))
      st.connectivity[draw_of(r.at(0))].layers[layer_of(r.at(1))].alpha[to_l(r.at(2)) - 1] = to_d(r.at(3));
    for (const auto& r : read_csv(dir / "draws" / "sigma2.csv"))
      st.connectivity[draw_of(r.at(0))].layers[layer_of(r.at(1))].sigma2(to_l(r.at(2)) - 1, to_l(r.at(3)) - 1) = to_d(r.at(4));
    for (const auto& r : read_csv(dir / "draws" / "beta.csv"))
      st.connectivity[draw_of(r.at(0))].layers[layer_of(r.at(1))].beta_at(static_cast<int>(to_l(r.at(2)) - 1),
                                                                         static_cast<int>(to_l(r.at(3)) - 1))[to_l(r.at(4)) - 1] = to_d(r.at(5));
    for (const auto& r : read_csv(dir / "draws" / "kappa.csv"))
      st.kappa[draw_of(r.at(0))].kappa[layer_of(r.at(1))](to_l(r.at(2)) - 1, to_l(r.at(5)) - 1) = to_d(r.at(6));

    if (st.config.prior_mode == PriorMode::GroupLasso) {
      st.shrinkage.assign(D, initial_shrinkage(layout, st.prior.transition));
      std::map<std::string, int> group_of;
      for (int g = 0; g < static_cast<int>(layout.groups().size()); ++g)
        group_of[subset_name(layout, layout.groups()[g].offset)] = g;
      for (const auto& r : read_csv(dir / "draws" / "zeta2.csv")) {
        const auto g = group_of.find(r.at(3));
        if (g == group_of.end()) throw Error(ErrorCode::CorruptCheckpoint, "unknown subset " + r.at(3));
        st.shrinkage[draw_of(r.at(0))].zeta2[layer_of(r.at(1))](to_l(r.at(2)) - 1, g->second) = to_d(r.at(4));
      }
      for (const auto& r : read_csv(dir / "draws" / "rho.csv"))
        st.shrinkage[draw_of(r.at(0))].rho[layer_of(r.at(1))] = to_d(r.at(2));
    }
    for (const auto& r : read_csv(dir / "draws" / "loglik.csv")) st.loglik.push_back(to_d(r.at(1)));
    if (static_cast<long>(st.loglik.size()) != last) throw Error(ErrorCode::CorruptCheckpoint, "log-likelihood trace length");

    std::ifstream zb(dir / "z_draws.bin", std::ios::binary);
    if (!zb) throw Error(ErrorCode::CorruptCheckpoint, "missing z_draws.bin");
    char magic[8];
    zb.read(magic, 8);
    if (!zb || std::memcmp(magic, "DSBMMZ01", 8) != 0) throw Error(ErrorCode::CorruptCheckpoint, "bad z_draws.bin magic");
    auto get32 = [&]() {
      unsigned char b[4];
      zb.read(reinterpret_cast<char*>(b), 4);
      return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
             (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    };
    const auto n = get32(), t = get32(), L = get32();
    if (!zb || static_cast<int>(n) != st.n_nodes || static_cast<int>(t) != st.n_times || L != st.specs.size()) {
      throw Error(ErrorCode::CorruptCheckpoint, "z_draws.bin header does not match meta.json");
    }
    std::vector<unsigned char> q(L);
    zb.read(reinterpret_cast<char*>(q.data()), L);
    std::vector<unsigned char> buf(n);
    for (std::size_t d = 0; d < D; ++d) {
      MembershipState z(st.n_nodes, st.n_times, qs);
      for (std::uint32_t l = 0; l < L; ++l) {
        for (std::uint32_t tt = 0; tt < t; ++tt) {
          zb.read(reinterpret_cast<char*>(buf.data()), n);
          if (!zb) throw Error(ErrorCode::CorruptCheckpoint, "z_draws.bin truncated");
          for (std::uint32_t i = 0; i < n; ++i) z.set(static_cast<int>(i), static_cast<int>(tt), static_cast<int>(l), buf[i] - 1);
        }
      }
      z.check();
      st.z.push_back(std::move(z));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, e.what());
  } catch (const std::out_of_range& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("short CSV row: ") + e.what());
  }
  return st;
}

// ---------------------------------------------------------------- driver

namespace {

void advance(const MultiLayerPanel& panel, ChainStore& store, const fs::path& out, const ProgressFn& progress) {
  const DesignLayout layout = store.layout();
  FfbsOptions opts;
  opts.feedback = store.config.feedback;
  opts.randomize_scan = store.config.randomize_scan;
  const bool lasso = store.config.prior_mode == PriorMode::GroupLasso;
  auto& s = store.state;
  auto t0 = std::chrono::steady_clock::now();
  auto flush_time = [&] {
    const auto now = std::chrono::steady_clock::now();
    store.wall_seconds += std::chrono::duration<double>(now - t0).count();
    t0 = now;
  };
  while (s.iteration < store.config.iterations) {
    gibbs_sweep(panel, s, store.prior, layout, opts);
    ++s.iteration;
    const double ll = complete_loglik(panel, s.z, s.params, s.kappa, layout);
    if (!std::isfinite(ll)) {
      throw Error(ErrorCode::NonFiniteParameter, "complete-data log-likelihood not finite at iteration " +
                                                     std::to_string(s.iteration));
    }
    store.loglik.push_back(ll);
    if (store.config.retains(s.iteration)) {
      store.retained.push_back(s.iteration);
      store.connectivity.push_back(s.params);
      store.kappa.push_back(s.kappa);
      if (lasso) store.shrinkage.push_back(s.shrinkage);
      store.z.push_back(s.z);
    }
    const bool checkpoint = store.config.checkpoint_every > 0 && s.iteration % store.config.checkpoint_every == 0;
    if (checkpoint) {
      if (progress) progress(s.iteration, ll);
      if (!out.empty()) {
        flush_time();
        save_chain(store, out);
      }
    }
  }
  flush_time();
  if (!out.empty()) save_chain(store, out);
}

}  // namespace

ChainStore run(const MultiLayerPanel& panel, const FitConfig& config, const fs::path& out, const ProgressFn& progress) {
  return run(panel, config, default_prior(panel.specs(), config.prior_mode), out, progress);
}

ChainStore run(const MultiLayerPanel& panel, const FitConfig& config, const PriorConfig& prior, const fs::path& out,
               const ProgressFn& progress) {
  config.validate();
  ChainStore store;
  store.config = config;
  store.prior = prior;
  store.prior.transition.mode = config.prior_mode;
  store.specs = panel.specs();
  store.n_nodes = panel.n_nodes();
  store.n_times = panel.n_times();
  store.panel_digest = panel_digest(panel);
  const auto t0 = std::chrono::steady_clock::now();
  store.state = initialize(panel, config, store.prior, &store.warnings);
  store.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!out.empty()) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + out.string());
    save_panel(panel, out / "panel");
  }
  advance(panel, store, out, progress);
  return store;
}

ChainStore resume(const fs::path& store_path, long extra_iterations, const ProgressFn& progress) {
  if (extra_iterations < 0) throw Error(ErrorCode::InvalidParameter, "extra iterations must be >= 0");
  ChainStore store = load_chain(store_path);
  MultiLayerPanel panel;
  try {
    panel = load_panel_dir(store_path / "panel");
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("stored panel unreadable: ") + e.what());
  }
  if (panel_digest(panel) != store.panel_digest) throw Error(ErrorCode::CorruptCheckpoint, "stored panel digest mismatch");
  store.config.iterations += extra_iterations;
  advance(panel, store, store_path, progress);
  return store;
}

}  // namespace dsbmm
