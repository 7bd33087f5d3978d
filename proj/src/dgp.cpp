#include "dsbmm/dgp.hpp"

#include <cmath>
#include <string>

#include "dsbmm/distributions.hpp"
#include "dsbmm/errors.hpp"
#include "json_eigen.hpp"

namespace dsbmm {

using nlohmann::json;

namespace {

using detail::matrix_from;
using detail::matrix_json;
using detail::vector_from;
using detail::vector_json;

std::string law_name(CovariateLaw law) { return law == CovariateLaw::Gravity ? "gravity" : "standard_normal"; }

CovariateLaw law_from(const std::string& s) {
  if (s == "gravity") return CovariateLaw::Gravity;
  if (s == "standard_normal") return CovariateLaw::StandardNormal;
  throw Error(ErrorCode::InvalidConfig, "unknown covariate law '" + s + "'");
}

// Coupled block: row given (conditioning layer state a, own previous state b).
const double kCoupled[3][3][3] = {
    {{0.95, 0.025, 0.025}, {0.34, 0.65, 0.01}, {0.34, 0.01, 0.65}},
    {{0.65, 0.34, 0.01}, {0.025, 0.95, 0.025}, {0.01, 0.34, 0.65}},
    {{0.65, 0.01, 0.34}, {0.01, 0.65, 0.34}, {0.025, 0.025, 0.95}},
};

Eigen::MatrixXd own_lag_table(const DesignLayout& layout, int layer, double stay) {
  const int Q = layout.n_blocks()[layer];
  const double move = (1.0 - stay) / (Q - 1);
  Eigen::MatrixXd t(layout.n_joint_states(), Q);
  for (int s = 0; s < layout.n_joint_states(); ++s) {
    const int own = layout.layer_of(s, layer);
    for (int q = 0; q < Q; ++q) t(s, q) = q == own ? stay : move;
  }
  return t;
}

Eigen::MatrixXd coupled_table(const DesignLayout& layout, int layer, int driver) {
  Eigen::MatrixXd t(layout.n_joint_states(), 3);
  for (int s = 0; s < layout.n_joint_states(); ++s) {
    const int a = layout.layer_of(s, driver);
    const int b = layout.layer_of(s, layer);
    for (int q = 0; q < 3; ++q) t(s, q) = kCoupled[a][b][q];
  }
  return t;
}

}  // namespace

DesignLayout GeneratorConfig::layout() const {
  std::vector<int> q;
  for (const auto& s : specs) q.push_back(s.n_blocks);
  return DesignLayout(q);
}

ConnectivityParams GeneratorConfig::connectivity() const {
  ConnectivityParams p;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    LayerConnectivity lc;
    lc.nu = nu[l];
    lc.alpha = alpha[l];
    if (specs[l].weighted) {
      lc.beta = beta[l];
      lc.sigma2 = sigma2[l];
    }
    p.layers.push_back(std::move(lc));
  }
  return p;
}

void validate_config(const GeneratorConfig& c) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  const std::size_t L = c.specs.size();
  if (L == 0) fail("no layers");
  if (c.alpha.size() != L || c.nu.size() != L || c.transitions.size() != L) fail("per-layer arrays have wrong length");
  const DesignLayout layout = c.layout();
  for (std::size_t l = 0; l < L; ++l) {
    const auto& s = c.specs[l];
    const int Q = s.n_blocks;
    const std::string at = "layer " + std::to_string(l + 1) + ": ";
    if (Q < 1) fail(at + "n_blocks < 1");
    if (s.covariate_dim < 0) fail(at + "negative covariate_dim");
    if (!s.weighted && s.covariate_dim > 0) fail(at + "covariates on unweighted layers are not supported");
    if (s.covariate_dim > 0 && c.covariate_law == CovariateLaw::Gravity && (s.covariate_dim != 4 || !s.directed)) {
      fail(at + "gravity covariates need a directed layer with covariate_dim 4");
    }
    if (c.alpha[l].size() != Q || std::fabs(c.alpha[l].sum() - 1.0) > 1e-12 || (c.alpha[l].array() < 0.0).any()) {
      fail(at + "alpha is not a simplex of length Q");
    }
    if (c.nu[l].rows() != Q || c.nu[l].cols() != Q) fail(at + "nu shape");
    if (!((c.nu[l].array() > 0.0).all() && (c.nu[l].array() < 1.0).all())) fail(at + "nu entries must lie in (0,1)");
    if (!s.directed && (c.nu[l] - c.nu[l].transpose()).cwiseAbs().maxCoeff() > 0.0) fail(at + "nu not symmetric");
    if (s.weighted) {
      if (c.beta.size() != L || c.sigma2.size() != L) fail("beta/sigma2 missing for weighted layer");
      if (c.beta[l].size() != static_cast<std::size_t>(Q) * Q) fail(at + "beta needs Q*Q vectors");
      for (const auto& b : c.beta[l])
        if (b.size() != regressor_dim(s)) fail(at + "beta vector length differs from the regressor dimension");
      if (c.sigma2[l].rows() != Q || c.sigma2[l].cols() != Q || !(c.sigma2[l].array() > 0.0).all()) {
        fail(at + "sigma2 must be a positive Q x Q matrix");
      }
      if (!s.directed) {
        for (int q = 0; q < Q; ++q) {
          for (int r = 0; r < Q; ++r) {
            if (c.sigma2[l](q, r) != c.sigma2[l](r, q) || c.beta[l][q * Q + r] != c.beta[l][r * Q + q]) {
              fail(at + "beta/sigma2 not symmetric on an undirected layer");
            }
          }
        }
      }
    }
    const auto& tr = c.transitions[l];
    if (tr.rows() != layout.n_joint_states() || tr.cols() != Q) fail(at + "transition table shape");
    for (Eigen::Index r = 0; r < tr.rows(); ++r) {
      if (std::fabs(tr.row(r).sum() - 1.0) > 1e-12) fail(at + "transition row " + std::to_string(r) + " does not sum to 1");
      if (!(tr.row(r).array() > 0.0).all() || (Q > 1 && !(tr.row(r).array() < 1.0).all())) {
        fail(at + "transition entries must lie in (0,1)");
      }
    }
  }
}

std::vector<std::string> preset_names() { return {"no_causality", "unidirectional", "bidirectional"}; }

GeneratorConfig build_preset(std::string_view name, int n_nodes, int n_times) {
  const bool known = name == "no_causality" || name == "unidirectional" || name == "bidirectional";
  if (!known) throw Error(ErrorCode::UnknownPreset, std::string(name));
  if (n_nodes < 6) throw Error(ErrorCode::TooFewNodes, "presets need at least 6 nodes, got " + std::to_string(n_nodes));
  if (n_times < 2) throw Error(ErrorCode::InvalidParameter, "presets need at least 2 time points");

  GeneratorConfig c;
  c.name = std::string(name);
  c.specs = {LayerSpec{1, true, true, 2, 0}, LayerSpec{2, true, true, 3, 0}, LayerSpec{3, false, false, 3, 0}};
  c.alpha = {Eigen::VectorXd::Constant(2, 0.5), Eigen::VectorXd::Constant(3, 1.0 / 3.0),
             Eigen::VectorXd::Constant(3, 1.0 / 3.0)};
  Eigen::MatrixXd nu1(2, 2), nu2(3, 3), nu3(3, 3);
  nu1 << 0.90, 0.60, 0.50, 0.80;
  nu2 << 0.90, 0.30, 0.35, 0.25, 0.90, 0.20, 0.45, 0.48, 0.90;
  nu3 << 0.900, 0.275, 0.400, 0.275, 0.800, 0.340, 0.400, 0.340, 0.700;
  c.nu = {nu1, nu2, nu3};
  Eigen::MatrixXd b1(2, 2), b2(3, 3), s1(2, 2), s2(3, 3);
  b1 << 1.00, -0.15, 0.35, 0.40;
  b2 << 0.60, 0.40, 0.20, 0.90, 1.50, 1.20, -0.50, -0.30, -0.10;
  s1 << 0.010, 0.015, 0.035, 0.040;
  s2 << 0.060, 0.040, 0.020, 0.090, 0.150, 0.012, 0.050, 0.030, 0.010;
  auto as_vectors = [](const Eigen::MatrixXd& b) {
    std::vector<Eigen::VectorXd> out;
    for (Eigen::Index q = 0; q < b.rows(); ++q)
      for (Eigen::Index r = 0; r < b.cols(); ++r) out.push_back(Eigen::VectorXd::Constant(1, b(q, r)));
    return out;
  };
  c.beta = {as_vectors(b1), as_vectors(b2), {}};
  c.sigma2 = {s1, s2, Eigen::MatrixXd()};

  const DesignLayout layout = c.layout();
  c.transitions.resize(3);
  c.transitions[0] = own_lag_table(layout, 0, 0.9);
  if (name == "no_causality") {
    c.transitions[1] = own_lag_table(layout, 1, 0.98);
    c.transitions[2] = own_lag_table(layout, 2, 0.98);
  } else if (name == "unidirectional") {
    c.transitions[1] = coupled_table(layout, 1, 2);
    c.transitions[2] = own_lag_table(layout, 2, 0.98);
  } else {
    c.transitions[1] = coupled_table(layout, 1, 2);
    c.transitions[2] = coupled_table(layout, 2, 1);
  }
  return c;
}

GeneratorConfig trade_config() {
  GeneratorConfig c;
  c.name = "trade";
  c.covariate_law = CovariateLaw::Gravity;
  c.specs = {LayerSpec{1, true, true, 2, 4}, LayerSpec{2, false, false, 2, 0}};
  c.alpha = {Eigen::VectorXd::Constant(2, 0.5), Eigen::VectorXd::Constant(2, 0.5)};
  Eigen::MatrixXd nu1(2, 2), nu2(2, 2);
  nu1 << 0.95, 0.80, 0.75, 0.35;
  nu2 << 0.70, 0.20, 0.20, 0.45;
  c.nu = {nu1, nu2};
  std::vector<Eigen::VectorXd> beta;
  const double intercept[2][2] = {{-1.0, 0.5}, {0.3, 1.0}};
  const double distance[2][2] = {{-0.6, -0.9}, {-0.9, -1.2}};
  for (int q = 0; q < 2; ++q) {
    for (int r = 0; r < 2; ++r) {
      Eigen::VectorXd b(4);
      b << intercept[q][r], q == 0 ? 1.0 : 0.7, r == 0 ? 0.9 : 0.6, distance[q][r];
      beta.push_back(b);
    }
  }
  c.beta = {beta, {}};
  Eigen::MatrixXd s1(2, 2);
  s1 << 0.3, 0.5, 0.6, 0.8;
  c.sigma2 = {s1, Eigen::MatrixXd()};
  const DesignLayout layout = c.layout();
  c.transitions = {own_lag_table(layout, 0, 0.9), Eigen::MatrixXd(layout.n_joint_states(), 2)};
  // layer 2 follows layer 1: agreement is persistent, disagreement drifts toward layer 1's block
  for (int s = 0; s < layout.n_joint_states(); ++s) {
    const int a = layout.layer_of(s, 0);
    const int b = layout.layer_of(s, 1);
    if (a == b) {
      c.transitions[1](s, b) = 0.95;
      c.transitions[1](s, 1 - b) = 0.05;
    } else {
      c.transitions[1](s, b) = 0.7;
      c.transitions[1](s, a) = 0.3;
    }
  }
  return c;
}

TransitionParams transition_table_to_kappa(const GeneratorConfig& config) {
  const DesignLayout layout = config.layout();
  TransitionParams p;
  for (int l = 0; l < layout.n_layers(); ++l) p.kappa.push_back(kappa_from_table(layout, l, config.transitions[l]));
  return p;
}

void simulate_edges(MultiLayerPanel& panel, const MembershipState& z, const ConnectivityParams& params,
                    RngStream& rng) {
  const int N = panel.n_nodes();
  for (int l = 0; l < panel.n_layers(); ++l) {
    const auto& spec = panel.spec(l);
    const auto& lc = params.layers[l];
    for (int t = 0; t < panel.n_times(); ++t) {
      for (int i = 0; i < N; ++i) {
        for (int j = spec.directed ? 0 : i + 1; j < N; ++j) {
          if (i == j) continue;
          panel.clear_edge(l, i, j, t);
          if (!spec.directed) panel.clear_edge(l, j, i, t);
          const int q = z.at(i, t, l), r = z.at(j, t, l);
          if (rng.uniform() >= lc.nu(q, r)) continue;
          double y = 1.0;
          if (spec.weighted) {
            const auto x = panel.x(l, i, j, t);
            const auto& b = lc.beta_at(q, r);
            double mu = 0.0;
            if (x.empty()) {
              mu = b[0];
            } else {
              for (std::size_t k = 0; k < x.size(); ++k) mu += x[k] * b[static_cast<Eigen::Index>(k)];
            }
            y = std::exp(mu + std::sqrt(lc.sigma2(q, r)) * rng.normal());
          }
          panel.set_edge(l, i, j, t, y);
          if (!spec.directed) panel.set_edge(l, j, i, t, y);
        }
      }
    }
  }
}

std::pair<MultiLayerPanel, GroundTruth> simulate(const GeneratorConfig& config, int n_nodes, int n_times,
                                                 RngStream& rng) {
  validate_config(config);
  if (n_nodes < 2) throw Error(ErrorCode::InvalidConfig, "need at least 2 nodes");
  if (n_times < 1) throw Error(ErrorCode::InvalidConfig, "need at least 1 time point");
  const DesignLayout layout = config.layout();
  const int L = layout.n_layers();
  MembershipState z(n_nodes, n_times, layout.n_blocks());

  for (int i = 0; i < n_nodes; ++i) {
    for (int l = 0; l < L; ++l) {
      z.set(i, 0, l, sample_categorical(std::span<const double>(config.alpha[l].data(), config.alpha[l].size()), rng));
    }
    std::vector<int> prev(L);
    std::vector<double> row;
    for (int t = 1; t < n_times; ++t) {
      for (int l = 0; l < L; ++l) prev[l] = z.at(i, t - 1, l);
      const int s = layout.joint_index(prev);
      for (int l = 0; l < L; ++l) {
        const auto& tr = config.transitions[l];
        row.assign(tr.cols(), 0.0);
        for (Eigen::Index q = 0; q < tr.cols(); ++q) row[q] = tr(s, q);
        z.set(i, t, l, sample_weighted(row, rng));
      }
    }
  }

  MultiLayerPanel panel(n_nodes, n_times, config.specs);
  for (int l = 0; l < L; ++l) {
    const auto& spec = config.specs[l];
    if (spec.covariate_dim == 0) continue;
    if (config.covariate_law == CovariateLaw::Gravity) {
      std::vector<double> base(n_nodes), px(n_nodes), py(n_nodes);
      for (int i = 0; i < n_nodes; ++i) {
        base[i] = rng.normal();
        px[i] = rng.uniform();
        py[i] = rng.uniform();
      }
      std::vector<double> gdp(static_cast<std::size_t>(n_nodes) * n_times);
      for (int t = 0; t < n_times; ++t)
        for (int i = 0; i < n_nodes; ++i) gdp[t * n_nodes + i] = base[i] + 0.05 * t + 0.1 * rng.normal();
      for (int t = 0; t < n_times; ++t) {
        for (int i = 0; i < n_nodes; ++i) {
          for (int j = 0; j < n_nodes; ++j) {
            if (i == j) continue;
            auto x = panel.x_mut(l, i, j, t);
            x[0] = 1.0;
            x[1] = gdp[t * n_nodes + i];
            x[2] = gdp[t * n_nodes + j];
            x[3] = std::log(0.05 + std::hypot(px[i] - px[j], py[i] - py[j]));
          }
        }
      }
    } else {
      for (int t = 0; t < n_times; ++t) {
        for (int i = 0; i < n_nodes; ++i) {
          for (int j = spec.directed ? 0 : i + 1; j < n_nodes; ++j) {
            if (i == j) continue;
            auto x = panel.x_mut(l, i, j, t);
            for (auto& v : x) v = rng.normal();
            if (!spec.directed) {
              auto xm = panel.x_mut(l, j, i, t);
              for (std::size_t k = 0; k < x.size(); ++k) xm[k] = x[k];
            }
          }
        }
      }
    }
  }

  simulate_edges(panel, z, config.connectivity(), rng);

  GroundTruth truth{z, transition_table_to_kappa(config), config};
  return {std::move(panel), std::move(truth)};
}

json config_to_json(const GeneratorConfig& c) {
  const DesignLayout layout = c.layout();
  json layers = json::array();
  for (std::size_t l = 0; l < c.specs.size(); ++l) {
    const auto& s = c.specs[l];
    json jl{{"layer_id", s.layer_id},       {"directed", s.directed}, {"weighted", s.weighted},
            {"n_blocks", s.n_blocks},       {"covariate_dim", s.covariate_dim},
            {"alpha", vector_json(c.alpha[l])}, {"nu", matrix_json(c.nu[l])}};
    if (s.weighted) {
      json beta = json::array();
      for (int q = 0; q < s.n_blocks; ++q) {
        json row = json::array();
        for (int r = 0; r < s.n_blocks; ++r) row.push_back(vector_json(c.beta[l][q * s.n_blocks + r]));
        beta.push_back(std::move(row));
      }
      jl["beta"] = std::move(beta);
      jl["sigma2"] = matrix_json(c.sigma2[l]);
    }
    json tr = json::array();
    for (int st = 0; st < layout.n_joint_states(); ++st) {
      json prev = json::array();
      for (int v : layout.joint_state(st)) prev.push_back(v + 1);
      json probs = json::array();
      for (Eigen::Index q = 0; q < c.transitions[l].cols(); ++q) probs.push_back(c.transitions[l](st, q));
      tr.push_back({{"prev", std::move(prev)}, {"probs", std::move(probs)}});
    }
    jl["transitions"] = std::move(tr);
    layers.push_back(std::move(jl));
  }
  return {{"name", c.name}, {"covariate_law", law_name(c.covariate_law)}, {"layers", std::move(layers)}};
}

GeneratorConfig config_from_json(const json& j) {
  try {
    GeneratorConfig c;
    c.name = j.value("name", "custom");
    c.covariate_law = law_from(j.value("covariate_law", "standard_normal"));
    for (const auto& jl : j.at("layers")) {
      LayerSpec s;
      s.layer_id = jl.at("layer_id").get<int>();
      s.directed = jl.at("directed").get<bool>();
      s.weighted = jl.at("weighted").get<bool>();
      s.n_blocks = jl.at("n_blocks").get<int>();
      s.covariate_dim = jl.value("covariate_dim", 0);
      c.specs.push_back(s);
    }
    const DesignLayout layout = c.layout();
    for (std::size_t l = 0; l < c.specs.size(); ++l) {
      const auto& jl = j.at("layers")[l];
      const auto& s = c.specs[l];
      c.alpha.push_back(vector_from(jl.at("alpha")));
      c.nu.push_back(matrix_from(jl.at("nu")));
      std::vector<Eigen::VectorXd> beta;
      Eigen::MatrixXd sigma2;
      if (s.weighted) {
        for (const auto& row : jl.at("beta"))
          for (const auto& cell : row) beta.push_back(cell.is_array() ? vector_from(cell) : Eigen::VectorXd::Constant(1, cell.get<double>()));
        sigma2 = matrix_from(jl.at("sigma2"));
      }
      c.beta.push_back(std::move(beta));
      c.sigma2.push_back(std::move(sigma2));
      Eigen::MatrixXd tr = Eigen::MatrixXd::Zero(layout.n_joint_states(), s.n_blocks);
      std::vector<bool> seen(layout.n_joint_states(), false);
      for (const auto& row : jl.at("transitions")) {
        std::vector<int> prev;
        for (const auto& v : row.at("prev")) prev.push_back(v.get<int>() - 1);
        if (static_cast<int>(prev.size()) != layout.n_layers()) throw Error(ErrorCode::InvalidConfig, "transition prev has wrong length");
        for (int m = 0; m < layout.n_layers(); ++m)
          if (prev[m] < 0 || prev[m] >= layout.n_blocks()[m]) throw Error(ErrorCode::InvalidConfig, "transition prev out of range");
        const int st = layout.joint_index(prev);
        const auto& probs = row.at("probs");
        if (static_cast<int>(probs.size()) != s.n_blocks) throw Error(ErrorCode::InvalidConfig, "transition probs length");
        for (int q = 0; q < s.n_blocks; ++q) tr(st, q) = probs[q].get<double>();
        seen[st] = true;
      }
      for (bool b : seen)
        if (!b) throw Error(ErrorCode::InvalidConfig, "layer " + std::to_string(l + 1) + ": missing transition rows");
      c.transitions.push_back(std::move(tr));
    }
    validate_config(c);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

json kappa_to_json(const TransitionParams& kappa, const DesignLayout& layout) {
  json groups = json::array();
  for (const auto& g : layout.groups()) {
    json ls = json::array();
    for (int m : g.layers) ls.push_back(m + 1);
    groups.push_back({{"layers", std::move(ls)}, {"offset", g.offset}, {"size", g.size}});
  }
  json layers = json::array();
  for (const auto& k : kappa.kappa) layers.push_back(matrix_json(k));
  return {{"layout", {{"n_blocks", layout.n_blocks()}, {"row_length", layout.row_length()}, {"groups", groups}}},
          {"kappa", std::move(layers)}};
}

TransitionParams kappa_from_json(const json& j) {
  TransitionParams p;
  for (const auto& k : j.at("kappa")) p.kappa.push_back(matrix_from(k));
  return p;
}

json truth_to_json(const GroundTruth& truth) {
  const auto& z = truth.memberships;
  json mem = json::array();
  for (int l = 0; l < z.n_layers(); ++l) {
    json per_t = json::array();
    for (int t = 0; t < z.n_times(); ++t) {
      json row = json::array();
      for (int i = 0; i < z.n_nodes(); ++i) row.push_back(z.at(i, t, l) + 1);
      per_t.push_back(std::move(row));
    }
    mem.push_back(std::move(per_t));
  }
  return {{"n_nodes", z.n_nodes()},
          {"n_times", z.n_times()},
          {"memberships", std::move(mem)},
          {"kappa", kappa_to_json(truth.kappa, truth.config.layout())},
          {"config", config_to_json(truth.config)}};
}

GroundTruth truth_from_json(const json& j) {
  try {
    GroundTruth t;
    t.config = config_from_json(j.at("config"));
    const int N = j.at("n_nodes").get<int>();
    const int T = j.at("n_times").get<int>();
    std::vector<int> q;
    for (const auto& s : t.config.specs) q.push_back(s.n_blocks);
    t.memberships = MembershipState(N, T, q);
    const auto& mem = j.at("memberships");
    if (static_cast<int>(mem.size()) != static_cast<int>(q.size())) throw Error(ErrorCode::ParseError, "memberships layer count");
    for (std::size_t l = 0; l < q.size(); ++l) {
      if (static_cast<int>(mem[l].size()) != T) throw Error(ErrorCode::ParseError, "memberships time count");
      for (int tt = 0; tt < T; ++tt) {
        if (static_cast<int>(mem[l][tt].size()) != N) throw Error(ErrorCode::ParseError, "memberships node count");
        for (int i = 0; i < N; ++i) t.memberships.set(i, tt, static_cast<int>(l), mem[l][tt][i].get<int>() - 1);
      }
    }
    t.memberships.check();
    t.kappa = kappa_from_json(j.at("kappa"));
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("truth: ") + e.what());
  }
}

}  // namespace dsbmm
