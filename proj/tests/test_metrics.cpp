#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dsbmm/dgp.hpp"
#include "dsbmm/errors.hpp"
#include "dsbmm/metrics.hpp"
#include "support.hpp"

using namespace dsbmm;

namespace {

// One directed weighted layer with Q = 2 and a second binary layer.
ChainStore fake_chain(int draws) {
  ChainStore c;
  c.specs = {LayerSpec{1, true, true, 2, 0}, LayerSpec{2, false, false, 2, 0}};
  c.n_nodes = 2;
  c.n_times = 2;
  const auto prior = default_emission_prior(c.specs);
  const auto base = initial_connectivity(c.specs, prior);
  for (int d = 0; d < draws; ++d) {
    c.retained.push_back(d + 1);
    c.connectivity.push_back(base);
    c.kappa.push_back(TransitionParams{{Eigen::MatrixXd::Zero(1, 4), Eigen::MatrixXd::Zero(1, 4)}});
    c.z.emplace_back(2, 2, std::vector<int>{2, 2});
  }
  return c;
}

std::vector<double> ar1(double phi, int n, RngStream& rng) {
  std::vector<double> x(n);
  x[0] = rng.normal() / std::sqrt(1.0 - phi * phi);
  for (int t = 1; t < n; ++t) x[t] = phi * x[t - 1] + rng.normal();
  return x;
}

}  // namespace

TEST_CASE("adjusted Rand index examples") {
  const std::vector<int> a{0, 0, 1, 1}, swapped{1, 1, 0, 0}, crossed{0, 1, 0, 1};
  CHECK(global_ari(a, a) == doctest::Approx(1.0));
  CHECK(global_ari(a, swapped) == doctest::Approx(1.0));
  CHECK(global_ari(a, crossed) == doctest::Approx(-0.5));
  const std::vector<int> shorter{0, 1};
  CHECK_THROWS_AS(global_ari(a, shorter), Error);
}

TEST_CASE("posterior mode with ties to the smallest label") {
  auto c = fake_chain(4);
  // node 0, time 0, layer 0: labels 1,1,0,1 -> 1; node 1: 0,1,1,0 -> tie -> 0
  const int n0[4] = {1, 1, 0, 1}, n1[4] = {0, 1, 1, 0};
  for (int d = 0; d < 4; ++d) {
    c.z[d].set(0, 0, 0, n0[d]);
    c.z[d].set(1, 0, 0, n1[d]);
  }
  const auto map = map_membership(c);
  CHECK(map.at(0, 0, 0) == 1);
  CHECK(map.at(1, 0, 0) == 0);
  CHECK_THROWS_AS(map_membership(fake_chain(0)), Error);
}

TEST_CASE("assignment matches brute force") {
  RngStream rng(51, 0);
  for (int n : {2, 3, 4}) {
    for (int rep = 0; rep < 50; ++rep) {
      Eigen::MatrixXd w(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) w(i, j) = std::floor(10.0 * rng.uniform());
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      double best = -1.0;
      do {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += w(i, perm[i]);
        best = std::max(best, s);
      } while (std::next_permutation(perm.begin(), perm.end()));
      const auto got = max_assignment(w);
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += w(i, got[i]);
      CHECK(s == best);
      auto sorted = got;
      std::sort(sorted.begin(), sorted.end());
      for (int i = 0; i < n; ++i) CHECK(sorted[i] == i);
    }
  }
}

TEST_CASE("label alignment and relabelling") {
  RngStream rng(52, 0);
  auto [panel, truth] = simulate(build_preset("bidirectional", 10, 4), 10, 4, rng);
  const std::vector<Permutation> perm{{1, 0}, {2, 0, 1}, {1, 2, 0}};
  std::vector<Permutation> inverse(3);
  for (int l = 0; l < 3; ++l) {
    inverse[l].resize(perm[l].size());
    for (std::size_t q = 0; q < perm[l].size(); ++q) inverse[l][perm[l][q]] = static_cast<int>(q);
  }
  const auto shuffled = relabel(truth.memberships, perm);
  CHECK(align_labels(shuffled, truth.memberships) == inverse);
  CHECK(relabel(shuffled, inverse) == truth.memberships);

  const auto layout = truth.config.layout();
  const auto moved = relabel(truth.kappa, layout, perm);
  for (int l = 0; l < 3; ++l) {
    const auto before = transition_table(layout, l, truth.kappa.kappa[l]);
    const auto after = transition_table(layout, l, moved.kappa[l]);
    for (int s = 0; s < layout.n_joint_states(); ++s) {
      auto st = layout.joint_state(s);
      for (int m = 0; m < 3; ++m) st[m] = perm[m][st[m]];
      for (int q = 0; q < before.cols(); ++q)
        CHECK(std::fabs(after(layout.joint_index(st), perm[l][q]) - before(s, q)) < 1e-10);
    }
  }
  const auto back = relabel(moved, layout, inverse);
  for (int l = 0; l < 3; ++l) CHECK((back.kappa[l] - truth.kappa.kappa[l]).cwiseAbs().maxCoeff() < 1e-9);

  const auto params = truth.config.connectivity();
  const auto p2 = relabel(params, truth.config.specs, perm);
  CHECK(p2.layers[1].nu(perm[1][0], perm[1][2]) == params.layers[1].nu(0, 2));
  CHECK(relabel(p2, truth.config.specs, inverse) == params);
}

TEST_CASE("type-7 quantiles") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({5}, 0.9) == 5.0);
  CHECK_THROWS_AS(quantile({}, 0.5), Error);
}

TEST_CASE("mean squared error examples") {
  auto c = fake_chain(3);
  auto truth = c.connectivity[0];
  truth.layers[0].nu.setConstant(0.5);
  for (auto& d : c.connectivity) d.layers[0].nu.setConstant(0.5);
  const TransitionParams none;
  CHECK(*mse(c, truth, none, Family::Nu, 0) == doctest::Approx(0.0));
  for (auto& d : c.connectivity) d.layers[0].nu.setConstant(0.6);
  CHECK(*mse(c, truth, none, Family::Nu, 0) == doctest::Approx(0.01));
  for (auto& d : c.connectivity) d.layers[0].nu(1, 1) = 0.65;
  CHECK(*mse(c, truth, none, Family::Nu, 0) == doctest::Approx((3 * 0.01 + 0.0225) / 4.0));
  // undirected layers count each unordered pair once
  truth.layers[1].nu.setConstant(0.5);
  for (auto& d : c.connectivity) {
    d.layers[1].nu.setConstant(0.5);
    d.layers[1].nu(0, 1) = d.layers[1].nu(1, 0) = 0.7;
  }
  CHECK(*mse(c, truth, none, Family::Nu, 1) == doctest::Approx(0.04 / 3.0));
  CHECK_FALSE(mse(c, truth, none, Family::Beta, 1).has_value());
  CHECK(mse(c, truth, none, Family::Sigma2, 0).has_value());
}

TEST_CASE("credible interval coverage") {
  auto c = fake_chain(101);
  // layer 1 columns: intercept, main 1, main 2, interaction; eligible: 2 and 3
  for (int d = 0; d < 101; ++d) {
    c.kappa[d].kappa[0](0, 2) = -1.0 + 0.02 * d;
    c.kappa[d].kappa[0](0, 3) = 4.0 + 0.02 * d;
    c.kappa[d].kappa[0](0, 0) = 100.0;
  }
  TransitionParams t{{Eigen::MatrixXd::Zero(1, 4), Eigen::MatrixXd::Zero(1, 4)}};
  CHECK(cic(c, t, 0) == doctest::Approx(0.5));
  t.kappa[0](0, 3) = 5.0;
  CHECK(cic(c, t, 0) == doctest::Approx(1.0));
  t.kappa[0](0, 2) = 3.0;
  t.kappa[0](0, 3) = -3.0;
  CHECK(cic(c, t, 0) == doctest::Approx(0.0));
}

TEST_CASE("Granger block causality detection") {
  auto c = fake_chain(101);
  CHECK(gbc(c) == Eigen::MatrixXi::Zero(2, 2));
  // own-lag and intercept effects never count
  for (auto& k : c.kappa) k.kappa[0](0, 0) = k.kappa[0](0, 1) = 3.0;
  CHECK(gbc(c) == Eigen::MatrixXi::Zero(2, 2));
  // layer 2's main effect on layer 1
  for (int d = 0; d < 101; ++d) c.kappa[d].kappa[0](0, 2) = 1.0 + 0.01 * d;
  Eigen::MatrixXi expected = Eigen::MatrixXi::Zero(2, 2);
  expected(1, 0) = 1;
  CHECK(gbc(c) == expected);
  // an interaction on layer 2's row implicates layer 1
  for (int d = 0; d < 101; ++d) c.kappa[d].kappa[1](0, 3) = -2.0;
  expected(0, 1) = 1;
  CHECK(gbc(c) == expected);

  const auto uni = true_gbc(build_preset("unidirectional", 10, 3));
  Eigen::MatrixXi u = Eigen::MatrixXi::Zero(3, 3);
  u(2, 1) = 1;
  CHECK(uni == u);
  u(1, 2) = 1;
  CHECK(true_gbc(build_preset("bidirectional", 10, 3)) == u);
  CHECK(true_gbc(build_preset("no_causality", 10, 3)) == Eigen::MatrixXi::Zero(3, 3));
}

TEST_CASE("convergence diagnostics on known processes") {
  RngStream rng(53, 0);
  int ac_ok = 0, geweke_ok = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(10000);
    for (auto& v : x) v = rng.normal();
    const auto d = diagnostics(x);
    ac_ok += std::fabs(d.ac1) < 0.05;
    geweke_ok += d.geweke_p > 0.01;
  }
  CHECK(ac_ok >= 95);
  CHECK(geweke_ok >= 95);

  const auto y = ar1(0.5, 5000, rng);
  const auto d = diagnostics(y);
  CHECK(std::fabs(d.ac1 - 0.5) < 0.05);
  CHECK(std::fabs(d.ac5 - 0.03125) < 0.05);
  // AR(1) spectral density at zero: 1 / (1 - phi)^2
  CHECK(std::fabs(spectrum0_ar(y) - 4.0) < 0.6);

  // Cramér-von Mises upper quantiles
  CHECK(pcramer(0.461) == doctest::Approx(0.95).epsilon(0.005));
  CHECK(pcramer(0.743) == doctest::Approx(0.99).epsilon(0.002));

  std::vector<double> flat(100, 2.0);
  try {
    diagnostics(flat);
    FAIL("expected ConstantChain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConstantChain);
  }
  std::vector<double> tiny(10, 1.0);
  CHECK_THROWS_AS(diagnostics(tiny), Error);
}

TEST_CASE("evaluation of a fitted chain against its truth") {
  RngStream rng(54, 0);
  auto [panel, truth] = simulate(build_preset("unidirectional", 10, 4), 10, 4, rng);
  FitConfig cfg;
  cfg.iterations = 80;
  cfg.burn_in = 20;
  cfg.kmeans_restarts = 2;
  const auto chain = run(panel, cfg);
  const auto r = evaluate(chain, &truth);
  CHECK(r.has_truth);
  CHECK(r.retained == 60);
  CHECK(r.global_ari.size() == 3);
  for (double a : r.global_ari) CHECK(a <= 1.0);
  CHECK(r.true_gbc == true_gbc(truth.config));
  const auto j = report_to_json(r);
  CHECK(j.contains("global_ari"));
  const auto csv = report_to_csv(r);
  CHECK(csv.rfind("metric,layer,family,value", 0) == 0);

  const auto bare = evaluate(chain, nullptr);
  CHECK_FALSE(bare.has_truth);
  CHECK_FALSE(bare.diagnostics.empty());
}
