#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "dsbmm/dgp.hpp"
#include "dsbmm/errors.hpp"
#include "support.hpp"

using namespace dsbmm;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

int state(const DesignLayout& layout, int a, int b, int c) {
  const std::vector<int> z{a, b, c};
  return layout.joint_index(z);
}

}  // namespace

TEST_CASE("preset connectivity values") {
  const auto c = build_preset("unidirectional", 50, 15);
  CHECK(c.nu[0](0, 1) == 0.60);
  CHECK(c.nu[1](2, 1) == 0.48);
  CHECK(c.nu[2](0, 2) == 0.400);
  CHECK(c.nu[2] == c.nu[2].transpose());
  CHECK(c.beta[0][1][0] == -0.15);
  CHECK(c.beta[1][4][0] == 1.50);
  CHECK(c.sigma2[0](1, 1) == 0.040);
  CHECK(c.sigma2[1](2, 2) == 0.010);
  CHECK(c.alpha[1].sum() == doctest::Approx(1.0));
  CHECK_NOTHROW(validate_config(c));
}

TEST_CASE("preset transition tables") {
  const DesignLayout layout({2, 3, 3});
  const auto uni = build_preset("unidirectional", 50, 15);
  // layer 2 given layer 3 in block 1 and own previous block 2
  const Eigen::RowVector3d row = uni.transitions[1].row(state(layout, 0, 1, 0));
  CHECK(row[0] == 0.34);
  CHECK(row[1] == 0.65);
  CHECK(row[2] == 0.01);
  // no dependence on layer 1
  for (int s = 0; s < layout.n_joint_states(); ++s) {
    const int other = layout.with_layer(s, 0, 1 - layout.layer_of(s, 0));
    CHECK(uni.transitions[1].row(s) == uni.transitions[1].row(other));
  }
  CHECK(uni.transitions[1](state(layout, 0, 0, 0), 0) == 0.95);
  CHECK(uni.transitions[2](state(layout, 1, 2, 2), 2) == 0.98);
  CHECK(uni.transitions[0](state(layout, 1, 0, 0), 1) == 0.9);

  const auto none = build_preset("no_causality", 50, 15);
  CHECK(none.transitions[1](state(layout, 0, 1, 0), 1) == 0.98);
  CHECK(none.transitions[1](state(layout, 0, 1, 0), 0) == doctest::Approx(0.01));

  const auto bi = build_preset("bidirectional", 50, 15);
  // layer 3 given layer 2 in block 2 and own previous block 3
  CHECK(bi.transitions[2](state(layout, 0, 1, 2), 0) == 0.01);
  CHECK(bi.transitions[2](state(layout, 0, 1, 2), 1) == 0.34);
  CHECK(bi.transitions[2](state(layout, 0, 1, 2), 2) == 0.65);
}

TEST_CASE("preset errors") {
  CHECK(code_of([] { build_preset("bogus", 50, 15); }) == ErrorCode::UnknownPreset);
  CHECK(code_of([] { build_preset("no_causality", 5, 15); }) == ErrorCode::TooFewNodes);
  CHECK_NOTHROW(build_preset("no_causality", 6, 2));
}

TEST_CASE("validate_config rejects broken configurations") {
  auto c = build_preset("bidirectional", 10, 3);
  auto bad = c;
  bad.alpha[0][0] = 0.7;
  CHECK(code_of([&] { validate_config(bad); }) == ErrorCode::InvalidConfig);
  bad = c;
  bad.nu[2](0, 1) = 0.5;
  CHECK(code_of([&] { validate_config(bad); }) == ErrorCode::InvalidConfig);
  bad = c;
  bad.transitions[1](0, 0) += 0.01;
  CHECK(code_of([&] { validate_config(bad); }) == ErrorCode::InvalidConfig);
  bad = c;
  bad.sigma2[0](0, 0) = -1.0;
  CHECK(code_of([&] { validate_config(bad); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("configuration and truth JSON round trips") {
  for (const auto& c : {build_preset("unidirectional", 10, 3), trade_config()}) {
    const auto back = config_from_json(config_to_json(c));
    CHECK(back.name == c.name);
    CHECK(back.specs == c.specs);
    CHECK(back.covariate_law == c.covariate_law);
    CHECK(back.connectivity() == c.connectivity());
    for (std::size_t l = 0; l < c.specs.size(); ++l) CHECK(back.transitions[l] == c.transitions[l]);
  }
  RngStream rng(41, 0);
  auto [panel, truth] = simulate(build_preset("bidirectional", 8, 4), 8, 4, rng);
  const auto back = truth_from_json(nlohmann::json::parse(truth_to_json(truth).dump()));
  CHECK(back.memberships == truth.memberships);
  CHECK(back.kappa.kappa.size() == 3);
  for (int l = 0; l < 3; ++l) CHECK((back.kappa.kappa[l] - truth.kappa.kappa[l]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("simulation is deterministic given the seed") {
  const auto c = build_preset("no_causality", 12, 5);
  RngStream a(7, 0), b(7, 0), d(8, 0);
  auto [pa, ta] = simulate(c, 12, 5, a);
  auto [pb, tb] = simulate(c, 12, 5, b);
  auto [pd, td] = simulate(c, 12, 5, d);
  CHECK(pa == pb);
  CHECK(ta.memberships == tb.memberships);
  CHECK_FALSE(pa == pd);
}

TEST_CASE("edge frequencies match connectivity") {
  const auto c = build_preset("no_causality", 60, 5);
  RngStream rng(42, 0);
  auto [panel, truth] = simulate(c, 60, 5, rng);
  const auto& z = truth.memberships;
  for (int l : {0, 2}) {
    const int Q = c.specs[l].n_blocks;
    const bool directed = c.specs[l].directed;
    Eigen::MatrixXd present = Eigen::MatrixXd::Zero(Q, Q), total = Eigen::MatrixXd::Zero(Q, Q);
    for (int t = 0; t < 5; ++t)
      for (int i = 0; i < 60; ++i)
        for (int j = directed ? 0 : i + 1; j < 60; ++j) {
          if (i == j) continue;
          int q = z.at(i, t, l), r = z.at(j, t, l);
          if (!directed && q > r) std::swap(q, r);
          total(q, r) += 1;
          present(q, r) += panel.d(l, i, j, t);
        }
    for (int q = 0; q < Q; ++q)
      for (int r = directed ? 0 : q; r < Q; ++r) {
        if (total(q, r) < 50) continue;
        const double p = c.nu[l](q, r);
        const double se = std::sqrt(p * (1 - p) / total(q, r));
        CHECK(std::fabs(present(q, r) / total(q, r) - p) < 3.5 * se);
      }
  }
}

TEST_CASE("membership transitions follow the tables") {
  const auto c = build_preset("bidirectional", 400, 12);
  RngStream rng(43, 0);
  auto [panel, truth] = simulate(c, 400, 12, rng);
  const auto layout = c.layout();
  const auto& z = truth.memberships;
  for (int l = 0; l < 3; ++l) {
    const int Q = c.specs[l].n_blocks;
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(layout.n_joint_states(), Q);
    for (int i = 0; i < 400; ++i)
      for (int t = 1; t < 12; ++t) counts(layout.joint_index(z.joint(i, t - 1)), z.at(i, t, l)) += 1;
    double chi2 = 0.0;
    int df = 0;
    for (int s = 0; s < layout.n_joint_states(); ++s) {
      const double n = counts.row(s).sum();
      // cells with small expected counts are pooled into one bin
      double pooled_o = 0.0, pooled_e = 0.0;
      int bins = 0;
      for (int q = 0; q < Q; ++q) {
        const double e = n * c.transitions[l](s, q);
        if (e < 5.0) {
          pooled_o += counts(s, q);
          pooled_e += e;
          continue;
        }
        chi2 += (counts(s, q) - e) * (counts(s, q) - e) / e;
        ++bins;
      }
      if (pooled_e >= 5.0) {
        chi2 += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
        ++bins;
      }
      if (bins > 1) df += bins - 1;
    }
    REQUIRE(df > 0);
    const boost::math::chi_squared dist(df);
    CAPTURE(l);
    CHECK(chi2 < boost::math::quantile(dist, 0.999));
  }
}
