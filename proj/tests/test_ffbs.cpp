#include <doctest.h>

#include <cmath>
#include <vector>

#include "dsbmm/ffbs.hpp"
#include "dsbmm/gibbs.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dsbmm;

TEST_CASE("filtered marginals match path enumeration") {
  RngStream rng(31, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const int N = 2 + rep % 2, T = 1 + rep % 4;
    auto inst = oracle::random_instance(rng, N, T, rep % 3 == 0 ? std::vector<int>{3, 2} : std::vector<int>{2, 2});
    for (bool feedback : {true, false}) {
      for (int l = 0; l < 2; ++l) {
        for (int i = 0; i < N; ++i) {
          const auto seq = forward_filter(i, l, inst.panel, inst.z, inst.params, inst.kappa, inst.layout,
                                          FfbsOptions{feedback, false, false});
          const auto ref = oracle::filtered(inst.panel, inst.z, inst.params, inst.kappa, inst.layout, i, l, feedback);
          CHECK((seq.filtered - ref).cwiseAbs().maxCoeff() < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("backward sampling law equals the full conditional of the path") {
  RngStream rng(32, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const int N = 2 + rep % 2, T = 1 + rep % 4;
    auto inst = oracle::random_instance(rng, N, T);
    for (int l = 0; l < 2; ++l) {
      for (int i = 0; i < N; ++i) {
        const auto seq = forward_filter(i, l, inst.panel, inst.z, inst.params, inst.kappa, inst.layout);
        const auto law = oracle::ffbs_law(seq, inst.z, inst.kappa, inst.layout, i, l);
        const auto ref = oracle::path_law(inst.panel, inst.z, inst.params, inst.kappa, inst.layout, i, l);
        for (std::size_t c = 0; c < law.size(); ++c) CHECK(std::fabs(law[c] - ref[c]) < 1e-10);
      }
    }
  }
}

TEST_CASE("constant emission leaves the prediction unchanged") {
  RngStream rng(33, 0);
  auto inst = oracle::random_instance(rng, 2, 4);
  const auto tables = transition_tables(inst.kappa, inst.layout);
  for (int l = 0; l < 2; ++l) {
    const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(4, 2, -3.7);
    const auto seq = forward_filter(0, l, flat, inst.z, inst.params.layers[l].alpha, tables, inst.layout);
    CHECK((seq.filtered - seq.predicted).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((seq.predicted.row(0).transpose() - inst.params.layers[l].alpha).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("single time point reduces to alpha times emission") {
  RngStream rng(34, 0);
  auto inst = oracle::random_instance(rng, 3, 1);
  for (int l = 0; l < 2; ++l) {
    const auto ev = node_emission(0, l, inst.panel, inst.z, inst.params.layers[l]);
    Eigen::VectorXd w = inst.params.layers[l].alpha.array() * ev.row(0).transpose().array().exp();
    w /= w.sum();
    const auto seq = forward_filter(0, l, inst.panel, inst.z, inst.params, inst.kappa, inst.layout);
    CHECK((seq.filtered.row(0).transpose() - w).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sampled paths follow the enumerated law") {
  RngStream rng(35, 0);
  auto inst = oracle::random_instance(rng, 3, 3);
  const int l = 1, i = 2;
  const auto seq = forward_filter(i, l, inst.panel, inst.z, inst.params, inst.kappa, inst.layout);
  const auto law = oracle::path_law(inst.panel, inst.z, inst.params, inst.kappa, inst.layout, i, l);
  const int draws = 100000;
  std::vector<double> freq(law.size(), 0.0);
  for (int k = 0; k < draws; ++k)
    freq[oracle::encode(backward_sample(seq, i, l, inst.z, inst.kappa, inst.layout, rng), 2)] += 1.0 / draws;
  for (std::size_t c = 0; c < law.size(); ++c) {
    const double se = std::sqrt(law[c] * (1.0 - law[c]) / draws);
    CHECK(std::fabs(freq[c] - law[c]) < 3.0 * se + 1e-12);
  }
}

TEST_CASE("membership sweeps leave the joint posterior invariant") {
  // N = 3, T = 3, two binary layers: 2^18 joint configurations
  RngStream rng(36, 0);
  auto inst = oracle::random_instance(rng, 3, 3);
  const int N = 3, T = 3, L = 2;
  const int cells = N * T * L;
  const long n_states = 1L << cells;
  std::vector<double> logp(n_states);
  MembershipState z(N, T, {2, 2});
  for (long s = 0; s < n_states; ++s) {
    for (int c = 0; c < cells; ++c) z.set(c / (T * L), (c / L) % T, c % L, static_cast<int>((s >> c) & 1));
    logp[s] = complete_loglik(inst.panel, z, inst.params, inst.kappa, inst.layout);
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  std::vector<double> exact(cells, 0.0);
  double total = 0.0;
  for (long s = 0; s < n_states; ++s) {
    const double w = std::exp(logp[s] - mx);
    total += w;
    for (int c = 0; c < cells; ++c)
      if ((s >> c) & 1) exact[c] += w;
  }
  for (auto& v : exact) v /= total;

  const int sweeps = 50000;
  std::vector<std::vector<double>> trace(cells, std::vector<double>(sweeps));
  MembershipState cur = inst.z;
  for (int k = 0; k < sweeps; ++k) {
    cur = sample_memberships(inst.panel, cur, inst.params, inst.kappa, inst.layout, rng);
    for (int c = 0; c < cells; ++c) trace[c][k] = cur.at(c / (T * L), (c / L) % T, c % L);
  }
  for (int c = 0; c < cells; ++c) {
    const auto m = testing::moments(trace[c]);
    const double se = testing::batch_se(trace[c]);
    CAPTURE(c);
    CHECK(std::fabs(m.mean - exact[c]) < 3.0 * se + 1e-3);
  }
}
