#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "dsbmm/dgp.hpp"
#include "dsbmm/digest.hpp"
#include "dsbmm/errors.hpp"
#include "dsbmm/gibbs.hpp"
#include "dsbmm/metrics.hpp"
#include "support.hpp"

using namespace dsbmm;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kVolatile{"timing.json", "manifest.json"};

MultiLayerPanel small_panel(std::uint64_t seed, int N = 10, int T = 4) {
  RngStream rng(seed, 0);
  return simulate(build_preset("unidirectional", N, T), N, T, rng).first;
}

FitConfig short_config(long iterations, long burn_in, long thin = 1) {
  FitConfig c;
  c.iterations = iterations;
  c.burn_in = burn_in;
  c.thinning = thin;
  c.seed = 5;
  c.kmeans_restarts = 2;
  return c;
}

}  // namespace

TEST_CASE("retention schedule") {
  const auto c = short_config(2000, 1000);
  CHECK(c.retained_count() == 1000);
  CHECK_FALSE(c.retains(1000));
  CHECK(c.retains(1001));
  const auto t = short_config(30, 10, 4);
  CHECK(t.retained_count() == 5);
  const auto store = run(small_panel(1), t);
  CHECK(store.retained == std::vector<long>{14, 18, 22, 26, 30});
  CHECK(store.loglik.size() == 30);
  CHECK(store.z.size() == 5);
  for (double v : store.loglik) CHECK(std::isfinite(v));
}

TEST_CASE("invalid fit settings") {
  auto c = short_config(10, 10);
  CHECK_THROWS_AS(c.validate(), Error);
  c = short_config(10, 2, 0);
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("shrinkage draws are stored only under the group-LASSO prior") {
  const auto panel = small_panel(2);
  auto c = short_config(6, 2);
  c.prior_mode = PriorMode::Normal;
  const auto dn = testing::scratch_dir("mode_normal");
  const auto normal = run(panel, c, dn);
  CHECK(normal.shrinkage.empty());
  CHECK_FALSE(fs::exists(dn / "draws" / "zeta2.csv"));
  CHECK_FALSE(fs::exists(dn / "draws" / "rho.csv"));

  c.prior_mode = PriorMode::GroupLasso;
  const auto dl = testing::scratch_dir("mode_lasso");
  const auto lasso = run(panel, c, dl);
  CHECK(lasso.shrinkage.size() == 4);
  CHECK(fs::exists(dl / "draws" / "zeta2.csv"));
  CHECK(fs::exists(dl / "draws" / "rho.csv"));
  for (const char* f : {"nu.csv", "alpha.csv", "beta.csv", "sigma2.csv", "kappa.csv", "loglik.csv"})
    CHECK(fs::exists(dl / "draws" / f));
  CHECK(fs::exists(dl / "z_draws.bin"));
  CHECK(fs::exists(dl / "meta.json"));
}

TEST_CASE("same seed gives the same chain") {
  const auto panel = small_panel(3);
  const auto c = short_config(15, 5);
  const auto a = testing::scratch_dir("det_a"), b = testing::scratch_dir("det_b");
  const auto sa = run(panel, c, a);
  const auto sb = run(panel, c, b);
  CHECK(sa.loglik == sb.loglik);
  CHECK(sa.state.z == sb.state.z);
  CHECK(directory_digest(a, kVolatile) == directory_digest(b, kVolatile));
  auto other = c;
  other.seed = 6;
  CHECK(run(panel, other).loglik != sa.loglik);
}

TEST_CASE("store round trip") {
  const auto panel = small_panel(4);
  const auto dir = testing::scratch_dir("store");
  const auto s = run(panel, short_config(12, 4, 2), dir);
  const auto back = load_chain(dir);
  CHECK(back.retained == s.retained);
  CHECK(back.z == s.z);
  CHECK(back.loglik == s.loglik);
  CHECK(back.connectivity == s.connectivity);
  CHECK(back.kappa == s.kappa);
  CHECK(back.shrinkage == s.shrinkage);
  CHECK(back.state.z == s.state.z);
  CHECK(back.state.rng.state() == s.state.rng.state());
  CHECK(back.panel_digest == panel_digest(panel));
}

TEST_CASE("resuming reproduces an uninterrupted chain") {
  const auto panel = small_panel(5);
  auto full = short_config(40, 10);
  full.checkpoint_every = 10;
  auto part = full;
  part.iterations = 20;
  const auto a = testing::scratch_dir("resume_full"), b = testing::scratch_dir("resume_part");
  const auto sa = run(panel, full, a);
  run(panel, part, b);
  const auto sb = resume(b, 20);
  CHECK(sa.loglik == sb.loglik);
  CHECK(directory_digest(a, kVolatile) == directory_digest(b, kVolatile));

  const auto before = directory_digest(b, kVolatile);
  resume(b, 0);
  CHECK(directory_digest(b, kVolatile) == before);
}

TEST_CASE("resume rejects a missing or damaged store") {
  const auto empty = testing::scratch_dir("resume_missing");
  try {
    resume(empty, 5);
    FAIL("expected CorruptCheckpoint");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorruptCheckpoint);
  }
  const auto dir = testing::scratch_dir("resume_damaged");
  run(small_panel(6), short_config(4, 1), dir);
  fs::remove(dir / "z_draws.bin");
  try {
    resume(dir, 5);
    FAIL("expected CorruptCheckpoint");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorruptCheckpoint);
  }
}

TEST_CASE("k-means recovers a planted partition") {
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RngStream rng(seed, 0);
    MultiLayerPanel p(40, 5, {LayerSpec{1, true, false, 2, 0}});
    std::vector<int> truth(40);
    for (int i = 0; i < 40; ++i) truth[i] = i % 2;
    for (int t = 0; t < 5; ++t)
      for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 40; ++j)
          if (i != j && rng.uniform() < (truth[i] == truth[j] ? 0.9 : 0.1)) p.set_edge(0, i, j, t, 1.0);
    const auto z = kmeans_memberships(p, rng, 5);
    std::vector<int> est(40);
    for (int i = 0; i < 40; ++i) {
      est[i] = z.at(i, 0, 0);
      for (int t = 1; t < 5; ++t) CHECK(z.at(i, t, 0) == est[i]);
    }
    good += global_ari(est, truth) >= 0.9;
  }
  CHECK(good == 20);

  MultiLayerPanel one(6, 2, {LayerSpec{1, false, false, 1, 0}});
  RngStream rng(1, 0);
  const auto z = kmeans_memberships(one, rng, 3);
  for (int v : z.raw()) CHECK(v == 0);
}

TEST_CASE("degenerate profiles fall back to balanced labels with a warning") {
  MultiLayerPanel empty(8, 3, {LayerSpec{1, true, false, 2, 0}});
  RngStream rng(2, 0);
  std::vector<std::string> warnings;
  const auto z = kmeans_memberships(empty, rng, 3, &warnings);
  CHECK(warnings.size() == 1);
  int ones = 0;
  for (int i = 0; i < 8; ++i) ones += z.at(i, 0, 0);
  CHECK(ones == 4);
}

TEST_CASE("prior draws have the prior means") {
  const std::vector<LayerSpec> specs{LayerSpec{1, true, true, 2, 0}, LayerSpec{2, false, false, 2, 0}};
  const auto prior = default_prior(specs);
  RngStream rng(7, 0);
  const int n = 20000;
  std::vector<double> nu(n), beta(n), rho(n), alpha(n);
  for (int k = 0; k < n; ++k) {
    const auto s = sample_from_prior(specs, 4, 3, prior, rng);
    nu[k] = s.params.layers[1].nu(0, 1);
    beta[k] = s.params.layers[0].beta_at(1, 0)[0];
    rho[k] = s.shrinkage.rho[0];
    alpha[k] = s.params.layers[0].alpha[0];
    CHECK(s.params.layers[1].nu == s.params.layers[1].nu.transpose());
  }
  const auto mn = testing::moments(nu), mb = testing::moments(beta), mr = testing::moments(rho),
             ma = testing::moments(alpha);
  CHECK(std::fabs(mn.mean - 0.5) < 3.0 * mn.se);
  CHECK(std::fabs(mb.mean) < 3.0 * mb.se);
  CHECK(std::fabs(ma.mean - 0.5) < 3.0 * ma.se);
  CHECK(std::fabs(mr.mean - prior.transition.iota1 * prior.transition.iota2) < 3.0 * mr.se);
}
