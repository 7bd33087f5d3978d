#include <doctest.h>

#include <fstream>

#include "dsbmm/dgp.hpp"
#include "dsbmm/errors.hpp"
#include "dsbmm/panel.hpp"
#include "support.hpp"

using namespace dsbmm;
namespace fs = std::filesystem;

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

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("validate_panel rejects each broken invariant") {
  const LayerSpec weighted{1, true, true, 2, 0};
  const LayerSpec undirected{1, false, false, 2, 0};

  MultiLayerPanel self(3, 1, {weighted});
  self.set_raw(0, 0, 0, 0, true, 2.0);
  CHECK(code_of([&] { validate_panel(self); }) == ErrorCode::SelfLoopPresent);

  MultiLayerPanel mismatch(3, 1, {weighted});
  mismatch.set_raw(0, 0, 1, 0, true, 0.0);
  CHECK(code_of([&] { validate_panel(mismatch); }) == ErrorCode::WeightIndicatorMismatch);

  MultiLayerPanel negative(3, 1, {weighted});
  negative.set_raw(0, 0, 1, 0, true, -1.0);
  CHECK(code_of([&] { validate_panel(negative); }) == ErrorCode::NonPositiveWeight);

  MultiLayerPanel asym(3, 1, {undirected});
  asym.set_edge(0, 0, 1, 0, 1.0);
  CHECK(code_of([&] { validate_panel(asym); }) == ErrorCode::AsymmetricUndirectedLayer);
  asym.set_edge(0, 1, 0, 0, 1.0);
  CHECK_NOTHROW(validate_panel(asym));
}

TEST_CASE("generated panels validate for every preset") {
  for (const auto& name : preset_names()) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      RngStream rng(seed, 0);
      auto [panel, truth] = simulate(build_preset(name, 12, 4), 12, 4, rng);
      CHECK_NOTHROW(validate_panel(panel));
      CHECK(panel.n_layers() == 3);
      for (int t = 0; t < 4; ++t)
        for (int i = 0; i < 12; ++i)
          for (int j = 0; j < 12; ++j) CHECK(panel.y(2, i, j, t) == (panel.d(2, i, j, t) ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("load_panel maps rows directly and treats absent rows as zero") {
  const auto dir = testing::scratch_dir("load");
  write(dir / "spec.json", R"([{"layer_id":1,"directed":true,"weighted":true,"n_blocks":1,"covariate_dim":0}])");
  write(dir / "e.csv", "i,j,t,y\n1,2,1,3.5\n");
  const auto p = load_panel({dir / "e.csv"}, {std::nullopt}, dir / "spec.json");
  CHECK(p.n_nodes() == 2);
  CHECK(p.n_times() == 1);
  CHECK(p.d(0, 0, 1, 0));
  CHECK(p.y(0, 0, 1, 0) == 3.5);
  CHECK_FALSE(p.d(0, 1, 0, 0));

  write(dir / "spec2.json",
        R"({"n_nodes":3,"n_times":2,"layers":[{"layer_id":1,"directed":true,"weighted":false,"n_blocks":2,"covariate_dim":0}]})");
  write(dir / "empty.csv", "i,j,t,y\n");
  const auto e = load_panel({dir / "empty.csv"}, {std::nullopt}, dir / "spec2.json");
  CHECK(e.n_nodes() == 3);
  for (int t = 0; t < 2; ++t)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK_FALSE(e.d(0, i, j, t));

  write(dir / "self.csv", "i,j,t,y\n1,1,1,2.0\n");
  CHECK(code_of([&] { load_panel({dir / "self.csv"}, {std::nullopt}, dir / "spec.json"); }) == ErrorCode::SelfLoopPresent);
  write(dir / "dup.csv", "i,j,t,y\n1,2,1,2.0\n1,2,1,3.0\n");
  CHECK(code_of([&] { load_panel({dir / "dup.csv"}, {std::nullopt}, dir / "spec.json"); }) == ErrorCode::DuplicateDyadTime);
  write(dir / "bad.csv", "i,j,t,y\n1,x,1,2.0\n");
  CHECK(code_of([&] { load_panel({dir / "bad.csv"}, {std::nullopt}, dir / "spec.json"); }) == ErrorCode::ParseError);
  write(dir / "range.csv", "i,j,t,y\n1,5,1,2.0\n");
  CHECK(code_of([&] { load_panel({dir / "range.csv"}, {std::nullopt}, dir / "spec2.json"); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("save then load is the identity") {
  RngStream rng(5, 0);
  auto [panel, truth] = simulate(build_preset("bidirectional", 10, 3), 10, 3, rng);
  const auto dir = testing::scratch_dir("roundtrip");
  save_panel(panel, dir);
  const auto back = load_panel_dir(dir);
  CHECK(back == panel);
  CHECK(back.specs() == panel.specs());

  auto cfg = trade_config();
  RngStream rng2(6, 0);
  auto [tp, tt] = simulate(cfg, 8, 2, rng2);
  const auto dir2 = testing::scratch_dir("roundtrip_cov");
  save_panel(tp, dir2);
  CHECK(load_panel_dir(dir2) == tp);
}

TEST_CASE("save_panel into an unwritable location raises IoError") {
  MultiLayerPanel p(2, 1, {LayerSpec{1, true, false, 1, 0}});
  const auto dir = testing::scratch_dir("unwritable");
  write(dir / "file", "x");
  CHECK(code_of([&] { save_panel(p, dir / "file" / "sub"); }) == ErrorCode::IoError);
}

TEST_CASE("membership state checks label ranges") {
  MembershipState z(2, 2, {2, 3});
  z.set(1, 1, 1, 2);
  CHECK_NOTHROW(z.check());
  z.set(0, 0, 0, 2);
  CHECK(code_of([&] { z.check(); }) == ErrorCode::StateOutOfRange);
}
