#pragma once

#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dsbmm/dgp.hpp"
#include "dsbmm/panel.hpp"
#include "dsbmm/rng.hpp"

namespace testing {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double se = 0.0;
};

inline Moments moments(std::span<const double> x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= n;
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= n - 1.0;
  m.se = std::sqrt(m.var / n);
  return m;
}

/// Standard error of the mean from non-overlapping batch means.
inline double batch_se(std::span<const double> x, int batches = 50) {
  const std::size_t b = x.size() / batches;
  std::vector<double> means;
  for (int k = 0; k < batches; ++k) {
    double s = 0.0;
    for (std::size_t t = k * b; t < (k + 1) * b; ++t) s += x[t];
    means.push_back(s / static_cast<double>(b));
  }
  return moments(means).se;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dsbmm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Small random generator configuration: directed weighted layer and
/// undirected unweighted layer, random tables.
inline dsbmm::GeneratorConfig random_config(dsbmm::RngStream& rng, std::vector<int> q = {2, 2}) {
  using namespace dsbmm;
  GeneratorConfig c;
  c.name = "random";
  for (std::size_t l = 0; l < q.size(); ++l) {
    const bool first = l == 0;
    c.specs.push_back(LayerSpec{static_cast<int>(l) + 1, first, first, q[l], 0});
  }
  const DesignLayout layout = c.layout();
  for (std::size_t l = 0; l < q.size(); ++l) {
    const int Q = q[l];
    c.alpha.push_back(Eigen::VectorXd::Constant(Q, 1.0 / Q));
    Eigen::MatrixXd nu(Q, Q);
    for (int a = 0; a < Q; ++a)
      for (int b = a; b < Q; ++b) nu(a, b) = nu(b, a) = 0.15 + 0.7 * rng.uniform();
    if (c.specs[l].directed)
      for (int a = 0; a < Q; ++a)
        for (int b = 0; b < Q; ++b) nu(a, b) = 0.15 + 0.7 * rng.uniform();
    c.nu.push_back(nu);
    if (c.specs[l].weighted) {
      std::vector<Eigen::VectorXd> beta;
      Eigen::MatrixXd s2(Q, Q);
      for (int a = 0; a < Q; ++a) {
        for (int b = 0; b < Q; ++b) {
          beta.push_back(Eigen::VectorXd::Constant(1, rng.normal()));
          s2(a, b) = 0.2 + rng.uniform();
        }
      }
      c.beta.push_back(beta);
      c.sigma2.push_back(s2);
    } else {
      c.beta.emplace_back();
      c.sigma2.emplace_back();
    }
    Eigen::MatrixXd table(layout.n_joint_states(), Q);
    for (int s = 0; s < layout.n_joint_states(); ++s) {
      double tot = 0.0;
      for (int k = 0; k < Q; ++k) tot += table(s, k) = 0.1 + rng.uniform();
      table.row(s) /= tot;
    }
    c.transitions.push_back(table);
  }
  return c;
}

}  // namespace testing
