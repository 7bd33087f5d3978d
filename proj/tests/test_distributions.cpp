#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "dsbmm/distributions.hpp"
#include "dsbmm/errors.hpp"
#include "support.hpp"

using namespace dsbmm;
using testing::moments;

namespace {

constexpr int kDraws = 100000;

struct GigMoments {
  double m1, m2;
};

GigMoments gig_quadrature(double a, double b) {
  boost::math::quadrature::exp_sinh<double> integrator;
  auto dens = [&](double x, int k) { return std::pow(x, k - 0.5) * std::exp(-(a * x + b / x) / 2.0); };
  const double z = integrator.integrate([&](double x) { return dens(x, 0); });
  const double m1 = integrator.integrate([&](double x) { return dens(x, 1); }) / z;
  const double m2 = integrator.integrate([&](double x) { return dens(x, 2); }) / z;
  return {m1, m2};
}

}  // namespace

TEST_CASE("Polya-Gamma means and variances match closed forms") {
  RngStream rng(11, 0);
  for (double z : {0.0, 1.0, 2.0, 5.0, 10.0}) {
    std::vector<double> x(kDraws);
    for (auto& v : x) {
      v = sample_polya_gamma(z, rng);
      REQUIRE(v > 0.0);
    }
    const auto m = moments(x);
    CHECK(std::fabs(m.mean - polya_gamma_mean(z)) < 3.0 * m.se);
    const double var = z == 0.0 ? 1.0 / 24.0 : (std::sinh(z) - z) / (4.0 * z * z * z * std::pow(std::cosh(z / 2.0), 2));
    CHECK(std::fabs(m.var - var) < 0.03 * var);
  }
  CHECK(std::fabs(polya_gamma_mean(10.0) - std::tanh(5.0) / 20.0) < 1e-15);
  CHECK_THROWS_AS(sample_polya_gamma(std::nan(""), rng), Error);
}

TEST_CASE("GIG(1/2, a, b) first two moments match quadrature") {
  RngStream rng(12, 0);
  for (double a : {0.5, 2.0}) {
    for (double b : {0.0, 1.0, 5.0}) {
      const auto q = gig_quadrature(a, b);
      std::vector<double> x(kDraws), x2(kDraws);
      for (int k = 0; k < kDraws; ++k) {
        x[k] = sample_gig(a, b, rng);
        REQUIRE(x[k] > 0.0);
        x2[k] = x[k] * x[k];
      }
      const auto m1 = moments(x), m2 = moments(x2);
      CAPTURE(a);
      CAPTURE(b);
      CHECK(std::fabs(m1.mean - q.m1) < 3.0 * m1.se);
      CHECK(std::fabs(m2.mean - q.m2) < 3.0 * m2.se);
    }
  }
  // b = 0 reduces to Gamma(1/2, rate a/2)
  CHECK(std::fabs(gig_quadrature(2.0, 0.0).m1 - 0.5) < 1e-8);
  CHECK_THROWS_AS(sample_gig(0.0, 1.0, rng), Error);
}

TEST_CASE("Dirichlet draws lie on the simplex with the right moments") {
  RngStream rng(13, 0);
  const std::vector<double> c11{1.0, 1.0}, c22{2.0, 2.0};
  std::vector<double> first(kDraws), second(kDraws);
  for (int k = 0; k < kDraws; ++k) {
    const auto a = sample_dirichlet(c11, rng);
    REQUIRE(std::fabs(a[0] + a[1] - 1.0) < 1e-12);
    first[k] = a[0];
    second[k] = sample_dirichlet(c22, rng)[0];
  }
  CHECK(std::fabs(moments(first).mean - 0.5) < 0.01);
  CHECK(std::fabs(moments(second).var - 1.0 / 20.0) < 0.005);
  const std::vector<double> bad{1.0, 0.0};
  CHECK_THROWS_AS(sample_dirichlet(bad, rng), Error);
}

TEST_CASE("inverse gamma means") {
  RngStream rng(14, 0);
  std::vector<double> a(kDraws), b(kDraws);
  for (int k = 0; k < kDraws; ++k) {
    a[k] = sample_inverse_gamma(10.0, 1.0, rng);
    b[k] = sample_inverse_gamma(3.0, 6.0, rng);
    REQUIRE(a[k] > 0.0);
  }
  CHECK(std::fabs(moments(a).mean - 1.0 / 9.0) < 0.005);
  CHECK(std::fabs(moments(b).mean - 3.0) < 0.1);
  CHECK_THROWS_AS(sample_inverse_gamma(0.0, 1.0, rng), Error);
}

TEST_CASE("multivariate normal moments and canonical form") {
  RngStream rng(15, 0);
  const Eigen::VectorXd mean = (Eigen::VectorXd(2) << 1.0, 2.0).finished();
  const Eigen::MatrixXd cov = (Eigen::VectorXd(2) << 4.0, 9.0).finished().asDiagonal();
  std::vector<double> x0(kDraws), x1(kDraws);
  Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(2, 2);
  for (int k = 0; k < kDraws; ++k) {
    const auto v = sample_mvn(mean, cov, rng);
    x0[k] = v[0];
    x1[k] = v[1];
    const auto w = sample_mvn(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), rng);
    emp += w * w.transpose() / kDraws;
  }
  CHECK(std::fabs(std::sqrt(moments(x0).var) - 2.0) < 0.05);
  CHECK(std::fabs(std::sqrt(moments(x1).var) - 3.0) < 0.05);
  CHECK((emp - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.02);

  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(sample_mvn(mean, bad, rng), Error);

  // canonical form N(P^-1 b, P^-1)
  Eigen::MatrixXd prec(2, 2);
  prec << 2.0, 0.5, 0.5, 1.0;
  const Eigen::VectorXd lin = (Eigen::VectorXd(2) << 1.0, -1.0).finished();
  const Eigen::VectorXd target = prec.ldlt().solve(lin);
  std::vector<double> c0(kDraws);
  for (auto& v : c0) v = sample_mvn_canonical(lin, prec, rng)[0];
  const auto m = moments(c0);
  CHECK(std::fabs(m.mean - target[0]) < 3.0 * m.se);
  CHECK(std::fabs(m.var - prec.inverse()(0, 0)) < 0.02 * prec.inverse()(0, 0));
}

TEST_CASE("categorical sampling") {
  RngStream rng(16, 0);
  const std::vector<double> point{1.0, 0.0, 0.0};
  for (int k = 0; k < 100; ++k) CHECK(sample_categorical(point, rng) == 0);
  const std::vector<double> p{0.25, 0.75};
  int ones = 0;
  for (int k = 0; k < kDraws; ++k) ones += sample_categorical(p, rng);
  CHECK(std::fabs(static_cast<double>(ones) / kDraws - 0.75) < 0.01);
  const std::vector<double> bad{0.3, 0.3, 0.5};
  try {
    sample_categorical(bad, rng);
    FAIL("expected NotASimplex");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotASimplex);
  }
}

TEST_CASE("identical streams give identical sequences") {
  RngStream a(99, 3), b(99, 3), c(99, 4);
  bool differs = false;
  for (int k = 0; k < 50; ++k) {
    const double x = sample_polya_gamma(1.5, a);
    CHECK(x == sample_polya_gamma(1.5, b));
    differs = differs || x != sample_polya_gamma(1.5, c);
    CHECK(sample_gig(1.0, 2.0, a) == sample_gig(1.0, 2.0, b));
  }
  CHECK(differs);
  const auto state = a.state();
  const double next = a.uniform();
  b.restore(state);
  CHECK(b.uniform() == next);
}
