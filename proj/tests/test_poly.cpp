#include <doctest.h>

#include <cmath>
#include <random>

#include "drmp/poly.hpp"

using namespace drmp;

namespace {

double eval_monomials(const std::map<std::vector<int>, double>& terms, const Eigen::VectorXd& x) {
  double acc = 0.0;
  for (const auto& [alpha, c] : terms) {
    double t = c;
    for (std::size_t i = 0; i < alpha.size(); ++i) t *= std::pow(x[static_cast<Eigen::Index>(i)], alpha[i]);
    acc += t;
  }
  return acc;
}

}  // namespace

TEST_CASE("basis layout") {
  const ChebyshevBasis b(Eigen::Vector2d(-1, 0), Eigen::Vector2d(3, 2), 3);
  CHECK(b.size() == 10);  // C(3 + 2, 2)
  for (const auto& e : b.exponents()) CHECK(e[0] + e[1] <= 3);
  CHECK(b.center() == Eigen::Vector2d(1, 1));
  const Eigen::MatrixXd g = b.chebyshev_grid(5);
  CHECK(g.cols() == 25);
  CHECK(g.row(0).minCoeff() > -1.0);
  CHECK(g.row(0).maxCoeff() < 3.0);
  // T_0 = 1 and T_1(t) = t.
  const Eigen::VectorXd v = b.values(Eigen::Vector2d(2, 1.5));
  for (int i = 0; i < b.size(); ++i) {
    const auto& e = b.exponents()[i];
    if (e[0] == 0 && e[1] == 0) CHECK(v[i] == 1.0);
    if (e[0] == 1 && e[1] == 0) CHECK(v[i] == doctest::Approx(0.5));
    if (e[0] == 2 && e[1] == 0) CHECK(v[i] == doctest::Approx(2 * 0.25 - 1));
    if (e[0] == 0 && e[1] == 1) CHECK(v[i] == doctest::Approx(0.5));
  }
}

TEST_CASE("collocation reproduces polynomials of the basis degree") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  for (int dim = 1; dim <= 2; ++dim) {
    for (int degree = 0; degree <= 4; ++degree) {
      const Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, -3.0);
      const Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, 2.0);
      const ChebyshevBasis basis(lo, hi, degree);
      const CollocationFit fit(basis, basis.chebyshev_grid(degree + 3));
      // Random raw polynomial of total degree <= degree.
      std::map<std::vector<int>, double> poly;
      for (const auto& e : basis.exponents()) poly[e] = c(rng);
      Eigen::VectorXd samples(fit.num_points());
      for (int j = 0; j < fit.num_points(); ++j) samples[j] = eval_monomials(poly, fit.points().col(j));
      const auto r = fit.fit(samples);
      CHECK(r.residual <= 1e-10);
      const auto back = basis.to_monomials(r.coefficients);
      for (const auto& [alpha, v] : poly) {
        const auto it = back.find(alpha);
        const double got = it == back.end() ? 0.0 : it->second;
        CHECK(std::abs(got - v) <= 1e-8);
      }
      // Off-grid evaluation and gradient.
      Eigen::VectorXd x = Eigen::VectorXd::Constant(dim, 0.37);
      const Eigen::MatrixXd vg = basis.values_and_gradients(x);
      CHECK(std::abs(vg.col(0).dot(r.coefficients) - eval_monomials(poly, x)) <= 1e-9);
      for (int i = 0; i < dim; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += 1e-6;
        xm[i] -= 1e-6;
        const double fd = (eval_monomials(poly, xp) - eval_monomials(poly, xm)) / 2e-6;
        CHECK(std::abs(vg.col(1 + i).dot(r.coefficients) - fd) <= 1e-6);
      }
    }
  }
}

TEST_CASE("fit residual exposes unrepresentable data") {
  const ChebyshevBasis basis(Eigen::VectorXd::Constant(1, -4.0), Eigen::VectorXd::Constant(1, 4.0), 2);
  const CollocationFit fit(basis, basis.chebyshev_grid(5));
  Eigen::VectorXd samples(fit.num_points());
  for (int j = 0; j < fit.num_points(); ++j) samples[j] = std::exp(fit.points()(0, j));
  CHECK(fit.fit(samples).residual > 1.0);
}
