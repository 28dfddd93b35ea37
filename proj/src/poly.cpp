#include "drmp/poly.hpp"

#include <cmath>
#include <numbers>

namespace drmp {

namespace {

void enumerate(int n, int degree, std::vector<int>& current, int pos, int remaining,
               std::vector<std::vector<int>>& out) {
  if (pos == n) {
    out.push_back(current);
    return;
  }
  for (int a = 0; a <= remaining; ++a) {
    current[pos] = a;
    enumerate(n, degree, current, pos + 1, remaining - a, out);
  }
}

// T_0..T_D and their t-derivatives.
void chebyshev(double t, int D, std::vector<double>& T, std::vector<double>& dT) {
  T.assign(D + 1, 0.0);
  dT.assign(D + 1, 0.0);
  T[0] = 1.0;
  if (D >= 1) {
    T[1] = t;
    dT[1] = 1.0;
  }
  for (int k = 2; k <= D; ++k) {
    T[k] = 2.0 * t * T[k - 1] - T[k - 2];
    dT[k] = 2.0 * T[k - 1] + 2.0 * t * dT[k - 1] - dT[k - 2];
  }
}

// Monomial coefficients (in t) of T_0..T_D.
std::vector<std::vector<double>> chebyshev_monomials(int D) {
  std::vector<std::vector<double>> c(D + 1);
  c[0] = {1.0};
  if (D >= 1) c[1] = {0.0, 1.0};
  for (int k = 2; k <= D; ++k) {
    c[k].assign(k + 1, 0.0);
    for (std::size_t i = 0; i < c[k - 1].size(); ++i) c[k][i + 1] += 2.0 * c[k - 1][i];
    for (std::size_t i = 0; i < c[k - 2].size(); ++i) c[k][i] -= c[k - 2][i];
  }
  return c;
}

// Coefficients in x of p((x - center) / half).
std::vector<double> substitute(const std::vector<double>& p, double center, double half) {
  std::vector<double> out(p.size(), 0.0);
  std::vector<double> power{1.0};  // ((x - c)/h)^i in x
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < power.size(); ++j) out[j] += p[i] * power[j];
    std::vector<double> next(power.size() + 1, 0.0);
    for (std::size_t j = 0; j < power.size(); ++j) {
      next[j + 1] += power[j] / half;
      next[j] -= power[j] * center / half;
    }
    power = std::move(next);
  }
  return out;
}

}  // namespace

ChebyshevBasis::ChebyshevBasis(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int degree)
    : center_(0.5 * (lo + hi)), half_(0.5 * (hi - lo)), degree_(degree) {
  std::vector<int> current(lo.size(), 0);
  enumerate(static_cast<int>(lo.size()), degree, current, 0, degree, exponents_);
}

Eigen::VectorXd ChebyshevBasis::values(const Eigen::VectorXd& x) const {
  const int n = dim();
  std::vector<std::vector<double>> T(n), dT(n);
  for (int i = 0; i < n; ++i) chebyshev((x[i] - center_[i]) / half_[i], degree_, T[i], dT[i]);
  Eigen::VectorXd out(size());
  for (int b = 0; b < size(); ++b) {
    double v = 1.0;
    for (int i = 0; i < n; ++i) v *= T[i][exponents_[b][i]];
    out[b] = v;
  }
  return out;
}

Eigen::MatrixXd ChebyshevBasis::values_and_gradients(const Eigen::VectorXd& x) const {
  const int n = dim();
  std::vector<std::vector<double>> T(n), dT(n);
  for (int i = 0; i < n; ++i) chebyshev((x[i] - center_[i]) / half_[i], degree_, T[i], dT[i]);
  Eigen::MatrixXd out(size(), n + 1);
  for (int b = 0; b < size(); ++b) {
    const auto& a = exponents_[b];
    double v = 1.0;
    for (int i = 0; i < n; ++i) v *= T[i][a[i]];
    out(b, 0) = v;
    for (int g = 0; g < n; ++g) {
      double d = dT[g][a[g]] / half_[g];
      for (int i = 0; i < n; ++i) {
        if (i != g) d *= T[i][a[i]];
      }
      out(b, g + 1) = d;
    }
  }
  return out;
}

Eigen::MatrixXd ChebyshevBasis::chebyshev_grid(int per_axis) const {
  const int n = dim();
  int total = 1;
  for (int i = 0; i < n; ++i) total *= per_axis;
  Eigen::MatrixXd grid(n, total);
  for (int p = 0; p < total; ++p) {
    int rest = p;
    for (int i = n - 1; i >= 0; --i) {
      const int idx = rest % per_axis;
      rest /= per_axis;
      const double t = std::cos(std::numbers::pi * (2.0 * idx + 1.0) / (2.0 * per_axis));
      grid(i, p) = center_[i] + half_[i] * t;
    }
  }
  return grid;
}

std::map<std::vector<int>, double> ChebyshevBasis::to_monomials(
    const Eigen::VectorXd& coefficients) const {
  const int n = dim();
  const auto cheb = chebyshev_monomials(degree_);
  std::vector<std::vector<std::vector<double>>> raw(n, std::vector<std::vector<double>>(degree_ + 1));
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k <= degree_; ++k) raw[i][k] = substitute(cheb[k], center_[i], half_[i]);
  }
  std::map<std::vector<int>, double> out;
  for (int b = 0; b < size(); ++b) {
    const auto& a = exponents_[b];
    // Expand the product of univariate factors term by term.
    std::vector<std::pair<std::vector<int>, double>> terms{{std::vector<int>(n, 0), coefficients[b]}};
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<std::vector<int>, double>> next;
      const auto& factor = raw[i][a[i]];
      for (const auto& [expo, c] : terms) {
        for (std::size_t p = 0; p < factor.size(); ++p) {
          if (factor[p] == 0.0) continue;
          auto e = expo;
          e[i] = static_cast<int>(p);
          next.emplace_back(std::move(e), c * factor[p]);
        }
      }
      terms = std::move(next);
    }
    for (const auto& [expo, c] : terms) out[expo] += c;
  }
  return out;
}

CollocationFit::CollocationFit(const ChebyshevBasis& basis, Eigen::MatrixXd points)
    : points_(std::move(points)) {
  design_.resize(points_.cols(), basis.size());
  for (Eigen::Index p = 0; p < points_.cols(); ++p) {
    design_.row(p) = basis.values(points_.col(p)).transpose();
  }
  qr_.compute(design_);
}

CollocationFit::Result CollocationFit::fit(const Eigen::VectorXd& samples) const {
  Result r;
  r.coefficients = qr_.solve(samples);
  r.residual = (design_ * r.coefficients - samples).cwiseAbs().maxCoeff();
  return r;
}

}  // namespace drmp
