#pragma once

#include <Eigen/Dense>

#include <map>
#include <vector>

namespace drmp {

/// Tensor Chebyshev polynomials T_a1(t_1) ... T_an(t_n) of total degree
/// <= D in the box-scaled coordinates t = (x - center) / half.
class ChebyshevBasis {
 public:
  ChebyshevBasis() = default;
  ChebyshevBasis(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int degree);

  int dim() const { return static_cast<int>(center_.size()); }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(exponents_.size()); }
  const std::vector<std::vector<int>>& exponents() const { return exponents_; }
  const Eigen::VectorXd& center() const { return center_; }
  const Eigen::VectorXd& half_width() const { return half_; }

  /// Basis values at x.
  Eigen::VectorXd values(const Eigen::VectorXd& x) const;
  /// Basis values (column 0) and x-gradients (columns 1..n) at x.
  Eigen::MatrixXd values_and_gradients(const Eigen::VectorXd& x) const;

  /// Tensor grid of `per_axis` Chebyshev points per axis, one column each.
  Eigen::MatrixXd chebyshev_grid(int per_axis) const;

  /// Coefficients of sum_b c_b * basis_b re-expressed as raw monomials in x,
  /// keyed by exponent tuple.
  std::map<std::vector<int>, double> to_monomials(const Eigen::VectorXd& coefficients) const;

 private:
  Eigen::VectorXd center_;
  Eigen::VectorXd half_;
  int degree_ = 0;
  std::vector<std::vector<int>> exponents_;
};

/// Least-squares fitter over a fixed collocation grid; the factorization is
/// shared by every node of a stage.
class CollocationFit {
 public:
  CollocationFit(const ChebyshevBasis& basis, Eigen::MatrixXd points);

  const Eigen::MatrixXd& points() const { return points_; }
  int num_points() const { return static_cast<int>(points_.cols()); }

  struct Result {
    Eigen::VectorXd coefficients;
    double residual = 0.0;  // max |fit - sample| over the grid
  };
  Result fit(const Eigen::VectorXd& samples) const;

 private:
  Eigen::MatrixXd points_;
  Eigen::MatrixXd design_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

}  // namespace drmp
