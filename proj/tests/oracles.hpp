#pragma once

// Independent numerical references used only by the tests. Nothing here calls
// into the library's exponential or block-exponential code.

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Truncated Taylor series with scaling and squaring.
inline Mat taylor_exp(const Mat& A, double t = 1.0) {
  Mat M = A * t;
  int squarings = 0;
  double norm = M.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.25) {
    M /= 2.0;
    norm /= 2.0;
    ++squarings;
  }
  Mat term = Mat::Identity(A.rows(), A.cols());
  Mat sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * M / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

namespace detail {
inline Mat simpson_step(const std::function<Mat(double)>& f, double a, double b, const Mat& fa, const Mat& fm,
                        const Mat& fb, const Mat& whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const Mat flm = f(0.5 * (a + m));
  const Mat frm = f(0.5 * (m + b));
  const Mat left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const Mat right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const Mat both = left + right;
  if (depth <= 0 || (both - whole).cwiseAbs().maxCoeff() <= 15.0 * tol) return both + (both - whole) / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson quadrature of a matrix-valued integrand.
inline Mat simpson(const std::function<Mat(double)>& f, double a, double b, double tol = 1e-13) {
  const Mat fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const Mat whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, 40);
}

/// Fixed-step classical Runge-Kutta for z' = f(z).
inline Vec rk4(const std::function<Vec(const Vec&)>& f, Vec z, double T, double h) {
  const int steps = static_cast<int>(std::ceil(T / h - 1e-9));
  const double dt = T / steps;
  for (int i = 0; i < steps; ++i) {
    const Vec k1 = f(z);
    const Vec k2 = f(z + 0.5 * dt * k1);
    const Vec k3 = f(z + 0.5 * dt * k2);
    const Vec k4 = f(z + dt * k3);
    z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return z;
}

inline Mat random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = u(rng);
  return M;
}

inline double rel_err(const Mat& got, const Mat& want) {
  const double den = std::max(want.norm(), 1e-300);
  return (got - want).norm() / den;
}

}  // namespace oracle
