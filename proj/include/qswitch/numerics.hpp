#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace qswitch {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Inconsistent or non-conformable matrix shapes.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A numerical precondition does not hold (not Schur-stable, rank deficient, ...).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Serial reference kernels vs. their OpenMP counterparts. Both must return
/// bit-identical results; only max-reductions are parallelised.
enum class Exec { Serial, Parallel };

namespace numerics {

/// e^{A t} by scaling-and-squaring Pade.
Mat mat_exp(const Mat& A, double t = 1.0);

/// \int_0^s e^{F(s-t)} H e^{G t} dt via the upper-right block of
/// exp([[F, H], [0, G]] s).
Mat cross_gramian(const Mat& F, const Mat& H, const Mat& G, double s);

/// \int_a^b e^{F(b-t)} H e^{G t} dt = cross_gramian(F, H, G, b - a) e^{G a}.
Mat shifted_cross_gramian(const Mat& F, const Mat& H, const Mat& G, double a, double b);

/// Solves Abar^T P Abar - P = -Q by Kronecker vectorisation. Abar must be
/// Schur-stable and Q symmetric positive definite.
Mat dlyap(const Mat& Abar, const Mat& Q);

/// Moore-Penrose pseudo-inverse of a full-column-rank W. Rank is accepted when
/// sigma_min > 1e-9 sigma_max.
Mat pinv_left(const Mat& W);

double op_norm_inf(const Mat& M);
double op_norm_2(const Mat& M);
double vec_norm_inf(const Vec& v);

/// (lambda_min, lambda_max) of a symmetric matrix.
std::pair<double, double> eig_extremes_sym(const Mat& P);

bool is_hurwitz(const Mat& A);
double spectral_radius(const Mat& A);
Eigen::VectorXcd eigenvalues(const Mat& A);

/// Numerical rank from singular values with relative tolerance.
int rank(const Mat& M, double rel_tol = 1e-9);

bool all_finite(const Mat& M);

inline constexpr double kRankTolerance = 1e-9;
inline constexpr double kSymmetryTolerance = 1e-10;

}  // namespace numerics
}  // namespace qswitch
