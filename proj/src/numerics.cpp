#include "qswitch/numerics.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

namespace qswitch::numerics {

namespace {

void require_square(const Mat& A, const char* who) {
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw DimensionError(std::string(who) + ": matrix must be square and non-empty, got " +
                         std::to_string(A.rows()) + "x" + std::to_string(A.cols()));
  }
}

bool is_symmetric(const Mat& P) {
  const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
  return (P - P.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTolerance * scale;
}

}  // namespace

Mat mat_exp(const Mat& A, double t) {
  require_square(A, "mat_exp");
  if (t == 0.0) return Mat::Identity(A.rows(), A.cols());
  const Mat At = A * t;
  return At.exp();
}

Mat cross_gramian(const Mat& F, const Mat& H, const Mat& G, double s) {
  require_square(F, "cross_gramian(F)");
  require_square(G, "cross_gramian(G)");
  if (H.rows() != F.rows() || H.cols() != G.rows()) {
    throw DimensionError("cross_gramian: H must be " + std::to_string(F.rows()) + "x" +
                         std::to_string(G.rows()));
  }
  if (!(s >= 0.0)) throw std::invalid_argument("cross_gramian: negative interval length");
  const Eigen::Index n = F.rows();
  const Eigen::Index m = G.rows();
  if (s == 0.0) return Mat::Zero(n, m);

  Mat block = Mat::Zero(n + m, n + m);
  block.topLeftCorner(n, n) = F;
  block.topRightCorner(n, m) = H;
  block.bottomRightCorner(m, m) = G;
  return mat_exp(block, s).topRightCorner(n, m);
}

Mat shifted_cross_gramian(const Mat& F, const Mat& H, const Mat& G, double a, double b) {
  if (a > b) throw std::invalid_argument("shifted_cross_gramian: lower limit exceeds upper limit");
  if (a < 0.0) throw std::invalid_argument("shifted_cross_gramian: negative lower limit");
  return cross_gramian(F, H, G, b - a) * mat_exp(G, a);
}

Mat dlyap(const Mat& Abar, const Mat& Q) {
  require_square(Abar, "dlyap(Abar)");
  require_square(Q, "dlyap(Q)");
  if (Abar.rows() != Q.rows()) throw DimensionError("dlyap: Abar and Q differ in size");
  if (!is_symmetric(Q)) throw std::invalid_argument("dlyap: Q is not symmetric");
  if (spectral_radius(Abar) >= 1.0) throw NumericalError("dlyap: Abar is not Schur-stable");

  const Eigen::Index n = Abar.rows();
  // vec(Abar^T P Abar) = (Abar^T (x) Abar^T) vec(P) for column-major vec.
  const Mat At = Abar.transpose();
  const Mat lhs = Mat(Eigen::kroneckerProduct(At, At)) - Mat::Identity(n * n, n * n);
  const Vec rhs = -Eigen::Map<const Vec>(Q.data(), n * n);
  const Vec vecP = lhs.fullPivLu().solve(rhs);
  Mat P = Eigen::Map<const Mat>(vecP.data(), n, n);
  return 0.5 * (P + P.transpose());
}

Mat pinv_left(const Mat& W) {
  if (W.rows() < W.cols()) throw NumericalError("pinv_left: no left inverse (more columns than rows)");
  Eigen::JacobiSVD<Mat> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= kRankTolerance * sv(0)) {
    throw NumericalError("pinv_left: no left inverse (rank deficient)");
  }
  return svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

double op_norm_inf(const Mat& M) {
  if (M.size() == 0) return 0.0;
  return M.cwiseAbs().rowwise().sum().maxCoeff();
}

double op_norm_2(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues()(0);
}

double vec_norm_inf(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::pair<double, double> eig_extremes_sym(const Mat& P) {
  require_square(P, "eig_extremes_sym");
  if (!is_symmetric(P)) throw std::invalid_argument("eig_extremes_sym: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(P, Eigen::EigenvaluesOnly);
  const Vec& ev = es.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

Eigen::VectorXcd eigenvalues(const Mat& A) {
  require_square(A, "eigenvalues");
  Eigen::EigenSolver<Mat> es(A, false);
  return es.eigenvalues();
}

bool is_hurwitz(const Mat& A) { return (eigenvalues(A).real().array() < 0.0).all(); }

double spectral_radius(const Mat& A) { return eigenvalues(A).cwiseAbs().maxCoeff(); }

int rank(const Mat& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(M);
  const Vec& sv = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * sv(0)) ++r;
  }
  return r;
}

bool all_finite(const Mat& M) { return M.allFinite(); }

}  // namespace qswitch::numerics
