#pragma once

// Lindblad superoperator construction and dense steady-state solver.
//
// Density matrices are vectorised column-major (column stacking), so that
// vec(A X B) = (B^T kron A) vec(X). Index of element (i, j) is j*d + i.

#include <vector>


#include "core.hpp"

namespace tweezerlab {

/// Weighted lowering operator sqrt(rate) |lower><upper|, stored densely.
struct JumpOperator {
  CMatrix op;
  int upper = -1;
  int lower = -1;
  double rate = 0.0;
};

struct DensityOperator {
  CMatrix matrix;

  int dim() const { return static_cast<int>(matrix.rows()); }
  double population(int level) const { return matrix(level, level).real(); }
  Complex trace() const { return matrix.trace(); }
};

namespace detail {
// L += coeff * kron(A, B), skipping zero entries of A.
inline void add_kron(CMatrix& L, const CMatrix& A, const CMatrix& B, Complex coeff) {
  const auto d = B.rows();
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const Complex a = A(i, j);
      if (a == Complex(0.0)) continue;
      L.block(i * d, j * d, d, d) += (coeff * a) * B;
    }
}
}  // namespace detail

inline CMatrix liouvillian(const CMatrix& hamiltonian, const std::vector<JumpOperator>& jumps) {
  const auto d = hamiltonian.rows();
  if (hamiltonian.cols() != d) throw DimensionMismatch("Hamiltonian must be square");
  const CMatrix id = CMatrix::Identity(d, d);
  const Complex i_unit(0.0, 1.0);

  // Column stacking: vec(A X B) = (B^T kron A) vec(X).
  CMatrix K = CMatrix::Zero(d, d);
  CMatrix L = CMatrix::Zero(d * d, d * d);
  for (const auto& jump : jumps) {
    const CMatrix& c = jump.op;
    if (c.rows() != d || c.cols() != d)
      throw DimensionMismatch("jump operator dimension does not match Hamiltonian");
    K += c.adjoint() * c;
    detail::add_kron(L, c.conjugate(), c, 1.0);
  }
  const CMatrix G = -i_unit * hamiltonian - 0.5 * K;
  detail::add_kron(L, id, G, 1.0);
  detail::add_kron(L, G.conjugate(), id, 1.0);
  return L;
}

/// Number of singular values of L below tol * sigma_max.
/// JacobiSVD: Eigen 3.4.0's BDCSVD can trip an index assertion on the
/// nearly degenerate spectra this is called for.
inline int null_space_dimension(const CMatrix& L, double tol = 1e-8) {
  Eigen::JacobiSVD<CMatrix> svd(L);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return static_cast<int>(L.rows());
  int count = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) < tol * s(0)) ++count;
  return count;
}

/// Unique trace-one steady state of L.
///
/// The equation for rho_00 is replaced by the trace condition and the system
/// is solved by LU. A small pivot hints that the kernel
/// of L is more than one-dimensional; that is confirmed by SVD before
/// throwing DegenerateSteadyState.
inline DensityOperator steady_state(const CMatrix& L) {
  const auto n = L.rows();
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
  if (d * d != n || L.cols() != n) throw DimensionMismatch("superoperator must be d^2 x d^2");

  const double scale = L.cwiseAbs().maxCoeff();
  if (scale == 0.0) throw DegenerateSteadyState("zero Liouvillian: every state is stationary");

  CMatrix A = L / scale;
  A.row(0).setZero();
  for (Eigen::Index k = 0; k < d; ++k) A(0, k * d + k) = 1.0;
  CVector rhs = CVector::Zero(n);
  rhs(0) = 1.0;

  Eigen::PartialPivLU<CMatrix> lu(A);
  const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
  const bool suspicious = !(pivots.minCoeff() >= 1e-7 * pivots.maxCoeff());
  if (suspicious && null_space_dimension(L, 1e-8) > 1)
    throw DegenerateSteadyState("steady state is not unique (dark manifold)");
  const CVector x = lu.solve(rhs);

  DensityOperator rho;
  rho.matrix = Eigen::Map<const CMatrix>(x.data(), d, d);
  rho.matrix = 0.5 * (rho.matrix + rho.matrix.adjoint()).eval();
  rho.matrix /= rho.matrix.trace().real();
  return rho;
}

inline CVector vectorize(const CMatrix& rho) {
  return Eigen::Map<const CVector>(rho.data(), rho.size());
}

}  // namespace tweezerlab
