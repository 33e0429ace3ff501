#pragma once

#include <vector>

#include "curvirom/core.hpp"
#include "curvirom/thermal.hpp"

// Proper orthogonal decomposition of a snapshot set, uncentered: fields are
// expanded directly in the basis with no mean term. The basis comes from a
// backward-stable thin SVD of the (grid x N_s) snapshot matrix, which never
// forms a grid x grid factor; cost and memory match the classical
// snapshot-correlation route while keeping the basis orthonormal to machine
// precision.

namespace curvirom {

// Discard singular values at or below this fraction of sigma_0.
inline constexpr double kSigmaCut = 1e-12;

template <class Scalar>
struct SnapshotMatrix {
  Mat<Scalar> data;  // one row-major-flattened snapshot per column
  index_t n_eta = 0, n_xi = 0;
  int level = 0;

  index_t count() const { return data.cols(); }
};

using SnapshotMatrixd = SnapshotMatrix<double>;

template <class Scalar>
Vec<Scalar> flatten_grid(const Grid<Scalar>& g) {
  return Eigen::Map<const Vec<Scalar>>(g.data(), g.size());
}

template <class Scalar>
Grid<Scalar> unflatten_grid(const Vec<Scalar>& v, index_t n_eta, index_t n_xi) {
  if (v.size() != n_eta * n_xi) throw DataError("unflatten_grid: size mismatch");
  Grid<Scalar> g(n_eta, n_xi);
  Eigen::Map<Vec<Scalar>>(g.data(), g.size()) = v;
  return g;
}

//! Stack same-shaped, same-level fields as snapshot columns.
template <class Scalar>
SnapshotMatrix<Scalar> snapshot_matrix(const std::vector<ScalarField<Scalar>>& fields) {
  if (fields.empty()) throw DataError("snapshot_matrix: no snapshots");
  SnapshotMatrix<Scalar> s;
  s.n_eta = fields[0].n_eta();
  s.n_xi = fields[0].n_xi();
  s.level = fields[0].level;
  s.data.resize(s.n_eta * s.n_xi, static_cast<index_t>(fields.size()));
  for (std::size_t k = 0; k < fields.size(); ++k) {
    const auto& f = fields[k];
    if (f.n_eta() != s.n_eta || f.n_xi() != s.n_xi)
      throw DataError("snapshot_matrix: snapshot shape mismatch");
    if (f.level != s.level) throw DataError("snapshot_matrix: snapshot level mismatch");
    if (!all_finite(f.values)) throw DataError("snapshot_matrix: non-finite snapshot");
    s.data.col(static_cast<index_t>(k)) = flatten_grid(f.values);
  }
  return s;
}

template <class Scalar>
struct PodBasis {
  Mat<Scalar> basis;   // flattened-grid x dim, orthonormal columns
  Vec<Scalar> sigma;   // singular values of every numerically retained mode
  index_t dim = 0;     // columns kept by the energy threshold
  Scalar energy = 0;   // captured cumulative sigma^2 fraction at dim
  Scalar threshold = 1;
  index_t n_eta = 0, n_xi = 0;
  int level = 0;
};

using PodBasisd = PodBasis<double>;

//! Fit a basis retaining the smallest dim whose cumulative sigma^2 energy
//! reaches `threshold`. Sign convention: each basis vector's largest-magnitude
//! entry is positive.
template <class Scalar>
PodBasis<Scalar> fit_pod(const SnapshotMatrix<Scalar>& snap, Scalar threshold = Scalar(0.9999)) {
  if (!(threshold > Scalar(0) && threshold <= Scalar(1)))
    throw InputError("fit_pod: threshold outside (0, 1]");
  if (snap.data.size() == 0) throw DataError("fit_pod: empty snapshot matrix");
  if (!all_finite(snap.data)) throw DataError("fit_pod: non-finite snapshot entry");
  if (snap.data.cwiseAbs().maxCoeff() == Scalar(0))
    throw DataError("fit_pod: degenerate all-zero snapshot set");

  Eigen::BDCSVD<Mat<Scalar>> svd(snap.data, Eigen::ComputeThinU);
  const Vec<Scalar>& sv = svd.singularValues();  // descending

  const Scalar cut = Scalar(kSigmaCut) * sv[0];
  index_t retained = 0;
  while (retained < sv.size() && sv[retained] > cut) ++retained;

  const Scalar total = sv.squaredNorm();
  index_t dim = retained;
  if (threshold < Scalar(1)) {
    Scalar cum = 0;
    for (index_t k = 0; k < retained; ++k) {
      cum += sv[k] * sv[k];
      if (cum >= threshold * total) {
        dim = k + 1;
        break;
      }
    }
  }

  PodBasis<Scalar> b;
  b.basis = svd.matrixU().leftCols(dim);
  b.sigma = sv.head(retained);
  b.dim = dim;
  b.threshold = threshold;
  b.n_eta = snap.n_eta;
  b.n_xi = snap.n_xi;
  b.level = snap.level;
  b.energy = sv.head(dim).squaredNorm() / total;
  for (index_t k = 0; k < dim; ++k) {
    index_t imax = 0;
    b.basis.col(k).cwiseAbs().maxCoeff(&imax);
    if (b.basis(imax, k) < Scalar(0)) b.basis.col(k) = -b.basis.col(k);
  }
  return b;
}

//! Coefficients of a field in the basis (orthogonal projection).
template <class Scalar>
Vec<Scalar> project(const PodBasis<Scalar>& b, const ScalarField<Scalar>& f) {
  if (f.n_eta() != b.n_eta || f.n_xi() != b.n_xi)
    throw DataError("project: field/basis shape mismatch");
  if (f.level != b.level) throw DataError("project: field/basis level mismatch");
  if (!all_finite(f.values)) throw DataError("project: non-finite field");
  return b.basis.transpose() * flatten_grid(f.values);
}

//! Field spanned by the basis with the given coefficients.
template <class Scalar>
ScalarField<Scalar> reconstruct(const PodBasis<Scalar>& b, const Vec<Scalar>& coeffs) {
  if (coeffs.size() != b.dim) throw DataError("reconstruct: coefficient count mismatch");
  const Vec<Scalar> flat = b.basis * coeffs;
  return {unflatten_grid<Scalar>(flat, b.n_eta, b.n_xi), b.level};
}

}  // namespace curvirom
