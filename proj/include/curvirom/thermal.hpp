#pragma once

#include "curvirom/core.hpp"
#include "curvirom/meshgen.hpp"

// Steady heat conduction without sources on a curvilinear mesh, solved in the
// computational plane:
//
//   alpha T_xixi - 2 beta T_xieta + gamma T_etaeta = 0
//
// with Dirichlet data on all four sides. The metric coefficients come from
// the (fixed) mesh, so the system is linear and one SOR loop suffices.

namespace curvirom {

template <class Scalar>
struct ScalarField {
  Grid<Scalar> values;
  int level = 0;  // position in a mesh hierarchy, coarsest = 0

  index_t n_eta() const { return values.rows(); }
  index_t n_xi() const { return values.cols(); }
};

using ScalarFieldd = ScalarField<double>;

enum class SideKind { constant, blend };

template <class Scalar>
struct SideSpec {
  SideKind kind = SideKind::blend;
  Scalar value = Scalar(0);  // used only for SideKind::constant
};

// Default protocol: hot upper wall, the other three walls cold. Constant end
// walls keep the computational-plane solution geometry-dependent; a linear
// blend instead makes the eta-ramp exact on every mesh, collapsing all
// geometries to one identical field with nothing left to learn.
template <class Scalar>
struct BoundaryConditions {
  Scalar top = Scalar(350);
  Scalar bottom = Scalar(300);
  SideSpec<Scalar> left{SideKind::constant, Scalar(300)};
  SideSpec<Scalar> right{SideKind::constant, Scalar(300)};
};

using BoundaryConditionsd = BoundaryConditions<double>;

template <class Scalar>
struct SolveOptions {
  Scalar omega = Scalar(1.8);
  Scalar tol = Scalar(1e-9);
  index_t max_iter = 200000;
};

using SolveOptionsd = SolveOptions<double>;

//! Materialize Dirichlet data as a full grid whose boundary ring is set.
//! Interior entries are a transfinite blend of the ring, which doubles as the
//! solver's initial guess. Corner nodes belong to the top/bottom rows.
template <class Scalar>
Grid<Scalar> dirichlet_ring(index_t n_eta, index_t n_xi, const BoundaryConditions<Scalar>& bc) {
  if (n_eta < 2 || n_xi < 2) throw InputError("dirichlet_ring: need at least 2x2 nodes");
  using std::isfinite;
  if (!isfinite(bc.top) || !isfinite(bc.bottom) ||
      (bc.left.kind == SideKind::constant && !isfinite(bc.left.value)) ||
      (bc.right.kind == SideKind::constant && !isfinite(bc.right.value)))
    throw InputError("dirichlet_ring: non-finite boundary value");
  Grid<Scalar> ring = Grid<Scalar>::Zero(n_eta, n_xi);
  for (index_t i = 0; i < n_eta; ++i) {
    const Scalar s = Scalar(i) / Scalar(n_eta - 1);
    const Scalar blended = (Scalar(1) - s) * bc.top + s * bc.bottom;
    ring(i, 0) = bc.right.kind == SideKind::blend ? blended : bc.right.value;
    ring(i, n_xi - 1) = bc.left.kind == SideKind::blend ? blended : bc.left.value;
  }
  ring.row(0) = bc.top;
  ring.row(n_eta - 1) = bc.bottom;
  // Transfinite blend of the ring fills the interior.
  for (index_t i = 1; i < n_eta - 1; ++i) {
    const Scalar s = Scalar(i) / Scalar(n_eta - 1);
    const Scalar ws = Scalar(1) - s;
    for (index_t j = 1; j < n_xi - 1; ++j) {
      const Scalar t = Scalar(j) / Scalar(n_xi - 1);
      const Scalar wt = Scalar(1) - t;
      const Scalar face = ws * ring(0, j) + s * ring(n_eta - 1, j)  //
                          + wt * ring(i, 0) + t * ring(i, n_xi - 1);
      const Scalar corner = ws * wt * ring(0, 0) + ws * t * ring(0, n_xi - 1) +
                            s * wt * ring(n_eta - 1, 0) + s * t * ring(n_eta - 1, n_xi - 1);
      ring(i, j) = face - corner;
    }
  }
  return ring;
}

//! Mean absolute stencil residual of a field over the interior nodes.
template <class Scalar>
Scalar field_residual(const StructuredMesh<Scalar>& m, const Grid<Scalar>& T) {
  detail::check_mesh_shape(m);
  detail::check_mesh_finite(m);
  if (T.rows() != m.n_eta() || T.cols() != m.n_xi())
    throw DataError("field_residual: field/mesh shape mismatch");
  if (!all_finite(T)) throw DataError("field_residual: non-finite field value");
  using detail::shifted;
  const Grid<Scalar> x_xi = (shifted(m.x, 0, 1) - shifted(m.x, 0, -1)) / Scalar(2);
  const Grid<Scalar> y_xi = (shifted(m.y, 0, 1) - shifted(m.y, 0, -1)) / Scalar(2);
  const Grid<Scalar> x_eta = (shifted(m.x, 1, 0) - shifted(m.x, -1, 0)) / Scalar(2);
  const Grid<Scalar> y_eta = (shifted(m.y, 1, 0) - shifted(m.y, -1, 0)) / Scalar(2);
  const Grid<Scalar> alpha = x_eta.square() + y_eta.square();
  const Grid<Scalar> beta = x_xi * x_eta + y_xi * y_eta;
  const Grid<Scalar> gamma = x_xi.square() + y_xi.square();

  const Grid<Scalar> t_xixi = shifted(T, 0, 1) + shifted(T, 0, -1) - Scalar(2) * shifted(T, 0, 0);
  const Grid<Scalar> t_etaeta =
      shifted(T, 1, 0) + shifted(T, -1, 0) - Scalar(2) * shifted(T, 0, 0);
  const Grid<Scalar> t_cross =
      (shifted(T, 1, 1) + shifted(T, -1, -1) - shifted(T, 1, -1) - shifted(T, -1, 1)) / Scalar(4);
  const Grid<Scalar> res = alpha * t_xixi - Scalar(2) * beta * t_cross + gamma * t_etaeta;
  return res.abs().sum() / Scalar(res.size());
}

template <class Scalar>
Scalar field_residual(const StructuredMesh<Scalar>& m, const ScalarField<Scalar>& f) {
  return field_residual(m, f.values);
}

//! Solve the Dirichlet problem given a full grid whose boundary ring carries
//! the data (interior entries are ignored). Fails with MeshFoldingError on a
//! folded mesh and ConvergenceError when the sweep budget runs out.
template <class Scalar>
ScalarField<Scalar> solve_laplace(const StructuredMesh<Scalar>& mesh, const Grid<Scalar>& ring,
                                  const SolveOptions<Scalar>& opts = {}) {
  detail::check_mesh_shape(mesh);
  detail::check_mesh_finite(mesh);
  if (ring.rows() != mesh.n_eta() || ring.cols() != mesh.n_xi())
    throw DataError("solve_laplace: boundary ring/mesh shape mismatch");
  if (!all_finite(ring.row(0)) || !all_finite(ring.row(ring.rows() - 1)) ||
      !all_finite(ring.col(0)) || !all_finite(ring.col(ring.cols() - 1)))
    throw DataError("solve_laplace: non-finite boundary value");
  if (!(opts.omega > Scalar(0) && opts.omega < Scalar(2)))
    throw InputError("solve_laplace: omega must lie in (0, 2)");
  if (!(opts.tol > Scalar(0))) throw InputError("solve_laplace: tol must be positive");
  if (jacobian_min(mesh) <= Scalar(0))
    throw MeshFoldingError("solve_laplace: mesh has non-positive Jacobian");

  const index_t ne = mesh.n_eta();
  const index_t nx = mesh.n_xi();
  using detail::shifted;
  const Grid<Scalar> x_xi = (shifted(mesh.x, 0, 1) - shifted(mesh.x, 0, -1)) / Scalar(2);
  const Grid<Scalar> y_xi = (shifted(mesh.y, 0, 1) - shifted(mesh.y, 0, -1)) / Scalar(2);
  const Grid<Scalar> x_eta = (shifted(mesh.x, 1, 0) - shifted(mesh.x, -1, 0)) / Scalar(2);
  const Grid<Scalar> y_eta = (shifted(mesh.y, 1, 0) - shifted(mesh.y, -1, 0)) / Scalar(2);
  const Grid<Scalar> alpha = x_eta.square() + y_eta.square();
  const Grid<Scalar> beta = x_xi * x_eta + y_xi * y_eta;
  const Grid<Scalar> gamma = x_xi.square() + y_xi.square();

  // Start from the transfinite blend of the ring; for the default conditions
  // this is already the exact rectangular-mesh solution.
  Grid<Scalar> T = ring;
  {
    for (index_t i = 1; i < ne - 1; ++i) {
      const Scalar s = Scalar(i) / Scalar(ne - 1);
      const Scalar ws = Scalar(1) - s;
      for (index_t j = 1; j < nx - 1; ++j) {
        const Scalar t = Scalar(j) / Scalar(nx - 1);
        const Scalar wt = Scalar(1) - t;
        const Scalar face =
            ws * ring(0, j) + s * ring(ne - 1, j) + wt * ring(i, 0) + t * ring(i, nx - 1);
        const Scalar corner = ws * wt * ring(0, 0) + ws * t * ring(0, nx - 1) +
                              s * wt * ring(ne - 1, 0) + s * t * ring(ne - 1, nx - 1);
        T(i, j) = face - corner;
      }
    }
  }

  auto residual = [&]() -> Scalar {
    const Grid<Scalar> t_xixi =
        shifted(T, 0, 1) + shifted(T, 0, -1) - Scalar(2) * shifted(T, 0, 0);
    const Grid<Scalar> t_etaeta =
        shifted(T, 1, 0) + shifted(T, -1, 0) - Scalar(2) * shifted(T, 0, 0);
    const Grid<Scalar> t_cross =
        (shifted(T, 1, 1) + shifted(T, -1, -1) - shifted(T, 1, -1) - shifted(T, -1, 1)) /
        Scalar(4);
    const Grid<Scalar> res = alpha * t_xixi - Scalar(2) * beta * t_cross + gamma * t_etaeta;
    return res.abs().sum() / Scalar(res.size());
  };

  Scalar loss = residual();
  index_t it = 0;
  while (loss > opts.tol && it < opts.max_iter) {
    for (index_t i = 1; i < ne - 1; ++i) {
      for (index_t j = 1; j < nx - 1; ++j) {
        const Scalar a = alpha(i - 1, j - 1);
        const Scalar b = beta(i - 1, j - 1);
        const Scalar g = gamma(i - 1, j - 1);
        const Scalar den = Scalar(2) * (a + g);
        if (!(den > Scalar(0))) continue;
        const Scalar ct =
            (T(i + 1, j + 1) + T(i - 1, j - 1) - T(i + 1, j - 1) - T(i - 1, j + 1)) / Scalar(4);
        const Scalar tg = (a * (T(i, j + 1) + T(i, j - 1)) + g * (T(i + 1, j) + T(i - 1, j)) -
                           Scalar(2) * b * ct) /
                          den;
        T(i, j) += opts.omega * (tg - T(i, j));
      }
    }
    ++it;
    if (!all_finite(T)) throw DataError("solve_laplace: field diverged to non-finite values");
    loss = residual();
  }
  if (loss > opts.tol)
    throw ConvergenceError("solve_laplace: residual did not reach tol", double(loss));
  return {std::move(T), 0};
}

//! Solve with protocol boundary conditions (constant walls, constant or
//! blended ends).
template <class Scalar>
ScalarField<Scalar> solve_laplace(const StructuredMesh<Scalar>& mesh,
                                  const BoundaryConditions<Scalar>& bc,
                                  const SolveOptions<Scalar>& opts = {}) {
  return solve_laplace(mesh, dirichlet_ring<Scalar>(mesh.n_eta(), mesh.n_xi(), bc), opts);
}

}  // namespace curvirom
