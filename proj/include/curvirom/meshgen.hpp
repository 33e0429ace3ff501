#pragma once

#include <cmath>

#include "curvirom/core.hpp"
#include "curvirom/geometry.hpp"

// Elliptic structured meshing on the unit-spaced computational grid
// (delta_xi = delta_eta = 1). Interior nodes satisfy the interchanged
// smoothing equations
//
//   alpha x_xixi - 2 beta x_xieta + gamma x_etaeta = 0   (same for y)
//
// with alpha = x_eta^2 + y_eta^2, gamma = x_xi^2 + y_xi^2 and
// beta = x_xi x_eta + y_xi y_eta, discretized by central differences.
// Arrays are indexed [eta][xi]: the first index walks across the channel,
// the second along it.

namespace curvirom {

template <class Scalar>
struct StructuredMesh {
  Grid<Scalar> x, y;

  index_t n_eta() const { return x.rows(); }
  index_t n_xi() const { return x.cols(); }
};

using StructuredMeshd = StructuredMesh<double>;

template <class Scalar>
struct MetricCoeffs {
  Scalar alpha, beta, gamma;
};

template <class Scalar>
struct MeshResidualReport {
  Grid<Scalar> res_x, res_y;  // zero on the boundary ring
  Scalar loss;                // mean |res_x| + mean |res_y| over interior nodes
};

namespace detail {

template <class Scalar>
void check_mesh_shape(const StructuredMesh<Scalar>& m) {
  if (m.x.rows() != m.y.rows() || m.x.cols() != m.y.cols())
    throw ConstructionError("mesh: x/y shape mismatch");
  if (m.x.rows() < 3 || m.x.cols() < 3)
    throw InputError("mesh: need at least 3x3 nodes for interior operations");
}

template <class Scalar>
void check_mesh_finite(const StructuredMesh<Scalar>& m) {
  if (!all_finite(m.x) || !all_finite(m.y)) throw DataError("mesh: non-finite coordinate");
}

// Shifted interior view: block of g displaced by (di, dj) relative to the
// interior window of an m x n grid.
template <class Scalar>
auto shifted(const Grid<Scalar>& g, int di, int dj) {
  return g.block(1 + di, 1 + dj, g.rows() - 2, g.cols() - 2);
}

}  // namespace detail

//! Central-difference metric coefficients at one interior node.
template <class Scalar>
MetricCoeffs<Scalar> metric_coeffs(const StructuredMesh<Scalar>& m, index_t i, index_t j) {
  detail::check_mesh_shape(m);
  if (i < 1 || i > m.n_eta() - 2 || j < 1 || j > m.n_xi() - 2)
    throw InputError("metric_coeffs: node not interior");
  const Scalar x_xi = (m.x(i, j + 1) - m.x(i, j - 1)) / Scalar(2);
  const Scalar y_xi = (m.y(i, j + 1) - m.y(i, j - 1)) / Scalar(2);
  const Scalar x_eta = (m.x(i + 1, j) - m.x(i - 1, j)) / Scalar(2);
  const Scalar y_eta = (m.y(i + 1, j) - m.y(i - 1, j)) / Scalar(2);
  return {x_eta * x_eta + y_eta * y_eta,        // alpha
          x_xi * x_eta + y_xi * y_eta,          // beta
          x_xi * x_xi + y_xi * y_xi};           // gamma
}

//! Smoothing-equation residual of every interior node plus the scalar loss.
template <class Scalar>
MeshResidualReport<Scalar> mesh_residual(const StructuredMesh<Scalar>& m) {
  detail::check_mesh_shape(m);
  detail::check_mesh_finite(m);
  using detail::shifted;
  const auto& x = m.x;
  const auto& y = m.y;

  const Grid<Scalar> x_xi = (shifted(x, 0, 1) - shifted(x, 0, -1)) / Scalar(2);
  const Grid<Scalar> y_xi = (shifted(y, 0, 1) - shifted(y, 0, -1)) / Scalar(2);
  const Grid<Scalar> x_eta = (shifted(x, 1, 0) - shifted(x, -1, 0)) / Scalar(2);
  const Grid<Scalar> y_eta = (shifted(y, 1, 0) - shifted(y, -1, 0)) / Scalar(2);
  const Grid<Scalar> alpha = x_eta.square() + y_eta.square();
  const Grid<Scalar> beta = x_xi * x_eta + y_xi * y_eta;
  const Grid<Scalar> gamma = x_xi.square() + y_xi.square();

  auto second = [](const Grid<Scalar>& g, int di, int dj) -> Grid<Scalar> {
    return shifted(g, di, dj) + shifted(g, -di, -dj) - Scalar(2) * shifted(g, 0, 0);
  };
  auto cross = [](const Grid<Scalar>& g) -> Grid<Scalar> {
    return (shifted(g, 1, 1) + shifted(g, -1, -1) - shifted(g, 1, -1) - shifted(g, -1, 1)) /
           Scalar(4);
  };

  MeshResidualReport<Scalar> rep;
  rep.res_x = Grid<Scalar>::Zero(m.n_eta(), m.n_xi());
  rep.res_y = Grid<Scalar>::Zero(m.n_eta(), m.n_xi());
  rep.res_x.block(1, 1, m.n_eta() - 2, m.n_xi() - 2) =
      alpha * second(x, 0, 1) - Scalar(2) * beta * cross(x) + gamma * second(x, 1, 0);
  rep.res_y.block(1, 1, m.n_eta() - 2, m.n_xi() - 2) =
      alpha * second(y, 0, 1) - Scalar(2) * beta * cross(y) + gamma * second(y, 1, 0);
  const Scalar n_int = Scalar((m.n_eta() - 2) * (m.n_xi() - 2));
  rep.loss = (rep.res_x.abs().sum() + rep.res_y.abs().sum()) / n_int;
  return rep;
}

//! Cell Jacobian x_xi y_eta - x_eta y_xi at every interior node (boundary
//! entries are left at zero).
template <class Scalar>
Grid<Scalar> jacobian_field(const StructuredMesh<Scalar>& m) {
  detail::check_mesh_shape(m);
  detail::check_mesh_finite(m);
  using detail::shifted;
  const Grid<Scalar> x_xi = (shifted(m.x, 0, 1) - shifted(m.x, 0, -1)) / Scalar(2);
  const Grid<Scalar> y_xi = (shifted(m.y, 0, 1) - shifted(m.y, 0, -1)) / Scalar(2);
  const Grid<Scalar> x_eta = (shifted(m.x, 1, 0) - shifted(m.x, -1, 0)) / Scalar(2);
  const Grid<Scalar> y_eta = (shifted(m.y, 1, 0) - shifted(m.y, -1, 0)) / Scalar(2);
  Grid<Scalar> jac = Grid<Scalar>::Zero(m.n_eta(), m.n_xi());
  jac.block(1, 1, m.n_eta() - 2, m.n_xi() - 2) = x_xi * y_eta - x_eta * y_xi;
  return jac;
}

//! Minimum interior Jacobian; positive for a usable (unfolded) mesh.
template <class Scalar>
Scalar jacobian_min(const StructuredMesh<Scalar>& m) {
  const Grid<Scalar> jac = jacobian_field(m);
  return jac.block(1, 1, m.n_eta() - 2, m.n_xi() - 2).minCoeff();
}

//! Transfinite (Coons) interpolation of the four boundary polylines; the
//! standard algebraic initial mesh for the elliptic relaxation.
template <class Scalar>
StructuredMesh<Scalar> init_mesh_tfi(const DomainBoundary<Scalar>& b) {
  validate_boundary(b);
  const index_t ne = b.n_eta();
  const index_t nx = b.n_xi();
  StructuredMesh<Scalar> m;
  m.x.resize(ne, nx);
  m.y.resize(ne, nx);
  for (index_t i = 0; i < ne; ++i) {
    const Scalar s = Scalar(i) / Scalar(ne - 1);
    const Scalar ws = Scalar(1) - s;
    for (index_t j = 0; j < nx; ++j) {
      const Scalar t = Scalar(j) / Scalar(nx - 1);
      const Scalar wt = Scalar(1) - t;
      for (int c = 0; c < 2; ++c) {
        const Scalar face = ws * b.top(j, c) + s * b.bottom(j, c)  //
                            + wt * b.right(i, c) + t * b.left(i, c);
        const Scalar corner = ws * wt * b.top(0, c) + ws * t * b.top(nx - 1, c) +
                              s * wt * b.bottom(0, c) + s * t * b.bottom(nx - 1, c);
        (c == 0 ? m.x : m.y)(i, j) = face - corner;
      }
    }
  }
  // Boundary rows/columns must be the input polylines verbatim; the blend
  // above is exact there in exact arithmetic but not in floating point.
  for (index_t j = 0; j < nx; ++j) {
    m.x(0, j) = b.top(j, 0);
    m.y(0, j) = b.top(j, 1);
    m.x(ne - 1, j) = b.bottom(j, 0);
    m.y(ne - 1, j) = b.bottom(j, 1);
  }
  for (index_t i = 0; i < ne; ++i) {
    m.x(i, 0) = b.right(i, 0);
    m.y(i, 0) = b.right(i, 1);
    m.x(i, nx - 1) = b.left(i, 0);
    m.y(i, nx - 1) = b.left(i, 1);
  }
  return m;
}

template <class Scalar>
struct RelaxOptions {
  Scalar omega = Scalar(1.5);
  Scalar tol = Scalar(1e-8);
  index_t max_iter = 50000;
};

using RelaxOptionsd = RelaxOptions<double>;

template <class Scalar>
struct RelaxResult {
  StructuredMesh<Scalar> mesh;
  Scalar loss;
  index_t iterations;
};

// One Gauss-Seidel/SOR sweep in row-major (eta, xi) order. alpha/beta/gamma
// are frozen for the whole sweep (Picard linearization); neighbor values are
// the latest available.
template <class Scalar>
void sor_sweep(StructuredMesh<Scalar>& m, const Grid<Scalar>& alpha, const Grid<Scalar>& beta,
               const Grid<Scalar>& gamma, Scalar omega) {
  const index_t ne = m.n_eta();
  const index_t nx = m.n_xi();
  auto& x = m.x;
  auto& y = m.y;
  for (index_t i = 1; i < ne - 1; ++i) {
    for (index_t j = 1; j < nx - 1; ++j) {
      const Scalar a = alpha(i - 1, j - 1);
      const Scalar b = beta(i - 1, j - 1);
      const Scalar g = gamma(i - 1, j - 1);
      const Scalar den = Scalar(2) * (a + g);
      if (!(den > Scalar(0))) continue;  // locally degenerate; leave the node
      const Scalar cx = (x(i + 1, j + 1) + x(i - 1, j - 1) - x(i + 1, j - 1) - x(i - 1, j + 1)) /
                        Scalar(4);
      const Scalar cy = (y(i + 1, j + 1) + y(i - 1, j - 1) - y(i + 1, j - 1) - y(i - 1, j + 1)) /
                        Scalar(4);
      const Scalar xg =
          (a * (x(i, j + 1) + x(i, j - 1)) + g * (x(i + 1, j) + x(i - 1, j)) - Scalar(2) * b * cx) /
          den;
      const Scalar yg =
          (a * (y(i, j + 1) + y(i, j - 1)) + g * (y(i + 1, j) + y(i - 1, j)) - Scalar(2) * b * cy) /
          den;
      x(i, j) += omega * (xg - x(i, j));
      y(i, j) += omega * (yg - y(i, j));
    }
  }
}

//! Relax interior nodes until the residual loss drops to opts.tol. Boundary
//! nodes are never touched. Throws ConvergenceError when the iteration budget
//! runs out and MeshFoldingError when the converged mesh has a non-positive
//! interior Jacobian.
template <class Scalar>
RelaxResult<Scalar> relax_mesh(const StructuredMesh<Scalar>& mesh,
                               const RelaxOptions<Scalar>& opts = {}) {
  detail::check_mesh_shape(mesh);
  detail::check_mesh_finite(mesh);
  if (!(opts.omega > Scalar(0) && opts.omega < Scalar(2)))
    throw InputError("relax_mesh: omega must lie in (0, 2)");
  if (!(opts.tol > Scalar(0))) throw InputError("relax_mesh: tol must be positive");
  if (opts.max_iter < 0) throw InputError("relax_mesh: negative max_iter");

  RelaxResult<Scalar> r{mesh, Scalar(0), 0};
  const index_t ne = mesh.n_eta();
  const index_t nx = mesh.n_xi();
  Grid<Scalar> alpha(ne - 2, nx - 2), beta(ne - 2, nx - 2), gamma(ne - 2, nx - 2);

  r.loss = mesh_residual(r.mesh).loss;
  while (r.loss > opts.tol && r.iterations < opts.max_iter) {
    using detail::shifted;
    const Grid<Scalar> x_xi = (shifted(r.mesh.x, 0, 1) - shifted(r.mesh.x, 0, -1)) / Scalar(2);
    const Grid<Scalar> y_xi = (shifted(r.mesh.y, 0, 1) - shifted(r.mesh.y, 0, -1)) / Scalar(2);
    const Grid<Scalar> x_eta = (shifted(r.mesh.x, 1, 0) - shifted(r.mesh.x, -1, 0)) / Scalar(2);
    const Grid<Scalar> y_eta = (shifted(r.mesh.y, 1, 0) - shifted(r.mesh.y, -1, 0)) / Scalar(2);
    alpha = x_eta.square() + y_eta.square();
    beta = x_xi * x_eta + y_xi * y_eta;
    gamma = x_xi.square() + y_xi.square();
    sor_sweep(r.mesh, alpha, beta, gamma, opts.omega);
    ++r.iterations;
    if (!all_finite(r.mesh.x) || !all_finite(r.mesh.y))
      throw DataError("relax_mesh: mesh degenerated to non-finite coordinates");
    r.loss = mesh_residual(r.mesh).loss;
  }
  if (r.loss > opts.tol)
    throw ConvergenceError("relax_mesh: residual loss did not reach tol", double(r.loss));
  if (jacobian_min(r.mesh) <= Scalar(0))
    throw MeshFoldingError("relax_mesh: converged mesh is folded (non-positive Jacobian)");
  return r;
}

}  // namespace curvirom
