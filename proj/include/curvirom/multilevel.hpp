#pragma once

#include <utility>
#include <vector>

#include "curvirom/core.hpp"
#include "curvirom/meshgen.hpp"
#include "curvirom/thermal.hpp"

// Mesh hierarchies and the telescoping field decomposition
//
//   v~_1 = v_1,   v~_l = v_l - I(v_{l-1})   (l = 2..L)
//
// where I is bilinear interpolation in normalized computational coordinates.
// Levels double the node count per direction, so nodes of consecutive levels
// do not coincide; interpolation in (u, v) = (i/(n_eta-1), j/(n_xi-1)) is
// what makes the transfer well defined anyway. Recomposition accumulates
// coarsest-first and reproduces the finest field exactly when fed an
// untouched decomposition.

namespace curvirom {

using Dims = std::pair<index_t, index_t>;  // (n_eta, n_xi)

inline std::vector<Dims> hierarchy_dims(int levels, index_t base_eta, index_t base_xi) {
  if (levels < 1) throw InputError("hierarchy_dims: need at least one level");
  if (base_eta < 3 || base_xi < 3) throw InputError("hierarchy_dims: base dims below 3x3");
  std::vector<Dims> dims(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    const index_t f = index_t(1) << l;
    dims[static_cast<std::size_t>(l)] = {base_eta * f, base_xi * f};
  }
  return dims;
}

template <class Scalar>
struct MeshHierarchy {
  GeometryParams<Scalar> params;
  std::vector<StructuredMesh<Scalar>> meshes;  // coarsest first

  int levels() const { return static_cast<int>(meshes.size()); }
};

using MeshHierarchyd = MeshHierarchy<double>;

//! Build and relax one mesh per level. A failing level rethrows its error
//! with the level index attached.
template <class Scalar>
MeshHierarchy<Scalar> build_hierarchy(const GeometryParams<Scalar>& params, int levels,
                                      index_t base_eta, index_t base_xi,
                                      const RelaxOptions<Scalar>& relax = {},
                                      bool strict = false) {
  const std::vector<Dims> dims = hierarchy_dims(levels, base_eta, base_xi);
  MeshHierarchy<Scalar> h;
  h.params = params;
  h.meshes.reserve(dims.size());
  for (std::size_t l = 0; l < dims.size(); ++l) {
    const std::string where = "level " + std::to_string(l) + ": ";
    try {
      const DomainBoundary<Scalar> b =
          build_boundary(params, dims[l].first, dims[l].second, strict);
      h.meshes.push_back(relax_mesh(init_mesh_tfi(b), relax).mesh);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(where + e.what(), e.last_loss);
    } catch (const MeshFoldingError& e) {
      throw MeshFoldingError(where + e.what());
    }
  }
  return h;
}

//! Bilinear interpolation onto a grid with to_eta x to_xi nodes. Grid corners
//! and coincident nodes are copied exactly; constants are preserved exactly.
template <class Scalar>
Grid<Scalar> prolongate(const Grid<Scalar>& v, index_t to_eta, index_t to_xi) {
  const index_t fe = v.rows();
  const index_t fx = v.cols();
  if (fe < 2 || fx < 2) throw InputError("prolongate: source needs at least 2x2 nodes");
  if (to_eta < fe || to_xi < fx)
    throw InputError("prolongate: target dims must not shrink");

  Grid<Scalar> out(to_eta, to_xi);
  // Exact at t = 0 and t = 1; the lerp form keeps constants exact.
  auto lerp = [](Scalar a, Scalar b, Scalar t) -> Scalar {
    if (t == Scalar(0)) return a;
    if (t == Scalar(1)) return b;
    return a + t * (b - a);
  };
  for (index_t i = 0; i < to_eta; ++i) {
    const Scalar u = to_eta == fe ? Scalar(i)
                                  : Scalar(i) * Scalar(fe - 1) / Scalar(to_eta - 1);
    index_t i0 = static_cast<index_t>(u);
    if (i0 > fe - 2) i0 = fe - 2;
    const Scalar fu = u - Scalar(i0);
    for (index_t j = 0; j < to_xi; ++j) {
      const Scalar w = to_xi == fx ? Scalar(j)
                                   : Scalar(j) * Scalar(fx - 1) / Scalar(to_xi - 1);
      index_t j0 = static_cast<index_t>(w);
      if (j0 > fx - 2) j0 = fx - 2;
      const Scalar fv = w - Scalar(j0);
      const Scalar r0 = lerp(v(i0, j0), v(i0, j0 + 1), fv);
      const Scalar r1 = lerp(v(i0 + 1, j0), v(i0 + 1, j0 + 1), fv);
      out(i, j) = lerp(r0, r1, fu);
    }
  }
  return out;
}

template <class Scalar>
ScalarField<Scalar> prolongate(const ScalarField<Scalar>& f, index_t to_eta, index_t to_xi,
                               int to_level) {
  return {prolongate(f.values, to_eta, to_xi), to_level};
}

namespace detail {

template <class Scalar>
void check_level_stack(const std::vector<ScalarField<Scalar>>& v, const char* who) {
  if (v.empty()) throw InputError(std::string(who) + ": empty level list");
  for (std::size_t l = 0; l < v.size(); ++l) {
    if (v[l].values.size() == 0) throw DataError(std::string(who) + ": empty level field");
    if (l > 0 && (v[l].n_eta() < v[l - 1].n_eta() || v[l].n_xi() < v[l - 1].n_xi()))
      throw DataError(std::string(who) + ": level dims must be nondecreasing");
  }
}

}  // namespace detail

//! Telescope per-level solutions into hierarchical detail fields.
template <class Scalar>
std::vector<ScalarField<Scalar>> decompose(const std::vector<ScalarField<Scalar>>& v) {
  detail::check_level_stack(v, "decompose");
  std::vector<ScalarField<Scalar>> tilde;
  tilde.reserve(v.size());
  tilde.push_back({v[0].values, 0});
  for (std::size_t l = 1; l < v.size(); ++l) {
    Grid<Scalar> up = prolongate(v[l - 1].values, v[l].n_eta(), v[l].n_xi());
    tilde.push_back({v[l].values - up, static_cast<int>(l)});
  }
  return tilde;
}

//! Accumulate detail fields coarsest-first back into the finest-level field.
template <class Scalar>
ScalarField<Scalar> recompose(const std::vector<ScalarField<Scalar>>& tilde) {
  detail::check_level_stack(tilde, "recompose");
  Grid<Scalar> acc = tilde[0].values;
  for (std::size_t l = 1; l < tilde.size(); ++l) {
    acc = prolongate(acc, tilde[l].n_eta(), tilde[l].n_xi()) + tilde[l].values;
  }
  return {std::move(acc), static_cast<int>(tilde.size()) - 1};
}

}  // namespace curvirom
