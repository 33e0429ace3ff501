#include <doctest.h>

#include "curvirom/core.hpp"
#include "curvirom/dataset.hpp"
#include "curvirom/geometry.hpp"
#include "curvirom/gp.hpp"
#include "curvirom/io.hpp"
#include "curvirom/meshgen.hpp"
#include "curvirom/multilevel.hpp"
#include "curvirom/pod.hpp"
#include "curvirom/surrogate.hpp"
#include "curvirom/thermal.hpp"

using namespace curvirom;

// The scalar-templated core must instantiate for float as well as double.
TEST_CASE("float instantiation of the templated core") {
  GeometryParams<float> p{120.f, 12.f, 10.f, 30.f, 40.f};
  const auto b = build_boundary(p, index_t(5), index_t(9));
  auto mesh = init_mesh_tfi(b);
  RelaxOptions<float> ro;
  ro.tol = 1e-2f;  // float residuals on ~100 mm coordinates bottom out well above double tols
  const auto rr = relax_mesh(mesh, ro);
  CHECK(rr.loss <= 1e-2f);

  BoundaryConditions<float> bc;
  SolveOptions<float> so;
  // The stencil residual carries squared metric weights (~1e3 for mm-scale
  // cells), so its float evaluation floor lands near 1e-1; 0.5 stays above
  // that while still forcing real sweep progress from the initial blend.
  so.tol = 0.5f;
  const auto field = solve_laplace(rr.mesh, bc, so);
  CHECK(all_finite(field.values));

  const auto fine = prolongate(field.values, index_t(9), index_t(17));
  CHECK(fine.rows() == 9);

  std::vector<ScalarField<float>> fields{field, field};
  const auto basis = fit_pod(snapshot_matrix(fields), 1.0f);
  CHECK(basis.dim >= 1);
  const auto coeffs = project(basis, field);
  const auto back = reconstruct(basis, coeffs);
  CHECK(back.n_eta() == field.n_eta());

  Mat<float> X(3, 1);
  X << 0.f, 0.5f, 1.f;
  Vec<float> y(3);
  y << 0.f, 1.f, 0.f;
  GpFitOptions<float> opts;
  opts.opt_budget = 40;
  opts.multistarts = 2;
  const auto gp = gp_fit(X, y, opts);
  const Vec<float> q = Vec<float>::Constant(1, 0.25f);
  const auto pred = gp_predict(gp, q);
  CHECK(std::isfinite(pred.mean));
}
