#include <doctest.h>

#include <cmath>
#include <vector>

#include "curvirom/pod.hpp"

using namespace curvirom;

namespace {

// Snapshot family spanning a known 3-dimensional space, plus noise-free
// structure: T_k = 300 + a_k * P + b_k * Q with fixed grids P, Q.
std::vector<ScalarFieldd> toy_snapshots(int n) {
  const index_t ne = 6, nx = 9;
  Gridd P(ne, nx), Q(ne, nx);
  for (index_t i = 0; i < ne; ++i)
    for (index_t j = 0; j < nx; ++j) {
      P(i, j) = std::sin(0.7 * double(i) + 0.3 * double(j));
      Q(i, j) = double(i) * double(j) / 40.0;
    }
  std::vector<ScalarFieldd> out;
  std::mt19937_64 rng(7);
  for (int k = 0; k < n; ++k) {
    const double a = uniform01(rng), b = uniform01(rng);
    out.push_back({Gridd::Constant(ne, nx, 300.0) + a * P + b * Q, 0});
  }
  return out;
}

}  // namespace

TEST_CASE("snapshot matrix") {
  const auto fields = toy_snapshots(5);
  const auto s = snapshot_matrix(fields);
  CHECK(s.count() == 5);
  CHECK(s.n_eta == 6);
  CHECK(s.n_xi == 9);
  CHECK(s.data.rows() == 54);
  // Column k is the row-major flattening of snapshot k.
  CHECK(s.data(0, 2) == fields[2].values(0, 0));

  std::vector<ScalarFieldd> bad = fields;
  bad.push_back({Gridd::Zero(6, 8), 0});
  CHECK_THROWS_AS(snapshot_matrix(bad), DataError);
  bad.back() = {Gridd::Zero(6, 9), 1};
  CHECK_THROWS_AS(snapshot_matrix(bad), DataError);
  CHECK_THROWS_AS(snapshot_matrix(std::vector<ScalarFieldd>{}), DataError);
}

TEST_CASE("pod basis") {
  SUBCASE("full threshold reconstructs every snapshot to round-off") {
    const auto fields = toy_snapshots(12);
    const auto s = snapshot_matrix(fields);
    const auto b = fit_pod(s, 1.0);
    CHECK(b.dim <= 3);  // snapshots span {1, P, Q}
    for (const auto& f : fields) {
      const auto back = reconstruct(b, project(b, f));
      const double rel = (back.values - f.values).matrix().norm() / f.values.matrix().norm();
      CHECK(rel <= 1e-12);
    }
  }

  SUBCASE("basis columns are orthonormal") {
    const auto b = fit_pod(snapshot_matrix(toy_snapshots(8)), 1.0);
    const Matd gram = b.basis.transpose() * b.basis;
    CHECK((gram - Matd::Identity(b.dim, b.dim)).cwiseAbs().maxCoeff() <= 1e-13);
  }

  SUBCASE("sign convention: largest-magnitude entry positive") {
    const auto b = fit_pod(snapshot_matrix(toy_snapshots(8)), 1.0);
    for (index_t k = 0; k < b.dim; ++k) {
      index_t imax = 0;
      b.basis.col(k).cwiseAbs().maxCoeff(&imax);
      CHECK(b.basis(imax, k) > 0.0);
    }
  }

  SUBCASE("mean-dominated snapshots keep one mode at the default threshold") {
    // Uncentered POD: the 300 K offset carries nearly all sigma^2 energy, so
    // 0.9999 retains a single mode. Prediction-grade thresholds must sit much
    // closer to 1.
    const auto b = fit_pod(snapshot_matrix(toy_snapshots(12)));
    CHECK(b.dim == 1);
    CHECK(b.energy >= 0.9999);
  }

  SUBCASE("tighter thresholds retain more modes and more energy") {
    const auto s = snapshot_matrix(toy_snapshots(12));
    const auto loose = fit_pod(s, 0.9999);
    const auto tight = fit_pod(s, 1.0 - 1e-12);
    CHECK(tight.dim > loose.dim);
    CHECK(tight.energy >= loose.energy);
    CHECK(tight.dim <= 3);
  }

  SUBCASE("singular values are descending and threshold metadata is stored") {
    const auto b = fit_pod(snapshot_matrix(toy_snapshots(9)), 0.5);
    for (index_t k = 1; k < b.sigma.size(); ++k) CHECK(b.sigma[k] <= b.sigma[k - 1]);
    CHECK(b.threshold == 0.5);
    CHECK(b.n_eta == 6);
    CHECK(b.n_xi == 9);
  }

  SUBCASE("dim never exceeds snapshot count or grid size") {
    const auto b = fit_pod(snapshot_matrix(toy_snapshots(2)), 1.0);
    CHECK(b.dim <= 2);
  }

  SUBCASE("validation") {
    const auto s = snapshot_matrix(toy_snapshots(4));
    CHECK_THROWS_AS(fit_pod(s, 0.0), InputError);
    CHECK_THROWS_AS(fit_pod(s, 1.5), InputError);
    SnapshotMatrixd zero;
    zero.data = Matd::Zero(10, 3);
    zero.n_eta = 2;
    zero.n_xi = 5;
    CHECK_THROWS_AS(fit_pod(zero), DataError);
    SnapshotMatrixd empty;
    CHECK_THROWS_AS(fit_pod(empty), DataError);
  }
}

TEST_CASE("project and reconstruct") {
  const auto fields = toy_snapshots(6);
  const auto b = fit_pod(snapshot_matrix(fields), 1.0);

  SUBCASE("projection of a basis vector is a unit coefficient vector") {
    ScalarFieldd mode{unflatten_grid<double>(b.basis.col(0), 6, 9), 0};
    const Vecd c = project(b, mode);
    CHECK(std::abs(c[0] - 1.0) <= 1e-13);
    for (index_t k = 1; k < c.size(); ++k) CHECK(std::abs(c[k]) <= 1e-13);
  }

  SUBCASE("shape, level, and coefficient-count mismatches") {
    CHECK_THROWS_AS(project(b, ScalarFieldd{Gridd::Zero(6, 8), 0}), DataError);
    CHECK_THROWS_AS(project(b, ScalarFieldd{Gridd::Zero(6, 9), 3}), DataError);
    const Vecd wrong = Vecd::Zero(b.dim + 1);
    CHECK_THROWS_AS(reconstruct(b, wrong), DataError);
  }

  SUBCASE("flatten and unflatten round trip") {
    Gridd g(3, 4);
    for (index_t i = 0; i < 3; ++i)
      for (index_t j = 0; j < 4; ++j) g(i, j) = 10.0 * double(i) + double(j);
    const Vecd flat = flatten_grid(g);
    CHECK((unflatten_grid(flat, index_t(3), index_t(4)) == g).all());
    CHECK_THROWS_AS(unflatten_grid(flat, index_t(4), index_t(4)), DataError);
  }
}
