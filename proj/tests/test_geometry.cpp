#include <doctest.h>

#include "curvirom/geometry.hpp"

using namespace curvirom;

TEST_CASE("bernstein weights") {
  CHECK(bernstein(3, 0, 0.0) == 1.0);
  CHECK(bernstein(3, 3, 1.0) == 1.0);
  CHECK(bernstein(3, 1, 0.5) == doctest::Approx(0.375).epsilon(1e-15));

  double sum = 0;
  for (int i = 0; i <= 3; ++i) sum += bernstein(3, i, 0.37);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(bernstein(3, -1, 0.5), InputError);
  CHECK_THROWS_AS(bernstein(3, 4, 0.5), InputError);
  CHECK_THROWS_AS(bernstein(3, 1, -0.1), InputError);
  CHECK_THROWS_AS(bernstein(3, 1, 1.1), InputError);
}

TEST_CASE("bezier evaluation") {
  BezierCurve<double> c;
  c.ctrl.resize(4, 2);

  SUBCASE("endpoints are the control endpoints, bit for bit") {
    c.ctrl << 0.1, 0.2, 0.5, 0.9, 1.7, -0.3, 2.3, 0.4;
    const auto p0 = bezier_eval(c, 0.0);
    const auto p1 = bezier_eval(c, 1.0);
    CHECK(p0[0] == 0.1);
    CHECK(p0[1] == 0.2);
    CHECK(p1[0] == 2.3);
    CHECK(p1[1] == 0.4);
  }

  SUBCASE("collinear equally spaced controls give linear precision") {
    c.ctrl << 0, 0, 1, 0, 2, 0, 3, 0;
    const auto p = bezier_eval(c, 1.0 / 3.0);
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p[1] == 0.0);
  }

  SUBCASE("degree-1 curve is a lerp") {
    BezierCurve<double> line;
    line.ctrl.resize(2, 2);
    line.ctrl << 0, 0, 4, 2;
    const auto p = bezier_eval(line, 0.25);
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(0.5));
  }

  SUBCASE("domain and validity errors") {
    c.ctrl << 0, 0, 1, 0, 2, 0, 3, 0;
    CHECK_THROWS_AS(bezier_eval(c, -0.01), InputError);
    CHECK_THROWS_AS(bezier_eval(c, 1.01), InputError);
    BezierCurve<double> degenerate;
    degenerate.ctrl.resize(1, 2);
    degenerate.ctrl << 0, 0;
    CHECK_THROWS_AS(bezier_eval(degenerate, 0.5), ConstructionError);
    c.ctrl(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(bezier_eval(c, 0.5), ConstructionError);
  }
}

TEST_CASE("top curve control layout ties inner abscissas to x1") {
  const GeometryParamsd p{120, 12, 15, 35, 50};
  const auto c = top_curve(p);
  REQUIRE(c.ctrl.rows() == 4);
  CHECK(c.ctrl(0, 0) == 120.0);
  CHECK(c.ctrl(0, 1) == 12.0);
  CHECK(c.ctrl(1, 0) == 60.0);
  CHECK(c.ctrl(1, 1) == 15.0);
  CHECK(c.ctrl(2, 0) == -60.0);
  CHECK(c.ctrl(2, 1) == 35.0);
  CHECK(c.ctrl(3, 0) == -120.0);
  CHECK(c.ctrl(3, 1) == 50.0);
}

TEST_CASE("geometry params") {
  const GeometryParamsd p{120, 12, 15, 35, 50};

  SUBCASE("vector round trip") {
    const auto v = p.as_vector();
    REQUIRE(v.size() == 5);
    const auto q = GeometryParamsd::from_vector(v);
    CHECK(q.x1 == p.x1);
    CHECK(q.y4 == p.y4);
    Vecd bad(4);
    bad.setZero();
    CHECK_THROWS_AS(GeometryParamsd::from_vector(bad), InputError);
  }

  SUBCASE("bounds are inclusive at the box corners") {
    CHECK(GeometryParamsd{100, 10, 0, 20, 25}.within_bounds());
    CHECK(GeometryParamsd{150, 16, 30, 50, 75}.within_bounds());
    CHECK_FALSE(GeometryParamsd{150.0001, 16, 30, 50, 75}.within_bounds());
  }

  SUBCASE("validate modes") {
    CHECK_NOTHROW(GeometryParamsd{151, 12, 15, 35, 50}.validate(false));
    CHECK_THROWS_AS((GeometryParamsd{151, 12, 15, 35, 50}.validate(true)), ValidationError);
    CHECK_THROWS_AS((GeometryParamsd{-1, 12, 15, 35, 50}.validate(false)), InputError);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((GeometryParamsd{120, nan, 15, 35, 50}.validate(false)), InputError);
  }

  SUBCASE("sampling box matches the documented ranges") {
    const Vecd lo = param_box_lo(), hi = param_box_hi();
    CHECK(lo[0] == 100.0);
    CHECK(hi[0] == 150.0);
    CHECK(lo[1] == 10.0);
    CHECK(hi[1] == 16.0);
    CHECK(lo[2] == 0.0);
    CHECK(hi[2] == 30.0);
    CHECK(lo[3] == 20.0);
    CHECK(hi[3] == 50.0);
    CHECK(lo[4] == 25.0);
    CHECK(hi[4] == 75.0);
  }
}

TEST_CASE("build_boundary") {
  const GeometryParamsd p{120, 12, 15, 35, 50};
  const auto b = build_boundary(p, index_t(7), index_t(11));

  SUBCASE("counts and corner sharing") {
    CHECK(b.n_xi() == 11);
    CHECK(b.n_eta() == 7);
    CHECK_NOTHROW(validate_boundary(b));
    CHECK(b.right(0, 0) == b.top(0, 0));
    CHECK(b.right(6, 1) == b.bottom(0, 1));
    CHECK(b.left(0, 0) == b.top(10, 0));
    CHECK(b.left(6, 1) == b.bottom(10, 1));
  }

  SUBCASE("bottom mirrors top across the x axis") {
    for (index_t k = 0; k < b.n_xi(); ++k) {
      CHECK(b.bottom(k, 0) == b.top(k, 0));
      CHECK(b.bottom(k, 1) == -b.top(k, 1));
    }
  }

  SUBCASE("walls start at +x1 and end at -x1") {
    CHECK(b.top(0, 0) == 120.0);
    CHECK(b.top(0, 1) == 12.0);
    CHECK(b.top(10, 0) == -120.0);
    CHECK(b.top(10, 1) == 50.0);
  }

  SUBCASE("straight ends are vertical") {
    for (index_t k = 0; k < b.n_eta(); ++k) {
      CHECK(b.right(k, 0) == 120.0);
      CHECK(b.left(k, 0) == -120.0);
    }
  }

  SUBCASE("strict mode enforces the sampling box") {
    const GeometryParamsd out{160, 12, 15, 35, 50};
    CHECK_NOTHROW(build_boundary(out, index_t(5), index_t(9)));
    CHECK_THROWS_AS(build_boundary(out, index_t(5), index_t(9), true), ValidationError);
  }

  SUBCASE("node count floor") {
    CHECK_THROWS_AS(build_boundary(p, index_t(1), index_t(9)), InputError);
  }
}

TEST_CASE("validate_boundary rejects broken corners") {
  const auto good = rectangle_boundary(2.0, 1.0, index_t(4), index_t(5));
  auto bad = good;
  bad.top(0, 0) += 1e-12;  // any mismatch counts; sharing must be exact
  CHECK_THROWS_AS(validate_boundary(bad), ConstructionError);

  auto mismatched = good;
  mismatched.bottom.conservativeResize(4, 2);
  CHECK_THROWS_AS(validate_boundary(mismatched), ConstructionError);
}

TEST_CASE("rectangle boundary layout") {
  const auto b = rectangle_boundary(2.0, 1.0, index_t(3), index_t(5));
  CHECK(b.top(0, 0) == 2.0);
  CHECK(b.top(0, 1) == 1.0);
  CHECK(b.top(4, 0) == 0.0);
  CHECK(b.bottom(4, 1) == 0.0);
  CHECK(b.top(1, 0) == doctest::Approx(1.5));
  CHECK(b.right(1, 1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(rectangle_boundary(-2.0, 1.0, index_t(3), index_t(5)), InputError);
}
