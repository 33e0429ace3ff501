#pragma once

#include <cmath>

#include "curvirom/core.hpp"

// Parametric family of symmetric channel-like domains. The upper wall is a
// cubic Bezier curve running from (x1, y1) on the right to (-x1, y4) on the
// left; the lower wall is its mirror image across the x axis; the ends are
// straight vertical segments. The single width parameter x1 fixes the inner
// control abscissas through x2 = x1/2, x3 = -x1/2, x4 = -x1.

namespace curvirom {

// Sampling box for (x1, y1, y2, y3, y4), in mm.
inline constexpr double kParamLo[5] = {100.0, 10.0, 0.0, 20.0, 25.0};
inline constexpr double kParamHi[5] = {150.0, 16.0, 30.0, 50.0, 75.0};
inline constexpr int kParamDim = 5;

template <class Scalar = double>
Vec<Scalar> param_box_lo() {
  Vec<Scalar> v(kParamDim);
  for (int d = 0; d < kParamDim; ++d) v[d] = Scalar(kParamLo[d]);
  return v;
}

template <class Scalar = double>
Vec<Scalar> param_box_hi() {
  Vec<Scalar> v(kParamDim);
  for (int d = 0; d < kParamDim; ++d) v[d] = Scalar(kParamHi[d]);
  return v;
}

template <class Scalar>
struct GeometryParams {
  Scalar x1, y1, y2, y3, y4;

  Vec<Scalar> as_vector() const {
    Vec<Scalar> v(5);
    v << x1, y1, y2, y3, y4;
    return v;
  }

  static GeometryParams from_vector(const Vec<Scalar>& v) {
    if (v.size() != 5) throw InputError("geometry params need 5 entries");
    return {v[0], v[1], v[2], v[3], v[4]};
  }

  bool within_bounds() const {
    const Vec<Scalar> v = as_vector();
    for (int d = 0; d < kParamDim; ++d) {
      if (v[d] < Scalar(kParamLo[d]) || v[d] > Scalar(kParamHi[d])) return false;
    }
    return true;
  }

  // Finiteness and a usable width are required always; the sampling box only
  // under strict mode. Out-of-box parameters are otherwise allowed so the
  // surrogate can be queried slightly beyond the training range.
  void validate(bool strict = false) const {
    const Vec<Scalar> v = as_vector();
    if (!all_finite(v)) throw InputError("geometry params must be finite");
    if (!(x1 > Scalar(0))) throw InputError("x1 must be positive");
    if (strict && !within_bounds())
      throw ValidationError("geometry params outside sampling bounds (strict mode)");
  }
};

using GeometryParamsd = GeometryParams<double>;

template <class Scalar>
struct BezierCurve {
  PointList<Scalar> ctrl;  // one control point per row

  index_t degree() const { return ctrl.rows() - 1; }
};

//! Bernstein polynomial B_{i,n}(t) = C(n,i) t^i (1-t)^(n-i).
template <class Scalar>
Scalar bernstein(int n, int i, Scalar t) {
  if (n < 0 || i < 0 || i > n) throw InputError("bernstein: need 0 <= i <= n");
  if (!(t >= Scalar(0) && t <= Scalar(1))) throw InputError("bernstein: t outside [0,1]");
  // Binomial coefficient by multiplicative recurrence; exact in double well
  // beyond the degrees used here.
  Scalar binom = 1;
  for (int k = 0; k < i; ++k) binom *= Scalar(n - k) / Scalar(k + 1);
  using std::pow;
  return binom * pow(t, Scalar(i)) * pow(Scalar(1) - t, Scalar(n - i));
}

//! Evaluate a Bezier curve at t in [0,1]. Endpoints are reproduced exactly.
template <class Scalar>
Eigen::Matrix<Scalar, 2, 1> bezier_eval(const BezierCurve<Scalar>& curve, Scalar t) {
  const index_t n = curve.degree();
  if (n < 1) throw ConstructionError("bezier curve needs at least 2 control points");
  if (!all_finite(curve.ctrl)) throw ConstructionError("bezier control points must be finite");
  if (!(t >= Scalar(0) && t <= Scalar(1))) throw InputError("bezier_eval: t outside [0,1]");
  const Scalar u = Scalar(1) - t;
  Scalar binom = 1;
  Scalar tp = 1;  // t^i, accumulated
  Vec<Scalar> w(n + 1);
  for (index_t i = 0; i <= n; ++i) {
    w[i] = binom * tp;
    binom *= Scalar(n - i) / Scalar(i + 1);
    tp *= t;
  }
  Scalar up = 1;  // (1-t)^(n-i), accumulated from the right end
  for (index_t i = n; i >= 0; --i) {
    w[i] *= up;
    up *= u;
  }
  Eigen::Matrix<Scalar, 2, 1> p;
  p[0] = (w.array() * curve.ctrl.col(0)).sum();
  p[1] = (w.array() * curve.ctrl.col(1)).sum();
  return p;
}

//! Upper-wall cubic for a parameter set, inner abscissas tied to x1.
template <class Scalar>
BezierCurve<Scalar> top_curve(const GeometryParams<Scalar>& p) {
  BezierCurve<Scalar> c;
  c.ctrl.resize(4, 2);
  c.ctrl << p.x1, p.y1,                    //
      p.x1 / Scalar(2), p.y2,              //
      -p.x1 / Scalar(2), p.y3,             //
      -p.x1, p.y4;
  return c;
}

// Four boundary polylines of one domain. Node order fixes the computational
// frame: mesh row 0 is `top` in stored order (curve parameter t = 0 first,
// i.e. starting at +x1), the last row is `bottom`; `right` joins top[0] to
// bottom[0] (column 0), `left` joins top[end] to bottom[end] (last column).
// With eta increasing top to bottom and xi following the curve from +x1 to
// -x1, the induced mapping has positive Jacobian.
template <class Scalar>
struct DomainBoundary {
  PointList<Scalar> top, bottom, left, right;

  index_t n_xi() const { return top.rows(); }
  index_t n_eta() const { return left.rows(); }
};

using DomainBoundaryd = DomainBoundary<double>;

template <class Scalar>
void validate_boundary(const DomainBoundary<Scalar>& b) {
  if (b.top.rows() != b.bottom.rows())
    throw ConstructionError("boundary: top/bottom node counts differ");
  if (b.left.rows() != b.right.rows())
    throw ConstructionError("boundary: left/right node counts differ");
  if (b.top.rows() < 2 || b.left.rows() < 2)
    throw ConstructionError("boundary: each side needs at least 2 nodes");
  if (!all_finite(b.top) || !all_finite(b.bottom) || !all_finite(b.left) ||
      !all_finite(b.right))
    throw ConstructionError("boundary: non-finite node");
  const index_t m = b.left.rows() - 1;
  const index_t n = b.top.rows() - 1;
  auto same = [](auto a, auto b2) { return a(0) == b2(0) && a(1) == b2(1); };
  if (!same(b.right.row(0), b.top.row(0)) || !same(b.right.row(m), b.bottom.row(0)) ||
      !same(b.left.row(0), b.top.row(n)) || !same(b.left.row(m), b.bottom.row(n)))
    throw ConstructionError("boundary: corner nodes not shared exactly");
}

//! Sample the parametric domain boundary at n_xi nodes along each wall
//! (uniform t) and n_eta nodes along each straight end.
template <class Scalar>
DomainBoundary<Scalar> build_boundary(const GeometryParams<Scalar>& params, index_t n_eta,
                                      index_t n_xi, bool strict = false) {
  params.validate(strict);
  if (n_eta < 2 || n_xi < 2) throw InputError("build_boundary: need at least 2x2 nodes");

  const BezierCurve<Scalar> curve = top_curve(params);
  DomainBoundary<Scalar> b;
  b.top.resize(n_xi, 2);
  b.bottom.resize(n_xi, 2);
  for (index_t k = 0; k < n_xi; ++k) {
    const Scalar t = Scalar(k) / Scalar(n_xi - 1);
    const auto p = bezier_eval(curve, t);
    b.top(k, 0) = p[0];
    b.top(k, 1) = p[1];
    b.bottom(k, 0) = p[0];
    b.bottom(k, 1) = -p[1];
  }
  b.left.resize(n_eta, 2);
  b.right.resize(n_eta, 2);
  // a + s*(b - a) keeps straight sides exactly vertical (a == b in x);
  // endpoint branches keep the shared corners bit-identical.
  const auto lerp = [](Scalar a, Scalar bb, Scalar s) {
    if (s == Scalar(0)) return a;
    if (s == Scalar(1)) return bb;
    return a + s * (bb - a);
  };
  for (index_t k = 0; k < n_eta; ++k) {
    const Scalar s = Scalar(k) / Scalar(n_eta - 1);
    b.right(k, 0) = lerp(b.top(0, 0), b.bottom(0, 0), s);
    b.right(k, 1) = lerp(b.top(0, 1), b.bottom(0, 1), s);
    b.left(k, 0) = lerp(b.top(n_xi - 1, 0), b.bottom(n_xi - 1, 0), s);
    b.left(k, 1) = lerp(b.top(n_xi - 1, 1), b.bottom(n_xi - 1, 1), s);
  }
  validate_boundary(b);
  return b;
}

//! Axis-aligned rectangle [0,w] x [0,h] with uniformly spaced boundary nodes,
//! ordered like the sampled family (xi from +x to -x) so the Jacobian stays
//! positive.
template <class Scalar>
DomainBoundary<Scalar> rectangle_boundary(Scalar w, Scalar h, index_t n_eta, index_t n_xi) {
  if (!(w > Scalar(0)) || !(h > Scalar(0)))
    throw InputError("rectangle_boundary: need positive extents");
  if (n_eta < 2 || n_xi < 2) throw InputError("rectangle_boundary: need at least 2x2 nodes");
  DomainBoundary<Scalar> b;
  b.top.resize(n_xi, 2);
  b.bottom.resize(n_xi, 2);
  for (index_t k = 0; k < n_xi; ++k) {
    const Scalar t = Scalar(k) / Scalar(n_xi - 1);
    const Scalar x = (Scalar(1) - t) * w;  // +x end first
    b.top(k, 0) = x;
    b.top(k, 1) = h;
    b.bottom(k, 0) = x;
    b.bottom(k, 1) = 0;
  }
  b.left.resize(n_eta, 2);
  b.right.resize(n_eta, 2);
  for (index_t k = 0; k < n_eta; ++k) {
    const Scalar s = Scalar(k) / Scalar(n_eta - 1);
    const Scalar y = (Scalar(1) - s) * h;  // top end first
    b.right(k, 0) = w;
    b.right(k, 1) = y;
    b.left(k, 0) = 0;
    b.left(k, 1) = y;
  }
  // Endpoint arithmetic above reproduces corners exactly ((1-0)*w, (1-1)*w).
  validate_boundary(b);
  return b;
}

}  // namespace curvirom
