#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace curvirom {

using index_t = Eigen::Index;

// Grids are stored [eta-index][xi-index]; row-major so that sweep order and
// the flattening used by the reduced basis are both contiguous.
template <class Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
// One point per row, col 0 = x, col 1 = y.
template <class Scalar>
using PointList = Eigen::Array<Scalar, Eigen::Dynamic, 2>;

using Gridd = Grid<double>;
using Vecd = Vec<double>;
using Matd = Mat<double>;
using PointListd = PointList<double>;

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Strict-mode rejection of parameters outside the sampling bounds.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Inconsistent boundary/mesh assembly (node counts, corner mismatch).
struct ConstructionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, double loss)
      : std::runtime_error(what), last_loss(loss) {}
  double last_loss;
};

struct MeshFoldingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConditioningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level write/open failures.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& a) {
  return a.derived().array().isFinite().all();
}

// --- deterministic randomness ------------------------------------------------
//
// mt19937_64 has a sequence pinned by the standard; raw draws are mapped to
// doubles by hand because the distribution classes are implementation-defined.

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  // Unbiased rejection sampling; n is tiny compared to 2^64 so this
  // practically never loops.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable per-item seed derivation; worker scheduling can never change it.
inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index + 1));
}

template <class T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace curvirom
