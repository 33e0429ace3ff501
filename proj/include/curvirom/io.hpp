#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "curvirom/core.hpp"
#include "curvirom/meshgen.hpp"

// On-disk formats:
//  - named-array container: little-endian binary, shape headers, float64
//    payloads in row-major order; the unit of persistence for snapshots,
//    bases and GP factors.
//  - legacy ASCII VTK structured grids and plain CSV for plot-ready exports,
//    selected by file extension.

namespace curvirom {

struct NamedArray {
  std::string name;
  std::vector<index_t> dims;  // rank 1 or 2
  std::vector<double> values; // row-major

  index_t element_count() const {
    index_t n = 1;
    for (index_t d : dims) n *= d;
    return n;
  }
};

inline NamedArray named_array(const std::string& name, const Gridd& g) {
  NamedArray a;
  a.name = name;
  a.dims = {g.rows(), g.cols()};
  a.values.assign(g.data(), g.data() + g.size());  // Grid storage is row-major
  return a;
}

inline NamedArray named_array(const std::string& name, const Matd& m) {
  NamedArray a;
  a.name = name;
  a.dims = {m.rows(), m.cols()};
  a.values.resize(static_cast<std::size_t>(m.size()));
  for (index_t i = 0; i < m.rows(); ++i)
    for (index_t j = 0; j < m.cols(); ++j)
      a.values[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  return a;
}

inline NamedArray named_array(const std::string& name, const Vecd& v) {
  NamedArray a;
  a.name = name;
  a.dims = {v.size()};
  a.values.assign(v.data(), v.data() + v.size());
  return a;
}

inline Gridd grid_from(const NamedArray& a) {
  if (a.dims.size() != 2) throw LoadError("array '" + a.name + "': expected rank 2");
  Gridd g(a.dims[0], a.dims[1]);
  std::memcpy(g.data(), a.values.data(), a.values.size() * sizeof(double));
  return g;
}

inline Matd mat_from(const NamedArray& a) {
  if (a.dims.size() != 2) throw LoadError("array '" + a.name + "': expected rank 2");
  Matd m(a.dims[0], a.dims[1]);
  for (index_t i = 0; i < m.rows(); ++i)
    for (index_t j = 0; j < m.cols(); ++j)
      m(i, j) = a.values[static_cast<std::size_t>(i * m.cols() + j)];
  return m;
}

inline Vecd vec_from(const NamedArray& a) {
  if (a.dims.size() != 1) throw LoadError("array '" + a.name + "': expected rank 1");
  Vecd v(a.dims[0]);
  std::memcpy(v.data(), a.values.data(), a.values.size() * sizeof(double));
  return v;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw LoadError("array container: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + k])) << (8 * k);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + k])) << (8 * k);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace detail

inline constexpr std::uint32_t kArrayMagic = 0x31525643;  // "CVR1"
inline constexpr std::uint32_t kArrayVersion = 1;

inline void save_arrays(const std::string& path, const std::vector<NamedArray>& arrays) {
  std::string out;
  detail::put_u32(out, kArrayMagic);
  detail::put_u32(out, kArrayVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const NamedArray& a : arrays) {
    if (a.dims.empty() || a.dims.size() > 2)
      throw InputError("save_arrays: only rank 1 and 2 supported");
    if (a.element_count() != static_cast<index_t>(a.values.size()))
      throw InputError("save_arrays: dims/payload mismatch for '" + a.name + "'");
    detail::put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    detail::put_u32(out, static_cast<std::uint32_t>(a.dims.size()));
    for (index_t d : a.dims) detail::put_u64(out, static_cast<std::uint64_t>(d));
    for (double v : a.values) detail::put_f64(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

inline std::vector<NamedArray> load_arrays(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  detail::ByteReader r{buf};
  if (r.u32() != kArrayMagic) throw LoadError("array container: bad magic in " + path);
  if (r.u32() != kArrayVersion) throw LoadError("array container: unsupported version");
  const std::uint32_t count = r.u32();
  if (count > 1u << 20) throw LoadError("array container: implausible array count");
  std::vector<NamedArray> arrays(count);
  for (NamedArray& a : arrays) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 4096) throw LoadError("array container: implausible name length");
    a.name = r.bytes(name_len);
    const std::uint32_t rank = r.u32();
    if (rank < 1 || rank > 2) throw LoadError("array container: unsupported rank");
    std::uint64_t total = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint64_t d = r.u64();
      if (d == 0 || d > (1ull << 32)) throw LoadError("array container: implausible dim");
      total *= d;
      a.dims.push_back(static_cast<index_t>(d));
    }
    if (total > (1ull << 31)) throw LoadError("array container: implausible element count");
    a.values.resize(static_cast<std::size_t>(total));
    for (double& v : a.values) v = r.f64();
  }
  if (r.pos != buf.size()) throw LoadError("array container: trailing bytes in " + path);
  return arrays;
}

inline const NamedArray& find_array(const std::vector<NamedArray>& arrays,
                                    const std::string& name) {
  for (const NamedArray& a : arrays) {
    if (a.name == name) return a;
  }
  throw LoadError("array container: missing array '" + name + "'");
}

inline bool has_array(const std::vector<NamedArray>& arrays, const std::string& name) {
  for (const NamedArray& a : arrays) {
    if (a.name == name) return true;
  }
  return false;
}

// --- plot-ready exports -------------------------------------------------------

namespace detail {

inline std::string fmt_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_text(const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  return f;
}

inline void vtk_grid_header(std::ofstream& f, const StructuredMeshd& m, const char* title) {
  f << "# vtk DataFile Version 3.0\n"
    << title << "\n"
    << "ASCII\n"
    << "DATASET STRUCTURED_GRID\n"
    << "DIMENSIONS " << m.n_xi() << " " << m.n_eta() << " 1\n"
    << "POINTS " << m.n_eta() * m.n_xi() << " double\n";
  for (index_t i = 0; i < m.n_eta(); ++i) {
    for (index_t j = 0; j < m.n_xi(); ++j) {
      f << fmt_g17(m.x(i, j)) << " " << fmt_g17(m.y(i, j)) << " 0\n";
    }
  }
}

}  // namespace detail

inline void write_mesh_vtk(const std::string& path, const StructuredMeshd& m) {
  auto f = detail::open_text(path);
  detail::vtk_grid_header(f, m, "structured mesh");
  if (!f) throw IoError("write failed: " + path);
}

inline void write_field_vtk(const std::string& path, const StructuredMeshd& m, const Gridd& T) {
  if (T.rows() != m.n_eta() || T.cols() != m.n_xi())
    throw DataError("write_field_vtk: field/mesh shape mismatch");
  auto f = detail::open_text(path);
  detail::vtk_grid_header(f, m, "temperature field");
  f << "POINT_DATA " << m.n_eta() * m.n_xi() << "\n"
    << "SCALARS temperature double 1\n"
    << "LOOKUP_TABLE default\n";
  for (index_t i = 0; i < m.n_eta(); ++i) {
    for (index_t j = 0; j < m.n_xi(); ++j) {
      f << detail::fmt_g17(T(i, j)) << "\n";
    }
  }
  if (!f) throw IoError("write failed: " + path);
}

inline void write_mesh_csv(const std::string& path, const StructuredMeshd& m) {
  auto f = detail::open_text(path);
  f << "i,j,x,y\n";
  for (index_t i = 0; i < m.n_eta(); ++i) {
    for (index_t j = 0; j < m.n_xi(); ++j) {
      f << i << "," << j << "," << detail::fmt_g17(m.x(i, j)) << ","
        << detail::fmt_g17(m.y(i, j)) << "\n";
    }
  }
  if (!f) throw IoError("write failed: " + path);
}

inline void write_field_csv(const std::string& path, const StructuredMeshd& m, const Gridd& T) {
  if (T.rows() != m.n_eta() || T.cols() != m.n_xi())
    throw DataError("write_field_csv: field/mesh shape mismatch");
  auto f = detail::open_text(path);
  f << "i,j,x,y,temperature\n";
  for (index_t i = 0; i < m.n_eta(); ++i) {
    for (index_t j = 0; j < m.n_xi(); ++j) {
      f << i << "," << j << "," << detail::fmt_g17(m.x(i, j)) << ","
        << detail::fmt_g17(m.y(i, j)) << "," << detail::fmt_g17(T(i, j)) << "\n";
    }
  }
  if (!f) throw IoError("write failed: " + path);
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

//! Write a mesh as .vtk or .csv depending on the path extension.
inline void export_mesh(const std::string& path, const StructuredMeshd& m) {
  if (has_suffix(path, ".vtk")) return write_mesh_vtk(path, m);
  if (has_suffix(path, ".csv")) return write_mesh_csv(path, m);
  throw InputError("export_mesh: unsupported extension (use .vtk or .csv): " + path);
}

//! Write a field over a mesh as .vtk or .csv depending on the path extension.
inline void export_field(const std::string& path, const StructuredMeshd& m, const Gridd& T) {
  if (has_suffix(path, ".vtk")) return write_field_vtk(path, m, T);
  if (has_suffix(path, ".csv")) return write_field_csv(path, m, T);
  throw InputError("export_field: unsupported extension (use .vtk or .csv): " + path);
}

}  // namespace curvirom
