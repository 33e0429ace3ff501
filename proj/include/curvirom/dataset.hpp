#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <exception>
#include <numeric>
#include <filesystem>
#include <mutex>
#include <optional>
#include <thread>

#include <json.hpp>

#include "curvirom/core.hpp"
#include "curvirom/geometry.hpp"
#include "curvirom/io.hpp"
#include "curvirom/multilevel.hpp"
#include "curvirom/thermal.hpp"

// Training-data production: Latin hypercube sampling of the geometry box,
// per-sample mesh hierarchies, finite-difference solutions on every level,
// the telescoping decomposition, and a directory format that round-trips all
// of it (manifest.json plus one named-array file per sample).

namespace curvirom {

//! Latin hypercube sample, n points inside [lo, hi]^p: per dimension a random
//! permutation assigns each point its own stratum, and the point sits at the
//! stratum midpoint plus a uniform jitter inside the stratum.
inline Matd lhs_sample(index_t n, std::uint64_t seed, const Vecd& lo, const Vecd& hi) {
  if (n < 1) throw InputError("lhs_sample: need at least one sample");
  if (lo.size() != hi.size() || lo.size() < 1)
    throw InputError("lhs_sample: bounds size mismatch");
  for (index_t d = 0; d < lo.size(); ++d) {
    if (!(hi[d] > lo[d])) throw InputError("lhs_sample: bounds must satisfy hi > lo");
  }
  std::mt19937_64 rng(seed);
  Matd X(n, lo.size());
  std::vector<index_t> strata(static_cast<std::size_t>(n));
  for (index_t d = 0; d < lo.size(); ++d) {
    std::iota(strata.begin(), strata.end(), index_t(0));
    shuffle_in_place(strata, rng);
    const double width = (hi[d] - lo[d]) / static_cast<double>(n);
    for (index_t i = 0; i < n; ++i) {
      const double jitter = uniform01(rng) - 0.5;  // within the stratum
      const double center = static_cast<double>(strata[static_cast<std::size_t>(i)]) + 0.5;
      X(i, d) = lo[d] + (center + jitter) * width;
    }
  }
  return X;
}

struct GenerateConfig {
  int levels = 4;
  index_t base_eta = 8, base_xi = 32;
  BoundaryConditionsd bc;
  RelaxOptionsd relax{1.7, 1e-8, 50000};
  SolveOptionsd solve{};
  Vecd lo = param_box_lo();
  Vecd hi = param_box_hi();
  int threads = 0;                  // 0 = hardware concurrency
  double max_excluded_frac = 0.01;  // more than this fraction failing is an error
};

struct SampleRecord {
  GeometryParamsd params;
  std::vector<ScalarFieldd> solutions;  // per level, coarsest first
  std::vector<ScalarFieldd> tilde;      // telescoped detail fields
  std::string mesh_ref;                 // deterministic id of the finest mesh recipe
};

struct ExcludedSample {
  index_t index = 0;
  GeometryParamsd params;
  std::string reason;
};

struct Dataset {
  GenerateConfig config;
  std::uint64_t seed = 0;
  index_t requested = 0;
  std::vector<SampleRecord> samples;
  std::vector<ExcludedSample> excluded;

  index_t count() const { return static_cast<index_t>(samples.size()); }
  std::vector<Dims> level_dims() const {
    return hierarchy_dims(config.levels, config.base_eta, config.base_xi);
  }
};

namespace detail {

inline std::uint64_t mix_double(std::uint64_t h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  return mix64(h ^ bits);
}

inline std::string mesh_ref_id(const GeometryParamsd& p, Dims finest,
                               const RelaxOptionsd& relax) {
  std::uint64_t h = 0x6d657368u;  // arbitrary tag
  for (double v : {p.x1, p.y1, p.y2, p.y3, p.y4, relax.omega, relax.tol}) h = mix_double(h, v);
  h = mix64(h ^ static_cast<std::uint64_t>(finest.first));
  h = mix64(h ^ static_cast<std::uint64_t>(finest.second));
  char buf[32];
  std::snprintf(buf, sizeof buf, "mesh-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

//! Meshes, solves and decomposes one geometry at every hierarchy level.
inline SampleRecord make_sample(const GeometryParamsd& params, const GenerateConfig& cfg) {
  SampleRecord rec;
  rec.params = params;
  const MeshHierarchyd h =
      build_hierarchy(params, cfg.levels, cfg.base_eta, cfg.base_xi, cfg.relax);
  rec.solutions.reserve(h.meshes.size());
  for (std::size_t l = 0; l < h.meshes.size(); ++l) {
    ScalarFieldd f = solve_laplace(h.meshes[l], cfg.bc, cfg.solve);
    f.level = static_cast<int>(l);
    rec.solutions.push_back(std::move(f));
  }
  rec.tilde = decompose(rec.solutions);
  rec.mesh_ref = detail::mesh_ref_id(params, h.meshes.empty() ? Dims{0, 0}
                                                              : Dims{h.meshes.back().n_eta(),
                                                                     h.meshes.back().n_xi()},
                                     cfg.relax);
  return rec;
}

//! Generate a dataset from explicit parameter rows. Geometries whose mesh
//! fails to converge or folds are excluded and recorded; more than
//! max_excluded_frac of them failing aborts the run.
inline Dataset generate_dataset(const Matd& params, const GenerateConfig& cfg,
                                std::uint64_t seed = 0) {
  if (params.rows() < 1 || params.cols() != kParamDim)
    throw InputError("generate_dataset: params must be n x 5");
  const index_t n = params.rows();

  std::vector<std::optional<SampleRecord>> slots(static_cast<std::size_t>(n));
  std::vector<std::optional<std::string>> failures(static_cast<std::size_t>(n));
  std::atomic<index_t> cursor{0};
  std::mutex hard_mutex;
  std::exception_ptr hard_error;

  auto worker = [&]() {
    for (;;) {
      const index_t idx = cursor.fetch_add(1);
      if (idx >= n) return;
      {
        std::lock_guard<std::mutex> lk(hard_mutex);
        if (hard_error) return;
      }
      const auto row = params.row(idx);
      const GeometryParamsd g{row[0], row[1], row[2], row[3], row[4]};
      try {
        slots[static_cast<std::size_t>(idx)] = make_sample(g, cfg);
      } catch (const ConvergenceError& e) {
        failures[static_cast<std::size_t>(idx)] = e.what();
      } catch (const MeshFoldingError& e) {
        failures[static_cast<std::size_t>(idx)] = e.what();
      } catch (...) {
        std::lock_guard<std::mutex> lk(hard_mutex);
        if (!hard_error) hard_error = std::current_exception();
        return;
      }
    }
  };

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const unsigned nthreads =
      cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : hw;
  if (nthreads <= 1 || n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (hard_error) std::rethrow_exception(hard_error);

  Dataset ds;
  ds.config = cfg;
  ds.seed = seed;
  ds.requested = n;
  for (index_t i = 0; i < n; ++i) {
    auto& slot = slots[static_cast<std::size_t>(i)];
    if (slot) {
      ds.samples.push_back(std::move(*slot));
    } else {
      const auto row = params.row(i);
      ds.excluded.push_back(
          {i, GeometryParamsd{row[0], row[1], row[2], row[3], row[4]},
           failures[static_cast<std::size_t>(i)].value_or("unknown failure")});
    }
  }
  const double frac =
      static_cast<double>(ds.excluded.size()) / static_cast<double>(n);
  if (frac > cfg.max_excluded_frac)
    throw DataError("generate_dataset: excluded fraction " + std::to_string(frac) +
                    " exceeds budget");
  return ds;
}

//! Latin hypercube sample of the configured box plus generation.
inline Dataset generate_dataset(index_t n, std::uint64_t seed, const GenerateConfig& cfg) {
  return generate_dataset(lhs_sample(n, seed, cfg.lo, cfg.hi), cfg, seed);
}

//! Deterministic shuffled split; the first round(frac * n) shuffled samples
//! form the first part. Sample order inside each part follows the original
//! dataset order.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double frac,
                                                 std::uint64_t seed) {
  const index_t n = ds.count();
  if (n < 2) throw InputError("split_dataset: need at least 2 samples");
  if (!(frac > 0.0 && frac < 1.0)) throw InputError("split_dataset: frac outside (0, 1)");
  const index_t k = static_cast<index_t>(std::llround(frac * static_cast<double>(n)));
  if (k < 1 || k > n - 1) throw InputError("split_dataset: split leaves an empty part");

  std::vector<index_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), index_t(0));
  std::mt19937_64 rng(seed);
  shuffle_in_place(idx, rng);
  std::vector<bool> in_first(static_cast<std::size_t>(n), false);
  for (index_t i = 0; i < k; ++i) in_first[static_cast<std::size_t>(idx[i])] = true;

  Dataset a, b;
  a.config = b.config = ds.config;
  a.seed = b.seed = ds.seed;
  for (index_t i = 0; i < n; ++i) {
    (in_first[static_cast<std::size_t>(i)] ? a : b)
        .samples.push_back(ds.samples[static_cast<std::size_t>(i)]);
  }
  a.requested = a.count();
  b.requested = b.count();
  return {std::move(a), std::move(b)};
}

// --- persistence ---------------------------------------------------------------

namespace detail {

inline nlohmann::json side_to_json(const SideSpec<double>& s) {
  return {{"kind", s.kind == SideKind::blend ? "blend" : "constant"}, {"value", s.value}};
}

inline SideSpec<double> side_from_json(const nlohmann::json& j) {
  SideSpec<double> s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "blend") {
    s.kind = SideKind::blend;
  } else if (kind == "constant") {
    s.kind = SideKind::constant;
  } else {
    throw LoadError("dataset manifest: unknown side kind '" + kind + "'");
  }
  s.value = j.at("value").get<double>();
  return s;
}

inline nlohmann::json params_to_json(const GeometryParamsd& p) {
  return {p.x1, p.y1, p.y2, p.y3, p.y4};
}

inline GeometryParamsd params_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 5) throw LoadError("dataset manifest: bad params entry");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(),
          j[4].get<double>()};
}

inline std::string iso_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

inline std::string sample_file_name(index_t i) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "samples/sample_%05lld.bin", static_cast<long long>(i));
  return buf;
}

}  // namespace detail

inline constexpr int kDatasetVersion = 1;

inline void save_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "samples");

  nlohmann::json j;
  j["format"] = "curvirom-dataset";
  j["version"] = kDatasetVersion;
  j["created"] = detail::iso_now();
  j["seed"] = ds.seed;
  j["requested"] = ds.requested;
  j["levels"] = ds.config.levels;
  j["base_dims"] = {ds.config.base_eta, ds.config.base_xi};
  j["bounds_lo"] = std::vector<double>(ds.config.lo.data(), ds.config.lo.data() + ds.config.lo.size());
  j["bounds_hi"] = std::vector<double>(ds.config.hi.data(), ds.config.hi.data() + ds.config.hi.size());
  j["bc"] = {{"top", ds.config.bc.top},
             {"bottom", ds.config.bc.bottom},
             {"left", detail::side_to_json(ds.config.bc.left)},
             {"right", detail::side_to_json(ds.config.bc.right)}};
  j["relax"] = {{"omega", ds.config.relax.omega},
                {"tol", ds.config.relax.tol},
                {"max_iter", ds.config.relax.max_iter}};
  j["solve"] = {{"omega", ds.config.solve.omega},
                {"tol", ds.config.solve.tol},
                {"max_iter", ds.config.solve.max_iter}};
  j["max_excluded_frac"] = ds.config.max_excluded_frac;

  nlohmann::json excluded = nlohmann::json::array();
  for (const auto& e : ds.excluded) {
    excluded.push_back({{"index", e.index},
                        {"params", detail::params_to_json(e.params)},
                        {"reason", e.reason}});
  }
  j["excluded"] = excluded;

  nlohmann::json samples = nlohmann::json::array();
  for (index_t i = 0; i < ds.count(); ++i) {
    const SampleRecord& rec = ds.samples[static_cast<std::size_t>(i)];
    const std::string file = detail::sample_file_name(i);
    samples.push_back({{"file", file},
                       {"params", detail::params_to_json(rec.params)},
                       {"mesh_ref", rec.mesh_ref}});
    std::vector<NamedArray> arrays;
    for (std::size_t l = 0; l < rec.solutions.size(); ++l) {
      arrays.push_back(named_array("solution/" + std::to_string(l), rec.solutions[l].values));
    }
    for (std::size_t l = 0; l < rec.tilde.size(); ++l) {
      arrays.push_back(named_array("tilde/" + std::to_string(l), rec.tilde[l].values));
    }
    save_arrays((fs::path(dir) / file).string(), arrays);
  }
  j["samples"] = samples;

  std::ofstream f(fs::path(dir) / "manifest.json");
  if (!f) throw IoError("cannot write dataset manifest in " + dir);
  f << j.dump(2) << "\n";
  if (!f) throw IoError("dataset manifest write failed in " + dir);
}

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream f(fs::path(dir) / "manifest.json");
  if (!f) throw LoadError("dataset: cannot open manifest in " + dir);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("dataset: manifest parse error: ") + e.what());
  }

  Dataset ds;
  try {
    if (j.at("format").get<std::string>() != "curvirom-dataset")
      throw LoadError("dataset: not a dataset manifest");
    if (j.at("version").get<int>() != kDatasetVersion)
      throw LoadError("dataset: unsupported manifest version");
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.requested = j.at("requested").get<index_t>();
    ds.config.levels = j.at("levels").get<int>();
    ds.config.base_eta = j.at("base_dims")[0].get<index_t>();
    ds.config.base_xi = j.at("base_dims")[1].get<index_t>();
    const auto lo = j.at("bounds_lo").get<std::vector<double>>();
    const auto hi = j.at("bounds_hi").get<std::vector<double>>();
    ds.config.lo = Eigen::Map<const Vecd>(lo.data(), static_cast<index_t>(lo.size()));
    ds.config.hi = Eigen::Map<const Vecd>(hi.data(), static_cast<index_t>(hi.size()));
    ds.config.bc.top = j.at("bc").at("top").get<double>();
    ds.config.bc.bottom = j.at("bc").at("bottom").get<double>();
    ds.config.bc.left = detail::side_from_json(j.at("bc").at("left"));
    ds.config.bc.right = detail::side_from_json(j.at("bc").at("right"));
    ds.config.relax.omega = j.at("relax").at("omega").get<double>();
    ds.config.relax.tol = j.at("relax").at("tol").get<double>();
    ds.config.relax.max_iter = j.at("relax").at("max_iter").get<index_t>();
    ds.config.solve.omega = j.at("solve").at("omega").get<double>();
    ds.config.solve.tol = j.at("solve").at("tol").get<double>();
    ds.config.solve.max_iter = j.at("solve").at("max_iter").get<index_t>();
    ds.config.max_excluded_frac = j.at("max_excluded_frac").get<double>();

    for (const auto& e : j.at("excluded")) {
      ds.excluded.push_back({e.at("index").get<index_t>(),
                             detail::params_from_json(e.at("params")),
                             e.at("reason").get<std::string>()});
    }

    const std::vector<Dims> dims = ds.level_dims();
    for (const auto& s : j.at("samples")) {
      SampleRecord rec;
      rec.params = detail::params_from_json(s.at("params"));
      rec.mesh_ref = s.at("mesh_ref").get<std::string>();
      const std::string file = s.at("file").get<std::string>();
      const auto arrays = load_arrays((fs::path(dir) / file).string());
      for (std::size_t l = 0; l < dims.size(); ++l) {
        const NamedArray& sol = find_array(arrays, "solution/" + std::to_string(l));
        const NamedArray& til = find_array(arrays, "tilde/" + std::to_string(l));
        for (const NamedArray* a : {&sol, &til}) {
          if (a->dims.size() != 2 || a->dims[0] != dims[l].first ||
              a->dims[1] != dims[l].second)
            throw LoadError("dataset: array shape mismatch in " + file);
        }
        rec.solutions.push_back({grid_from(sol), static_cast<int>(l)});
        rec.tilde.push_back({grid_from(til), static_cast<int>(l)});
      }
      ds.samples.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("dataset: malformed manifest: ") + e.what());
  }
  return ds;
}

}  // namespace curvirom
