#pragma once

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "curvirom/core.hpp"
#include "curvirom/dataset.hpp"
#include "curvirom/geometry.hpp"
#include "curvirom/gp.hpp"
#include "curvirom/io.hpp"
#include "curvirom/meshgen.hpp"
#include "curvirom/multilevel.hpp"
#include "curvirom/pod.hpp"
#include "curvirom/thermal.hpp"

// The end-to-end surrogate: per level a POD basis plus one GP per retained
// coefficient, trained on decomposed detail fields (multi-level) or on the
// finest raw solutions (single-level). Prediction runs on the computational
// plane; predict_combined pairs the field with a freshly relaxed mesh.

namespace curvirom {

enum class SurrogateMode { multi_level, single_level };

inline const char* to_string(SurrogateMode m) {
  return m == SurrogateMode::multi_level ? "multi" : "single";
}

struct TrainConfig {
  SurrogateMode mode = SurrogateMode::multi_level;
  std::vector<double> energy{0.9999};  // per-level thresholds; one value broadcasts
  int gp_budget = 400;                 // likelihood evaluations per coefficient model
  int gp_multistarts = 8;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
};

struct SurrogateLevel {
  PodBasisd basis;
  std::vector<GpModeld> gps;  // one per retained coefficient, basis column order
};

struct ThermalSurrogate {
  SurrogateMode mode = SurrogateMode::multi_level;
  int levels = 0;  // hierarchy depth of the training data
  index_t base_eta = 0, base_xi = 0;
  Vecd lo, hi;  // parameter bounds used for normalization and range flags
  BoundaryConditionsd bc;
  RelaxOptionsd relax;  // mesh recipe, reused by predict_combined
  SolveOptionsd solve;
  std::vector<SurrogateLevel> stack;  // multi: coarsest first; single: finest only
  std::string id;

  std::vector<Dims> level_dims() const { return hierarchy_dims(levels, base_eta, base_xi); }
  Dims finest_dims() const {
    const auto d = level_dims();
    return d.back();
  }
};

struct ThermalPrediction {
  ScalarFieldd field;  // finest-level computational-plane temperature
  bool out_of_range = false;
};

struct CombinedPrediction {
  StructuredMeshd mesh;  // finest level
  ScalarFieldd field;    // same shape as the mesh
  GeometryParamsd params;
  std::string surrogate_id;
  bool out_of_range = false;
};

namespace detail {

inline std::string surrogate_id(const Dataset& ds, const TrainConfig& cfg,
                                const std::vector<double>& thresholds) {
  std::uint64_t h = 0x7468726du;
  h = mix64(h ^ static_cast<std::uint64_t>(cfg.mode == SurrogateMode::multi_level ? 1 : 2));
  h = mix64(h ^ static_cast<std::uint64_t>(ds.config.levels));
  h = mix64(h ^ static_cast<std::uint64_t>(ds.config.base_eta));
  h = mix64(h ^ static_cast<std::uint64_t>(ds.config.base_xi));
  h = mix64(h ^ static_cast<std::uint64_t>(ds.count()));
  h = mix64(h ^ cfg.seed);
  h = mix64(h ^ static_cast<std::uint64_t>(cfg.gp_budget));
  for (double t : thresholds) h = mix_double(h, t);
  for (index_t d = 0; d < ds.config.lo.size(); ++d) {
    h = mix_double(h, ds.config.lo[d]);
    h = mix_double(h, ds.config.hi[d]);
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "ts-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

//! Fit the surrogate on a training dataset. Multi-level mode trains one
//! basis + GP bank per level on the decomposed detail fields; single-level
//! mode trains a single bank on the finest raw solutions and never touches
//! the coarser data.
inline ThermalSurrogate train_thermal(const Dataset& ds, const TrainConfig& cfg = {}) {
  const index_t n = ds.count();
  if (n < 2) throw InputError("train_thermal: need at least 2 training samples");
  const int levels = ds.config.levels;
  const auto dims = ds.level_dims();
  for (const SampleRecord& rec : ds.samples) {
    if (static_cast<int>(rec.solutions.size()) != levels ||
        static_cast<int>(rec.tilde.size()) != levels)
      throw DataError("train_thermal: sample is missing decomposition levels");
  }

  std::vector<double> thr = cfg.energy;
  if (thr.empty()) thr.assign(1, 0.9999);
  if (thr.size() == 1) thr.assign(static_cast<std::size_t>(levels), thr[0]);
  if (static_cast<int>(thr.size()) != levels)
    throw InputError("train_thermal: energy threshold count must be 1 or match levels");

  ThermalSurrogate s;
  s.mode = cfg.mode;
  s.levels = levels;
  s.base_eta = ds.config.base_eta;
  s.base_xi = ds.config.base_xi;
  s.lo = ds.config.lo;
  s.hi = ds.config.hi;
  s.bc = ds.config.bc;
  s.relax = ds.config.relax;
  s.solve = ds.config.solve;
  s.id = detail::surrogate_id(ds, cfg, thr);

  Matd X(n, kParamDim);
  for (index_t i = 0; i < n; ++i)
    X.row(i) = ds.samples[static_cast<std::size_t>(i)].params.as_vector().transpose();

  // Which training fields feed each stack entry.
  struct LevelPlan {
    int level;          // hierarchy level the entry models
    double threshold;
  };
  std::vector<LevelPlan> plan;
  if (cfg.mode == SurrogateMode::multi_level) {
    for (int l = 0; l < levels; ++l) plan.push_back({l, thr[static_cast<std::size_t>(l)]});
  } else {
    plan.push_back({levels - 1, thr.back()});
  }

  s.stack.resize(plan.size());
  std::vector<Matd> coeffs(plan.size());  // per entry: dim x n
  for (std::size_t k = 0; k < plan.size(); ++k) {
    std::vector<ScalarFieldd> fields;
    fields.reserve(static_cast<std::size_t>(n));
    for (const SampleRecord& rec : ds.samples) {
      fields.push_back(cfg.mode == SurrogateMode::multi_level
                           ? rec.tilde[static_cast<std::size_t>(plan[k].level)]
                           : rec.solutions.back());
    }
    const auto snap = snapshot_matrix(fields);
    if (snap.n_eta != dims[static_cast<std::size_t>(plan[k].level)].first ||
        snap.n_xi != dims[static_cast<std::size_t>(plan[k].level)].second)
      throw DataError("train_thermal: sample shape disagrees with hierarchy dims");
    s.stack[k].basis = fit_pod(snap, plan[k].threshold);
    coeffs[k].resize(s.stack[k].basis.dim, n);
    for (index_t i = 0; i < n; ++i)
      coeffs[k].col(i) = project(s.stack[k].basis, fields[static_cast<std::size_t>(i)]);
    s.stack[k].gps.resize(static_cast<std::size_t>(s.stack[k].basis.dim));
  }

  // One GP per (entry, coefficient), fanned out over a worker pool. Results
  // land by index so thread count never changes the model.
  struct Task {
    std::size_t entry;
    index_t coeff;
  };
  std::vector<Task> tasks;
  for (std::size_t k = 0; k < plan.size(); ++k)
    for (index_t m = 0; m < s.stack[k].basis.dim; ++m) tasks.push_back({k, m});

  std::atomic<std::size_t> cursor{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_task = tasks.size();

  auto worker = [&]() {
    for (;;) {
      const std::size_t t = cursor.fetch_add(1);
      if (t >= tasks.size()) return;
      {
        std::lock_guard<std::mutex> lk(err_mutex);
        if (first_error) return;
      }
      const Task task = tasks[t];
      GpFitOptionsd opts;
      opts.seed = child_seed(cfg.seed,
                             static_cast<std::uint64_t>(task.entry) * 0x10000u +
                                 static_cast<std::uint64_t>(task.coeff));
      opts.opt_budget = cfg.gp_budget;
      opts.multistarts = cfg.gp_multistarts;
      opts.in_lo = s.lo;
      opts.in_hi = s.hi;
      try {
        const Vecd y = coeffs[task.entry].row(task.coeff).transpose();
        s.stack[task.entry].gps[static_cast<std::size_t>(task.coeff)] = gp_fit(X, y, opts);
      } catch (const ConditioningError& e) {
        std::lock_guard<std::mutex> lk(err_mutex);
        if (t < first_error_task) {
          first_error_task = t;
          first_error = std::make_exception_ptr(ConditioningError(
              "level " + std::to_string(plan[task.entry].level) + ", coefficient " +
              std::to_string(task.coeff) + ": " + e.what()));
        }
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mutex);
        if (t < first_error_task) {
          first_error_task = t;
          first_error = std::current_exception();
        }
      }
    }
  };

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const unsigned nthreads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : hw;
  if (nthreads <= 1 || tasks.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const unsigned count = static_cast<unsigned>(
        std::min<std::size_t>(nthreads, tasks.size()));
    pool.reserve(count);
    for (unsigned i = 0; i < count; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return s;
}

namespace detail {

inline bool params_in_box(const GeometryParamsd& p, const Vecd& lo, const Vecd& hi) {
  const Vecd v = p.as_vector();
  if (lo.size() != v.size() || hi.size() != v.size()) return false;
  return (v.array() >= lo.array()).all() && (v.array() <= hi.array()).all();
}

}  // namespace detail

//! Predict the finest-level computational-plane temperature field. Parameters
//! outside the training box are allowed; the result is flagged.
inline ThermalPrediction predict_thermal(const ThermalSurrogate& s, const GeometryParamsd& p) {
  if (s.stack.empty()) throw DataError("predict_thermal: empty surrogate");
  p.validate();
  const Vecd v = p.as_vector();

  std::vector<ScalarFieldd> parts;
  parts.reserve(s.stack.size());
  for (const SurrogateLevel& lvl : s.stack) {
    if (static_cast<index_t>(lvl.gps.size()) != lvl.basis.dim)
      throw DataError("predict_thermal: GP count disagrees with basis dim");
    Vecd c(lvl.basis.dim);
    for (index_t m = 0; m < lvl.basis.dim; ++m)
      c[m] = gp_predict(lvl.gps[static_cast<std::size_t>(m)], v).mean;
    parts.push_back(reconstruct(lvl.basis, c));
  }

  ThermalPrediction out;
  out.out_of_range = !detail::params_in_box(p, s.lo, s.hi);
  if (s.mode == SurrogateMode::multi_level) {
    out.field = recompose(parts);
  } else {
    out.field = std::move(parts.front());
  }
  return out;
}

//! Mesh the geometry at the finest dims with the training-time relax options
//! and pair it with the predicted field, so (x, y, T) triplets are complete.
inline CombinedPrediction predict_combined(const ThermalSurrogate& s,
                                           const GeometryParamsd& p) {
  const Dims fd = s.finest_dims();
  const auto boundary = build_boundary(p, fd.first, fd.second);
  const auto relaxed = relax_mesh(init_mesh_tfi(boundary), s.relax);

  ThermalPrediction t = predict_thermal(s, p);
  CombinedPrediction out;
  out.mesh = relaxed.mesh;
  out.field = std::move(t.field);
  out.params = p;
  out.surrogate_id = s.id;
  out.out_of_range = t.out_of_range;
  return out;
}

struct SampleMetrics {
  index_t index = 0;
  double mae = 0;  // mean |error| over the field, kelvin
  double mre = 0;  // mae / (max T - min T) of the truth field
};

struct EvalReport {
  double mae = 0;  // mean of per-sample MAE
  double mre = 0;  // mean of per-sample MRE
  std::vector<SampleMetrics> per_sample;
};

//! Compare predictions against the finest-level FD truth of every test sample.
inline EvalReport evaluate(const ThermalSurrogate& s, const Dataset& test) {
  if (test.count() < 1) throw InputError("evaluate: empty test set");
  const Dims fd = s.finest_dims();
  EvalReport rep;
  for (index_t i = 0; i < test.count(); ++i) {
    const SampleRecord& rec = test.samples[static_cast<std::size_t>(i)];
    if (rec.solutions.empty()) throw DataError("evaluate: sample carries no FD truth");
    const ScalarFieldd& truth = rec.solutions.back();
    if (truth.n_eta() != fd.first || truth.n_xi() != fd.second)
      throw DataError("evaluate: truth shape disagrees with surrogate dims");

    const ScalarFieldd pred = predict_thermal(s, rec.params).field;
    const double mae = (pred.values - truth.values).abs().mean();
    const double range = truth.values.maxCoeff() - truth.values.minCoeff();
    if (!(range > 0)) throw DataError("evaluate: constant truth field has no range for MRE");
    rep.per_sample.push_back({i, mae, mae / range});
    rep.mae += mae;
    rep.mre += mae / range;
  }
  rep.mae /= static_cast<double>(test.count());
  rep.mre /= static_cast<double>(test.count());
  return rep;
}

// --- bundle persistence ----------------------------------------------------------

inline constexpr int kSurrogateVersion = 1;

namespace detail {

inline std::vector<double> vec_to_std(const Vecd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vecd std_to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vecd>(v.data(), static_cast<index_t>(v.size()));
}

}  // namespace detail

inline void save_thermal_surrogate(const ThermalSurrogate& s, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json j;
  j["format"] = "curvirom-surrogate";
  j["version"] = kSurrogateVersion;
  j["id"] = s.id;
  j["mode"] = to_string(s.mode);
  j["levels"] = s.levels;
  j["base_dims"] = {s.base_eta, s.base_xi};
  j["bounds_lo"] = detail::vec_to_std(s.lo);
  j["bounds_hi"] = detail::vec_to_std(s.hi);
  j["bc"] = {{"top", s.bc.top},
             {"bottom", s.bc.bottom},
             {"left", detail::side_to_json(s.bc.left)},
             {"right", detail::side_to_json(s.bc.right)}};
  j["relax"] = {{"omega", s.relax.omega}, {"tol", s.relax.tol}, {"max_iter", s.relax.max_iter}};
  j["solve"] = {{"omega", s.solve.omega}, {"tol", s.solve.tol}, {"max_iter", s.solve.max_iter}};
  j["metrics"] = {
      {"mae", "mean over samples of mean |predicted - truth| (kelvin)"},
      {"mre", "mean over samples of mean |predicted - truth| / (max truth - min truth)"}};

  nlohmann::json stack = nlohmann::json::array();
  for (std::size_t k = 0; k < s.stack.size(); ++k) {
    const SurrogateLevel& lvl = s.stack[k];
    const int level = lvl.basis.level;
    const std::string basis_file = "basis_l" + std::to_string(level) + ".bin";
    const std::string gp_file = "gp_l" + std::to_string(level) + ".bin";

    save_arrays((fs::path(dir) / basis_file).string(),
                {named_array("basis", lvl.basis.basis), named_array("sigma", lvl.basis.sigma)});

    std::vector<NamedArray> gp_arrays;
    nlohmann::json gp_meta = nlohmann::json::array();
    if (!lvl.gps.empty()) {
      const GpModeld& first = lvl.gps.front();
      gp_arrays.push_back(named_array("X", first.X));
      if (first.in_lo.size() > 0) {
        gp_arrays.push_back(named_array("in_lo", first.in_lo));
        gp_arrays.push_back(named_array("in_hi", first.in_hi));
      }
    }
    for (std::size_t m = 0; m < lvl.gps.size(); ++m) {
      const GpModeld& g = lvl.gps[m];
      const std::string suffix = "/" + std::to_string(m);
      gp_arrays.push_back(named_array("y" + suffix, g.y));
      gp_arrays.push_back(named_array("w" + suffix, g.weights));
      gp_arrays.push_back(named_array("L" + suffix, g.chol_l));
      gp_meta.push_back({{"sigma2", g.params.sigma2},
                         {"ell", g.params.ell},
                         {"alpha", g.params.alpha},
                         {"noise", g.params.noise},
                         {"y_mean", g.y_mean},
                         {"y_scale", g.y_scale},
                         {"jitter", g.jitter},
                         {"lml", g.lml}});
    }
    save_arrays((fs::path(dir) / gp_file).string(), gp_arrays);

    stack.push_back({{"level", level},
                     {"n_eta", lvl.basis.n_eta},
                     {"n_xi", lvl.basis.n_xi},
                     {"dim", lvl.basis.dim},
                     {"threshold", lvl.basis.threshold},
                     {"energy", lvl.basis.energy},
                     {"basis_file", basis_file},
                     {"gp_file", gp_file},
                     {"gp", gp_meta}});
  }
  j["stack"] = stack;

  std::ofstream f(fs::path(dir) / "surrogate.json");
  if (!f) throw IoError("cannot write surrogate manifest in " + dir);
  f << j.dump(2) << "\n";
  if (!f) throw IoError("surrogate manifest write failed in " + dir);
}

inline ThermalSurrogate load_thermal_surrogate(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream f(fs::path(dir) / "surrogate.json");
  if (!f) throw LoadError("surrogate: cannot open manifest in " + dir);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("surrogate: manifest parse error: ") + e.what());
  }

  ThermalSurrogate s;
  try {
    if (j.at("format").get<std::string>() != "curvirom-surrogate")
      throw LoadError("surrogate: not a surrogate manifest");
    if (j.at("version").get<int>() != kSurrogateVersion)
      throw LoadError("surrogate: unsupported manifest version");
    s.id = j.at("id").get<std::string>();
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "multi") {
      s.mode = SurrogateMode::multi_level;
    } else if (mode == "single") {
      s.mode = SurrogateMode::single_level;
    } else {
      throw LoadError("surrogate: unknown mode '" + mode + "'");
    }
    s.levels = j.at("levels").get<int>();
    s.base_eta = j.at("base_dims")[0].get<index_t>();
    s.base_xi = j.at("base_dims")[1].get<index_t>();
    s.lo = detail::std_to_vec(j.at("bounds_lo").get<std::vector<double>>());
    s.hi = detail::std_to_vec(j.at("bounds_hi").get<std::vector<double>>());
    s.bc.top = j.at("bc").at("top").get<double>();
    s.bc.bottom = j.at("bc").at("bottom").get<double>();
    s.bc.left = detail::side_from_json(j.at("bc").at("left"));
    s.bc.right = detail::side_from_json(j.at("bc").at("right"));
    s.relax.omega = j.at("relax").at("omega").get<double>();
    s.relax.tol = j.at("relax").at("tol").get<double>();
    s.relax.max_iter = j.at("relax").at("max_iter").get<index_t>();
    s.solve.omega = j.at("solve").at("omega").get<double>();
    s.solve.tol = j.at("solve").at("tol").get<double>();
    s.solve.max_iter = j.at("solve").at("max_iter").get<index_t>();

    for (const auto& entry : j.at("stack")) {
      SurrogateLevel lvl;
      const int level = entry.at("level").get<int>();
      const auto basis_arrays =
          load_arrays((fs::path(dir) / entry.at("basis_file").get<std::string>()).string());
      lvl.basis.basis = mat_from(find_array(basis_arrays, "basis"));
      lvl.basis.sigma = vec_from(find_array(basis_arrays, "sigma"));
      lvl.basis.dim = entry.at("dim").get<index_t>();
      lvl.basis.threshold = entry.at("threshold").get<double>();
      lvl.basis.energy = entry.at("energy").get<double>();
      lvl.basis.n_eta = entry.at("n_eta").get<index_t>();
      lvl.basis.n_xi = entry.at("n_xi").get<index_t>();
      lvl.basis.level = level;
      if (lvl.basis.basis.cols() != lvl.basis.dim ||
          lvl.basis.basis.rows() != lvl.basis.n_eta * lvl.basis.n_xi)
        throw LoadError("surrogate: basis shape disagrees with manifest");

      const auto gp_arrays =
          load_arrays((fs::path(dir) / entry.at("gp_file").get<std::string>()).string());
      const Matd X = mat_from(find_array(gp_arrays, "X"));
      Vecd in_lo, in_hi;
      if (has_array(gp_arrays, "in_lo")) {
        in_lo = vec_from(find_array(gp_arrays, "in_lo"));
        in_hi = vec_from(find_array(gp_arrays, "in_hi"));
      }
      const auto& gp_meta = entry.at("gp");
      if (static_cast<index_t>(gp_meta.size()) != lvl.basis.dim)
        throw LoadError("surrogate: GP count disagrees with basis dim");
      for (std::size_t m = 0; m < gp_meta.size(); ++m) {
        const auto& gm = gp_meta[m];
        GpModeld g;
        g.X = X;
        g.in_lo = in_lo;
        g.in_hi = in_hi;
        const std::string suffix = "/" + std::to_string(m);
        g.y = vec_from(find_array(gp_arrays, "y" + suffix));
        g.weights = vec_from(find_array(gp_arrays, "w" + suffix));
        g.chol_l = mat_from(find_array(gp_arrays, "L" + suffix));
        g.params.sigma2 = gm.at("sigma2").get<double>();
        g.params.ell = gm.at("ell").get<double>();
        g.params.alpha = gm.at("alpha").get<double>();
        g.params.noise = gm.at("noise").get<double>();
        g.y_mean = gm.at("y_mean").get<double>();
        g.y_scale = gm.at("y_scale").get<double>();
        g.jitter = gm.at("jitter").get<double>();
        g.lml = gm.at("lml").get<double>();
        if (g.y.size() != g.X.rows() || g.weights.size() != g.X.rows() ||
            g.chol_l.rows() != g.X.rows() || g.chol_l.cols() != g.X.rows())
          throw LoadError("surrogate: GP array shapes disagree");
        lvl.gps.push_back(std::move(g));
      }
      s.stack.push_back(std::move(lvl));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("surrogate: malformed manifest: ") + e.what());
  }
  if (s.stack.empty()) throw LoadError("surrogate: manifest holds no levels");
  return s;
}

}  // namespace curvirom
