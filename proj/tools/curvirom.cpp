#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "curvirom/dataset.hpp"
#include "curvirom/geometry.hpp"
#include "curvirom/io.hpp"
#include "curvirom/meshgen.hpp"
#include "curvirom/multilevel.hpp"
#include "curvirom/surrogate.hpp"
#include "curvirom/thermal.hpp"

namespace {

using namespace curvirom;

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string out;
  bool strict = false;
  std::string mode = "multi";
  int levels = 4;
  std::string base_dims = "8x32";
  int threads = 0;
};

Dims parse_dims(const std::string& s) {
  long long h = 0, w = 0;
  char trail = 0;
  const int got = std::sscanf(s.c_str(), "%lldx%lld%c", &h, &w, &trail);
  if (got != 2 || h < 3 || w < 3) throw InputError("dims must look like 8x32 (each >= 3)");
  return {static_cast<index_t>(h), static_cast<index_t>(w)};
}

SideSpec<double> parse_side(const std::string& s) {
  if (s == "blend") return {SideKind::blend, 0.0};
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return {SideKind::constant, v};
  } catch (const std::invalid_argument&) {
    throw InputError("side condition must be 'blend' or a number, got '" + s + "'");
  } catch (const std::out_of_range&) {
    throw InputError("side condition out of numeric range: '" + s + "'");
  }
}

GeometryParamsd resolve_params(const std::vector<double>& inline_params,
                               const std::string& file, bool strict) {
  GeometryParamsd p;
  if (!inline_params.empty() && !file.empty())
    throw InputError("give either --params or --params-file, not both");
  if (!inline_params.empty()) {
    if (inline_params.size() != 5) throw InputError("--params needs 5 values");
    p = GeometryParamsd{inline_params[0], inline_params[1], inline_params[2],
                        inline_params[3], inline_params[4]};
  } else if (!file.empty()) {
    std::ifstream f(file);
    if (!f) throw InputError("cannot open params file " + file);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InputError("params file " + file + ": " + e.what());
    }
    if (!j.is_array() || j.size() != 5)
      throw InputError("params file must hold a JSON array of 5 numbers");
    p = GeometryParamsd{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                        j[3].get<double>(), j[4].get<double>()};
  } else {
    throw InputError("geometry parameters required (--params or --params-file)");
  }
  p.validate(strict);
  return p;
}

void log_config(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string line = "[config]";
  for (const auto& [k, v] : kv) line += " " + k + "=" + v;
  std::cout << line << "\n";
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

RelaxOptionsd make_relax(double omega, double tol, long long max_iter) {
  RelaxOptionsd r;
  r.omega = omega;
  r.tol = tol;
  r.max_iter = static_cast<index_t>(max_iter);
  return r;
}

SolveOptionsd make_solve(double omega, double tol, long long max_iter) {
  SolveOptionsd s;
  s.omega = omega;
  s.tol = tol;
  s.max_iter = static_cast<index_t>(max_iter);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curvirom: body-fitted meshing and multi-level POD+GP thermal surrogates"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Flat key=value config file");

  GlobalOpts g;
  app.add_option("--seed", g.seed, "RNG seed (bit-reproducible runs)")->capture_default_str();
  app.add_option("--out", g.out, "Output file or directory (meaning depends on command)");
  app.add_flag("--strict", g.strict, "Reject geometry parameters outside the standard box");
  app.add_option("--mode", g.mode, "Surrogate mode")
      ->check(CLI::IsMember({"multi", "single"}))
      ->capture_default_str();
  app.add_option("--levels", g.levels, "Hierarchy depth")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--base-dims", g.base_dims, "Coarsest grid as ETAxXI, e.g. 8x32")
      ->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")
      ->envname("CURVIROM_THREADS")
      ->capture_default_str();

  // shared per-command option storage
  std::vector<double> params_inline;
  std::string params_file;
  std::string dims_str = "64x256";
  double mesh_omega = 1.7, mesh_tol = 1e-8;
  long long mesh_max_iter = 50000;
  std::string bc_top = "350", bc_bottom = "300", bc_left = "300", bc_right = "300";
  double solve_omega = 1.8, solve_tol = 1e-9;
  long long solve_max_iter = 200000;

  auto add_params_opts = [&](CLI::App* cmd) {
    cmd->add_option("--params", params_inline, "x1,y1,y2,y3,y4 in mm")->delimiter(',');
    cmd->add_option("--params-file", params_file, "JSON array of the 5 parameters");
  };
  auto add_mesh_opts = [&](CLI::App* cmd) {
    cmd->add_option("--dims", dims_str, "Mesh size as ETAxXI")->capture_default_str();
    cmd->add_option("--omega", mesh_omega, "Mesh SOR relaxation factor")->capture_default_str();
    cmd->add_option("--tol", mesh_tol, "Mesh residual tolerance")->capture_default_str();
    cmd->add_option("--max-iter", mesh_max_iter, "Mesh SOR sweep budget")->capture_default_str();
  };
  auto add_bc_opts = [&](CLI::App* cmd) {
    cmd->add_option("--bc-top", bc_top, "Top wall temperature (K)")->capture_default_str();
    cmd->add_option("--bc-bottom", bc_bottom, "Bottom wall temperature (K)")
        ->capture_default_str();
    cmd->add_option("--bc-left", bc_left, "'blend' or a temperature (K)")
        ->capture_default_str();
    cmd->add_option("--bc-right", bc_right, "'blend' or a temperature (K)")
        ->capture_default_str();
  };
  auto add_solve_opts = [&](CLI::App* cmd) {
    cmd->add_option("--solve-omega", solve_omega, "Thermal SOR relaxation factor")
        ->capture_default_str();
    cmd->add_option("--solve-tol", solve_tol, "Thermal residual tolerance")
        ->capture_default_str();
    cmd->add_option("--solve-max-iter", solve_max_iter, "Thermal SOR sweep budget")
        ->capture_default_str();
  };
  auto make_bc = [&]() {
    BoundaryConditionsd bc;
    bc.top = parse_side(bc_top).value;
    if (parse_side(bc_top).kind != SideKind::constant)
      throw InputError("--bc-top must be a number");
    bc.bottom = parse_side(bc_bottom).value;
    if (parse_side(bc_bottom).kind != SideKind::constant)
      throw InputError("--bc-bottom must be a number");
    bc.left = parse_side(bc_left);
    bc.right = parse_side(bc_right);
    return bc;
  };

  // --- mesh -------------------------------------------------------------------
  CLI::App* mesh_cmd = app.add_subcommand("mesh", "Relax a body-fitted mesh and export it");
  add_params_opts(mesh_cmd);
  add_mesh_opts(mesh_cmd);
  mesh_cmd->callback([&]() {
    const GeometryParamsd p = resolve_params(params_inline, params_file, g.strict);
    const Dims d = parse_dims(dims_str);
    const std::string out = g.out.empty() ? "mesh.vtk" : g.out;
    log_config({{"command", "mesh"},
                {"params", fmt(p.x1) + "," + fmt(p.y1) + "," + fmt(p.y2) + "," + fmt(p.y3) +
                               "," + fmt(p.y4)},
                {"dims", dims_str},
                {"omega", fmt(mesh_omega)},
                {"tol", fmt(mesh_tol)},
                {"max_iter", std::to_string(mesh_max_iter)},
                {"strict", g.strict ? "true" : "false"},
                {"out", out}});
    const auto boundary = build_boundary(p, d.first, d.second, g.strict);
    const auto result =
        relax_mesh(init_mesh_tfi(boundary), make_relax(mesh_omega, mesh_tol, mesh_max_iter));
    const double min_j = jacobian_min(result.mesh);
    std::printf("loss %.6e  min_jacobian %.6e  iterations %lld\n", result.loss, min_j,
                static_cast<long long>(result.iterations));
    export_mesh(out, result.mesh);
    std::cout << "wrote " << out << "\n";
  });

  // --- solve ------------------------------------------------------------------
  CLI::App* solve_cmd =
      app.add_subcommand("solve", "Finite-difference temperature field on a relaxed mesh");
  add_params_opts(solve_cmd);
  add_mesh_opts(solve_cmd);
  add_bc_opts(solve_cmd);
  add_solve_opts(solve_cmd);
  solve_cmd->callback([&]() {
    const GeometryParamsd p = resolve_params(params_inline, params_file, g.strict);
    const Dims d = parse_dims(dims_str);
    const std::string out = g.out.empty() ? "field.vtk" : g.out;
    log_config({{"command", "solve"},
                {"dims", dims_str},
                {"bc", bc_top + "/" + bc_bottom + "/" + bc_left + "/" + bc_right},
                {"solve_omega", fmt(solve_omega)},
                {"solve_tol", fmt(solve_tol)},
                {"out", out}});
    const auto boundary = build_boundary(p, d.first, d.second, g.strict);
    const auto relaxed =
        relax_mesh(init_mesh_tfi(boundary), make_relax(mesh_omega, mesh_tol, mesh_max_iter));
    const ScalarFieldd field = solve_laplace(
        relaxed.mesh, make_bc(), make_solve(solve_omega, solve_tol, solve_max_iter));
    std::printf("residual %.6e  T_min %.4f  T_max %.4f\n",
                field_residual(relaxed.mesh, field.values), field.values.minCoeff(),
                field.values.maxCoeff());
    export_field(out, relaxed.mesh, field.values);
    std::cout << "wrote " << out << "\n";
  });

  // --- generate-dataset ---------------------------------------------------------
  long long gen_count = 0;
  CLI::App* gen_cmd = app.add_subcommand(
      "generate-dataset", "LHS-sample geometries and solve the full hierarchy per sample");
  gen_cmd->add_option("--count", gen_count, "Number of samples")
      ->required()
      ->check(CLI::PositiveNumber);
  add_bc_opts(gen_cmd);
  add_mesh_opts(gen_cmd);
  add_solve_opts(gen_cmd);
  gen_cmd->callback([&]() {
    if (g.out.empty()) throw InputError("generate-dataset needs --out DIR");
    const Dims base = parse_dims(g.base_dims);
    GenerateConfig cfg;
    cfg.levels = g.levels;
    cfg.base_eta = base.first;
    cfg.base_xi = base.second;
    cfg.bc = make_bc();
    cfg.relax = make_relax(mesh_omega, mesh_tol, mesh_max_iter);
    cfg.solve = make_solve(solve_omega, solve_tol, solve_max_iter);
    cfg.threads = g.threads;
    log_config({{"command", "generate-dataset"},
                {"count", std::to_string(gen_count)},
                {"seed", std::to_string(g.seed)},
                {"levels", std::to_string(cfg.levels)},
                {"base_dims", g.base_dims},
                {"omega", fmt(cfg.relax.omega)},
                {"threads", std::to_string(g.threads)},
                {"out", g.out}});
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset ds = generate_dataset(static_cast<index_t>(gen_count), g.seed, cfg);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_dataset(ds, g.out);
    std::printf("generated %lld samples (%zu excluded) in %.1f s\n",
                static_cast<long long>(ds.count()), ds.excluded.size(), secs);
    std::cout << "wrote " << g.out << "\n";
  });

  // --- train ---------------------------------------------------------------------
  std::string train_dataset_dir, holdout_out;
  double holdout = 0.0;
  std::vector<double> energy;
  int gp_budget = 400, gp_multistarts = 8;
  CLI::App* train_cmd = app.add_subcommand("train", "Fit the POD+GP surrogate on a dataset");
  train_cmd->add_option("--dataset", train_dataset_dir, "Dataset directory")->required();
  train_cmd->add_option("--holdout", holdout, "Fraction held out before training")
      ->check(CLI::Range(0.0, 0.999))
      ->capture_default_str();
  train_cmd->add_option("--holdout-out", holdout_out, "Directory for the held-out part");
  train_cmd->add_option("--energy", energy, "Per-level POD energy thresholds")
      ->delimiter(',');
  train_cmd->add_option("--gp-budget", gp_budget, "Likelihood evaluations per coefficient")
      ->capture_default_str();
  train_cmd->add_option("--gp-multistarts", gp_multistarts, "Optimizer restarts per GP")
      ->capture_default_str();
  train_cmd->callback([&]() {
    if (g.out.empty()) throw InputError("train needs --out DIR for the surrogate bundle");
    Dataset ds = load_dataset(train_dataset_dir);
    log_config({{"command", "train"},
                {"dataset", train_dataset_dir},
                {"samples", std::to_string(ds.count())},
                {"mode", g.mode},
                {"holdout", fmt(holdout)},
                {"gp_budget", std::to_string(gp_budget)},
                {"seed", std::to_string(g.seed)},
                {"threads", std::to_string(g.threads)},
                {"out", g.out}});
    if (holdout > 0.0) {
      auto [test, train] = split_dataset(ds, holdout, g.seed);
      if (!holdout_out.empty()) {
        save_dataset(test, holdout_out);
        std::cout << "wrote holdout " << holdout_out << " (" << test.count() << " samples)\n";
      }
      ds = std::move(train);
    }
    TrainConfig cfg;
    cfg.mode = g.mode == "single" ? SurrogateMode::single_level : SurrogateMode::multi_level;
    if (!energy.empty()) cfg.energy = energy;
    cfg.gp_budget = gp_budget;
    cfg.gp_multistarts = gp_multistarts;
    cfg.seed = g.seed;
    cfg.threads = g.threads;
    const auto t0 = std::chrono::steady_clock::now();
    const ThermalSurrogate s = train_thermal(ds, cfg);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const SurrogateLevel& lvl : s.stack) {
      std::printf("level %d  %lldx%lld  dim %lld  energy %.12f\n", lvl.basis.level,
                  static_cast<long long>(lvl.basis.n_eta),
                  static_cast<long long>(lvl.basis.n_xi),
                  static_cast<long long>(lvl.basis.dim), lvl.basis.energy);
    }
    std::printf("trained on %lld samples in %.1f s\n", static_cast<long long>(ds.count()),
                secs);
    save_thermal_surrogate(s, g.out);
    std::cout << "wrote " << g.out << " (id " << s.id << ")\n";
  });

  // --- predict ---------------------------------------------------------------------
  std::string surrogate_dir;
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "Predict mesh + temperature field for new parameters");
  predict_cmd->add_option("--surrogate", surrogate_dir, "Surrogate bundle directory")
      ->required();
  add_params_opts(predict_cmd);
  predict_cmd->callback([&]() {
    const GeometryParamsd p = resolve_params(params_inline, params_file, g.strict);
    const std::string out = g.out.empty() ? "prediction.vtk" : g.out;
    log_config({{"command", "predict"}, {"surrogate", surrogate_dir}, {"out", out}});
    const ThermalSurrogate s = load_thermal_surrogate(surrogate_dir);
    const CombinedPrediction pred = predict_combined(s, p);
    if (pred.out_of_range)
      std::cout << "warning: parameters outside the training bounds (extrapolating)\n";
    std::printf("surrogate %s  T_min %.4f  T_max %.4f\n", pred.surrogate_id.c_str(),
                pred.field.values.minCoeff(), pred.field.values.maxCoeff());
    export_field(out, pred.mesh, pred.field.values);
    std::cout << "wrote " << out << "\n";
  });

  // --- evaluate ---------------------------------------------------------------------
  std::string eval_dataset_dir;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Score a surrogate against FD truth in a dataset");
  eval_cmd->add_option("--surrogate", surrogate_dir, "Surrogate bundle directory")->required();
  eval_cmd->add_option("--dataset", eval_dataset_dir, "Test dataset directory")->required();
  eval_cmd->callback([&]() {
    const std::string out = g.out.empty() ? "evaluation.csv" : g.out;
    log_config({{"command", "evaluate"},
                {"surrogate", surrogate_dir},
                {"dataset", eval_dataset_dir},
                {"out", out}});
    const ThermalSurrogate s = load_thermal_surrogate(surrogate_dir);
    const Dataset test = load_dataset(eval_dataset_dir);
    const EvalReport rep = evaluate(s, test);
    std::printf("MAE %.6f K\nMRE %.6f %%\n", rep.mae, rep.mre * 100.0);
    std::ofstream f(out);
    if (!f) throw IoError("cannot write " + out);
    f << "index,mae_kelvin,mre\n";
    for (const SampleMetrics& m : rep.per_sample) {
      f << m.index << "," << detail::fmt_g17(m.mae) << "," << detail::fmt_g17(m.mre) << "\n";
    }
    if (!f) throw IoError("write failed on " + out);
    std::cout << "wrote " << out << "\n";
  });

  // --- export ---------------------------------------------------------------------
  std::string export_dataset_dir;
  long long export_index = 0;
  CLI::App* export_cmd = app.add_subcommand(
      "export", "Re-mesh a stored sample and export its FD field for plotting");
  export_cmd->add_option("--dataset", export_dataset_dir, "Dataset directory")->required();
  export_cmd->add_option("--index", export_index, "Sample index")->capture_default_str();
  export_cmd->callback([&]() {
    const std::string out = g.out.empty() ? "sample.vtk" : g.out;
    log_config({{"command", "export"},
                {"dataset", export_dataset_dir},
                {"index", std::to_string(export_index)},
                {"out", out}});
    const Dataset ds = load_dataset(export_dataset_dir);
    if (export_index < 0 || export_index >= ds.count())
      throw InputError("sample index out of range");
    const SampleRecord& rec = ds.samples[static_cast<std::size_t>(export_index)];
    const auto dims = ds.level_dims();
    const auto boundary = build_boundary(rec.params, dims.back().first, dims.back().second);
    const auto relaxed = relax_mesh(init_mesh_tfi(boundary), ds.config.relax);
    export_field(out, relaxed.mesh, rec.solutions.back().values);
    std::cout << "wrote " << out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
