// mpreg: mass-preserving elastic registration from the command line.
//
//   mpreg synth    --n 64 --out DIR [--kind ex1|ex2] [--seed S]
//   mpreg register --reference R.pgm --template T.pgm --out DIR [solver flags]
//   mpreg compare  --reference R.pgm --template T.pgm --alphas 1e-1,1e-2,1e-3 --out DIR
//
// Exit status: 0 converged / success, 2 finished without convergence, 1 error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpreg/mpreg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mpreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct Inputs {
  std::string reference;
  std::string templ;
  std::string ground_truth;  ///< directory with ground_truth_u1.f64 / ground_truth_u2.f64
  std::string out = "out";
  bool preprocess = false;
  bool smooth = false;
  double preprocess_delta = 0.03;
};

struct Emit {
  bool csv = true;
  bool svg = true;
  bool fields = true;
};

void add_solver_flags(CLI::App* cmd, SQPConfig& cfg) {
  cmd->add_option("--mu", cfg.mu, "Lame parameter mu")->capture_default_str();
  cmd->add_option("--lambda", cfg.lambda, "Lame parameter lambda")->capture_default_str();
  cmd->add_option("--delta-fold", cfg.delta_fold, "minimum admissible cell volume")->capture_default_str();
  cmd->add_option("--eta", cfg.eta, "Armijo slope parameter")->capture_default_str();
  cmd->add_option("--backtrack", cfg.backtrack_factor, "step reduction factor")->capture_default_str();
  cmd->add_option("--sigma0", cfg.sigma0, "initial penalty parameter")->capture_default_str();
  cmd->add_option("--max-iter", cfg.max_outer_iterations, "outer iterations per level")->capture_default_str();
  cmd->add_option("--dmp-tol", cfg.dmp_tolerance, "finest-level DMP tolerance (level rl uses 4^rl times this)")
      ->capture_default_str();
  cmd->add_option("--inner-tol", cfg.inner.rel_tol, "fixed relative GMRES tolerance (0: forcing rule)")
      ->capture_default_str();
  cmd->add_option("--inner-max-iter", cfg.inner.max_iter, "GMRES iteration cap")->capture_default_str();
  cmd->add_option("--restart", cfg.inner.restart, "GMRES restart length")->capture_default_str();
  cmd->add_option("--mg-cycles", cfg.inner.mg_cycles, "V-cycles per preconditioner application")
      ->capture_default_str();
  cmd->add_option("--rl-min", cfg.rl_min, "number of coarser resolution levels")->capture_default_str();
}

void add_input_flags(CLI::App* cmd, Inputs& in) {
  cmd->add_option("--reference", in.reference, "reference image (PGM)")->required();
  cmd->add_option("--template", in.templ, "template image (PGM)")->required();
  cmd->add_option("--ground-truth", in.ground_truth, "directory holding ground_truth_u1.f64/u2.f64 (enables DE)");
  cmd->add_option("--out", in.out, "output directory")->capture_default_str();
  cmd->add_flag("--preprocess", in.preprocess, "rescale both images to [delta, 1] and equalize their mass");
  cmd->add_flag("--smooth", in.smooth, "3x3 Gaussian pre-smoothing (with --preprocess)");
  cmd->add_option("--preprocess-delta", in.preprocess_delta, "positivity floor for --preprocess")
      ->capture_default_str();
}

json config_json(const SQPConfig& c) {
  return {{"mu", c.mu},
          {"lambda", c.lambda},
          {"delta_fold", c.delta_fold},
          {"eta", c.eta},
          {"backtrack_factor", c.backtrack_factor},
          {"sigma0", c.sigma0},
          {"max_outer_iterations", c.max_outer_iterations},
          {"dmp_tolerance", c.dmp_tolerance},
          {"inner_rel_tol", c.inner.rel_tol},
          {"inner_max_iter", c.inner.max_iter},
          {"inner_restart", c.inner.restart},
          {"mg_cycles", c.inner.mg_cycles},
          {"rl_min", c.rl_min},
          {"max_backtracks", c.max_backtracks}};
}

json inputs_json(const Inputs& in) {
  return {{"reference", in.reference},
          {"template", in.templ},
          {"ground_truth", in.ground_truth},
          {"out", in.out},
          {"preprocess", in.preprocess},
          {"smooth", in.smooth},
          {"preprocess_delta", in.preprocess_delta}};
}

struct LoadedPair {
  CellField reference;
  CellField templ;
  std::optional<StaggeredField> truth;
  json mapping;
};

LoadedPair load_pair(const Inputs& in) {
  for (const auto& p : {in.reference, in.templ})
    if (!fs::exists(p)) throw IoError("input file not found: " + p);
  PgmImage r = read_pgm(in.reference);
  PgmImage t = read_pgm(in.templ);
  if (r.field.geometry.n1 != t.field.geometry.n1 || r.field.geometry.n2 != t.field.geometry.n2)
    throw DimensionMismatch("reference and template sizes differ");
  LoadedPair pair{r.field, t.field, std::nullopt, json::object()};
  pair.templ.geometry = pair.reference.geometry;
  pair.mapping = {{"reference", {{"lo", r.lo}, {"hi", r.hi}, {"maxval", r.maxval}}},
                  {"template", {{"lo", t.lo}, {"hi", t.hi}, {"maxval", t.maxval}}}};
  if (in.preprocess) {
    auto [pr, pt] = preprocess(pair.reference, pair.templ, {in.preprocess_delta, in.smooth});
    pair.reference = std::move(pr);
    pair.templ = std::move(pt);
  }
  if (!in.ground_truth.empty()) {
    StaggeredField u = read_displacement(in.ground_truth, "ground_truth_");
    if (u.geometry.n1 != pair.reference.geometry.n1 || u.geometry.n2 != pair.reference.geometry.n2)
      throw DimensionMismatch("ground truth grid does not match the images");
    pair.reference.geometry = pair.templ.geometry = u.geometry;
    pair.truth = std::move(u);
  }
  return pair;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

int cmd_register(const Inputs& in, const SQPConfig& cfg, const Emit& emit) {
  const LoadedPair pair = load_pair(in);
  fs::create_directories(in.out);
  const fs::path out(in.out);
  const RegistrationReport rep = register_multilevel(pair.reference, pair.templ, cfg, pair.truth);

  if (emit.csv) write_report_csv(out / "report.csv", rep.rows);
  const double wlo = pair.reference.values.minCoeff(), whi = pair.reference.values.maxCoeff();
  write_pgm(out / "warped.pgm", rep.warped, wlo, whi);
  write_pgm(out / "volume.pgm", rep.volume);
  if (emit.svg) write_grid_svg(out / "grid.svg", rep.u, 2);
  if (emit.fields) write_displacement(out, rep.u);

  const ReportRow& last = rep.rows.back();
  json run = {{"command", "register"},
              {"inputs", inputs_json(in)},
              {"config", config_json(cfg)},
              {"intensity_mapping", pair.mapping},
              {"output_mapping",
               {{"warped", {{"lo", wlo}, {"hi", whi}}},
                {"volume", {{"lo", rep.volume.values.minCoeff()}, {"hi", rep.volume.values.maxCoeff()}}}}},
              {"result",
               {{"converged", rep.converged},
                {"message", rep.message},
                {"iterations", rep.accepted_iterations()},
                {"Elas", last.elas},
                {"DMP", last.dmp},
                {"DMP_global", last.dmp_global},
                {"stationarity", rep.stationarity},
                {"min_volume", last.min_volume}}}};
  if (pair.truth) run["result"]["DE"] = last.de;
  write_json(out / "run.json", run);

  std::cout << "rl=" << last.rl << " k=" << last.k << " Elas=" << last.elas << " DMP=" << last.dmp
            << " iterations=" << rep.accepted_iterations() << " (" << rep.message << ")\n";
  return rep.converged ? kExitOk : kExitNotConverged;
}

int cmd_synth(int n, const std::string& kind, unsigned seed, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path out(dir);
  json run = {{"command", "synth"}, {"kind", kind}, {"n", n}, {"seed", seed}};
  if (kind == "ex1") {
    const Ex1Problem p = build_ex1(n);
    write_pgm(out / "reference.pgm", p.reference);
    write_pgm(out / "template.pgm", p.templ);
    write_displacement(out, p.ground_truth, "ground_truth_");
    std::ofstream e(out / "elas_max.txt");
    e << std::setprecision(17) << p.elas_max << '\n';
    run["elas_max"] = p.elas_max;
    run["mass_scale"] = p.mass_scale;
  } else if (kind == "ex2") {
    const ImagePair p = build_ex2_synthetic(n, seed);
    write_pgm(out / "reference.pgm", p.reference);
    write_pgm(out / "template.pgm", p.templ);
  } else {
    throw InvalidArgument("unknown synthetic problem '" + kind + "' (expected ex1 or ex2)");
  }
  write_json(out / "run.json", run);
  return kExitOk;
}

int cmd_compare(const Inputs& in, const SQPConfig& cfg, const std::vector<double>& alphas,
                const GaussNewtonOptions& base) {
  if (alphas.empty()) throw CLI::ValidationError("--alphas", "the alpha list must not be empty");
  const LoadedPair pair = load_pair(in);
  fs::create_directories(in.out);
  const fs::path out(in.out);
  std::ofstream csv(out / "sweep.csv");
  if (!csv) throw IoError("cannot write sweep.csv");
  csv << "method,alpha,k,Elas,DMP,DE,inner_iters,avg_inner_iters\n";
  auto emit = [&](const std::string& method, double alpha, const RegistrationReport& rep) {
    int total = 0, steps = 0;
    for (const auto& r : rep.rows)
      if (r.k > 0) {
        total += r.inner_iters;
        ++steps;
      }
    const double avg = steps ? static_cast<double>(total) / steps : 0.0;
    for (const auto& r : rep.rows)
      csv << method << ',' << format_double(alpha) << ',' << r.k << ',' << format_double(r.elas) << ','
          << format_double(r.dmp) << ',' << format_double(r.de) << ',' << r.inner_iters << ','
          << format_double(avg) << '\n';
    return json{{"method", method}, {"alpha", alpha},     {"converged", rep.converged},
                {"Elas", rep.rows.back().elas}, {"DMP", rep.rows.back().dmp}, {"avg_inner_iters", avg}};
  };
  json runs = json::array();
  SQPConfig single = cfg;
  single.rl_min = 0;
  const RegistrationReport constrained = register_multilevel(pair.reference, pair.templ, single, pair.truth);
  runs.push_back(emit("constrained", 0.0, constrained));
  bool all = constrained.converged;
  for (double a : alphas) {
    GaussNewtonOptions gn = base;
    gn.alpha = a;
    const RegistrationReport rep = solve_regularized(pair.reference, pair.templ, gn, cfg, pair.truth);
    runs.push_back(emit("regularized", a, rep));
    all = all && rep.converged;
  }
  write_json(out / "run.json", {{"command", "compare"},
                                {"inputs", inputs_json(in)},
                                {"config", config_json(cfg)},
                                {"alphas", alphas},
                                {"gradient_tolerance", base.gradient_tolerance},
                                {"intensity_mapping", pair.mapping},
                                {"runs", runs}});
  return all ? kExitOk : kExitNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mass-preserving elastic image registration"};
  app.require_subcommand(1);

  SQPConfig cfg;
  Inputs in;
  Emit emit;

  auto* reg = app.add_subcommand("register", "register a template image to a reference image");
  add_input_flags(reg, in);
  add_solver_flags(reg, cfg);
  reg->add_flag("!--no-csv", emit.csv, "skip report.csv");
  reg->add_flag("!--no-svg", emit.svg, "skip grid.svg");
  reg->add_flag("!--no-fields", emit.fields, "skip the u1.f64/u2.f64 dumps");

  int n = 64;
  std::string kind = "ex1";
  unsigned seed = 1;
  std::string synth_out = "synth";
  auto* syn = app.add_subcommand("synth", "write a synthetic benchmark pair");
  syn->add_option("--n", n, "cells per side")->capture_default_str();
  syn->add_option("--kind", kind, "ex1 (analytic deformation) or ex2 (blob pair)")->capture_default_str();
  syn->add_option("--seed", seed, "seed for ex2")->capture_default_str();
  syn->add_option("--out", synth_out, "output directory")->capture_default_str();

  std::vector<double> alphas;
  GaussNewtonOptions gn;
  auto* cmp = app.add_subcommand("compare", "hard constraint versus penalized solutions for several alpha");
  add_input_flags(cmp, in);
  add_solver_flags(cmp, cfg);
  cmp->add_option("--alphas", alphas, "comma-separated regularization weights")->delimiter(',')->required();
  cmp->add_option("--gradient-tol", gn.gradient_tolerance, "relative gradient tolerance of the penalized solver")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*syn) return cmd_synth(n, kind, seed, synth_out);
    if (*reg) return cmd_register(in, cfg, emit);
    if (*cmp) return cmd_compare(in, cfg, alphas, gn);
  } catch (const CLI::Error& e) {
    std::cerr << "mpreg: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "mpreg: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
