// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpreg/mpreg.hpp"
#include "test_support.hpp"

using namespace mpreg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Rows collected from every end-to-end run for the merit and fold audit.
struct RunLog {
  std::string name;
  std::vector<ReportRow> rows;
};
std::vector<RunLog> g_runs;

void log_run(const std::string& name, const RegistrationReport& rep) { g_runs.push_back({name, rep.rows}); }

Outcome mimetic_identities() {
  double worst_cg = 0.0, worst_dc = 0.0;
  for (int n : {16, 64}) {
    const GridGeometry g(n, n, 1.0);
    const Vector f = fixtures::random_vector(g.nodes(), 100 + n);
    const Vector w = fixtures::random_vector(g.cells(), 200 + n);
    worst_cg = std::max(worst_cg, fixtures::max_abs(assemble_curl(g) * (assemble_grad(g) * f)));
    const SparseOperator curl_t = assemble_curl(g).transpose();
    worst_dc = std::max(worst_dc, fixtures::max_abs(assemble_div(g) * (curl_t * w)));
  }
  return {worst_cg <= 1e-13 && worst_dc <= 1e-13,
          fmt("max |curl grad f| = %.2e, max |div curl^T w| = %.2e (h = 1, 16^2 and 64^2)", worst_cg, worst_dc)};
}

Outcome jacobian_exactness() {
  double worst = 0.0;
  for (int n : {8, 12}) {
    const GridGeometry g(n, n, 1.0 / n, -0.5, -0.5);
    const CellField tmpl(g, fixtures::random_vector(g.cells(), 300 + n, 0.2, 1.0));
    const CellField ref(g, fixtures::random_vector(g.cells(), 310 + n, 0.2, 1.0));
    const auto model = BSplineImage::fit(tmpl);
    const auto u = fixtures::random_displacement(g, 320 + n, 0.2 / n);
    const Eigen::MatrixXd B = Eigen::MatrixXd(evaluate_constraint(u, model, ref).jacobian);
    const double eps = 1e-6;
    for (int k = 0; k < g.unknowns(); ++k) {
      Vector e = Vector::Zero(g.unknowns());
      e[k] = eps;
      auto c = [&](const Vector& x) {
        return evaluate_constraint(StaggeredField::from_vector(g, x), model, ref, false).residual.values;
      };
      const Vector fd = (c(u.vector() + e) - c(u.vector() - e)) / (2 * eps);
      worst = std::max(worst, fixtures::max_abs(B.col(k) - fd) / std::max(1.0, fixtures::max_abs(fd)));
    }
  }
  return {worst <= 1e-6, fmt("max relative column error %.2e over 8x8 and 12x12", worst)};
}

Outcome determinant_order() {
  std::vector<double> err;
  for (int n : {32, 64, 128}) {
    const auto p = build_ex1(n);
    const CellField exact = sample_ex1_reference(p.reference.geometry);
    err.push_back(fixtures::max_abs(volume(p.ground_truth).values - exact.values));
  }
  const double o1 = std::log2(err[0] / err[1]);
  const double o2 = std::log2(err[1] / err[2]);
  const bool ok = o1 >= 1.7 && o1 <= 2.3 && o2 >= 1.7 && o2 <= 2.3;
  return {ok, fmt("errors %.3e %.3e %.3e, orders %.3f %.3f", err[0], err[1], err[2], o1, o2)};
}

Outcome ex1_end_to_end() {
  const auto ex = build_ex1(64);
  SQPConfig cfg;
  cfg.inner.rel_tol = 1e-5;
  const auto rep = register_multilevel(ex.reference, ex.templ, cfg, ex.ground_truth);
  log_run("ex1-64", rep);
  const ReportRow& last = rep.rows.back();
  double min_v = 1e300;
  for (const auto& r : rep.rows) min_v = std::min(min_v, r.min_volume);
  const bool dmp_ok = rep.converged && last.dmp <= 1e-3;
  const bool elas_ok = last.elas <= ex.elas_max + 1e-8;
  const bool fold_ok = min_v >= cfg.delta_fold;
  const bool de_ok = std::isfinite(last.de) && last.de <= 2.0 * ex.ground_truth.max_abs();
  return {dmp_ok && elas_ok && fold_ok && de_ok,
          fmt("k=%d DMP=%.3e [%s] Elas=%.6f vs S(u_e)=%.6f [%s] minV=%.3f [%s] DE=%.3e vs 2|u_e|=%.3e [%s]",
              rep.accepted_iterations(), last.dmp, dmp_ok ? "ok" : "FAIL", last.elas, ex.elas_max,
              elas_ok ? "ok" : "FAIL", min_v, fold_ok ? "ok" : "FAIL", last.de, 2.0 * ex.ground_truth.max_abs(),
              de_ok ? "ok" : "FAIL")};
}

Outcome multigrid_independence() {
  std::string detail;
  bool ok = true;
  auto spread_check = [&](const std::vector<double>& rho, const char* label) {
    const auto [lo, hi] = std::minmax_element(rho.begin(), rho.end());
    ok = ok && *hi <= 0.5 && *hi - *lo < 0.1;
    detail += fmt("%s max %.3f spread %.3f; ", label, *hi, *hi - *lo);
  };
  std::vector<double> mesh;
  for (int n : {32, 64, 128}) {
    const ElasticMultigrid mg(GridGeometry::centered_unit_square(n), 1.0, 0.0);
    mesh.push_back(mg.contraction_factor(mg.system_rhs(fixtures::random_vector(mg.fine_operator().dofs.size(), 7))));
  }
  detail += fmt("lambda=0 rho(32,64,128)=%.3f,%.3f,%.3f ", mesh[0], mesh[1], mesh[2]);
  spread_check(mesh, "");
  std::vector<double> all_lambda;
  for (int n : {32, 64, 128}) {
    std::vector<double> lam;
    for (double lambda : {1.0, 10.0, 1000.0}) {
      const ElasticMultigrid mg(GridGeometry::centered_unit_square(n), 1.0, lambda);
      lam.push_back(mg.contraction_factor(mg.system_rhs(fixtures::random_vector(mg.fine_operator().dofs.size(), 8))));
    }
    detail += fmt("n=%d DGS rho(1,10,1000)=%.3f,%.3f,%.3f ", n, lam[0], lam[1], lam[2]);
    spread_check(lam, "");
    all_lambda.insert(all_lambda.end(), lam.begin(), lam.end());
  }
  spread_check(all_lambda, "DGS all");
  return {ok, detail};
}

Outcome preconditioner_exact_limit() {
  int worst = 0;
  bool converged = true;
  for (int n : {6, 8}) {
    const GridGeometry g = GridGeometry::centered_unit_square(n);
    const ElasticOperator op = assemble_elastic(g, 1.0, 0.0);
    const CellField tmpl(g, fixtures::random_vector(g.cells(), 400 + n, 0.3, 1.0));
    const CellField ref(g, fixtures::random_vector(g.cells(), 410 + n, 0.3, 1.0));
    const auto u = fixtures::random_displacement(g, 420 + n, 0.1 / n);
    const auto ev = evaluate_constraint(u, BSplineImage::fit(tmpl), ref);
    const KKTSystem sys(op.A, reduce_cols(ev.jacobian, op.dofs),
                        fixtures::random_vector(op.dofs.size() + g.cells(), 430 + n));
    const PreconditionerState P(sys, nullptr, {1, true});
    const auto r = solve_kkt(sys, &P, {1e-10, 50, 50});
    converged = converged && r.converged;
    worst = std::max(worst, r.iterations);
  }
  return {converged && worst <= 3, fmt("max GMRES iterations to 1e-10: %d (6x6, 8x8)", worst)};
}

Outcome regularization_trend() {
  const auto ex = build_ex1(64);
  SQPConfig cfg;
  cfg.inner.rel_tol = 1e-5;
  const auto hard = register_multilevel(ex.reference, ex.templ, cfg, ex.ground_truth);
  log_run("ex1-64 constrained", hard);
  std::vector<double> dmp;
  double elas_last = 0.0;
  std::string detail;
  for (double alpha : {1e-1, 1e-2, 1e-3}) {
    GaussNewtonOptions gn;
    gn.alpha = alpha;
    const auto rep = solve_regularized(ex.reference, ex.templ, gn, cfg, ex.ground_truth);
    log_run(fmt("ex1-64 alpha=%g", alpha), rep);
    dmp.push_back(rep.rows.back().dmp);
    elas_last = rep.rows.back().elas;
    detail += fmt("alpha=%g DMP=%.3e Elas=%.6f; ", alpha, rep.rows.back().dmp, rep.rows.back().elas);
  }
  const bool monotone = dmp[0] > dmp[1] && dmp[1] > dmp[2];
  const double e_rel = std::abs(elas_last - hard.rows.back().elas) / hard.rows.back().elas;
  const double d_rel = std::abs(dmp[2] - hard.rows.back().dmp) / hard.rows.back().dmp;
  const bool close = e_rel <= 0.2 && d_rel <= 0.2;
  detail += fmt("constrained DMP=%.3e Elas=%.6f; decreasing [%s]; at 1e-3 rel. diff Elas %.1f%% DMP %.1f%% [%s]",
                hard.rows.back().dmp, hard.rows.back().elas, monotone ? "ok" : "FAIL", 100 * e_rel, 100 * d_rel,
                close ? "ok" : "FAIL");
  return {monotone && close, detail};
}

Outcome multilevel_benefit() {
  const auto ex2 = build_ex2_synthetic(128, 1);
  SQPConfig cfg;
  cfg.rl_min = 2;
  const auto ml = register_multilevel(ex2.reference, ex2.templ, cfg);
  log_run("ex2-128 multilevel", ml);
  SQPConfig cold_cfg;
  const auto cold = register_multilevel(ex2.reference, ex2.templ, cold_cfg);
  log_run("ex2-128 single level", cold);
  bool levels_ok = ml.converged;
  std::string detail;
  for (int rl = 2; rl >= 0; --rl) {
    const ReportRow* last = nullptr;
    for (const auto& r : ml.rows)
      if (r.rl == rl) last = &r;
    const bool ok = last && last->dmp < level_tolerance(cfg, rl);
    levels_ok = levels_ok && ok;
    detail += fmt("rl=%d k=%d DMP=%.2e<%.0e [%s]; ", rl, ml.iterations_on_level(rl), last ? last->dmp : NAN,
                  level_tolerance(cfg, rl), ok ? "ok" : "FAIL");
  }
  const int finest = ml.iterations_on_level(0);
  const int cold_finest = cold.iterations_on_level(0);
  const int total = ml.accepted_iterations();
  const bool fewer = cold.converged && finest < cold_finest;
  const bool magnitude = total >= 4 && total <= 360;
  detail += fmt("finest %d vs cold %d [%s]; total %d in [4, 360] [%s]", finest, cold_finest, fewer ? "ok" : "FAIL",
                total, magnitude ? "ok" : "FAIL");
  return {levels_ok && fewer && magnitude, detail};
}

Outcome safeguard_soundness() {
  const auto f = fixtures::folding_instance();
  const LevelProblem P(f.reference, f.templ, 1.0, 0.0);
  const StaggeredField u(P.geometry());
  const CellField p(P.geometry());
  const double sigma = 100.0;
  const auto ev = P.evaluate(u);
  const double slope =
      (P.elastic().A_full * u.vector() + sigma * (ev.jacobian.transpose() * ev.residual.values)).dot(f.du.vector());
  const double folded = min_volume(f.du).value;
  SQPConfig cfg;
  const auto ls = line_search(P, u, p, sigma, f.du, slope, cfg);
  const double accepted_v = min_volume(ls.u).value;
  const bool cut = slope < 0.0 && folded < 0.0 && accepted_v >= cfg.delta_fold && ls.merit_accepted < ls.merit_start;

  int steps = 0, bad_merit = 0, bad_fold = 0;
  for (const auto& run : g_runs)
    for (const auto& r : run.rows) {
      if (r.k == 0) continue;
      ++steps;
      if (!(r.merit_decrease > 0.0)) ++bad_merit;
      if (!(r.min_volume >= cfg.delta_fold)) ++bad_fold;
    }
  return {cut && bad_merit == 0 && bad_fold == 0 && steps > 0,
          fmt("folding direction minV(tau=1)=%.2f accepted tau=%.4f minV=%.3f; %d accepted steps in %zu runs, "
              "%d without merit decrease, %d below delta",
              folded, ls.tau, accepted_v, steps, g_runs.size(), bad_merit, bad_fold)};
}

Outcome bspline_model() {
  const GridGeometry g(64, 64, 1.0 / 64);
  auto cubic = [](Point x) {
    return 1.0 + x.x1 - 2.0 * x.x2 + 0.5 * x.x1 * x.x2 + x.x1 * x.x1 * x.x2 - 0.7 * x.x1 * x.x1 * x.x1 +
           0.3 * x.x2 * x.x2 * x.x2;
  };
  const auto poly = BSplineImage::fit(CellField::sample(g, cubic));
  const CellField noisy(g, fixtures::random_vector(g.cells(), 500, 0.1, 1.0));
  const auto model = BSplineImage::fit(noisy);
  std::mt19937 rng(501);
  std::uniform_real_distribution<double> interior(20.0 / 64, 44.0 / 64);
  std::uniform_real_distribution<double> any(0.05, 0.95);
  double rep_err = 0.0, grad_err = 0.0;
  // Central-difference truncation is eps^2/6 times a third derivative of order 1/h^3 here.
  const double eps = 1e-6;
  for (int k = 0; k < 50; ++k) {
    const Point a{interior(rng), interior(rng)};
    rep_err = std::max(rep_err, std::abs(poly.eval(a) - cubic(a)));
    const Point b{any(rng), any(rng)};
    const auto gr = model.eval_gradient(b);
    const double fd1 = (model.eval({b.x1 + eps, b.x2}) - model.eval({b.x1 - eps, b.x2})) / (2 * eps);
    const double fd2 = (model.eval({b.x1, b.x2 + eps}) - model.eval({b.x1, b.x2 - eps})) / (2 * eps);
    const double scale = std::max({std::abs(gr[0]), std::abs(gr[1]), 1.0});
    grad_err = std::max(grad_err, std::max(std::abs(gr[0] - fd1), std::abs(gr[1] - fd2)) / scale);
  }
  return {rep_err <= 1e-9 && grad_err <= 1e-6,
          fmt("cubic reproduction error %.2e, gradient vs FD %.2e (50 points each)", rep_err, grad_err)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"1 mimetic identities", mimetic_identities},
      {"2 constraint Jacobian exactness", jacobian_exactness},
      {"3 discrete volume accuracy order", determinant_order},
      {"4 Ex1 end-to-end", ex1_end_to_end},
      {"5 multigrid mesh/parameter independence", multigrid_independence},
      {"6 exact preconditioner limit", preconditioner_exact_limit},
      {"7 regularization trend", regularization_trend},
      {"8 multilevel benefit", multilevel_benefit},
      {"9 safeguard soundness", safeguard_soundness},
      {"10 B-spline model", bspline_model},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s criterion %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
