#pragma once

// Inexact SQP for  min S^h(u)  s.t.  c^h(u) = 0,  with an Armijo line search on the
// augmented l2 merit function, a fold-prevention test on the cell volumes, a
// coarse-to-fine driver, and a Gauss-Newton solver for the penalized problem
// h^2 ||c^h(u)||^2 + alpha S^h(u) used for comparisons.

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mpreg/constraint.hpp"
#include "mpreg/elastic.hpp"
#include "mpreg/error.hpp"
#include "mpreg/grid.hpp"
#include "mpreg/image.hpp"
#include "mpreg/krylov.hpp"
#include "mpreg/multigrid.hpp"
#include "mpreg/saddle.hpp"
#include "mpreg/staggered.hpp"

namespace mpreg {

struct InnerSolverSettings {
  /// Fixed relative GMRES tolerance; 0 selects the forcing rule min(0.5, sqrt(||b_k||)).
  double rel_tol = 0.0;
  int max_iter = 500;
  int restart = 50;
  int mg_cycles = 1;
  bool exact = false;  ///< direct sub-inverses in the preconditioner (tiny problems)
};

struct SQPConfig {
  double mu = 1.0;
  double lambda = 0.0;
  double delta_fold = 0.03;
  double eta = 1e-4;
  double backtrack_factor = 0.5;
  double sigma0 = 1.0;
  int max_outer_iterations = 100;
  double dmp_tolerance = 1e-3;
  InnerSolverSettings inner;
  int rl_min = 0;
  int max_backtracks = 20;

  void validate() const {
    if (!(mu > 0.0)) throw InvalidArgument("mu must be positive");
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be nonnegative");
    if (!(delta_fold > 0.0 && delta_fold < 1.0)) throw InvalidArgument("delta_fold must lie in (0, 1)");
    if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("eta must lie in (0, 1)");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) throw InvalidArgument("backtrack factor must lie in (0, 1)");
    if (!(sigma0 > 0.0)) throw InvalidArgument("sigma0 must be positive");
    if (max_outer_iterations < 0) throw InvalidArgument("max_outer_iterations must be nonnegative");
    if (!(dmp_tolerance > 0.0)) throw InvalidArgument("dmp_tolerance must be positive");
    if (inner.rel_tol < 0.0 || inner.max_iter < 1 || inner.restart < 1 || inner.mg_cycles < 1)
      throw InvalidArgument("invalid inner solver settings");
    if (rl_min < 0) throw InvalidArgument("rl_min must be nonnegative");
    if (max_backtracks < 1) throw InvalidArgument("max_backtracks must be positive");
  }
};

struct SQPState {
  StaggeredField u;
  CellField p;
  int k = 0;
  double sigma = 1.0;
};

struct ReportRow {
  int rl = 0;
  int k = 0;
  double elas = 0.0;
  double dmp = 0.0;
  double de = std::numeric_limits<double>::quiet_NaN();  ///< only with a ground truth on this level
  double dmp_global = 0.0;
  double tau = 0.0;  ///< 0 on the initial row of a level
  int inner_iters = 0;
  double merit = 0.0;
  /// g(u_k) - g(u_{k+1}) at the multiplier and penalty used in the line search; NaN on initial rows.
  double merit_decrease = std::numeric_limits<double>::quiet_NaN();
  double min_volume = 1.0;
};

struct RegistrationReport {
  std::vector<ReportRow> rows;
  StaggeredField u;
  CellField p;
  CellField warped;
  CellField volume;
  bool converged = false;
  double stationarity = 0.0;  ///< ||A u + B^T p||_inf at the returned point
  std::string message;

  int accepted_iterations() const {
    int n = 0;
    for (const auto& r : rows) n += r.k > 0 ? 1 : 0;
    return n;
  }
  int iterations_on_level(int rl) const {
    int n = 0;
    for (const auto& r : rows) n += (r.rl == rl && r.k > 0) ? 1 : 0;
    return n;
  }
};

/// Images and operators of one resolution level.
class LevelProblem {
 public:
  LevelProblem(CellField reference, const CellField& templ, double mu, double lambda,
               std::optional<StaggeredField> ground_truth = std::nullopt)
      : reference_(std::move(reference)),
        model_(BSplineImage::fit(templ)),
        op_(assemble_elastic(reference_.geometry, mu, lambda)),
        truth_(std::move(ground_truth)) {
    require_same_geometry(reference_.geometry, templ.geometry, "level problem images");
    if (truth_) require_same_geometry(reference_.geometry, truth_->geometry, "ground truth");
  }

  const GridGeometry& geometry() const { return reference_.geometry; }
  const CellField& reference() const { return reference_; }
  const BSplineImage& model() const { return model_; }
  const ElasticOperator& elastic() const { return op_; }
  const std::optional<StaggeredField>& ground_truth() const { return truth_; }

  /// Elastic multigrid hierarchy, built on first use and reused for every SQP iteration.
  std::shared_ptr<const ElasticMultigrid> multigrid() const {
    if (!mg_) mg_ = std::make_shared<const ElasticMultigrid>(geometry(), op_.mu, op_.lambda);
    return mg_;
  }

  ConstraintEvaluation evaluate(const StaggeredField& u, bool with_jacobian = true) const {
    return evaluate_constraint(u, model_, reference_, with_jacobian);
  }

 private:
  CellField reference_;
  BSplineImage model_;
  ElasticOperator op_;
  std::optional<StaggeredField> truth_;
  mutable std::shared_ptr<const ElasticMultigrid> mg_;
};

/// g = S^h(u) + <p, c> + sigma/2 ||c||_2^2 for a precomputed residual c = c^h(u).
inline double merit(const ElasticOperator& op, const StaggeredField& u, const CellField& p, const CellField& c,
                    double sigma) {
  require_same_geometry(p.geometry, c.geometry, "merit");
  return energy(op, u) + p.values.dot(c.values) + 0.5 * sigma * c.values.squaredNorm();
}

inline double merit(const LevelProblem& P, const StaggeredField& u, const CellField& p, double sigma) {
  return merit(P.elastic(), u, p, P.evaluate(u, false).residual, sigma);
}

struct Metrics {
  double elas = 0.0;
  double dmp = 0.0;
  double de = std::numeric_limits<double>::quiet_NaN();
  double dmp_global = 0.0;
};

inline Metrics metrics(const ElasticOperator& op, const StaggeredField& u, const CellField& residual,
                       const std::optional<StaggeredField>& truth = std::nullopt) {
  Metrics m;
  m.elas = energy(op, u);
  m.dmp = residual.values.cwiseAbs().maxCoeff();
  if (truth) {
    require_same_geometry(truth->geometry, u.geometry, "ground truth");
    m.de = std::max((u.u1 - truth->u1).cwiseAbs().maxCoeff(), (u.u2 - truth->u2).cwiseAbs().maxCoeff());
  }
  const double h = u.geometry.h;
  m.dmp_global = std::abs(residual.values.sum()) * h * h;
  return m;
}

inline Metrics metrics(const LevelProblem& P, const StaggeredField& u) {
  return metrics(P.elastic(), u, P.evaluate(u, false).residual, P.ground_truth());
}

struct StepResult {
  Vector du;  ///< over the free displacement unknowns
  Vector dp;
  int inner_iterations = 0;
  double inner_relative_residual = 0.0;
  bool inner_converged = false;
  double rhs_norm = 0.0;
};

/// KKT right-hand side b = -(A u + B^T p ; c) over the free unknowns, with B restricted to them.
struct KKTData {
  SparseOperator B;
  Vector gradient;  ///< A u + B^T p
  Vector rhs;
};

inline KKTData kkt_data(const LevelProblem& P, const StaggeredField& u, const CellField& p,
                        const ConstraintEvaluation& ev) {
  const auto& op = P.elastic();
  KKTData d;
  d.B = reduce_cols(ev.jacobian, op.dofs);
  d.gradient = op.A * op.dofs.gather(u.vector()) + d.B.transpose() * p.values;
  d.rhs.resize(d.gradient.size() + d.B.rows());
  d.rhs.head(d.gradient.size()) = -d.gradient;
  d.rhs.tail(d.B.rows()) = -ev.residual.values;
  return d;
}

inline constexpr double kLinearDecrease = 0.5;
inline constexpr double kFinestInnerTolerance = 1e-10;

inline double initial_inner_tolerance(const InnerSolverSettings& inner, double rhs_norm) {
  return inner.rel_tol > 0.0 ? inner.rel_tol : forcing_tolerance(rhs_norm);
}

/// Solves the KKT system for the search direction at (u, p).
inline StepResult sqp_step(const LevelProblem& P, const KKTData& d, const InnerSolverSettings& inner,
                           double rel_tol_override = 0.0, const Vector* x0 = nullptr) {
  const auto& op = P.elastic();
  StepResult s;
  s.rhs_norm = d.rhs.norm();
  const Eigen::Index n = op.dofs.size();
  if (s.rhs_norm == 0.0) {
    s.du = Vector::Zero(n);
    s.dp = Vector::Zero(d.B.rows());
    s.inner_converged = true;
    return s;
  }
  const KKTSystem sys(op.A, d.B, d.rhs);
  const PreconditionerState prec(sys, inner.exact ? nullptr : P.multigrid(), {inner.mg_cycles, inner.exact});
  const double tol = rel_tol_override > 0.0 ? rel_tol_override : initial_inner_tolerance(inner, s.rhs_norm);
  const auto r = x0 ? solve_kkt(sys, &prec, {tol, inner.max_iter, inner.restart}, *x0)
                    : solve_kkt(sys, &prec, {tol, inner.max_iter, inner.restart});
  s.du = r.x.head(n);
  s.dp = r.x.tail(sys.m());
  s.inner_iterations = r.iterations;
  s.inner_relative_residual = r.relative_residual;
  s.inner_converged = r.converged;
  return s;
}

struct LineSearchResult {
  double tau = 1.0;
  double merit_start = 0.0;
  double merit_accepted = 0.0;
  int backtracks = 0;
  StaggeredField u;
  ConstraintEvaluation evaluation;
};

/// Backtracking from tau = 1 until both the Armijo condition for the merit (p and sigma
/// fixed) and the fold test min V^h(u + tau du) >= delta hold.
inline LineSearchResult line_search(const LevelProblem& P, const StaggeredField& u, const CellField& p, double sigma,
                                    const StaggeredField& du, double slope, const SQPConfig& cfg,
                                    std::optional<double> merit_start = std::nullopt) {
  if (du.max_abs() == 0.0) throw InvalidArgument("line search needs a nonzero direction");
  const auto& op = P.elastic();
  LineSearchResult res;
  res.merit_start = merit_start ? *merit_start : merit(P, u, p, sigma);
  double tau = 1.0;
  double last = std::numeric_limits<double>::quiet_NaN();
  for (int b = 0; b <= cfg.max_backtracks; ++b, tau *= cfg.backtrack_factor) {
    StaggeredField trial = u;
    trial.u1 += tau * du.u1;
    trial.u2 += tau * du.u2;
    if (!(min_volume(trial).value >= cfg.delta_fold)) continue;
    auto ev = P.evaluate(trial, false);
    const double g = merit(op, trial, p, ev.residual, sigma);
    last = g;
    if (g <= res.merit_start + cfg.eta * tau * slope && g < res.merit_start) {
      res.tau = tau;
      res.merit_accepted = g;
      res.backtracks = b;
      res.u = std::move(trial);
      res.evaluation = std::move(ev);
      return res;
    }
  }
  throw LineSearchFailure("line search failed: step length fell below " + std::to_string(tau / cfg.backtrack_factor),
                          res.merit_start, last, tau / cfg.backtrack_factor);
}

struct LevelResult {
  SQPState state;
  std::vector<ReportRow> rows;
  bool converged = false;
  double stationarity = 0.0;
  std::string message;
  ConstraintEvaluation evaluation;  ///< at the returned iterate
};

/// Penalty rule: sigma <- max(sigma, ||p + dp||_inf + 1) when the merit slope is not below
/// -1/2 du^T A du; if that is still insufficient and the constraint part of the slope is a
/// descent term, sigma is raised to twice the threshold value. Returns the merit slope.
inline double update_penalty(double& sigma, double d0, double constraint_slope, double curvature,
                             const Vector& p_next) {
  auto slope = [&] { return d0 - sigma * constraint_slope; };
  if (slope() > -0.5 * curvature) {
    sigma = std::max(sigma, p_next.cwiseAbs().maxCoeff() + 1.0);
    if (slope() > -0.5 * curvature && constraint_slope > 0.0)
      sigma = std::max(sigma, 2.0 * (d0 + 0.5 * curvature) / constraint_slope);
  }
  return slope();
}

/// One resolution level of the SQP iteration, stopping once DMP < tolerance.
inline LevelResult register_one_level(const LevelProblem& P, StaggeredField u0, CellField p0, const SQPConfig& cfg,
                                      double tolerance, int rl = 0) {
  cfg.validate();
  const auto& g = P.geometry();
  const auto& op = P.elastic();
  require_same_geometry(u0.geometry, g, "initial displacement");
  require_same_geometry(p0.geometry, g, "initial multiplier");
  if (!u0.is_boundary_constrained()) throw InvalidArgument("initial displacement violates the wall conditions");
  if (!(min_volume(u0).value >= cfg.delta_fold)) throw InvalidArgument("initial displacement folds the grid");

  LevelResult out;
  out.state = {std::move(u0), std::move(p0), 0, cfg.sigma0};
  SQPState& s = out.state;
  out.evaluation = P.evaluate(s.u);

  auto record = [&](double tau, int inner, double g_value, double decrease) {
    const Metrics m = metrics(op, s.u, out.evaluation.residual, P.ground_truth());
    ReportRow r;
    r.rl = rl;
    r.k = s.k;
    r.elas = m.elas;
    r.dmp = m.dmp;
    r.de = m.de;
    r.dmp_global = m.dmp_global;
    r.tau = tau;
    r.inner_iters = inner;
    r.merit = g_value;
    r.merit_decrease = decrease;
    r.min_volume = min_volume(out.evaluation.volume).value;
    out.rows.push_back(r);
    return m.dmp;
  };

  double dmp = record(0.0, 0, merit(op, s.u, s.p, out.evaluation.residual, s.sigma),
                      std::numeric_limits<double>::quiet_NaN());
  KKTData d = kkt_data(P, s.u, s.p, out.evaluation);
  while (!(dmp < tolerance)) {
    if (s.k >= cfg.max_outer_iterations) {
      out.message = "iteration limit reached";
      break;
    }
    // Inexact directions are accepted once they reduce the linearized constraint residual
    // by the factor kLinearDecrease and the (penalty-updated) merit slope is negative;
    // otherwise the inner tolerance is tightened tenfold and GMRES restarts from the last iterate.
    double tol = initial_inner_tolerance(cfg.inner, d.rhs.norm());
    StepResult step = sqp_step(P, d, cfg.inner, tol);
    int inner_total = step.inner_iterations;
    double slope = 0.0;
    while (true) {
      const double d0 = d.gradient.dot(step.du);
      const Vector lin = d.B * step.du;
      const double cs = -lin.dot(out.evaluation.residual.values);
      const double curv = step.du.dot(op.A * step.du);
      double trial_sigma = s.sigma;
      slope = update_penalty(trial_sigma, d0, cs, curv, s.p.values + step.dp);
      const double c_norm = out.evaluation.residual.values.norm();
      const bool reduces = (out.evaluation.residual.values + lin).norm() <= kLinearDecrease * c_norm;
      if ((slope < 0.0 && reduces) || tol <= kFinestInnerTolerance) {
        s.sigma = trial_sigma;
        break;
      }
      tol = std::max(0.1 * tol, kFinestInnerTolerance);
      Vector x0(step.du.size() + step.dp.size());
      x0 << step.du, step.dp;
      step = sqp_step(P, d, cfg.inner, tol, &x0);
      inner_total += step.inner_iterations;
    }
    if (!(slope < 0.0)) {
      out.message = "no descent direction for the merit function";
      break;
    }
    const StaggeredField du = StaggeredField::from_vector(g, op.dofs.scatter(step.du));
    LineSearchResult ls;
    try {
      ls = line_search(P, s.u, s.p, s.sigma, du, slope, cfg,
                       merit(op, s.u, s.p, out.evaluation.residual, s.sigma));
    } catch (const LineSearchFailure& e) {
      out.message = e.what();
      break;
    }
    if (!(ls.merit_accepted < ls.merit_start)) throw SolverError("accepted step did not decrease the merit");
    s.u = std::move(ls.u);
    s.p.values += ls.tau * step.dp;
    ++s.k;
    out.evaluation = P.evaluate(s.u);
    if (!(min_volume(out.evaluation.volume).value >= cfg.delta_fold))
      throw SolverError("accepted iterate violates the fold test");
    dmp = record(ls.tau, inner_total, ls.merit_accepted, ls.merit_start - ls.merit_accepted);
    d = kkt_data(P, s.u, s.p, out.evaluation);
  }
  out.converged = dmp < tolerance;
  if (out.converged) out.message = "converged";
  out.stationarity = d.gradient.cwiseAbs().maxCoeff();
  return out;
}

/// Level tolerance C_rl * dmp_tolerance with C_rl = 4^rl.
inline double level_tolerance(const SQPConfig& cfg, int rl) { return std::pow(4.0, rl) * cfg.dmp_tolerance; }

inline RegistrationReport finish_report(const LevelProblem& P, LevelResult&& level, std::vector<ReportRow>&& rows) {
  RegistrationReport rep;
  rep.rows = std::move(rows);
  rep.converged = level.converged;
  rep.stationarity = level.stationarity;
  rep.message = level.message;
  rep.warped = level.evaluation.warped.value;
  rep.volume = level.evaluation.volume;
  rep.u = std::move(level.state.u);
  rep.p = std::move(level.state.p);
  (void)P;
  return rep;
}

/// Coarse-to-fine registration on rl_min + 1 levels (rl_min = 0: single level from u = 0).
/// The template is first rescaled to the reference mass (inputs must already agree to 1%).
/// The displacement is carried to the next finer level by bilinear interpolation of its
/// physical values; the multiplier is interpolated and divided by 4, matching the h^2
/// scaling of the discrete Lagrangian.
inline RegistrationReport register_multilevel(const CellField& reference, const CellField& templ, const SQPConfig& cfg,
                                              const std::optional<StaggeredField>& ground_truth = std::nullopt) {
  cfg.validate();
  validate_registration_inputs(reference, templ);
  const ImagePyramid rp = coarsen(reference, cfg.rl_min);
  const ImagePyramid tp = coarsen(balance_mass(reference, templ), cfg.rl_min);
  std::vector<ReportRow> rows;
  StaggeredField u(rp.coarsest().geometry);
  CellField p(rp.coarsest().geometry);
  for (int rl = cfg.rl_min; rl >= 0; --rl) {
    const CellField& r = rp.levels[rl];
    std::optional<StaggeredField> truth = rl == 0 ? ground_truth : std::nullopt;
    const LevelProblem P(r, tp.levels[rl], cfg.mu, cfg.lambda, truth);
    if (rl < cfg.rl_min) {
      u = prolong_field(u, P.geometry());
      u.constrain();
      p = prolong_field(p, P.geometry());
      p.values *= 0.25;
      // Interpolation can in principle create a fold; shrink the guess until it passes.
      for (int t = 0; t < 30 && !(min_volume(u).value >= cfg.delta_fold); ++t) {
        u.u1 *= 0.5;
        u.u2 *= 0.5;
      }
    }
    LevelResult level = register_one_level(P, std::move(u), std::move(p), cfg, level_tolerance(cfg, rl), rl);
    rows.insert(rows.end(), level.rows.begin(), level.rows.end());
    if (rl == 0 || !level.converged) {
      RegistrationReport rep = finish_report(P, std::move(level), std::move(rows));
      if (rl > 0) rep.message = "level " + std::to_string(rl) + ": " + rep.message;
      return rep;
    }
    u = std::move(level.state.u);
    p = std::move(level.state.p);
  }
  throw Error("unreachable");
}

struct GaussNewtonOptions {
  double alpha = 1e-3;
  double gradient_tolerance = 1e-4;  ///< stop when ||grad J|| <= tol * ||grad J(u_0)||
  double decrease_tolerance = 1e-10;  ///< or when the relative decrease of J falls below this
};

/// Gauss-Newton for J(u) = h^2 ||c^h(u)||_2^2 + alpha S^h(u):
///   (2 h^2 B^T B + alpha A) du = -(2 h^2 B^T c + alpha A u),
/// GMRES preconditioned by the elastic multigrid scaled by 1/alpha, with the same
/// Armijo and fold safeguards as the constrained solver.
inline RegistrationReport solve_regularized(const CellField& reference, const CellField& templ,
                                            const GaussNewtonOptions& gn, const SQPConfig& cfg,
                                            const std::optional<StaggeredField>& ground_truth = std::nullopt) {
  cfg.validate();
  if (!(gn.alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  validate_registration_inputs(reference, templ);
  const LevelProblem P(reference, balance_mass(reference, templ), cfg.mu, cfg.lambda, ground_truth);
  const auto& g = P.geometry();
  const auto& op = P.elastic();
  const double w = 2.0 * g.h * g.h;
  auto objective = [&](const StaggeredField& u, const CellField& c) {
    return 0.5 * w * c.values.squaredNorm() + gn.alpha * energy(op, u);
  };

  StaggeredField u(g);
  ConstraintEvaluation ev = P.evaluate(u);
  std::vector<ReportRow> rows;
  int k = 0;
  auto record = [&](double tau, int inner, double J, double decrease) {
    const Metrics m = metrics(op, u, ev.residual, P.ground_truth());
    rows.push_back({0, k, m.elas, m.dmp, m.de, m.dmp_global, tau, inner, J, decrease,
                    min_volume(ev.volume).value});
  };
  double J = objective(u, ev.residual);
  record(0.0, 0, J, std::numeric_limits<double>::quiet_NaN());

  auto mg = P.multigrid();
  const LinearMap prec = [&](const Vector& v, Vector& y) {
    y = mg->apply_inverse(v, cfg.inner.mg_cycles) / gn.alpha;
  };
  RegistrationReport rep;
  double grad0 = -1.0;
  // Gradients at this level are round-off in c, not a fit to improve.
  const double grad_floor = 1e-12 * w * P.reference().values.norm();
  while (true) {
    const SparseOperator B = reduce_cols(ev.jacobian, op.dofs);
    const Vector ur = op.dofs.gather(u.vector());
    const Vector grad = w * (B.transpose() * ev.residual.values) + gn.alpha * (op.A * ur);
    const double gnorm = grad.norm();
    if (grad0 < 0.0) grad0 = gnorm;
    if (gnorm <= gn.gradient_tolerance * grad0 || gnorm <= grad_floor) {
      rep.converged = true;
      rep.message = "converged";
      break;
    }
    if (k >= cfg.max_outer_iterations) {
      rep.message = "iteration limit reached";
      break;
    }
    const SparseOperator Bt = B.transpose();
    const LinearMap H = [&](const Vector& x, Vector& y) { y = w * (Bt * (B * x)) + gn.alpha * (op.A * x); };
    const double tol = cfg.inner.rel_tol > 0.0 ? cfg.inner.rel_tol : forcing_tolerance(gnorm);
    const auto sol = gmres(H, -grad, prec, Vector::Zero(grad.size()), {tol, cfg.inner.max_iter, cfg.inner.restart});
    const double slope = grad.dot(sol.x);
    if (!(slope < 0.0)) {
      rep.message = "no descent direction";
      break;
    }
    const StaggeredField du = StaggeredField::from_vector(g, op.dofs.scatter(sol.x));
    double tau = 1.0;
    bool accepted = false;
    for (int b = 0; b <= cfg.max_backtracks; ++b, tau *= cfg.backtrack_factor) {
      StaggeredField trial = u;
      trial.u1 += tau * du.u1;
      trial.u2 += tau * du.u2;
      if (!(min_volume(trial).value >= cfg.delta_fold)) continue;
      const auto tev = P.evaluate(trial, false);
      const double Jt = objective(trial, tev.residual);
      if (Jt <= J + cfg.eta * tau * slope && Jt < J) {
        u = std::move(trial);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      rep.message = "line search failed";
      break;
    }
    ++k;
    ev = P.evaluate(u);
    const double Jn = objective(u, ev.residual);
    const double decrease = J - Jn;
    J = Jn;
    record(tau, sol.iterations, J, decrease);
    if (decrease <= gn.decrease_tolerance * std::abs(J)) {
      rep.converged = true;
      rep.message = "converged (stagnation)";
      break;
    }
  }
  rep.rows = std::move(rows);
  rep.warped = ev.warped.value;
  rep.volume = ev.volume;
  rep.p = CellField(g);
  rep.stationarity = 0.0;
  rep.u = std::move(u);
  return rep;
}

}  // namespace mpreg
