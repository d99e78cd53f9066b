#include "mjls/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mjls {

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::optimal: return "optimal";
    case SdpStatus::feasible: return "feasible";
    case SdpStatus::infeasible: return "infeasible";
    case SdpStatus::numerical_failure: return "numerical_failure";
  }
  return "?";
}

int LmiProgram::add_variable(const std::string& name, int rows, int cols, bool symmetric) {
  if (!constraints_.empty() || !eq_rows_.empty())
    throw std::logic_error("LmiProgram: add all variables before constraints");
  if (symmetric && rows != cols) throw std::invalid_argument("LmiProgram: symmetric variable must be square");
  VarBlock b;
  b.name = name;
  b.rows = rows;
  b.cols = cols;
  b.symmetric = symmetric;
  b.offset = n_dofs_;
  b.dof = symmetric ? rows * (rows + 1) / 2 : rows * cols;
  n_dofs_ += b.dof;
  blocks_.push_back(b);
  return static_cast<int>(blocks_.size()) - 1;
}

std::vector<Matrix> LmiProgram::unpack_raw(const std::vector<double>& raw) const {
  std::vector<Matrix> vars;
  vars.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    Matrix m(b.rows, b.cols);
    int k = b.offset;
    if (b.symmetric) {
      for (int i = 0; i < b.rows; ++i)
        for (int j = i; j < b.cols; ++j) {
          m(i, j) = raw[k];
          m(j, i) = raw[k];
          ++k;
        }
    } else {
      for (int i = 0; i < b.rows; ++i)
        for (int j = 0; j < b.cols; ++j) m(i, j) = raw[k++];
    }
    vars.push_back(std::move(m));
  }
  return vars;
}

std::vector<Matrix> LmiProgram::unpack(const std::vector<double>& dofs) const {
  if (!lift_) return unpack_raw(dofs);
  std::vector<double> orig = lift_->x0;
  for (size_t i = 0; i < orig.size(); ++i)
    for (int j = 0; j < lift_->basis.cols(); ++j) orig[i] += lift_->basis(static_cast<int>(i), j) * dofs[j];
  // rebuild with the original layout
  LmiProgram tmp;
  tmp.blocks_ = lift_->blocks;
  return tmp.unpack_raw(orig);
}

void LmiProgram::scalarize(const MatrixFn& g, Matrix& f0, std::vector<std::pair<int, Matrix>>& coeffs) const {
  std::vector<double> zero(n_dofs_, 0.0);
  f0 = g(unpack_raw(zero));
  coeffs.clear();
  std::vector<double> probe = zero;
  for (int j = 0; j < n_dofs_; ++j) {
    std::vector<double> unit = zero;
    unit[j] = 1.0;
    Matrix fj = g(unpack_raw(unit)) - f0;
    if (fj.max_abs() > 0.0) coeffs.emplace_back(j, std::move(fj));
  }
  // affinity probe: the callback must be affine in the variables
  uint64_t state = 0x9e3779b97f4a7c15ull;
  for (int j = 0; j < n_dofs_; ++j) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    probe[j] = static_cast<double>(static_cast<int64_t>(state >> 11)) / static_cast<double>(1ll << 52) - 0.5;
  }
  Matrix predicted = f0;
  for (const auto& [j, fj] : coeffs) predicted += fj * probe[j];
  Matrix actual = g(unpack_raw(probe));
  if ((predicted - actual).max_abs() > 1e-8 * std::max(1.0, actual.max_abs()))
    throw std::invalid_argument("LmiProgram: constraint callback is not affine in the variables");
}

void LmiProgram::add_constraint_neg(const MatrixFn& g) {
  Constraint c;
  std::vector<std::pair<int, Matrix>> coeffs;
  scalarize(g, c.f0, c.coeffs);
  if (!c.f0.is_square()) throw std::invalid_argument("LmiProgram: PSD constraint must be square");
  c.f0.symmetrize();
  for (auto& [j, fj] : c.coeffs) fj.symmetrize();
  c.dim = c.f0.rows();
  c.eps = epsilon_ * std::max(1.0, c.f0.max_abs());
  constraints_.push_back(std::move(c));
}

void LmiProgram::add_constraint_pos(const MatrixFn& g) {
  add_constraint_neg([g](const std::vector<Matrix>& vars) { return g(vars) * -1.0; });
}

void LmiProgram::add_equality(const MatrixFn& g) {
  Matrix f0;
  std::vector<std::pair<int, Matrix>> coeffs;
  scalarize(g, f0, coeffs);
  for (int i = 0; i < f0.rows(); ++i) {
    for (int j = 0; j < f0.cols(); ++j) {
      std::vector<double> row(n_dofs_, 0.0);
      bool nonzero = false;
      for (const auto& [k, fk] : coeffs) {
        row[k] = fk(i, j);
        if (row[k] != 0.0) nonzero = true;
      }
      if (!nonzero && f0(i, j) == 0.0) continue;  // trivially satisfied entry
      eq_rows_.push_back(std::move(row));
      eq_rhs_.push_back(-f0(i, j));
    }
  }
}

void LmiProgram::set_objective(const ScalarFn& f) {
  std::vector<double> zero(n_dofs_, 0.0);
  obj_c0_ = f(unpack_raw(zero));
  obj_c_.assign(n_dofs_, 0.0);
  for (int j = 0; j < n_dofs_; ++j) {
    std::vector<double> unit = zero;
    unit[j] = 1.0;
    obj_c_[j] = f(unpack_raw(unit)) - obj_c0_;
  }
}

double LmiProgram::objective_at(const std::vector<double>& dofs) const {
  double v = obj_c0_;
  for (size_t j = 0; j < obj_c_.size() && j < dofs.size(); ++j) v += obj_c_[j] * dofs[j];
  return v;
}

double LmiProgram::max_constraint_eig(const std::vector<double>& dofs) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : constraints_) {
    Matrix f = c.f0;
    for (const auto& [j, fj] : c.coeffs) f += fj * dofs[j];
    worst = std::max(worst, lambda_max(f));
  }
  return worst;
}

double LmiProgram::max_equality_residual(const std::vector<double>& dofs) const {
  double worst = 0.0;
  for (size_t r = 0; r < eq_rows_.size(); ++r) {
    double v = -eq_rhs_[r];
    for (int j = 0; j < n_dofs_; ++j) v += eq_rows_[r][j] * dofs[j];
    worst = std::max(worst, std::abs(v));
  }
  return worst;
}

LmiProgram eliminate_equalities(const LmiProgram& prog) {
  if (prog.eq_rows_.empty()) return prog;

  Matrix e(static_cast<int>(prog.eq_rows_.size()), prog.n_dofs_);
  for (size_t r = 0; r < prog.eq_rows_.size(); ++r)
    for (int j = 0; j < prog.n_dofs_; ++j) e(static_cast<int>(r), j) = prog.eq_rows_[r][j];
  AffineSpace space = solve_affine(e, prog.eq_rhs_);
  const int k = space.basis.cols();

  LmiProgram red(prog.epsilon_);
  LmiProgram::VarBlock zb;
  zb.name = "reduced";
  zb.rows = k;
  zb.cols = 1;
  zb.symmetric = false;
  zb.offset = 0;
  zb.dof = k;
  red.blocks_.push_back(zb);
  red.n_dofs_ = k;

  for (const auto& c : prog.constraints_) {
    LmiProgram::Constraint rc;
    rc.dim = c.dim;
    rc.eps = c.eps;
    rc.f0 = c.f0;
    std::vector<Matrix> cols(k, Matrix(c.dim, c.dim));
    for (const auto& [j, fj] : c.coeffs) {
      rc.f0 += fj * space.x0[j];
      for (int l = 0; l < k; ++l) {
        const double w = space.basis(j, l);
        if (w != 0.0) cols[l] += fj * w;
      }
    }
    for (int l = 0; l < k; ++l)
      if (cols[l].max_abs() > 0.0) rc.coeffs.emplace_back(l, std::move(cols[l]));
    red.constraints_.push_back(std::move(rc));
  }

  red.obj_c0_ = prog.obj_c0_;
  red.obj_c_.assign(k, 0.0);
  for (int j = 0; j < prog.n_dofs_ && j < static_cast<int>(prog.obj_c_.size()); ++j) {
    red.obj_c0_ += prog.obj_c_[j] * space.x0[j];
    for (int l = 0; l < k; ++l) red.obj_c_[l] += prog.obj_c_[j] * space.basis(j, l);
  }

  LmiProgram::Lift lift;
  if (prog.lift_) {
    // compose with an existing lift
    lift.blocks = prog.lift_->blocks;
    lift.x0 = prog.lift_->x0;
    for (size_t i = 0; i < lift.x0.size(); ++i)
      for (int j = 0; j < prog.lift_->basis.cols(); ++j) lift.x0[i] += prog.lift_->basis(static_cast<int>(i), j) * space.x0[j];
    lift.basis = prog.lift_->basis * space.basis;
  } else {
    lift.blocks = prog.blocks_;
    lift.x0 = space.x0;
    lift.basis = space.basis;
  }
  red.lift_ = std::move(lift);
  return red;
}

// ---------------------------------------------------------------------------
// barrier interior point
// ---------------------------------------------------------------------------

namespace {

struct GBlock {
  int dim;
  Matrix g0;                                   // G(x) = g0 + sum x_j g_j must stay PD
  std::vector<std::pair<int, Matrix>> coeffs;  // (dof, g_j)
};

struct BarrierState {
  std::vector<GBlock> blocks;
  std::vector<double> c;  // minimize c'x
  int n = 0;

  Matrix eval(const GBlock& b, const std::vector<double>& x) const {
    Matrix g = b.g0;
    for (const auto& [j, gj] : b.coeffs) g += gj * x[j];
    return g;
  }

  bool all_pd(const std::vector<double>& x) const {
    Matrix l;
    for (const auto& b : blocks)
      if (!try_cholesky(eval(b, x), l)) return false;
    return true;
  }

  // -sum logdet G + t c'x; +inf when not PD
  double phi(const std::vector<double>& x, double t) const {
    double v = 0.0;
    for (int j = 0; j < n; ++j) v += t * c[j] * x[j];
    Matrix l;
    for (const auto& b : blocks) {
      if (!try_cholesky(eval(b, x), l)) return std::numeric_limits<double>::infinity();
      for (int i = 0; i < b.dim; ++i) v -= 2.0 * std::log(l(i, i));
    }
    return v;
  }
};

// One Newton centering run; returns false on numerical breakdown.
bool center(BarrierState& st, std::vector<double>& x, double t, int max_newton, std::string& err) {
  const int n = st.n;
  for (int iter = 0; iter < max_newton; ++iter) {
    std::vector<double> grad(n, 0.0);
    Matrix hess(n, n);
    for (int j = 0; j < n; ++j) grad[j] = t * st.c[j];

    Matrix l;
    for (const auto& b : st.blocks) {
      Matrix g = st.eval(b, x);
      if (!try_cholesky(g, l)) {
        err = "iterate left the cone";
        return false;
      }
      // G^-1 via the factor
      Matrix ginv(b.dim, b.dim);
      {
        std::vector<double> e(b.dim, 0.0), col;
        for (int i = 0; i < b.dim; ++i) {
          std::fill(e.begin(), e.end(), 0.0);
          e[i] = 1.0;
          col = cholesky_solve(l, e);
          for (int r = 0; r < b.dim; ++r) ginv(r, i) = col[r];
        }
      }
      std::vector<std::pair<int, Matrix>> ts;
      ts.reserve(b.coeffs.size());
      for (const auto& [j, gj] : b.coeffs) ts.emplace_back(j, ginv * gj);
      for (const auto& [j, tj] : ts) grad[j] -= tj.trace();
      for (size_t a = 0; a < ts.size(); ++a) {
        for (size_t bb = a; bb < ts.size(); ++bb) {
          double tr = 0.0;
          const Matrix& ta = ts[a].second;
          const Matrix& tb = ts[bb].second;
          for (int r = 0; r < b.dim; ++r)
            for (int cidx = 0; cidx < b.dim; ++cidx) tr += ta(r, cidx) * tb(cidx, r);
          hess(ts[a].first, ts[bb].first) += tr;
          if (ts[a].first != ts[bb].first) hess(ts[bb].first, ts[a].first) += tr;
        }
      }
    }

    Matrix hl;
    double ridge = 0.0;
    for (int attempt = 0;; ++attempt) {
      Matrix h = hess;
      if (ridge > 0.0)
        for (int i = 0; i < n; ++i) h(i, i) += ridge;
      if (try_cholesky(h, hl)) break;
      ridge = ridge == 0.0 ? 1e-12 * std::max(1.0, hess.max_abs()) : ridge * 100.0;
      if (attempt > 12) {
        err = "singular Newton system";
        return false;
      }
    }
    std::vector<double> step = cholesky_solve(hl, grad);
    for (double& s : step) s = -s;

    double decrement2 = 0.0;
    for (int j = 0; j < n; ++j) decrement2 -= grad[j] * step[j];
    if (!(decrement2 >= 0.0) || !std::isfinite(decrement2)) {
      err = "non-finite Newton decrement";
      return false;
    }
    if (decrement2 * 0.5 < 1e-11) return true;

    const double phi0 = st.phi(x, t);
    double gdotd = 0.0;
    for (int j = 0; j < n; ++j) gdotd += grad[j] * step[j];
    double alpha = 1.0;
    std::vector<double> trial(n);
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (int j = 0; j < n; ++j) trial[j] = x[j] + alpha * step[j];
      const double phit = st.phi(trial, t);
      if (phit <= phi0 + 0.25 * alpha * gdotd) {
        x = trial;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) {
      // stuck: accept the current centered-enough point
      return decrement2 * 0.5 < 1e-4;
    }
  }
  return true;  // iteration cap: point is still strictly feasible
}

}  // namespace

SdpSolution sdp_solve(const LmiProgram& prog, const SdpOptions& opts) {
  SdpSolution sol;
  LmiProgram work = prog.n_equalities() > 0 ? eliminate_equalities(prog) : prog;
  const int n = work.n_dofs();

  const bool has_objective = [&] {
    for (double cj : work.obj_c_) {
      if (cj != 0.0) return true;
    }
    return false;
  }();

  double eps_min = std::numeric_limits<double>::infinity();
  double scale0 = 1.0;
  for (const auto& c : work.constraints_) {
    eps_min = std::min(eps_min, c.eps);
    scale0 = std::max(scale0, c.f0.max_abs());
  }
  if (work.constraints_.empty()) eps_min = work.epsilon();

  auto finish = [&](SdpStatus status, const std::vector<double>& x, const std::string& msg) {
    sol.status = status;
    sol.dofs = x;
    sol.message = msg;
    sol.variables = work.unpack(x);
    sol.objective_value = work.objective_at(x);
    sol.max_constraint_eig = work.n_psd_constraints() > 0 ? work.max_constraint_eig(x) : -eps_min;
    if (sol.ok() && sol.max_constraint_eig > -eps_min / 2.0) {
      sol.status = SdpStatus::numerical_failure;
      sol.message = "insufficient constraint margin at candidate solution";
    }
    return sol;
  };

  if (n == 0) {
    // fully determined by the equalities
    std::vector<double> x;
    const double worst = work.n_psd_constraints() > 0 ? work.max_constraint_eig(x) : -eps_min;
    return finish(worst <= -eps_min / 2.0 ? SdpStatus::feasible : SdpStatus::infeasible, x, "no free variables");
  }

  // ----- phase 1: minimize the slack s with G_k = s I - F_k - eps I -----
  BarrierState p1;
  p1.n = n + 1;
  p1.c.assign(n + 1, 0.0);
  p1.c[n] = 1.0;
  for (const auto& c : work.constraints_) {
    GBlock b;
    b.dim = c.dim;
    b.g0 = (c.f0 + Matrix::identity(c.dim) * c.eps) * -1.0;
    for (const auto& [j, fj] : c.coeffs) b.coeffs.emplace_back(j, fj * -1.0);
    b.coeffs.emplace_back(n, Matrix::identity(c.dim));
    p1.blocks.push_back(std::move(b));
  }
  const double box = opts.dof_bound;
  for (int j = 0; j < n; ++j) {
    GBlock lo, hi;
    lo.dim = hi.dim = 1;
    lo.g0 = Matrix{{box}};
    lo.coeffs.emplace_back(j, Matrix{{1.0}});
    hi.g0 = Matrix{{box}};
    hi.coeffs.emplace_back(j, Matrix{{-1.0}});
    p1.blocks.push_back(std::move(lo));
    p1.blocks.push_back(std::move(hi));
  }

  std::vector<double> x1(n + 1, 0.0);
  {
    double s0 = 0.0;
    for (const auto& c : work.constraints_) s0 = std::max(s0, lambda_max(c.f0) + c.eps);
    x1[n] = s0 + 1.0 + 0.01 * scale0;
  }

  double m_total = 0.0;
  for (const auto& b : p1.blocks) m_total += b.dim;

  std::string err;
  const double phase1_target = -std::max(1e-3 * scale0, 1e3 * eps_min);
  double t = 1.0;
  bool strictly_feasible = false;
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    if (!center(p1, x1, t, opts.max_newton, err)) return finish(SdpStatus::numerical_failure, std::vector<double>(n, 0.0), "phase 1: " + err);
    if (x1[n] < phase1_target) {
      strictly_feasible = true;
      break;
    }
    if (m_total / t < 1e-9 * std::max(1.0, std::abs(x1[n]))) break;
    t *= opts.mu;
  }
  if (!strictly_feasible) {
    if (x1[n] >= 0.0) {
      std::vector<double> zero(n, 0.0);
      sol.status = SdpStatus::infeasible;
      sol.dofs = zero;
      sol.variables = work.unpack(zero);
      sol.objective_value = 0.0;
      sol.max_constraint_eig = work.n_psd_constraints() > 0 ? work.max_constraint_eig(zero) : 0.0;
      sol.message = "no strictly feasible point found (heuristic, best slack " + std::to_string(x1[n]) + ")";
      return sol;
    }
    strictly_feasible = true;  // negative slack, just a thin margin
  }

  std::vector<double> x(x1.begin(), x1.begin() + n);

  if (!has_objective) return finish(SdpStatus::feasible, x, "feasibility phase converged");

  // ----- phase 2: minimize the objective along the central path -----
  BarrierState p2;
  p2.n = n;
  p2.c = work.obj_c_;
  for (const auto& c : work.constraints_) {
    GBlock b;
    b.dim = c.dim;
    b.g0 = (c.f0 + Matrix::identity(c.dim) * c.eps) * -1.0;
    for (const auto& [j, fj] : c.coeffs) b.coeffs.emplace_back(j, fj * -1.0);
    p2.blocks.push_back(std::move(b));
  }
  for (int j = 0; j < n; ++j) {
    GBlock lo, hi;
    lo.dim = hi.dim = 1;
    lo.g0 = Matrix{{box}};
    lo.coeffs.emplace_back(j, Matrix{{1.0}});
    hi.g0 = Matrix{{box}};
    hi.coeffs.emplace_back(j, Matrix{{-1.0}});
    p2.blocks.push_back(std::move(lo));
    p2.blocks.push_back(std::move(hi));
  }
  if (!p2.all_pd(x)) return finish(SdpStatus::numerical_failure, x, "phase 1 point not strictly feasible for phase 2");

  double m2 = 0.0;
  for (const auto& b : p2.blocks) m2 += b.dim;
  t = 1.0;
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    if (!center(p2, x, t, opts.max_newton, err)) return finish(SdpStatus::numerical_failure, x, "phase 2: " + err);
    const double obj = work.objective_at(x);
    if (m2 / t < opts.obj_tol * std::max(1.0, std::abs(obj))) break;
    t *= opts.mu;
  }
  return finish(SdpStatus::optimal, x, "optimality gap below tolerance");
}

}  // namespace mjls
