#include "mjls/synthesis.hpp"

#include <cmath>
#include <stdexcept>

namespace mjls {

namespace {

void require_valid(const PemAdm& model) {
  ValidationReport rep = validate_model(model);
  if (!rep.ok()) throw std::invalid_argument("synthesis: invalid model:\n" + rep.summary());
}

// variable order: S(0..N-1), Y(0..N-1), F(0..N-1) [, Z(0..N-1), gamma4]
struct VarIdx {
  int n_modes;
  int s(int i) const { return i; }
  int y(int i) const { return n_modes + i; }
  int f(int i) const { return 2 * n_modes + i; }
  int z(int i) const { return 3 * n_modes + i; }
  int g4() const { return 4 * n_modes; }
};

// [[Delta(i), Lambda_i(S)], [Lambda_i(S)', -Xi_i(S)]] block of size n*N.
// delta_extra adds gamma1_bar * S(i) for the PGC variant.
Matrix schur_block(const PemAdm& model, const std::vector<Matrix>& vars, const VarIdx& ix, int i, double delta_extra) {
  const int n = model.state_dim;
  const int nm = model.generator.n_modes;
  const ModeSystem& ms = model.modes[i];
  const Matrix& s = vars[ix.s(i)];
  const Matrix& f = vars[ix.f(i)];
  const double qii = model.generator.rates(i, i);

  Matrix delta = s * ms.a.transpose() + ms.c.transpose() * f.transpose() * ms.b.transpose() + ms.a * s + ms.b * f * ms.c +
                 s * (qii + delta_extra);

  Matrix block(n * nm, n * nm);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) block(r, c) = delta(r, c);
  int off = n;
  for (int j = 0; j < nm; ++j) {
    if (j == i) continue;
    const double root = std::sqrt(model.generator.rates(i, j));
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        block(r, off + c) = root * s(r, c);
        block(off + r, c) = root * s(c, r);
        block(off + r, off + c) = -vars[ix.s(j)](r, c);
      }
    off += n;
  }
  return block;
}

void add_common_constraints(LmiProgram& prog, const PemAdm& model, const VarIdx& ix, double delta_extra) {
  const int nm = model.generator.n_modes;
  for (int i = 0; i < nm; ++i)
    for (int j = 0; j < nm; ++j)
      if (j != i && model.generator.rates(i, j) < 0.0)
        throw std::invalid_argument("synthesis: negative off-diagonal generator rate q_" + std::to_string(i) +
                                    std::to_string(j));
  for (int i = 0; i < nm; ++i) {
    prog.add_constraint_neg([&model, &ix, i, delta_extra](const std::vector<Matrix>& vars) {
      return schur_block(model, vars, ix, i, delta_extra);
    });
    prog.add_constraint_pos([&ix, i](const std::vector<Matrix>& vars) { return vars[ix.s(i)]; });
    prog.add_constraint_pos([&ix, i](const std::vector<Matrix>& vars) { return vars[ix.y(i)]; });
    prog.add_equality([&model, &ix, i](const std::vector<Matrix>& vars) {
      return model.modes[i].c * vars[ix.s(i)] - vars[ix.y(i)] * model.modes[i].c;
    });
  }
}

void add_variables(LmiProgram& prog, const PemAdm& model, bool pgc) {
  const int nm = model.generator.n_modes;
  for (int i = 0; i < nm; ++i) prog.add_variable("S" + std::to_string(i), model.state_dim, model.state_dim, true);
  for (int i = 0; i < nm; ++i) prog.add_variable("Y" + std::to_string(i), model.output_dim, model.output_dim, true);
  for (int i = 0; i < nm; ++i) prog.add_variable("F" + std::to_string(i), model.input_dim, model.output_dim, false);
  if (pgc) {
    for (int i = 0; i < nm; ++i) prog.add_variable("Z" + std::to_string(i), model.state_dim, model.state_dim, true);
    prog.add_variable("gamma4", 1, 1, false);
  }
}

}  // namespace

void SynthesisOptions::validate() const {
  if (!(gamma1_bar > 0.0)) throw std::invalid_argument("synthesis options: gamma1_bar must be positive");
  if (!(gamma2_bar > 0.0)) throw std::invalid_argument("synthesis options: gamma2_bar must be positive");
  if (!(gamma3_bar > 0.0)) throw std::invalid_argument("synthesis options: gamma3_bar must be positive");
  if (!(alpha1 >= 1.0)) throw std::invalid_argument("synthesis options: alpha1 must be >= 1");
  if (std::abs(gamma3_bar - alpha1 * gamma2_bar) > 1e-12 * std::max(1.0, gamma3_bar))
    throw std::invalid_argument("synthesis options: gamma3_bar must equal alpha1 * gamma2_bar");
  if (!(strictness > 0.0)) throw std::invalid_argument("synthesis options: strictness must be positive");
}

LmiProgram build_ssc_program(const PemAdm& model, double strictness) {
  require_valid(model);
  LmiProgram prog(strictness);
  add_variables(prog, model, false);
  VarIdx ix{model.generator.n_modes};
  add_common_constraints(prog, model, ix, 0.0);
  return prog;
}

LmiProgram build_pgc_program(const PemAdm& model, const SynthesisOptions& opts) {
  require_valid(model);
  opts.validate();
  LmiProgram prog(opts.strictness);
  add_variables(prog, model, true);
  VarIdx ix{model.generator.n_modes};
  add_common_constraints(prog, model, ix, opts.gamma1_bar);

  const int n = model.state_dim;
  const int p = model.output_dim;
  const int nm = model.generator.n_modes;
  for (int i = 0; i < nm; ++i) {
    // 1/gamma3_bar <= eig(S(i)) <= 1/gamma2_bar
    prog.add_constraint_neg([&ix, i, &opts, n](const std::vector<Matrix>& vars) {
      return vars[ix.s(i)] - Matrix::identity(n) * (1.0 / opts.gamma2_bar);
    });
    prog.add_constraint_pos([&ix, i, &opts, n](const std::vector<Matrix>& vars) {
      return vars[ix.s(i)] - Matrix::identity(n) * (1.0 / opts.gamma3_bar);
    });
    // [[Z(i), B F D], [(B F D)', I]] >= 0
    prog.add_constraint_pos([&model, &ix, i, n, p](const std::vector<Matrix>& vars) {
      const Matrix bfd = model.modes[i].b * vars[ix.f(i)] * model.modes[i].d;
      Matrix lift(n + p, n + p);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) lift(r, c) = vars[ix.z(i)](r, c);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < p; ++c) {
          lift(r, n + c) = bfd(r, c);
          lift(n + c, r) = bfd(r, c);
        }
      for (int c = 0; c < p; ++c) lift(n + c, n + c) += 1.0;
      return lift;
    });
    // tr(Z(i)) <= gamma4
    prog.add_constraint_neg([&ix, i](const std::vector<Matrix>& vars) {
      return Matrix{{vars[ix.z(i)].trace() - vars[ix.g4()](0, 0)}};
    });
  }
  prog.set_objective([&ix](const std::vector<Matrix>& vars) { return vars[ix.g4()](0, 0); });
  return prog;
}

namespace {

SynthesisOutcome run_synthesis(const PemAdm& model, const LmiProgram& prog, bool pgc, const SynthesisOptions& opts) {
  SynthesisOutcome out;
  SdpSolution sol = sdp_solve(prog);
  out.solver_status = sol.status;
  out.message = sol.message;
  if (sol.status == SdpStatus::numerical_failure) throw std::runtime_error("synthesis: solver failure: " + sol.message);
  if (!sol.ok()) return out;

  const int nm = model.generator.n_modes;
  VarIdx ix{nm};
  SynthesisResult res;
  for (int i = 0; i < nm; ++i) res.s_mats.push_back(sol.variables[ix.s(i)]);
  for (int i = 0; i < nm; ++i) res.y_mats.push_back(sol.variables[ix.y(i)]);
  for (int i = 0; i < nm; ++i) res.f_mats.push_back(sol.variables[ix.f(i)]);

  for (int i = 0; i < nm; ++i) {
    SymEig ye = eig_sym(res.y_mats[i]);
    if (!(ye.values.front() > 0.0) || ye.values.back() / ye.values.front() > 1e10)
      throw std::runtime_error("synthesis: Y(" + std::to_string(i) + ") too ill-conditioned for gain recovery");
    res.gains.gains.push_back(res.f_mats[i] * inverse(res.y_mats[i]));
  }

  if (pgc) {
    res.gamma4 = sol.objective_value;
    res.guaranteed_bound = opts.alpha1 * std::pow(opts.gamma3_bar, 3) * res.gamma4 / opts.gamma1_bar;
  }

  // mandatory closed-loop re-verification
  ClosedLoop cl = build_closed_loop(model, res.gains);
  CertificateResult cert = find_certificate(cl, prog.epsilon());
  if (!cert.found()) {
    out.message = "recovered gains failed closed-loop re-verification: " + cert.message;
    return out;
  }
  res.certificate = *cert.certificate;

  if (pgc) {
    // decay requirement: M(i) <= -gamma1_bar * P(i) with P(i) = S(i)^-1
    std::vector<Matrix> p_from_s;
    for (const Matrix& s : res.s_mats) {
      Matrix p = inverse(s);
      p.symmetrize();
      p_from_s.push_back(std::move(p));
    }
    for (int i = 0; i < nm; ++i) {
      Matrix m = cl.a_cl[i].transpose() * p_from_s[i] + p_from_s[i] * cl.a_cl[i];
      for (int j = 0; j < nm; ++j) m += p_from_s[j] * cl.generator.rates(i, j);
      m += p_from_s[i] * opts.gamma1_bar;
      const double worst = lambda_max(m);
      const double tol = 1e-5 * std::max(1.0, lambda_max(p_from_s[i]));
      if (worst > tol) {
        out.message = "decay specification violated in mode " + std::to_string(i) + " (lambda_max = " + std::to_string(worst) + ")";
        return out;
      }
    }
  }

  out.result = std::move(res);
  return out;
}

}  // namespace

SynthesisOutcome synth_ssc(const PemAdm& model, double strictness) {
  LmiProgram prog = build_ssc_program(model, strictness);
  SynthesisOptions dummy;
  dummy.strictness = strictness;
  return run_synthesis(model, prog, false, dummy);
}

SynthesisOutcome synth_pgc(const PemAdm& model, const SynthesisOptions& opts) {
  LmiProgram prog = build_pgc_program(model, opts);
  return run_synthesis(model, prog, true, opts);
}

}  // namespace mjls
