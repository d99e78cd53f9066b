#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mjls/matrix.hpp"

namespace mjls {

struct SdpSolution;
struct SdpOptions;

// A small dense semidefinite program over named matrix variables.
//
// Constraints and objective are supplied as plain matrix-algebra
// callbacks; the program scalarizes them by probing (the callbacks must
// be affine in the variables, which is verified with a random probe).
// PSD constraints are strict: G(vars) <= -eps*I, with eps scaled per
// constraint by the largest absolute entry of its constant block.
class LmiProgram {
 public:
  using MatrixFn = std::function<Matrix(const std::vector<Matrix>&)>;
  using ScalarFn = std::function<double(const std::vector<Matrix>&)>;

  explicit LmiProgram(double epsilon = 1e-6) : epsilon_(epsilon) {}

  // symmetric blocks are parametrized by their upper triangle
  int add_variable(const std::string& name, int rows, int cols, bool symmetric);

  void add_constraint_neg(const MatrixFn& g);  // g(vars) <= -eps*I
  void add_constraint_pos(const MatrixFn& g);  // g(vars) >= eps*I
  void add_equality(const MatrixFn& g);        // g(vars) == 0 entrywise
  void set_objective(const ScalarFn& f);       // minimize

  int n_dofs() const { return n_dofs_; }
  int n_variables() const { return static_cast<int>(blocks_.size()); }
  int n_psd_constraints() const { return static_cast<int>(constraints_.size()); }
  int n_equalities() const { return static_cast<int>(eq_rows_.size()); }
  double epsilon() const { return epsilon_; }
  const std::string& variable_name(int v) const { return blocks_[v].name; }

  // Matrices for the *original* user variables given reduced dofs
  // (applies the equality-elimination lift chain when present).
  std::vector<Matrix> unpack(const std::vector<double>& dofs) const;

  // Largest eigenvalue of any PSD constraint at the given point,
  // evaluated from the scalarized affine maps.
  double max_constraint_eig(const std::vector<double>& dofs) const;
  double max_equality_residual(const std::vector<double>& dofs) const;
  double objective_at(const std::vector<double>& dofs) const;

 private:
  friend LmiProgram eliminate_equalities(const LmiProgram& prog);
  friend SdpSolution sdp_solve(const LmiProgram& prog, const SdpOptions& opts);

  struct VarBlock {
    std::string name;
    int rows, cols;
    bool symmetric;
    int offset, dof;
  };
  struct Constraint {
    int dim;
    Matrix f0;
    std::vector<std::pair<int, Matrix>> coeffs;  // (dof index, F_j)
    double eps;
  };
  struct Lift {
    // original_dofs = x0 + basis * reduced_dofs
    std::vector<double> x0;
    Matrix basis;
    std::vector<VarBlock> blocks;  // original variable layout
  };

  std::vector<Matrix> unpack_raw(const std::vector<double>& raw_dofs) const;
  void scalarize(const MatrixFn& g, Matrix& f0, std::vector<std::pair<int, Matrix>>& coeffs) const;

  double epsilon_;
  int n_dofs_ = 0;
  std::vector<VarBlock> blocks_;
  std::vector<Constraint> constraints_;
  std::vector<std::vector<double>> eq_rows_;  // row over dofs
  std::vector<double> eq_rhs_;
  std::vector<double> obj_c_;
  double obj_c0_ = 0.0;
  std::optional<Lift> lift_;
};

enum class SdpStatus { optimal, feasible, infeasible, numerical_failure };

const char* to_string(SdpStatus s);

struct SdpSolution {
  SdpStatus status = SdpStatus::numerical_failure;
  std::vector<Matrix> variables;
  std::vector<double> dofs;  // reduced-space point actually solved for
  double objective_value = 0.0;
  double max_constraint_eig = 0.0;
  std::string message;
  bool ok() const { return status == SdpStatus::optimal || status == SdpStatus::feasible; }
};

struct SdpOptions {
  double obj_tol = 1e-6;        // relative duality-gap style termination
  double dof_bound = 1e4;       // box |x_j| <= dof_bound keeps the program bounded
  double mu = 10.0;             // barrier parameter growth
  int max_outer = 80;
  int max_newton = 120;
};

// Returns an equivalent program whose dofs parametrize the affine
// solution set of the equality constraints. Solutions of the reduced
// program unpack to the original variables. Throws on inconsistent
// equalities.
LmiProgram eliminate_equalities(const LmiProgram& prog);

// Primal barrier interior-point solve. status=optimal/feasible implies
// every PSD constraint holds with margin and all equalities are
// satisfied; infeasible is heuristic (no strictly feasible point found).
SdpSolution sdp_solve(const LmiProgram& prog, const SdpOptions& opts = {});

}  // namespace mjls
