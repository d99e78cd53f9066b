#pragma once

#include <complex>
#include <initializer_list>
#include <string>
#include <vector>

namespace mjls {

// Dense row-major double matrix. Everything in this project is desk
// scale (dims well under 100), so no effort is spent on blocking or
// sparsity.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(int n);
  static Matrix diag(const std::vector<double>& d);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  Matrix transpose() const;
  Matrix operator*(const Matrix& rhs) const;
  Matrix operator+(const Matrix& rhs) const;
  Matrix operator-(const Matrix& rhs) const;
  Matrix operator*(double s) const;
  Matrix& operator+=(const Matrix& rhs);
  Matrix& operator-=(const Matrix& rhs);
  Matrix& operator*=(double s);

  std::vector<double> operator*(const std::vector<double>& v) const;

  double trace() const;
  double frobenius_norm() const;
  double max_abs() const;
  bool all_finite() const;
  bool is_square() const { return rows_ == cols_; }

  // (M + M^T)/2, in place; returns *this.
  Matrix& symmetrize();
  double symmetry_residual() const;  // max |M - M^T|

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(double s, const Matrix& m);

// Solve A x = b by LU with partial pivoting. Throws std::runtime_error
// on singular A.
std::vector<double> lu_solve(const Matrix& a, const std::vector<double>& b);
Matrix lu_solve(const Matrix& a, const Matrix& b);
Matrix inverse(const Matrix& a);
double determinant(const Matrix& a);

// Cholesky factor L (lower) of a symmetric positive definite matrix.
// Returns false (leaving l unspecified) when a is not numerically PD.
bool try_cholesky(const Matrix& a, Matrix& l);
std::vector<double> cholesky_solve(const Matrix& l, const std::vector<double>& b);

// Affine solution set {x : A x = b} as x = x0 + basis * z.
struct AffineSpace {
  std::vector<double> x0;
  Matrix basis;  // columns span the nullspace of A
};
// Throws std::runtime_error naming the first inconsistent row.
AffineSpace solve_affine(const Matrix& a, const std::vector<double>& b, double tol = 1e-10);

// Symmetric eigendecomposition by cyclic Jacobi rotations.
// values ascending; vectors column k is the eigenvector of values[k].
struct SymEig {
  std::vector<double> values;
  Matrix vectors;
};
SymEig eig_sym(const Matrix& m);

double lambda_max(const Matrix& sym);
double lambda_min(const Matrix& sym);

// Eigenvalues of a general real square matrix (balance + Hessenberg +
// shifted QR). Used for the moment-operator Hurwitz test.
std::vector<std::complex<double>> eig_general(Matrix a);

// max over eigenvalues of the real part
double spectral_abscissa(const Matrix& a);

std::string to_string(const Matrix& m, int precision = 6);

}  // namespace mjls
