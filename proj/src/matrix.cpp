#include "mjls/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mjls {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = static_cast<int>(rows.size());
  cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  data_.reserve(static_cast<size_t>(rows_) * cols_);
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != cols_) throw std::invalid_argument("ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diag(const std::vector<double>& d) {
  Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
  for (size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
  if (cols_ != rhs.rows_) throw std::invalid_argument("matrix product dimension mismatch");
  Matrix out(rows_, rhs.cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int k = 0; k < cols_; ++k) {
      const double aik = (*this)(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < rhs.cols_; ++j) out(i, j) += aik * rhs(k, j);
    }
  }
  return out;
}

std::vector<double> Matrix::operator*(const std::vector<double>& v) const {
  if (cols_ != static_cast<int>(v.size())) throw std::invalid_argument("matrix-vector dimension mismatch");
  std::vector<double> out(rows_, 0.0);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) out[i] += (*this)(i, j) * v[j];
  return out;
}

Matrix Matrix::operator+(const Matrix& rhs) const {
  Matrix out = *this;
  out += rhs;
  return out;
}

Matrix Matrix::operator-(const Matrix& rhs) const {
  Matrix out = *this;
  out -= rhs;
  return out;
}

Matrix Matrix::operator*(double s) const {
  Matrix out = *this;
  out *= s;
  return out;
}

Matrix& Matrix::operator+=(const Matrix& rhs) {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) throw std::invalid_argument("matrix sum dimension mismatch");
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& rhs) {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) throw std::invalid_argument("matrix sum dimension mismatch");
  for (size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix operator*(double s, const Matrix& m) { return m * s; }

double Matrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return std::sqrt(s);
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

bool Matrix::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

Matrix& Matrix::symmetrize() {
  for (int i = 0; i < rows_; ++i)
    for (int j = i + 1; j < cols_; ++j) {
      const double v = 0.5 * ((*this)(i, j) + (*this)(j, i));
      (*this)(i, j) = v;
      (*this)(j, i) = v;
    }
  return *this;
}

double Matrix::symmetry_residual() const {
  double r = 0.0;
  for (int i = 0; i < rows_; ++i)
    for (int j = i + 1; j < cols_; ++j) r = std::max(r, std::abs((*this)(i, j) - (*this)(j, i)));
  return r;
}

namespace {

// LU with partial pivoting, in place; perm holds the row permutation.
// Returns false when a pivot is numerically zero.
bool lu_factor(Matrix& a, std::vector<int>& perm, int& sign) {
  const int n = a.rows();
  perm.resize(n);
  sign = 1;
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(a(k, k));
    for (int i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > best) {
        best = std::abs(a(i, k));
        piv = i;
      }
    }
    if (best == 0.0) return false;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(perm[k], perm[piv]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i) {
      a(i, k) /= a(k, k);
      const double lik = a(i, k);
      if (lik == 0.0) continue;
      for (int j = k + 1; j < n; ++j) a(i, j) -= lik * a(k, j);
    }
  }
  return true;
}

std::vector<double> lu_backsolve(const Matrix& lu, const std::vector<int>& perm, const std::vector<double>& b) {
  const int n = lu.rows();
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = b[perm[i]];
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
    x[i] /= lu(i, i);
  }
  return x;
}

}  // namespace

std::vector<double> lu_solve(const Matrix& a, const std::vector<double>& b) {
  if (!a.is_square() || a.rows() != static_cast<int>(b.size())) throw std::invalid_argument("lu_solve dimension mismatch");
  Matrix lu = a;
  std::vector<int> perm;
  int sign;
  if (!lu_factor(lu, perm, sign)) throw std::runtime_error("lu_solve: singular matrix");
  return lu_backsolve(lu, perm, b);
}

Matrix lu_solve(const Matrix& a, const Matrix& b) {
  Matrix lu = a;
  std::vector<int> perm;
  int sign;
  if (!lu_factor(lu, perm, sign)) throw std::runtime_error("lu_solve: singular matrix");
  Matrix x(a.rows(), b.cols());
  std::vector<double> col(a.rows());
  for (int j = 0; j < b.cols(); ++j) {
    for (int i = 0; i < a.rows(); ++i) col[i] = b(i, j);
    std::vector<double> sol = lu_backsolve(lu, perm, col);
    for (int i = 0; i < a.rows(); ++i) x(i, j) = sol[i];
  }
  return x;
}

Matrix inverse(const Matrix& a) { return lu_solve(a, Matrix::identity(a.rows())); }

double determinant(const Matrix& a) {
  Matrix lu = a;
  std::vector<int> perm;
  int sign;
  if (!lu_factor(lu, perm, sign)) return 0.0;
  double d = sign;
  for (int i = 0; i < a.rows(); ++i) d *= lu(i, i);
  return d;
}

bool try_cholesky(const Matrix& a, Matrix& l) {
  const int n = a.rows();
  l = Matrix(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return true;
}

std::vector<double> cholesky_solve(const Matrix& l, const std::vector<double>& b) {
  const int n = l.rows();
  std::vector<double> y(b);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) y[i] -= l(i, j) * y[j];
    y[i] /= l(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) y[i] -= l(j, i) * y[j];
    y[i] /= l(i, i);
  }
  return y;
}

AffineSpace solve_affine(const Matrix& a, const std::vector<double>& b, double tol) {
  const int m = a.rows();
  const int n = a.cols();
  Matrix r = a;
  std::vector<double> rhs = b;
  std::vector<int> orig_row(m);
  for (int i = 0; i < m; ++i) orig_row[i] = i;

  const double scale = std::max(1.0, r.max_abs());
  std::vector<int> pivot_col;
  int rank = 0;
  for (int col = 0; col < n && rank < m; ++col) {
    int piv = rank;
    double best = std::abs(r(rank, col));
    for (int i = rank + 1; i < m; ++i) {
      if (std::abs(r(i, col)) > best) {
        best = std::abs(r(i, col));
        piv = i;
      }
    }
    if (best <= tol * scale) continue;
    if (piv != rank) {
      for (int j = 0; j < n; ++j) std::swap(r(rank, j), r(piv, j));
      std::swap(rhs[rank], rhs[piv]);
      std::swap(orig_row[rank], orig_row[piv]);
    }
    const double p = r(rank, col);
    for (int j = col; j < n; ++j) r(rank, j) /= p;
    rhs[rank] /= p;
    for (int i = 0; i < m; ++i) {
      if (i == rank) continue;
      const double f = r(i, col);
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) r(i, j) -= f * r(rank, j);
      rhs[i] -= f * rhs[rank];
    }
    pivot_col.push_back(col);
    ++rank;
  }
  const double rhs_scale = [&] {
    double s = 1.0;
    for (double v : b) s = std::max(s, std::abs(v));
    return s;
  }();
  for (int i = rank; i < m; ++i) {
    if (std::abs(rhs[i]) > tol * rhs_scale * 100.0)
      throw std::runtime_error("inconsistent equality constraint (row " + std::to_string(orig_row[i]) + ")");
  }

  std::vector<bool> is_pivot(n, false);
  for (int c : pivot_col) is_pivot[c] = true;
  std::vector<int> free_col;
  for (int c = 0; c < n; ++c)
    if (!is_pivot[c]) free_col.push_back(c);

  AffineSpace out;
  out.x0.assign(n, 0.0);
  for (int i = 0; i < rank; ++i) out.x0[pivot_col[i]] = rhs[i];
  out.basis = Matrix(n, static_cast<int>(free_col.size()));
  for (size_t k = 0; k < free_col.size(); ++k) {
    out.basis(free_col[k], static_cast<int>(k)) = 1.0;
    for (int i = 0; i < rank; ++i) out.basis(pivot_col[i], static_cast<int>(k)) = -r(i, free_col[k]);
  }
  return out;
}

SymEig eig_sym(const Matrix& m) {
  if (!m.is_square()) throw std::invalid_argument("eig_sym: matrix not square");
  if (!m.all_finite()) throw std::invalid_argument("eig_sym: non-finite entries");
  const int n = m.rows();
  Matrix a = m;
  a.symmetrize();
  Matrix v = Matrix::identity(n);

  // cyclic Jacobi sweeps
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * std::max(1.0, a.frobenius_norm() * a.frobenius_norm())) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });

  SymEig out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (int k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (int i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

double lambda_max(const Matrix& sym) { return eig_sym(sym).values.back(); }
double lambda_min(const Matrix& sym) { return eig_sym(sym).values.front(); }

namespace {

// Simple two-sided balancing (radix 2) to improve QR conditioning.
void balance(Matrix& a) {
  const int n = a.rows();
  const double radix = 2.0;
  bool done = false;
  while (!done) {
    done = true;
    for (int i = 0; i < n; ++i) {
      double r = 0.0, c = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j != i) {
          c += std::abs(a(j, i));
          r += std::abs(a(i, j));
        }
      }
      if (c != 0.0 && r != 0.0) {
        double g = r / radix;
        double f = 1.0;
        const double s = c + r;
        while (c < g) {
          f *= radix;
          c *= radix * radix;
        }
        g = r * radix;
        while (c > g) {
          f /= radix;
          c /= radix * radix;
        }
        if ((c + r) / f < 0.95 * s) {
          done = false;
          const double ginv = 1.0 / f;
          for (int j = 0; j < n; ++j) a(i, j) *= ginv;
          for (int j = 0; j < n; ++j) a(j, i) *= f;
        }
      }
    }
  }
}

// Reduce to upper Hessenberg form by stabilized elementary similarity
// transformations.
void hessenberg(Matrix& a) {
  const int n = a.rows();
  for (int m = 1; m < n - 1; ++m) {
    double x = 0.0;
    int i = m;
    for (int j = m; j < n; ++j) {
      if (std::abs(a(j, m - 1)) > std::abs(x)) {
        x = a(j, m - 1);
        i = j;
      }
    }
    if (i != m) {
      for (int j = m - 1; j < n; ++j) std::swap(a(i, j), a(m, j));
      for (int j = 0; j < n; ++j) std::swap(a(j, i), a(j, m));
    }
    if (x != 0.0) {
      for (i = m + 1; i < n; ++i) {
        double y = a(i, m - 1);
        if (y != 0.0) {
          y /= x;
          a(i, m - 1) = y;
          for (int j = m; j < n; ++j) a(i, j) -= y * a(m, j);
          for (int j = 0; j < n; ++j) a(j, m) += y * a(j, i);
        }
      }
    }
  }
  for (int i = 2; i < n; ++i)
    for (int j = 0; j < i - 1; ++j) a(i, j) = 0.0;
}

inline double sign_with(double a, double b) { return b >= 0.0 ? std::abs(a) : -std::abs(a); }

// Francis double-shift QR on an upper Hessenberg matrix, eigenvalues only.
std::vector<std::complex<double>> hqr(Matrix& a) {
  const int n = a.rows();
  std::vector<std::complex<double>> w(n);
  double anorm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));
  if (anorm == 0.0) anorm = 1.0;

  int nn = n - 1;
  double t = 0.0;
  while (nn >= 0) {
    int its = 0;
    int l;
    do {
      for (l = nn; l >= 1; --l) {
        double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) + s == s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      double x = a(nn, nn);
      if (l == nn) {
        w[nn--] = std::complex<double>(x + t, 0.0);
      } else {
        double y = a(nn - 1, nn - 1);
        double ww = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          double p = 0.5 * (y - x);
          double q = p * p + ww;
          double z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_with(z, p);
            w[nn - 1] = w[nn] = std::complex<double>(x + z, 0.0);
            if (z != 0.0) w[nn] = std::complex<double>(x - ww / z, 0.0);
          } else {
            w[nn - 1] = std::complex<double>(x + p, -z);
            w[nn] = std::complex<double>(x + p, z);
          }
          nn -= 2;
        } else {
          if (its == 60) throw std::runtime_error("eig_general: QR iteration failed to converge");
          if (its == 10 || its == 20 || its == 30 || its == 40 || its == 50) {
            t += x;
            for (int i = 0; i <= nn; ++i) a(i, i) -= x;
            double s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            ww = -0.4375 * s * s;
          }
          ++its;
          int m;
          double p = 0.0, q = 0.0, r = 0.0;
          for (m = nn - 2; m >= l; --m) {
            const double z = a(m, m);
            const double rr = x - z;
            const double ss = y - z;
            p = (rr * ss - ww) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - rr - ss;
            r = a(m + 2, m + 1);
            const double sc = std::abs(p) + std::abs(q) + std::abs(r);
            p /= sc;
            q /= sc;
            r /= sc;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
            if (u + v == v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = a(k + 2, k - 1);
              const double x2 = std::abs(p) + std::abs(q) + std::abs(r);
              if (x2 != 0.0) {
                p /= x2;
                q /= x2;
                r /= x2;
              }
              x = x2;
            }
            const double s = sign_with(std::sqrt(p * p + q * q + r * r), p);
            if (s != 0.0) {
              if (k == m) {
                if (l != m) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              const double z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                double pp = a(k, j) + q * a(k + 1, j);
                if (k != nn - 1) {
                  pp += r * a(k + 2, j);
                  a(k + 2, j) -= pp * z;
                }
                a(k + 1, j) -= pp * y;
                a(k, j) -= pp * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                double pp = x * a(i, k) + y * a(i, k + 1);
                if (k != nn - 1) {
                  pp += z * a(i, k + 2);
                  a(i, k + 2) -= pp * r;
                }
                a(i, k + 1) -= pp * q;
                a(i, k) -= pp;
              }
            }
          }
        }
      }
    } while (l < nn - 1 && nn >= 0);
  }
  return w;
}

}  // namespace

std::vector<std::complex<double>> eig_general(Matrix a) {
  if (!a.is_square()) throw std::invalid_argument("eig_general: matrix not square");
  if (!a.all_finite()) throw std::invalid_argument("eig_general: non-finite entries");
  const int n = a.rows();
  if (n == 0) return {};
  if (n == 1) return {std::complex<double>(a(0, 0), 0.0)};
  balance(a);
  hessenberg(a);
  return hqr(a);
}

double spectral_abscissa(const Matrix& a) {
  double s = -std::numeric_limits<double>::infinity();
  for (const auto& ev : eig_general(a)) s = std::max(s, ev.real());
  return s;
}

std::string to_string(const Matrix& m, int precision) {
  std::ostringstream os;
  os.precision(precision);
  for (int i = 0; i < m.rows(); ++i) {
    os << (i == 0 ? "[" : " ");
    for (int j = 0; j < m.cols(); ++j) os << m(i, j) << (j + 1 < m.cols() ? ", " : "");
    os << (i + 1 < m.rows() ? ";\n" : "]");
  }
  return os.str();
}

}  // namespace mjls
