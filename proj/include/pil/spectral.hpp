#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>

namespace pil {

using cplx = std::complex<double>;
using Field = Eigen::ArrayXd;
using Vec3Field = std::array<Field, 3>;

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Uniform periodic grid on [0,2pi)^2 with u the fast index. Transforms act on
// `count` consecutive slices so bulk fields (one slice per vertical node) reuse
// the same plans.
class Fourier2 {
 public:
  Fourier2(int nu, int nv);
  ~Fourier2();
  Fourier2(const Fourier2&) = delete;
  Fourier2& operator=(const Fourier2&) = delete;

  int nu() const { return nu_; }
  int nv() const { return nv_; }
  std::size_t points() const { return std::size_t(nu_) * nv_; }
  std::size_t modes() const { return std::size_t(nu_ / 2 + 1) * nv_; }

  // Wavenumbers for spectral index (i along u in [0,nu/2], j along v).
  double ku(int i) const { return i; }
  double kv(int j) const { return j <= nv_ / 2 ? j : j - nv_; }
  bool nyquist_u(int i) const { return 2 * i == nu_; }
  bool nyquist_v(int j) const { return 2 * j == nv_; }
  // Wavenumber used by odd derivatives: zero on the Nyquist line.
  double ku_odd(int i) const { return nyquist_u(i) ? 0.0 : ku(i); }
  double kv_odd(int j) const { return nyquist_v(j) ? 0.0 : kv(j); }

  double u(int i) const { return kTwoPi * i / nu_; }
  double v(int j) const { return kTwoPi * j / nv_; }
  double cell_area() const { return kTwoPi * kTwoPi / double(points()); }

  void forward(const double* in, cplx* out, int count = 1) const;
  // Normalised inverse: inverse(forward(f)) == f.
  void inverse(const cplx* in, double* out, int count = 1) const;

  // Spectral first derivatives of `count` stacked slices; either output may be null.
  void derivatives(const double* in, double* du, double* dv, int count = 1) const;
  // du(a) + dv(b) computed with a single inverse transform.
  void divergence(const double* a, const double* b, double* out, int count = 1) const;

  Field du(const Field& f) const;
  Field dv(const Field& f) const;
  Field laplacian(const Field& f) const;
  // Multiply each Fourier mode by symbol(ku, kv); used for filters and smoothing.
  Field apply_symbol(const Field& f, const std::function<double(double, double)>& symbol,
                     int count = 1) const;
  // Zero the Nyquist lines so the field lives in the resolved subspace.
  Field band_limit(const Field& f) const;

  Field nodes_u() const;
  Field nodes_v() const;

 private:
  struct Plans;
  const Plans& plans(int count) const;

  int nu_, nv_;
  mutable std::mutex mutex_;
  mutable std::map<int, std::unique_ptr<Plans>> plans_;
};

// Chebyshev-Lobatto nodes on s in [0,1], s_0 = 0 and s_n = 1.
class Chebyshev {
 public:
  explicit Chebyshev(int intervals);

  int intervals() const { return n_; }
  int nodes() const { return n_ + 1; }
  const Eigen::VectorXd& s() const { return s_; }
  const Eigen::MatrixXd& d1() const { return d1_; }
  const Eigen::MatrixXd& d2() const { return d2_; }
  // Clenshaw-Curtis weights for the integral over [0,1].
  const Eigen::VectorXd& weights() const { return w_; }
  // Row i integrates the interpolant from 0 to s_i.
  const Eigen::MatrixXd& cumulative() const { return q_; }

  // out = M * in, with `in` viewed as nodes() rows of `slice` values each.
  static void apply(const Eigen::MatrixXd& m, const double* in, double* out, std::size_t slice);

 private:
  int n_;
  Eigen::VectorXd s_, w_;
  Eigen::MatrixXd d1_, d2_, q_;
};

}  // namespace pil
