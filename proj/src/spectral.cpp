#include "pil/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace pil {

namespace {
// The FFTW planner is not reentrant; plan execution on new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct Fourier2::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
  }
};

Fourier2::Fourier2(int nu, int nv) : nu_(nu), nv_(nv) {}
Fourier2::~Fourier2() = default;

const Fourier2::Plans& Fourier2::plans(int count) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = plans_.find(count);
  if (it != plans_.end()) return *it->second;
  auto p = std::make_unique<Plans>();
  {
    std::lock_guard<std::mutex> plock(planner_mutex());
    int dims[2] = {nv_, nu_};
    const int real_dist = int(points());
    const int spec_dist = int(modes());
    std::vector<double> r(points() * count);
    std::vector<fftw_complex> c(modes() * count);
    p->fwd = fftw_plan_many_dft_r2c(2, dims, count, r.data(), nullptr, 1, real_dist, c.data(),
                                    nullptr, 1, spec_dist, FFTW_ESTIMATE | FFTW_UNALIGNED);
    p->inv = fftw_plan_many_dft_c2r(2, dims, count, c.data(), nullptr, 1, spec_dist, r.data(),
                                    nullptr, 1, real_dist,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
  }
  auto& ref = *p;
  plans_.emplace(count, std::move(p));
  return ref;
}

void Fourier2::forward(const double* in, cplx* out, int count) const {
  const auto& p = plans(count);
  fftw_execute_dft_r2c(p.fwd, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
}

void Fourier2::inverse(const cplx* in, double* out, int count) const {
  const auto& p = plans(count);
  std::vector<cplx> scratch(in, in + modes() * count);
  fftw_execute_dft_c2r(p.inv, reinterpret_cast<fftw_complex*>(scratch.data()), out);
  const double scale = 1.0 / double(points());
  for (std::size_t k = 0; k < points() * count; ++k) out[k] *= scale;
}

void Fourier2::derivatives(const double* in, double* du, double* dv, int count) const {
  const int nh = nu_ / 2 + 1;
  std::vector<cplx> spec(modes() * count), work(modes() * count);
  forward(in, spec.data(), count);
  const cplx I(0.0, 1.0);
  if (du) {
    for (int c = 0; c < count; ++c)
      for (int j = 0; j < nv_; ++j)
        for (int i = 0; i < nh; ++i) {
          const std::size_t k = c * modes() + std::size_t(j) * nh + i;
          work[k] = I * ku_odd(i) * spec[k];
        }
    inverse(work.data(), du, count);
  }
  if (dv) {
    for (int c = 0; c < count; ++c)
      for (int j = 0; j < nv_; ++j)
        for (int i = 0; i < nh; ++i) {
          const std::size_t k = c * modes() + std::size_t(j) * nh + i;
          work[k] = I * kv_odd(j) * spec[k];
        }
    inverse(work.data(), dv, count);
  }
}

void Fourier2::divergence(const double* a, const double* b, double* out, int count) const {
  const int nh = nu_ / 2 + 1;
  std::vector<cplx> sa(modes() * count), sb(modes() * count);
  forward(a, sa.data(), count);
  forward(b, sb.data(), count);
  const cplx I(0.0, 1.0);
  for (int c = 0; c < count; ++c)
    for (int j = 0; j < nv_; ++j)
      for (int i = 0; i < nh; ++i) {
        const std::size_t k = c * modes() + std::size_t(j) * nh + i;
        sa[k] = I * (ku_odd(i) * sa[k] + kv_odd(j) * sb[k]);
      }
  inverse(sa.data(), out, count);
}

Field Fourier2::du(const Field& f) const {
  Field out(f.size());
  derivatives(f.data(), out.data(), nullptr, int(f.size() / points()));
  return out;
}

Field Fourier2::dv(const Field& f) const {
  Field out(f.size());
  derivatives(f.data(), nullptr, out.data(), int(f.size() / points()));
  return out;
}

Field Fourier2::laplacian(const Field& f) const {
  return apply_symbol(
      f, [](double a, double b) { return -(a * a + b * b); }, int(f.size() / points()));
}

Field Fourier2::apply_symbol(const Field& f, const std::function<double(double, double)>& symbol,
                             int count) const {
  const int nh = nu_ / 2 + 1;
  std::vector<cplx> spec(modes() * count);
  forward(f.data(), spec.data(), count);
  std::vector<double> sym(modes());
  for (int j = 0; j < nv_; ++j)
    for (int i = 0; i < nh; ++i) sym[std::size_t(j) * nh + i] = symbol(ku_odd(i), kv_odd(j));
  for (int c = 0; c < count; ++c)
    for (std::size_t k = 0; k < modes(); ++k) spec[c * modes() + k] *= sym[k];
  Field out(f.size());
  inverse(spec.data(), out.data(), count);
  return out;
}

Field Fourier2::band_limit(const Field& f) const {
  const int nh = nu_ / 2 + 1;
  const int count = int(f.size() / points());
  std::vector<cplx> spec(modes() * count);
  forward(f.data(), spec.data(), count);
  for (int c = 0; c < count; ++c)
    for (int j = 0; j < nv_; ++j)
      for (int i = 0; i < nh; ++i)
        if (nyquist_u(i) || nyquist_v(j)) spec[c * modes() + std::size_t(j) * nh + i] = 0.0;
  Field out(f.size());
  inverse(spec.data(), out.data(), count);
  return out;
}

Field Fourier2::nodes_u() const {
  Field out(points());
  for (int j = 0; j < nv_; ++j)
    for (int i = 0; i < nu_; ++i) out[std::size_t(j) * nu_ + i] = u(i);
  return out;
}

Field Fourier2::nodes_v() const {
  Field out(points());
  for (int j = 0; j < nv_; ++j)
    for (int i = 0; i < nu_; ++i) out[std::size_t(j) * nu_ + i] = v(j);
  return out;
}

Chebyshev::Chebyshev(int intervals) : n_(intervals) {
  const int n = n_;
  const int m = n + 1;
  Eigen::VectorXd x(m);
  for (int j = 0; j < m; ++j) x[j] = std::cos(M_PI * j / n);
  s_ = 0.5 * (1.0 - x.array());

  // Differentiation in x (Trefethen's construction), then d/ds = -2 d/dx.
  Eigen::MatrixXd dx(m, m);
  auto c = [n](int j) { return (j == 0 || j == n) ? 2.0 : 1.0; };
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j)
        dx(i, j) = (c(i) / c(j)) * ((i + j) % 2 ? -1.0 : 1.0) / (x[i] - x[j]);
      else
        dx(i, j) = 0.0;
  for (int i = 0; i < m; ++i) dx(i, i) = -dx.row(i).sum();
  d1_ = -2.0 * dx;
  d2_ = d1_ * d1_;

  // Values -> Chebyshev coefficients, antiderivative in x, evaluate at nodes.
  Eigen::MatrixXd t(m, m);  // t(j,k) = T_k(x_j)
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k) t(j, k) = std::cos(M_PI * j * k / n);
  Eigen::MatrixXd to_coef(m, m);
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      to_coef(k, j) = (2.0 / n) * t(j, k) / c(j) / c(k);
  // Antiderivative coefficients (degree up to n+1).
  Eigen::MatrixXd integ = Eigen::MatrixXd::Zero(m + 1, m);
  for (int k = 0; k < m; ++k) {
    if (k == 0) {
      integ(1, 0) += 1.0;
    } else if (k == 1) {
      integ(2, 1) += 0.25;
    } else {
      integ(k + 1, k) += 0.5 / (k + 1);
      integ(k - 1, k) -= 0.5 / (k - 1);
    }
  }
  Eigen::MatrixXd eval(m, m + 1), eval_top(1, m + 1);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k <= m; ++k) eval(j, k) = std::cos(k * std::acos(std::clamp(x[j], -1.0, 1.0)));
  for (int k = 0; k <= m; ++k) eval_top(0, k) = 1.0;  // T_k(1)
  // int_0^s f ds' = 1/2 (F(1) - F(x)).
  Eigen::MatrixXd anti = integ * to_coef;
  q_ = 0.5 * (Eigen::MatrixXd::Ones(m, 1) * (eval_top * anti) - eval * anti);
  w_ = q_.row(n).transpose();
}

void Chebyshev::apply(const Eigen::MatrixXd& mat, const double* in, double* out,
                      std::size_t slice) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> a(in, mat.cols(), Eigen::Index(slice));
  Eigen::Map<RowMat> b(out, mat.rows(), Eigen::Index(slice));
  b.noalias() = mat * a;
}

}  // namespace pil
