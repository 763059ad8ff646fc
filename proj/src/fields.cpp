#include "pil/fields.hpp"

#include "pil/error.hpp"

#include <algorithm>
#include <cmath>

namespace pil::fields {
namespace {

using harmonic::BoundaryData;
using harmonic::EllipticOptions;
using harmonic::EllipticReport;

// Relative mismatch between the volume source and the normal trace above which
// the data is rejected instead of corrected.
constexpr double kThetaRejectTolerance = 1e-2;

Field broadcast(const Field& slice, int levels) {
  Field out(slice.size() * levels);
  for (int k = 0; k < levels; ++k) out.segment(std::size_t(k) * slice.size(), slice.size()) = slice;
  return out;
}

// Inverse of the negative horizontal Laplacian, zero mean.
Field inverse_neg_laplacian(const Fourier2& four, const Field& f) {
  return four.apply_symbol(f, [](double ku, double kv) {
    const double k2 = ku * ku + kv * kv;
    return k2 > 0.0 ? 1.0 / k2 : 0.0;
  });
}

double surface_integral(const BulkGrid& grid, const Field& f) {
  return (f * grid.interface_area()).sum() * grid.fourier().cell_area();
}

}  // namespace

SurfaceCurrent::SurfaceCurrent(Eigen::Vector2d uniform, std::vector<Mode> modes, Law law, double frequency)
    : uniform_(std::move(uniform)), modes_(std::move(modes)), law_(law), frequency_(frequency) {
  if (!uniform_.allFinite()) fail(ErrorKind::NonFiniteInput, "surface current is not finite", "physics.j_hat");
  for (const Mode& m : modes_) {
    if (!std::isfinite(m.x_cos + m.x_sin + m.y_cos + m.y_sin))
      fail(ErrorKind::NonFiniteInput, "surface current mode is not finite", "physics.j_hat.modes");
  }
  if (divergence_defect() > 1e-12)
    fail(ErrorKind::ValidationError, "surface current must be divergence free (k . j = 0 per mode)",
         "physics.j_hat.modes");
}

bool SurfaceCurrent::is_zero() const {
  if (uniform_.norm() > 0.0) return false;
  for (const Mode& m : modes_)
    if (m.x_cos != 0.0 || m.x_sin != 0.0 || m.y_cos != 0.0 || m.y_sin != 0.0) return false;
  return true;
}

double SurfaceCurrent::factor(double t) const {
  t *= time_sign_;
  switch (law_) {
    case Law::Constant: return 1.0;
    case Law::Ramp: return frequency_ * t;
    case Law::Sine: return std::sin(frequency_ * t);
  }
  return 1.0;
}

double SurfaceCurrent::factor_rate(double t) const {
  const double s = time_sign_;
  t *= s;
  switch (law_) {
    case Law::Constant: return 0.0;
    case Law::Ramp: return s * frequency_;
    case Law::Sine: return s * frequency_ * std::cos(frequency_ * t);
  }
  return 0.0;
}

double SurfaceCurrent::divergence_defect() const {
  double worst = 0.0;
  for (const Mode& m : modes_) {
    const double scale = std::max({1.0, std::abs(m.x_cos) + std::abs(m.y_cos), std::abs(m.x_sin) + std::abs(m.y_sin)});
    worst = std::max(worst, std::abs(m.ku * m.x_cos + m.kv * m.y_cos) / scale);
    worst = std::max(worst, std::abs(m.ku * m.x_sin + m.kv * m.y_sin) / scale);
  }
  return worst;
}

std::array<Field, 2> SurfaceCurrent::sample(const Fourier2& grid, double t, bool rate) const {
  const Field u = grid.nodes_u();
  const Field v = grid.nodes_v();
  std::array<Field, 2> out{Field::Constant(grid.points(), uniform_.x()), Field::Constant(grid.points(), uniform_.y())};
  for (const Mode& m : modes_) {
    const Field phase = m.ku * u + m.kv * v;
    const Field c = phase.cos();
    const Field s = phase.sin();
    out[0] += m.x_cos * c + m.x_sin * s;
    out[1] += m.y_cos * c + m.y_sin * s;
  }
  const double f = rate ? factor_rate(t) : factor(t);
  out[0] *= f;
  out[1] *= f;
  return out;
}

SurfaceCurrent SurfaceCurrent::reversed() const {
  SurfaceCurrent out = *this;
  out.time_sign_ = -time_sign_;
  return out;
}

Vec3Field curl_particular(const BulkGrid& grid, const Vec3Field& f, double* flux_defect) {
  const auto& finv = grid.inverse_jacobian();
  const Field& jac = grid.jacobian();
  const std::size_t ns = grid.slice();
  const int nl = grid.levels();
  Field piola[3];
  for (int i = 0; i < 3; ++i) piola[i] = jac * (finv[3 * i] * f[0] + finv[3 * i + 1] * f[1] + finv[3 * i + 2] * f[2]);

  Field top = piola[2].head(ns);
  const double mean = top.mean();
  if (flux_defect) *flux_defect = std::abs(mean) * kTwoPi * kTwoPi;
  top -= mean;
  const Fourier2& four = grid.fourier();
  const Field psi = inverse_neg_laplacian(four, top);
  const Field w1 = broadcast(four.dv(psi), nl);
  const Field w2 = broadcast(Field(-four.du(psi)), nl);

  Field int1(grid.size()), int2(grid.size());
  Chebyshev::apply(grid.cheb().cumulative(), piola[0].data(), int1.data(), ns);
  Chebyshev::apply(grid.cheb().cumulative(), piola[1].data(), int2.data(), ns);
  const Field cov1 = w1 + int2;
  const Field cov2 = w2 - int1;

  Vec3Field u;
  for (int j = 0; j < 3; ++j) u[j] = finv[j] * cov1 + finv[3 + j] * cov2;
  return u;
}

std::array<Vec3Field, 2> cycle_fields(const BulkGrid& grid, int* iterations) {
  const Vec3Field& n = grid.interface_normal();
  std::array<Vec3Field, 2> out;
  for (int i = 0; i < 2; ++i) {
    EllipticReport rep;
    const Field psi = harmonic::solve_elliptic(grid, Field::Zero(grid.size()), BoundaryData::neumann(Field(-n[i])),
                                               BoundaryData::neumann(), {}, &rep);
    if (iterations) *iterations += rep.iterations;
    out[i] = grid.gradient(psi);
    out[i][i] += 1.0;
  }
  return out;
}

Vec3Field solve_divcurl_plus(const BulkGrid& grid, const Vec3Field& f, const Field& g, const Field& theta,
                             const Eigen::Vector2d& flux, RecoveryReport* report, const EllipticOptions& opts) {
  if (grid.side() != Side::Plus) fail(ErrorKind::ValidationError, "div-curl recovery runs on the plasma side");
  for (const Field& c : f) surface::require_finite(c, "curl data");
  surface::require_finite(g, "divergence data");
  surface::require_finite(theta, "normal trace");
  RecoveryReport local;

  // Compatibility between the divergence and the normal trace.
  const double area = surface_integral(grid, Field::Ones(grid.slice()));
  const double vol = grid.integrate(g);
  const double bnd = surface_integral(grid, theta);
  const double scale = grid.integrate(g.abs()) + surface_integral(grid, theta.abs());
  const double defect = vol - bnd;
  if (scale > 0.0 && std::abs(defect) / scale > kThetaRejectTolerance)
    fail(ErrorKind::IncompatibleData, "integral of the divergence does not match the integral of the normal trace (relative defect " +
                                          std::to_string(std::abs(defect) / scale) + ")");
  const Field theta_c = theta + defect / area;
  local.theta_correction = std::abs(defect / area);

  const Vec3Field u0 = curl_particular(grid, f, &local.curl_flux_defect);
  const std::size_t ns = grid.slice();

  // Gradient part fixing divergence and normal traces.
  const Vec3Field& n = grid.interface_normal();
  Field u0n = u0[0].head(ns) * n[0] + u0[1].head(ns) * n[1] + u0[2].head(ns) * n[2];
  EllipticReport rep;
  const Field phi = harmonic::solve_elliptic(grid, g - grid.divergence(u0), BoundaryData::neumann(theta_c - u0n),
                                             BoundaryData::neumann(Field(-u0[2].tail(ns))), opts, &rep);
  local.iterations += rep.iterations;
  const Vec3Field dphi = grid.gradient(phi);

  // Harmonic fields carrying the horizontal fluxes.
  const std::array<Vec3Field, 2> harm = cycle_fields(grid, &local.iterations);

  Vec3Field u;
  for (int c = 0; c < 3; ++c) u[c] = u0[c] + dphi[c];
  const double cell = grid.fourier().cell_area();
  Eigen::Matrix2d m;
  Eigen::Vector2d rhs;
  for (int r = 0; r < 2; ++r) {
    rhs[r] = flux[r] - (u[r].tail(ns) * grid.wall_area()).sum() * cell;
    for (int i = 0; i < 2; ++i) m(r, i) = (harm[i][r].tail(ns) * grid.wall_area()).sum() * cell;
  }
  const Eigen::Vector2d coef = m.fullPivLu().solve(rhs);
  for (int c = 0; c < 3; ++c) u[c] += coef[0] * harm[0][c] + coef[1] * harm[1][c];
  if (report) *report = local;
  return u;
}

Field gradient_trace(const BulkGrid& grid, const Vec3Field& a, const Vec3Field& b) {
  Vec3Field ga[3], gb[3];
  for (int j = 0; j < 3; ++j) {
    ga[j] = grid.gradient(a[j]);
    gb[j] = grid.gradient(b[j]);
  }
  Field out = Field::Zero(grid.size());
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out += ga[j][i] * gb[i][j];
  return out;
}

PressureParts pressure_decomposition(const BulkGrid& plus, const surface::SurfaceGeometry& geom,
                                     const Vec3Field& v, const Vec3Field& h, const Field& hhat_sq_interface,
                                     double alpha) {
  const std::size_t ns = plus.slice();
  const Field zero = Field::Zero(ns);
  PressureParts p;
  p.p_vv = harmonic::poisson_bulk(plus, Field(-gradient_trace(plus, v, v)), zero);
  p.p_hh = harmonic::poisson_bulk(plus, Field(-gradient_trace(plus, h, h)), zero);
  p.q = p.p_vv - p.p_hh;
  p.p_hat = harmonic::harmonic_extend(plus, Field(0.5 * hhat_sq_interface));
  p.p_kappa = alpha == 0.0 ? Field(Field::Zero(plus.size()))
                           : Field(alpha * alpha * harmonic::harmonic_extend(plus, geom.curvature));
  p.total = p.q + p.p_kappa + p.p_hat;
  p.interface_total = p.total.head(ns);
  return p;
}

WResidual w_residual(const BulkGrid& plus, const PressureParts& parts, const Vec3Field& h,
                     const Vec3Field& material_dv) {
  const Vec3Field hh = plus.advect(h, h);
  const Vec3Field dp = plus.gradient(parts.total);
  WResidual w;
  for (int c = 0; c < 3; ++c) w.bulk[c] = material_dv[c] - hh[c] + dp[c];
  w.normal_trace = normal_component(plus, w.bulk);
  return w;
}

Field rt_indicator(const BulkGrid& plus, const PressureParts& parts, RtPressure which) {
  const Field& p = which == RtPressure::Q ? parts.q : parts.total;
  return -plus.interface_normal_derivative(p);
}

Field normal_component(const BulkGrid& grid, const Vec3Field& u) {
  const std::size_t ns = grid.slice();
  const Vec3Field& n = grid.interface_normal();
  return u[0].head(ns) * n[0] + u[1].head(ns) * n[1] + u[2].head(ns) * n[2];
}

double max_abs(const Field& f) { return f.size() ? f.abs().maxCoeff() : 0.0; }

Vec3Field interface_trace(const BulkGrid& grid, const Vec3Field& u) {
  const std::size_t ns = grid.slice();
  return {u[0].head(ns), u[1].head(ns), u[2].head(ns)};
}

}  // namespace pil::fields
