#include "pil/diagnostics.hpp"

#include "pil/error.hpp"
#include "pil/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pil::diagnostics {
namespace {

using harmonic::BulkGrid;
using surface::SurfaceGeometry;
using surface::TensorField;

double dot_max(const Field& f) { return f.size() ? f.abs().maxCoeff() : 0.0; }

Field dot(const Vec3Field& a, const Vec3Field& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3Field tangential(const SurfaceGeometry& geom, const Vec3Field& x) {
  const Field xn = dot(x, geom.normal);
  return {Field(x[0] - xn * geom.normal[0]), Field(x[1] - xn * geom.normal[1]), Field(x[2] - xn * geom.normal[2])};
}

Vec3Field cross(const Vec3Field& a, const Vec3Field& b) {
  return {Field(a[1] * b[2] - a[2] * b[1]), Field(a[2] * b[0] - a[0] * b[2]), Field(a[0] * b[1] - a[1] * b[0])};
}

Vec3Field zeros3(std::size_t n) { return {Field::Zero(n), Field::Zero(n), Field::Zero(n)}; }

// Derivative of f along the tangent field x.
Field directional(const SurfaceGeometry& geom, const Vec3Field& x, const Field& f) {
  return dot(x, surface::surface_gradient(geom, f));
}

// Solves the surface Poisson problem Lap_G chi = b for dS-mean-zero chi on the
// Nyquist-free subspace.
Field surface_poisson(const SurfaceGeometry& geom, const Field& b) {
  const Fourier2& four = geom.grid();
  const Field& dS = geom.area_density;
  const double total = dS.sum();
  auto mean = [&](const Field& f) { return (f * dS).sum() / total; };
  Field rhs = four.band_limit(b);
  rhs -= mean(rhs);
  const LinearMap op = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    const Field xb = four.band_limit(x.array());
    Field out = four.band_limit(surface::laplace_beltrami(geom, xb));
    out += mean(xb);
    y = out.matrix();
  };
  const LinearMap pre = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    y = four.apply_symbol(x.array(), [](double ku, double kv) {
           const double k2 = ku * ku + kv * kv;
           return k2 > 0.0 ? -1.0 / k2 : 1.0;
         }).matrix();
  };
  Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
  const KrylovResult res = gmres(op, pre, rhs.matrix(), x, 1e-11, 60, 600);
  if (!res.converged)
    fail(ErrorKind::EllipticNoConverge,
         "surface Poisson solve stalled at relative residual " + std::to_string(res.relative_residual));
  Field chi = four.band_limit(x.array());
  return chi - mean(chi);
}

double surface_l2(const SurfaceGeometry& geom, const Vec3Field& x) { return std::sqrt(geom.integrate(dot(x, x))); }

// 4th-order centred first derivative from five samples spaced by dt.
template <class T>
T centred(const std::vector<T>& f, double dt) {
  return (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * dt);
}

TensorField project(const SurfaceGeometry& geom, const TensorField& t) {
  const TensorField p = surface::tangent_projector(geom);
  TensorField out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Field acc = Field::Zero(geom.points());
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) acc += p[3 * i + k] * t[3 * k + l] * p[3 * l + j];
      out[3 * i + j] = acc;
    }
  return out;
}

Field contract(const TensorField& a, const TensorField& b) {
  Field out = Field::Zero(a[0].size());
  for (int i = 0; i < 9; ++i) out += a[i] * b[i];
  return out;
}

double bulk_sobolev2(const BulkGrid& g, const Vec3Field& u, int order) {
  std::vector<Field> layer(u.begin(), u.end());
  double total = 0.0;
  for (int m = 0; m <= order; ++m) {
    for (const Field& f : layer) total += g.integrate(f.square());
    if (m == order) break;
    std::vector<Field> next;
    for (const Field& f : layer) {
      const Vec3Field d = g.gradient(f);
      next.insert(next.end(), d.begin(), d.end());
    }
    layer.swap(next);
  }
  return total;
}

}  // namespace

InterfaceData interface_data(const Frame& f, const SimState& s) {
  InterfaceData d;
  d.v = fields::interface_trace(*f.plus, s.v);
  d.h = fields::interface_trace(*f.plus, s.h);
  d.hhat = f.minus ? fields::interface_trace(*f.minus, f.hhat) : zeros3(f.plus->slice());
  d.theta = dot(d.v, f.geom.normal);
  d.dgamma = evolution::kinematic_rhs(f.geom, *f.plus, s.v);
  return d;
}

ElectricField reconstruct_electric_field(const Frame& f, const Vec3Field& v,
                                         const std::array<Field, 2>& current_rate) {
  if (!f.minus) fail(ErrorKind::ValidationError, "electric field reconstruction needs the vacuum grid");
  const BulkGrid& minus = *f.minus;
  const SurfaceGeometry& geom = f.geom;
  ElectricField out;

  const Vec3Field dth = fields::solve_time_derivative_vacuum(minus, *f.plus, v, f.hhat, current_rate);
  const Vec3Field rot{Field(-dth[0]), Field(-dth[1]), Field(-dth[2])};
  const Vec3Field e0 = fields::curl_particular(minus, rot, &out.curl_flux_defect);
  const std::array<Vec3Field, 2> cycles = fields::cycle_fields(minus);

  // Tangential data on the interface: E_tan = (v.n) hhat x n.
  const Vec3Field hh = fields::interface_trace(minus, f.hhat);
  const Field theta = dot(fields::interface_trace(*f.plus, v), geom.normal);
  Vec3Field target = cross(hh, geom.normal);
  for (auto& c : target) c *= theta;
  const Vec3Field e0t = tangential(geom, fields::interface_trace(minus, e0));
  Vec3Field r0;
  for (int c = 0; c < 3; ++c) r0[c] = target[c] - e0t[c];

  // Least squares over surface gradients and the two cycle fields.
  const Field chi0 = surface_poisson(geom, surface::surface_divergence(geom, r0));
  const Vec3Field g0 = surface::surface_gradient(geom, chi0);
  for (int c = 0; c < 3; ++c) r0[c] -= g0[c];
  Field chis[2];
  Vec3Field rs[2];
  for (int i = 0; i < 2; ++i) {
    const Vec3Field ht = tangential(geom, fields::interface_trace(minus, cycles[i]));
    chis[i] = surface_poisson(geom, surface::surface_divergence(geom, ht));
    const Vec3Field gi = surface::surface_gradient(geom, chis[i]);
    for (int c = 0; c < 3; ++c) rs[i][c] = ht[c] - gi[c];
  }
  Eigen::Matrix2d m;
  Eigen::Vector2d b;
  for (int i = 0; i < 2; ++i) {
    b[i] = geom.integrate(dot(rs[i], r0));
    for (int j = 0; j < 2; ++j) m(i, j) = geom.integrate(dot(rs[i], rs[j]));
  }
  const Eigen::Vector2d c = m.ldlt().solve(b);
  out.cycle_coefficients = c;
  Vec3Field res;
  for (int k = 0; k < 3; ++k) res[k] = r0[k] - c[0] * rs[0][k] - c[1] * rs[1][k];
  out.tangential_residual = surface_l2(geom, res);
  const Field chi_surface = chi0 - c[0] * chis[0] - c[1] * chis[1];

  Vec3Field base;
  for (int k = 0; k < 3; ++k) base[k] = e0[k] + c[0] * cycles[0][k] + c[1] * cycles[1][k];
  const Field wall_data = -harmonic::wall_height(minus.side()) * minus.wall_trace(base[2]);
  const Field chi = harmonic::solve_elliptic(minus, Field(-minus.divergence(base)),
                                             harmonic::BoundaryData::dirichlet(chi_surface),
                                             harmonic::BoundaryData::neumann(wall_data));
  const Vec3Field gchi = minus.gradient(chi);
  for (int k = 0; k < 3; ++k) out.e[k] = base[k] + gchi[k];

  const double cell = minus.fourier().cell_area();
  out.input_power =
      ((minus.wall_trace(out.e[0]) * f.current[0] + minus.wall_trace(out.e[1]) * f.current[1]) * minus.wall_area())
          .sum() *
      cell;
  return out;
}

EnergyReport physical_energy(const Stepper& st, const SimState& s, const Frame& f, bool with_input) {
  EnergyReport r;
  const BulkGrid& plus = *f.plus;
  r.kinetic = 0.5 * plus.integrate(s.v[0].square() + s.v[1].square() + s.v[2].square());
  r.magnetic_plus = 0.5 * plus.integrate(s.h[0].square() + s.h[1].square() + s.h[2].square());
  if (f.minus) r.magnetic_vacuum = 0.5 * f.minus->integrate(dot(f.hhat, f.hhat));
  const double a = st.config().alpha;
  r.surface = a * a * f.geom.area();
  r.total = r.kinetic + r.magnetic_plus + r.magnetic_vacuum + r.surface;
  if (with_input && f.minus) {
    try {
      const ElectricField e = reconstruct_electric_field(f, s.v, st.current().sample(st.reference().grid(), s.t, true));
      r.input_power = e.input_power;
      r.reconstruction_residual = e.tangential_residual;
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::EllipticNoConverge) throw;
      r.input_power = std::numeric_limits<double>::quiet_NaN();
      r.input_power_valid = false;
    }
  }
  return r;
}

double energy_budget(const std::array<double, 3>& energy, const std::array<double, 3>& input, double dt) {
  return (energy[2] - energy[0]) / (2.0 * dt) - input[1];
}

Field upsilon_field(const SurfaceGeometry& geom, const Vec3Field& h, const Vec3Field& hhat) {
  const std::size_t n = geom.points();
  Field out(n);
  for (std::size_t p = 0; p < n; ++p) {
    const Eigen::Vector3d tu(geom.tangent_u[0][p], geom.tangent_u[1][p], geom.tangent_u[2][p]);
    const Eigen::Vector3d nn(geom.normal[0][p], geom.normal[1][p], geom.normal[2][p]);
    const Eigen::Vector3d e1 = tu.normalized();
    const Eigen::Vector3d e2 = nn.cross(e1);
    const Eigen::Vector3d a(h[0][p], h[1][p], h[2][p]);
    const Eigen::Vector3d b(hhat[0][p], hhat[1][p], hhat[2][p]);
    const double a1 = a.dot(e1), a2 = a.dot(e2), b1 = b.dot(e1), b2 = b.dot(e2);
    const double m11 = a1 * a1 + b1 * b1, m22 = a2 * a2 + b2 * b2, m12 = a1 * a2 + b1 * b2;
    // det M = (a1 b2 - a2 b1)^2, so the smaller eigenvalue is det / lambda_max
    // with no cancellation; collinear pairs give exactly zero.
    const double half = 0.5 * (m11 + m22);
    const double top = half + std::hypot(0.5 * (m11 - m22), m12);
    // A determinant inside its own rounding bound is taken as zero: the pair
    // cannot be told apart from a collinear one at working precision.
    double cross = a1 * b2 - a2 * b1;
    if (std::abs(cross) <= 16.0 * std::numeric_limits<double>::epsilon() * a.norm() * b.norm())
      cross = 0.0;
    out[p] = top > 0.0 ? cross * cross / top : 0.0;
  }
  return out;
}

Field upsilon_bruteforce(const SurfaceGeometry& geom, const Vec3Field& h, const Vec3Field& hhat) {
  const std::size_t n = geom.points();
  const double pi = 0.5 * kTwoPi;
  const int samples = 360;
  Field out(n);
  for (std::size_t p = 0; p < n; ++p) {
    const Eigen::Vector3d tu(geom.tangent_u[0][p], geom.tangent_u[1][p], geom.tangent_u[2][p]);
    const Eigen::Vector3d nn(geom.normal[0][p], geom.normal[1][p], geom.normal[2][p]);
    const Eigen::Vector3d e1 = tu.normalized();
    const Eigen::Vector3d e2 = nn.cross(e1);
    const Eigen::Vector3d a(h[0][p], h[1][p], h[2][p]);
    const Eigen::Vector3d b(hhat[0][p], hhat[1][p], hhat[2][p]);
    auto value = [&](double phi) {
      const Eigen::Vector3d dir = std::cos(phi) * e1 + std::sin(phi) * e2;
      const double x = dir.dot(a), y = dir.dot(b);
      return x * x + y * y;
    };
    int best = 0;
    double best_val = value(0.0);
    for (int k = 1; k < samples; ++k) {
      const double val = value(pi * k / samples);
      if (val < best_val) {
        best_val = val;
        best = k;
      }
    }
    // Golden-section refinement on the bracket around the best sample.
    double lo = pi * (best - 1) / samples, hi = pi * (best + 1) / samples;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = value(x1), f2 = value(x2);
    for (int it = 0; it < 60; ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = value(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = value(x2);
      }
    }
    out[p] = std::min({best_val, f1, f2});
  }
  return out;
}

double upsilon(const SurfaceGeometry& geom, const Vec3Field& h, const Vec3Field& hhat) {
  return upsilon_field(geom, h, hhat).minCoeff();
}

StabilityReport stability_monitors(const Stepper& st, const SimState& s, const Frame& f, fields::RtPressure which) {
  const InterfaceData d = interface_data(f, s);
  StabilityReport r;
  const Field hsq = dot(d.hhat, d.hhat);
  const fields::PressureParts parts =
      fields::pressure_decomposition(*f.plus, f.geom, s.v, s.h, hsq, st.config().alpha);
  r.rt_min = fields::rt_indicator(*f.plus, parts, which).minCoeff();
  r.upsilon = upsilon(f.geom, d.h, d.hhat);
  r.wall_gap = evolution::wall_gap(f.geom);
  r.chart_margin = st.reference().chart_radius() - s.gamma.abs().maxCoeff();
  // Planar current-vortex-sheet conditions with unit densities and a vacuum at rest.
  const Vec3Field vt = tangential(f.geom, d.v);
  const Field vsq = dot(vt, vt);
  const Field hsq_p = dot(d.h, d.h);
  const Vec3Field hxh = cross(d.h, d.hhat), vxh = cross(vt, d.h), vxhh = cross(vt, d.hhat);
  const Field first = 2.0 * (hsq_p + hsq) - vsq;
  const Field second = 2.0 * dot(hxh, hxh) - dot(vxh, vxh) - dot(vxhh, vxhh);
  r.syrovatskij_margin = std::min(first.minCoeff(), second.minCoeff());
  return r;
}

Field kappa_rate(const SurfaceGeometry& geom, const Vec3Field& v) {
  Field nlap = Field::Zero(geom.points());
  for (int c = 0; c < 3; ++c) nlap += geom.normal[c] * surface::laplace_beltrami(geom, v[c]);
  const TensorField jac = surface::tangential_jacobian(geom, v);
  const TensorField ii = surface::second_form_tensor(geom);
  return -nlap - 2.0 * contract(ii, jac);
}

IdentityResidualReport kappa_evolution_residuals(const Stepper& st, const std::vector<SimState>& window) {
  if (window.size() != 5) fail(ErrorKind::ValidationError, "curvature identities need five snapshots");
  if (st.config().filter.enabled || st.config().dealias)
    fail(ErrorKind::FilterContamination, "curvature identities are invalid on filtered trajectories");
  const double dt = window[3].t - window[2].t;
  const double alpha = st.config().alpha;
  IdentityResidualReport rep;
  rep.dt = dt;
  rep.n = st.reference().grid().nu();
  rep.nz = st.config().intervals;

  std::vector<Frame> frames;
  std::vector<Field> kappa, rate, area_f;
  std::vector<double> area, energy;
  for (const SimState& s : window) {
    frames.push_back(st.frame(s.gamma, s.t));
    const Frame& f = frames.back();
    kappa.push_back(f.geom.curvature);
    rate.push_back(kappa_rate(f.geom, fields::interface_trace(*f.plus, s.v)));
    area.push_back(f.geom.area());
    energy.push_back(physical_energy(st, s, f, false).total);
  }
  const Frame& f = frames[2];
  const SimState& s = window[2];
  const SurfaceGeometry& geom = f.geom;
  const InterfaceData d = interface_data(f, s);

  const surface::IdentityResiduals ids = surface::geometric_identities(geom);
  rep.simons = ids.simons;
  rep.lap_n = ids.normal_laplacian;
  rep.ds_transport = std::abs(centred(area, dt) - geom.integrate(geom.curvature * d.theta));

  // Material derivative of a pulled-back surface quantity.
  Vec3Field slip;
  for (int c = 0; c < 3; ++c) slip[c] = d.v[c] - d.dgamma * geom.reference->transversal()[c];
  auto material = [&](const std::vector<Field>& series) {
    return Field(centred(series, dt) + directional(geom, slip, series[2]));
  };

  const Field dk = material(kappa);
  rep.kappa_first_order = dot_max(dk - rate[2]);

  const Field d2k = material(rate);
  const harmonic::BulkGrid& plus = *f.plus;
  const Field& k = geom.curvature;
  const Field nk = harmonic::dn_apply(plus, k);
  const TensorField ii = surface::second_form_tensor(geom);
  const Field ii2 = contract(ii, ii);
  const Vec3Field gk = surface::surface_gradient(geom, k);
  const Field hsq = dot(d.hhat, d.hhat);
  const fields::PressureParts parts = fields::pressure_decomposition(plus, geom, s.v, s.h, hsq, alpha);
  Field vacuum_dn = Field::Zero(geom.points());
  if (f.minus) vacuum_dn = f.minus->interface_normal_derivative(Field(0.5 * dot(f.hhat, f.hhat)));

  std::map<std::string, Field> terms;
  terms["surface_tension"] = alpha * alpha * surface::laplace_beltrami(geom, nk);
  terms["curvature_gradient"] = -alpha * alpha * dot(gk, gk);
  terms["second_form_tension"] = alpha * alpha * ii2 * nk;
  terms["plasma_field"] = directional(geom, d.h, directional(geom, d.h, k));
  terms["vacuum_field"] = directional(geom, d.hhat, directional(geom, d.hhat, k));
  terms["rayleigh_taylor"] =
      (plus.interface_normal_derivative(Field(parts.q + parts.p_hat)) - vacuum_dn) * nk;
  {
    TensorField dii;
    for (int i = 0; i < 9; ++i) dii[i] = directional(geom, d.hhat, ii[i]);
    const TensorField a = project(geom, dii);
    const TensorField b = project(geom, surface::tangential_jacobian(geom, d.hhat));
    terms["vacuum_second_form"] = 4.0 * contract(a, b);
  }
  Field rhs = Field::Zero(geom.points());
  for (const auto& [name, t] : terms) {
    rhs += t;
    rep.second_order_terms[name] = dot_max(t);
  }
  rep.kappa_second_order = dot_max(d2k - rhs);

  const double input = f.minus ? physical_energy(st, s, f, true).input_power : 0.0;
  rep.energy_budget = std::abs(centred(energy, dt) - input);
  return rep;
}

SobolevReport sobolev_energies(const Stepper& st, const SimState& s, const Frame& f, int l, int k,
                               harmonic::DnCache* cache) {
  if (l < 0 || k < 2) fail(ErrorKind::ValidationError, "Sobolev orders need l >= 0 and k >= 2", "diagnostics.sobolev");
  harmonic::DnCache local;
  harmonic::DnCache& dns = cache ? *cache : local;
  const SurfaceGeometry& geom = f.geom;
  const harmonic::SurfacePowers pw(dns.get(*f.plus, geom, st.config().threads), geom);
  const InterfaceData d = interface_data(f, s);
  const Field& kappa = geom.curvature;
  const Field dtk = kappa_rate(geom, d.v);
  const Field dhk = directional(geom, d.h, kappa);
  const Field dhhk = directional(geom, d.hhat, kappa);
  const double alpha = st.config().alpha;

  SobolevReport r;
  r.e_l = pw.norm2(l, dtk) + pw.norm2(l + 1, kappa) + pw.norm2(l, dhk) + pw.norm2(l, dhhk);

  const fields::PressureParts parts =
      fields::pressure_decomposition(*f.plus, geom, s.v, s.h, dot(d.hhat, d.hhat), alpha);
  const Field t = fields::rt_indicator(*f.plus, parts);
  const Field full = pw.apply(k - 2, pw.apply(0, kappa));
  r.e_alpha = pw.norm2(k - 2, dtk) + alpha * alpha * pw.norm2(k - 1, kappa) + pw.norm2(k - 2, dhk) +
              geom.integrate(t * full.square());

  r.calE[0] = physical_energy(st, s, f, false).total;
  r.calE[1] = pw.norm2(k - 2, dtk) + alpha * alpha * pw.norm2(k - 1, kappa) + pw.norm2(k - 2, dhk) +
              pw.norm2(k - 2, dhhk);
  r.calE[2] = bulk_sobolev2(*f.plus, f.plus->curl(s.v), k - 1) + bulk_sobolev2(*f.plus, f.plus->curl(s.h), k - 1);
  r.calE[3] = s.fluxes.v.squaredNorm() + s.fluxes.h.squaredNorm();
  return r;
}

}  // namespace pil::diagnostics
