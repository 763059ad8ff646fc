#include "pil/evolution.hpp"

#include "pil/error.hpp"
#include "pil/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace pil::evolution {
namespace {

using harmonic::BoundaryData;
using harmonic::EllipticOptions;
using harmonic::EllipticReport;
using harmonic::Side;

Vec3Field axpy(const Vec3Field& a, double c, const Vec3Field& b) {
  return {Field(a[0] + c * b[0]), Field(a[1] + c * b[1]), Field(a[2] + c * b[2])};
}

Vec3Field cross(const Vec3Field& a, const Vec3Field& b) {
  return {Field(a[1] * b[2] - a[2] * b[1]), Field(a[2] * b[0] - a[0] * b[2]), Field(a[0] * b[1] - a[1] * b[0])};
}

double vmax(const Vec3Field& a) {
  return std::max({fields::max_abs(a[0]), fields::max_abs(a[1]), fields::max_abs(a[2])});
}

Eigen::Vector2d wall_integral(const BulkGrid& g, const Vec3Field& a) {
  const double cell = g.fourier().cell_area();
  return {(g.wall_trace(a[0]) * g.wall_area()).sum() * cell, (g.wall_trace(a[1]) * g.wall_area()).sum() * cell};
}

SimState combine(const SimState& s, double c, const Rates& r) {
  SimState out;
  out.t = s.t;
  out.step = s.step;
  out.gamma = s.gamma + c * r.gamma;
  out.v = axpy(s.v, c, r.v);
  out.h = axpy(s.h, c, r.h);
  out.fluxes.v = s.fluxes.v + c * r.fluxes.v;
  out.fluxes.h = s.fluxes.h + c * r.fluxes.h;
  return out;
}

}  // namespace

Field kinematic_rhs(const surface::SurfaceGeometry& geom, const BulkGrid& plus, const Vec3Field& v) {
  const Field& tr = geom.transversality;
  if (tr.minCoeff() < 0.5)
    fail(ErrorKind::TransversalityLoss,
         "nu . n dropped to " + std::to_string(tr.minCoeff()) + " on the interface (minimum 0.5)");
  return fields::normal_component(plus, v) / tr;
}

Field effective_pressure(const BulkGrid& plus, const surface::SurfaceGeometry& geom, const Vec3Field& v,
                         const Vec3Field& h, const Field& hhat_sq_interface, double alpha,
                         const Field* initial_guess) {
  const Vec3Field vv = plus.advect(v, v);
  const Vec3Field hh = plus.advect(h, h);
  const Field source = -plus.divergence(axpy(vv, -1.0, hh));
  Field trace = 0.5 * hhat_sq_interface;
  if (alpha != 0.0) trace += alpha * alpha * geom.curvature;
  EllipticOptions opts;
  opts.initial_guess = initial_guess;
  return harmonic::solve_elliptic(plus, source, BoundaryData::dirichlet(trace), BoundaryData::neumann(), opts);
}

BulkRates bulk_rhs(const BulkGrid& plus, const Vec3Field& v, const Vec3Field& h, const Field& pressure,
                   const Vec3Field& grid_velocity) {
  const Vec3Field rel = axpy(v, -1.0, grid_velocity);
  const Vec3Field dp = plus.gradient(pressure);
  const Vec3Field a = plus.advect(rel, v);
  const Vec3Field b = plus.advect(h, h);
  const Vec3Field c = plus.advect(rel, h);
  const Vec3Field d = plus.advect(h, v);
  BulkRates out;
  for (int i = 0; i < 3; ++i) {
    out.v[i] = b[i] - a[i] - dp[i];
    out.h[i] = d[i] - c[i];
  }
  return out;
}

Fluxes flux_rhs(const BulkGrid& plus, const Vec3Field& v, const Vec3Field& h, const Field& pressure) {
  const Vec3Field dp = plus.gradient(pressure);
  const Vec3Field vv = plus.advect(v, v), hh = plus.advect(h, h);
  const Vec3Field hv = plus.advect(h, v), vh = plus.advect(v, h);
  Vec3Field mom, far;
  for (int i = 0; i < 3; ++i) {
    mom[i] = hh[i] - vv[i] - dp[i];
    far[i] = hv[i] - vh[i];
  }
  return {wall_integral(plus, mom), wall_integral(plus, far)};
}

TransportPair transport_pair(const BulkGrid& plus, const Vec3Field& v, const Vec3Field& h) {
  const Vec3Field w = plus.curl(v), j = plus.curl(h);
  return {axpy(w, -1.0, j), axpy(w, 1.0, j)};
}

Vec3Field gradient_cross_trace(const BulkGrid& plus, const Vec3Field& v, const Vec3Field& h) {
  Vec3Field out{Field::Zero(plus.size()), Field::Zero(plus.size()), Field::Zero(plus.size())};
  for (int l = 0; l < 3; ++l) {
    const Vec3Field c = cross(plus.gradient(v[l]), plus.gradient(h[l]));
    for (int i = 0; i < 3; ++i) out[i] += c[i];
  }
  return out;
}

TransportPair transport_rhs(const BulkGrid& plus, const Vec3Field& v, const Vec3Field& h) {
  const TransportPair p = transport_pair(plus, v, h);
  const Vec3Field up = axpy(v, 1.0, h), um = axpy(v, -1.0, h);
  const Vec3Field tr = gradient_cross_trace(plus, v, h);
  const Vec3Field a = plus.advect(up, p.xi), b = plus.advect(p.xi, up);
  const Vec3Field c = plus.advect(um, p.eta), d = plus.advect(p.eta, um);
  TransportPair out;
  for (int i = 0; i < 3; ++i) {
    out.xi[i] = b[i] - a[i] + 2.0 * tr[i];
    out.eta[i] = d[i] - c[i] - 2.0 * tr[i];
  }
  return out;
}

double leray_project(const BulkGrid& grid, Vec3Field& u, bool tangential, double* mean_normal, int* iterations) {
  const std::size_t ns = grid.slice();
  Field un = fields::normal_component(grid, u);
  const Field wall = harmonic::wall_height(grid.side()) * grid.wall_trace(u[2]);
  const Field source = grid.divergence(u);
  // Shift the interface data by the constant that makes the discrete
  // divergence theorem hold exactly. Without `tangential` this constant is the
  // whole interface datum (only the mean normal flux survives); with it the
  // shift is at truncation level and is reported through mean_normal.
  const double cell = grid.fourier().cell_area();
  const double area = grid.interface_area().sum() * cell;
  const double out_sign = harmonic::orientation(grid.side());
  const double wall_flux = (wall * grid.wall_area()).sum() * cell;
  const double base = tangential ? out_sign * (un * grid.interface_area()).sum() * cell : 0.0;
  const double shift = out_sign * (grid.integrate(source) - wall_flux - base) / area;
  if (mean_normal) {
    const double mean = (un * grid.interface_area()).sum() / grid.interface_area().sum();
    *mean_normal = tangential ? std::abs(shift) : std::abs(mean);
  }
  const Field interface = tangential ? Field(un + shift) : Field(Field::Constant(ns, shift));
  EllipticOptions opts;
  opts.compatibility_tolerance = 1e-8;
  EllipticReport rep;
  const Field phi = harmonic::solve_elliptic(grid, source, BoundaryData::neumann(interface),
                                             BoundaryData::neumann(wall), opts, &rep);
  if (iterations) *iterations += rep.iterations;
  const Vec3Field g = grid.gradient(phi);
  for (int i = 0; i < 3; ++i) u[i] -= g[i];
  return vmax(g);
}

Field exp_filter(const Fourier2& grid, const Field& f, const FilterConfig& cfg, int levels) {
  const double kc = 0.5 * std::min(grid.nu(), grid.nv());
  return grid.apply_symbol(
      f,
      [&](double ku, double kv) { return std::exp(-cfg.strength * std::pow(std::hypot(ku, kv) / kc, cfg.order)); },
      levels);
}

Field dealias(const Fourier2& grid, const Field& f, int levels) {
  const double cu = grid.nu() / 3.0, cv = grid.nv() / 3.0;
  return grid.apply_symbol(
      f, [&](double ku, double kv) { return std::abs(ku) <= cu && std::abs(kv) <= cv ? 1.0 : 0.0; }, levels);
}

double wall_gap(const surface::SurfaceGeometry& geom) {
  const Field& z = geom.position[2];
  return std::min(1.0 - z.maxCoeff(), z.minCoeff() + 1.0);
}

Stepper::Stepper(std::shared_ptr<const surface::ReferenceSurface> ref, StepperConfig cfg, SurfaceCurrent current)
    : ref_(std::move(ref)), cfg_(cfg), current_(std::move(current)) {
  if (!(cfg_.dt > 0.0)) fail(ErrorKind::ValidationError, "time step must be positive", "stepper.dt");
  if (!(cfg_.alpha >= 0.0 && cfg_.alpha <= 1.0))
    fail(ErrorKind::ValidationError, "alpha must lie in [0,1]", "physics.alpha");
  ref_plus_ = std::make_shared<BulkGrid>(harmonic::reference_grid(*ref_, Side::Plus, cfg_.intervals));
  ref_minus_ = std::make_shared<BulkGrid>(harmonic::reference_grid(*ref_, Side::Minus, cfg_.intervals));
}

Frame Stepper::frame(const Field& gamma, double t) const {
  Frame f;
  f.geom = surface::build_geometry(ref_, surface::HeightField(gamma));
  f.current = current_.sample(ref_->grid(), t);
  const bool vacuum = !current_.is_zero() && current_.factor(t) != 0.0;
  std::shared_ptr<BulkGrid> grids[2];
  parallel_for(vacuum ? 2 : 1, cfg_.threads, [&](std::size_t i) {
    const BulkGrid& reference = i == 0 ? *ref_plus_ : *ref_minus_;
    grids[i] = std::make_shared<BulkGrid>(harmonic::harmonic_coordinates(f.geom, reference));
  });
  f.plus = grids[0];
  if (vacuum) {
    f.minus = grids[1];
    f.hhat = fields::solve_vacuum_field(*f.minus, f.current);
  }
  return f;
}

Rates Stepper::rates(const SimState& s, const Frame& f) const {
  const BulkGrid& plus = *f.plus;
  Rates r;
  r.gamma = kinematic_rhs(f.geom, plus, s.v);
  r.grid_velocity = harmonic::coordinate_velocity(f.geom, *ref_plus_, r.gamma);
  Field hsq = Field::Zero(plus.slice());
  if (f.minus) {
    const Vec3Field tr = fields::interface_trace(*f.minus, f.hhat);
    hsq = tr[0].square() + tr[1].square() + tr[2].square();
  }
  r.pressure = effective_pressure(plus, f.geom, s.v, s.h, hsq, cfg_.alpha);
  const BulkRates b = bulk_rhs(plus, s.v, s.h, r.pressure, r.grid_velocity);
  r.v = b.v;
  r.h = b.h;
  r.fluxes = flux_rhs(plus, s.v, s.h, r.pressure);
  return r;
}

SimState Stepper::step(const SimState& s, StepReport* report) const {
  const double dt = cfg_.dt;
  SimState next;
  int stage = 0;
  try {
    stage = 1;
    const Rates k1 = rates(s);
    stage = 2;
    SimState s2 = combine(s, 0.5 * dt, k1);
    s2.t = s.t + 0.5 * dt;
    const Rates k2 = rates(s2);
    stage = 3;
    SimState s3 = combine(s, 0.5 * dt, k2);
    s3.t = s.t + 0.5 * dt;
    const Rates k3 = rates(s3);
    stage = 4;
    SimState s4 = combine(s, dt, k3);
    s4.t = s.t + dt;
    const Rates k4 = rates(s4);
    stage = 5;
    next = s;
    const double w1 = dt / 6.0, w2 = dt / 3.0;
    next.gamma = s.gamma + w1 * (k1.gamma + k4.gamma) + w2 * (k2.gamma + k3.gamma);
    for (int i = 0; i < 3; ++i) {
      next.v[i] = s.v[i] + w1 * (k1.v[i] + k4.v[i]) + w2 * (k2.v[i] + k3.v[i]);
      next.h[i] = s.h[i] + w1 * (k1.h[i] + k4.h[i]) + w2 * (k2.h[i] + k3.h[i]);
    }
    next.fluxes.v = s.fluxes.v + w1 * (k1.fluxes.v + k4.fluxes.v) + w2 * (k2.fluxes.v + k3.fluxes.v);
    next.fluxes.h = s.fluxes.h + w1 * (k1.fluxes.h + k4.fluxes.h) + w2 * (k2.fluxes.h + k3.fluxes.h);
    next.t = s.t + dt;
    next.step = s.step + 1;
    StepReport local;
    local.cfl = vmax(s.v) * dt / (kTwoPi / std::min(ref_->grid().nu(), ref_->grid().nv()));
    clean(next, &local);
    if (report) *report = local;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::StepRejected) throw;
    const std::string where = stage <= 4 ? "stage " + std::to_string(stage) : std::string("post-processing");
    fail(ErrorKind::StepRejected, "step at t=" + std::to_string(s.t) + " rejected in " + where + ": " +
                                      kind_name(e.kind()) + ": " + e.what());
  }
  return next;
}

void Stepper::clean(SimState& s, StepReport* report) const {
  StepReport local = report ? *report : StepReport{};
  const Fourier2& four = ref_->grid();
  const int nl = ref_plus_->levels();
  if (cfg_.filter.enabled || cfg_.dealias) {
    auto smooth = [&](const Field& f, int levels) {
      Field g = f;
      if (cfg_.filter.enabled) g = exp_filter(four, g, cfg_.filter, levels);
      if (cfg_.dealias) g = dealias(four, g, levels);
      local.filter_change = std::max(local.filter_change, fields::max_abs(g - f));
      return g;
    };
    s.gamma = smooth(s.gamma, 1);
    for (int i = 0; i < 3; ++i) {
      s.v[i] = smooth(s.v[i], nl);
      s.h[i] = smooth(s.h[i], nl);
    }
  }
  const surface::SurfaceGeometry geom = surface::build_geometry(ref_, surface::HeightField(s.gamma));
  check_state(geom);
  if (cfg_.project) {
    const BulkGrid plus = harmonic::harmonic_coordinates(geom, *ref_plus_);
    local.projection_v = leray_project(plus, s.v, false, &local.volume_correction, &local.elliptic_iterations);
    local.projection_h = leray_project(plus, s.h, true, nullptr, &local.elliptic_iterations);
  }
  if (report) *report = local;
}

void Stepper::check_state(const surface::SurfaceGeometry& geom) const {
  if (wall_gap(geom) < ref_->wall_gap())
    fail(ErrorKind::StepRejected, "interface came within " + std::to_string(wall_gap(geom)) +
                                      " of a wall (minimum " + std::to_string(ref_->wall_gap()) + ")");
}

Fluxes Stepper::measured_fluxes(const SimState& s, const Frame& f) const {
  return {wall_integral(*f.plus, s.v), wall_integral(*f.plus, s.h)};
}

}  // namespace pil::evolution
