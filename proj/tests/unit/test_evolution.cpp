#include <doctest.h>

#include "pil/error.hpp"
#include "pil/evolution.hpp"

#include <cmath>
#include <cstdio>

using namespace pil;
using namespace pil::evolution;
using harmonic::Side;
using surface::HeightField;
using surface::ReferenceSurface;

namespace {

std::shared_ptr<const ReferenceSurface> flat_ref(int n, double z0 = 0.0) {
  return ReferenceSurface::flat(std::make_shared<Fourier2>(n, n), z0, 0.5, 0.1);
}

Vec3Field constant(std::size_t n, double a, double b, double c) {
  return {Field::Constant(n, a), Field::Constant(n, b), Field::Constant(n, c)};
}

double vmax(const Vec3Field& a) {
  return std::max({fields::max_abs(a[0]), fields::max_abs(a[1]), fields::max_abs(a[2])});
}

double vdiff(const Vec3Field& a, const Vec3Field& b) {
  return std::max({fields::max_abs(a[0] - b[0]), fields::max_abs(a[1] - b[1]), fields::max_abs(a[2] - b[2])});
}

// Interior nodes only: boundary levels carry boundary rows.
double interior_max(const BulkGrid& g, const Field& f) {
  return f.segment(g.slice(), g.size() - 2 * g.slice()).abs().maxCoeff();
}

SimState capillary_state(const Stepper& st, double amp) {
  SimState s;
  const Fourier2& four = st.reference().grid();
  s.gamma = amp * four.nodes_u().cos();
  const std::size_t n = st.reference_plus().size();
  s.v = constant(n, 0, 0, 0);
  s.h = constant(n, 0, 0, 0);
  return s;
}

}  // namespace

TEST_CASE("kinematic rate") {
  auto ref = flat_ref(8, 0.1);
  auto geom = surface::build_geometry(ref, HeightField(Field::Zero(64)));
  BulkGrid g = harmonic::harmonic_coordinates(geom, Side::Plus, 6);
  const Field x = g.position()[0];
  const Vec3Field tangential{Field(x.sin()), Field(x.cos()), Field(Field::Zero(g.size()))};
  CHECK(fields::max_abs(kinematic_rhs(geom, g, tangential)) < 1e-15);

  // nu = n = -e_z, so an upward velocity w lowers gamma at rate w.
  const Vec3Field up = constant(g.size(), 0.2, 0.0, 0.7);
  CHECK(fields::max_abs(kinematic_rhs(geom, g, up) + 0.7) < 1e-14);

  auto tilted = geom;
  tilted.transversality = Field::Constant(64, 0.8);
  CHECK(fields::max_abs(kinematic_rhs(tilted, g, up) + 0.7 / 0.8) < 1e-14);

  tilted.transversality = Field::Constant(64, 0.4);
  try {
    kinematic_rhs(tilted, g, up);
    FAIL("expected TransversalityLoss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TransversalityLoss);
  }
}

TEST_CASE("static equilibrium has vanishing rates and stays put") {
  for (double alpha : {0.0, 0.5, 1.0}) {
    StepperConfig cfg;
    cfg.dt = 0.05;
    cfg.alpha = alpha;
    cfg.intervals = 6;
    Stepper st(flat_ref(8), cfg, fields::SurfaceCurrent(Eigen::Vector2d(0.3, -0.4), {}));
    SimState s;
    s.gamma = Field::Zero(64);
    s.v = constant(st.reference_plus().size(), 0, 0, 0);
    s.h = constant(st.reference_plus().size(), 0.8, 0, 0);
    s.fluxes.h = Eigen::Vector2d(0.8 * kTwoPi * kTwoPi, 0.0);
    const Rates r = st.rates(s);
    CHECK(vmax(r.v) < 1e-12);
    CHECK(vmax(r.h) < 1e-12);
    CHECK(fields::max_abs(r.gamma) < 1e-14);
    CHECK(r.fluxes.v.norm() < 1e-11);
    CHECK(r.fluxes.h.norm() < 1e-11);
    SimState cur = s;
    for (int i = 0; i < 100; ++i) cur = st.step(cur);
    CHECK(fields::max_abs(cur.gamma) < 1e-10);
    CHECK(vdiff(cur.v, s.v) < 1e-10);
    CHECK(vdiff(cur.h, s.h) < 1e-10);
    CHECK(cur.step == 100);
  }
}

TEST_CASE("bulk and flux rates: Alfvenic and rigid states") {
  auto ref = flat_ref(8);
  auto geom = surface::build_geometry(ref, HeightField(Field::Zero(64)));
  BulkGrid g = harmonic::harmonic_coordinates(geom, Side::Plus, 8);
  const Field& x = g.position()[0];
  const Field& y = g.position()[1];
  const Field& z = g.position()[2];
  const Vec3Field zero = constant(g.size(), 0, 0, 0);
  const Vec3Field v{Field(y.sin() * z), Field(x.cos()), Field(Field::Zero(g.size()))};
  const Field p = effective_pressure(g, geom, v, v, Field::Zero(g.slice()), 0.0);
  CHECK(vmax(bulk_rhs(g, v, v, p, zero).h) < 1e-12);
  CHECK(flux_rhs(g, v, v, p).h.norm() < 1e-12);

  const Vec3Field rigid = constant(g.size(), 0.4, -0.3, 0.0);
  const Field pr = effective_pressure(g, geom, rigid, zero, Field::Zero(g.slice()), 0.0);
  CHECK(flux_rhs(g, rigid, zero, pr).v.norm() < 1e-12);
  CHECK(vmax(bulk_rhs(g, rigid, zero, pr, zero).v) < 1e-12);
}

TEST_CASE("transport form matches the curl of the primitive rates") {
  auto ref = flat_ref(12);
  auto geom = surface::build_geometry(ref, HeightField(Field::Zero(144)));
  BulkGrid g = harmonic::harmonic_coordinates(geom, Side::Plus, 12);
  const Field& x = g.position()[0];
  const Field& y = g.position()[1];
  const Field& z = g.position()[2];
  const Vec3Field zero = constant(g.size(), 0, 0, 0);
  // Divergence-free fields from stream functions.
  const Vec3Field v{Field(-(x + z).sin() * y.sin()), Field(-(x + z).cos() * y.cos()), Field(Field::Zero(g.size()))};
  const Vec3Field h{Field(y.cos() * z), Field(x.sin() * z * z), Field((x - y).cos())};

  const TransportPair rates = transport_rhs(g, v, h);
  const BulkRates b = bulk_rhs(g, v, h, Field::Zero(g.size()), zero);
  const Vec3Field dw = g.curl(b.v), dj = g.curl(b.h);
  double err = 0.0;
  for (int i = 0; i < 3; ++i) {
    err = std::max(err, interior_max(g, rates.xi[i] - (dw[i] - dj[i])));
    err = std::max(err, interior_max(g, rates.eta[i] - (dw[i] + dj[i])));
  }
  CHECK(err < 1e-7);

  // h = 0: Euler vorticity stretching.
  const TransportPair euler = transport_rhs(g, v, zero);
  const Vec3Field w = g.curl(v);
  const Vec3Field a = g.advect(v, w), s = g.advect(w, v);
  for (int i = 0; i < 3; ++i) CHECK(fields::max_abs(euler.xi[i] - (s[i] - a[i])) < 1e-10);

  CHECK(vmax(gradient_cross_trace(g, h, h)) < 1e-12);

  // Planar data keeps xi and eta vertical.
  const Vec3Field vp{Field(y.sin()), Field(x.cos()), Field(Field::Zero(g.size()))};
  const Vec3Field hp{Field((x + y).cos()), Field(-(x + y).cos()), Field(Field::Zero(g.size()))};
  const TransportPair pp = transport_rhs(g, vp, hp);
  CHECK(std::max({fields::max_abs(pp.xi[0]), fields::max_abs(pp.xi[1]), fields::max_abs(pp.eta[0]),
                  fields::max_abs(pp.eta[1])}) < 1e-12);
}

TEST_CASE("Leray projection removes divergence and normal traces") {
  auto ref = flat_ref(12);
  const Fourier2& four = ref->grid();
  auto geom = surface::build_geometry(ref, HeightField(0.1 * four.nodes_u().sin()));
  BulkGrid g = harmonic::harmonic_coordinates(geom, Side::Plus, 10);
  const Field& x = g.position()[0];
  const Field& z = g.position()[2];
  Vec3Field u{Field(x.sin() * z), Field(0.2 + z), Field(x.cos() * z * z)};
  Vec3Field w = u;
  leray_project(g, u, true);
  CHECK(interior_max(g, g.divergence(u)) < 1e-8);
  CHECK(fields::max_abs(fields::normal_component(g, u)) < 1e-9);
  CHECK(fields::max_abs(g.wall_trace(u[2])) < 1e-9);
  double mean = 0.0;
  leray_project(g, w, false, &mean);
  const Field un = fields::normal_component(g, w);
  CHECK(std::abs((un * g.interface_area()).sum()) < 1e-8);
  CHECK(fields::max_abs(g.wall_trace(w[2])) < 1e-9);
}

TEST_CASE("exponential filter and dealiasing") {
  Fourier2 four(16, 16);
  const Field u = four.nodes_u();
  FilterConfig cfg;
  cfg.enabled = true;
  const Field low = u.cos(), high = (7.0 * u).cos();
  CHECK(fields::max_abs(exp_filter(four, low, cfg) - low) < 1e-12);
  CHECK(fields::max_abs(exp_filter(four, high, cfg)) < 0.5 * fields::max_abs(high));
  CHECK(fields::max_abs(dealias(four, high)) < 1e-14);
  CHECK(fields::max_abs(dealias(four, low) - low) < 1e-14);
}

TEST_CASE("capillary run converges at fourth order in time") {
  StepperConfig cfg;
  cfg.alpha = 1.0;
  cfg.intervals = 8;
  auto ref = flat_ref(12);
  const double t_end = 0.6;
  Field results[3];
  int idx = 0;
  for (double dt : {0.15, 0.075, 0.0375}) {
    cfg.dt = dt;
    Stepper st(ref, cfg, fields::SurfaceCurrent());
    SimState s = capillary_state(st, 0.05);
    while (s.t < t_end - 1e-12) s = st.step(s);
    results[idx++] = s.gamma;
  }
  const double e1 = fields::max_abs(results[0] - results[1]);
  const double e2 = fields::max_abs(results[1] - results[2]);
  std::printf("time refinement: %.3e %.3e ratio %.2f\n", e1, e2, e1 / e2);
  CHECK(e1 / e2 > 12.0);
  CHECK(e1 / e2 < 20.0);
}
