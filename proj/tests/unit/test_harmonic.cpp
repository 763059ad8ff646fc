#include <doctest.h>

#include "pil/error.hpp"
#include "pil/harmonic.hpp"

#include <cmath>
#include <cstdio>
#include <random>

using namespace pil;
using namespace pil::harmonic;
using surface::HeightField;
using surface::ReferenceSurface;

namespace {

std::shared_ptr<const Fourier2> grid(int n) { return std::make_shared<Fourier2>(n, n); }

surface::SurfaceGeometry flat_geometry(int n, double z0) {
  auto ref = ReferenceSurface::flat(grid(n), z0, 0.5, 0.1);
  return surface::build_geometry(ref, HeightField(Field::Zero(ref->grid().points())));
}

surface::SurfaceGeometry wavy_geometry(int n, double z0, double eps) {
  auto ref = ReferenceSurface::flat(grid(n), z0, 0.5, 0.1);
  const Field u = ref->grid().nodes_u(), v = ref->grid().nodes_v();
  return surface::build_geometry(ref, HeightField(eps * u.sin() + 0.5 * eps * (u + v).cos()));
}

Field level_z(const BulkGrid& g, int k) { return g.level(g.position()[2], k); }

Field random_band_limited(const Fourier2& f, std::mt19937& rng, int kmax) {
  std::normal_distribution<double> nd;
  const Field u = f.nodes_u(), v = f.nodes_v();
  Field out = Field::Zero(f.points());
  for (int p = -kmax; p <= kmax; ++p)
    for (int q = 0; q <= kmax; ++q) {
      if (p == 0 && q == 0) continue;
      const double decay = std::exp(-0.5 * std::hypot(p, q));
      out += decay * (nd(rng) * (p * u + q * v).cos() + nd(rng) * (p * u + q * v).sin());
    }
  return out;
}

}  // namespace

TEST_CASE("flat harmonic coordinates are affine in the vertical") {
  auto geom = flat_geometry(8, 0.2);
  for (Side side : {Side::Plus, Side::Minus}) {
    BulkGrid g = harmonic_coordinates(geom, side, 8);
    const double w = wall_height(side);
    for (int k = 0; k < g.levels(); ++k) {
      const double s = g.cheb().s()[k];
      CHECK((level_z(g, k) - (0.2 + s * (w - 0.2))).abs().maxCoeff() < 1e-13);
      CHECK((g.level(g.position()[0], k) - g.fourier().nodes_u()).abs().maxCoeff() < 1e-13);
    }
  }
}

TEST_CASE("curved harmonic coordinates are harmonic and unfolded") {
  auto geom = wavy_geometry(16, 0.0, 0.1);
  auto flat = flat_geometry(16, 0.0);
  for (Side side : {Side::Plus, Side::Minus}) {
    BulkGrid g = harmonic_coordinates(geom, side, 12);
    BulkGrid ref = reference_grid(*geom.reference, side, 12);
    CHECK((orientation(side) * g.jacobian()).minCoeff() > 0.0);
    double dev = 0.0, res = 0.0;
    for (int c = 0; c < 3; ++c) {
      Field d = g.position()[c] - ref.position()[c];
      dev = std::max(dev, d.abs().maxCoeff());
      Field lap = ref.laplacian(d);
      // Interior rows only; boundary rows carry the Dirichlet data.
      res = std::max(res, lap.segment(ref.slice(), ref.size() - 2 * ref.slice()).abs().maxCoeff());
    }
    CHECK(dev <= 0.16);
    CHECK(res < 1e-8);
    CHECK((g.interface_trace(g.position()[2]) - geom.position[2]).abs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("interface too close to a wall folds the map") {
  auto ref = ReferenceSurface::flat(grid(8), 0.7, 0.5, 0.1);
  const Field u = ref->grid().nodes_u();
  auto geom = surface::build_geometry(ref, HeightField(-0.45 * u.cos().pow(8)));
  CHECK_THROWS_AS(harmonic_coordinates(geom, Side::Plus, 8), Error);
  CHECK_THROWS_AS(ReferenceSurface::flat(grid(8), 0.95, 0.5, 0.1), Error);
}

TEST_CASE("harmonic extension oracles") {
  auto geom = flat_geometry(16, 0.2);
  const int nz = 24;
  BulkGrid plus = harmonic_coordinates(geom, Side::Plus, nz);
  Field c = harmonic_extend(plus, Field::Constant(plus.slice(), 2.5));
  CHECK((c - 2.5).abs().maxCoeff() < 1e-12);

  // Separation of variables: cos(k u) cosh(k (1 - z)) / cosh(k (1 - z0)).
  const int k = 3;
  Field f = (k * geom.grid().nodes_u()).cos();
  Field ext = harmonic_extend(plus, f);
  Field x = plus.position()[0], z = plus.position()[2];
  Field oracle = (k * x).cos() * (k * (1.0 - z)).cosh() / std::cosh(k * 0.8);
  CHECK((ext - oracle).abs().maxCoeff() < 1e-10);

  auto curved = wavy_geometry(16, 0.0, 0.1);
  std::mt19937 rng(4);
  for (Side side : {Side::Plus, Side::Minus}) {
    BulkGrid g = harmonic_coordinates(curved, side, 16);
    Field data = random_band_limited(g.fourier(), rng, 3);
    Field e = harmonic_extend(g, data);
    CHECK(e.maxCoeff() <= data.maxCoeff() + 1e-8);
    CHECK(e.minCoeff() >= data.minCoeff() - 1e-8);
  }
}

TEST_CASE("DN flat symbols and kernel") {
  const double z0 = 0.3;
  auto geom = flat_geometry(16, z0);
  for (Side side : {Side::Plus, Side::Minus}) {
    BulkGrid g = harmonic_coordinates(geom, side, 32);
    const double d = side == Side::Plus ? 1.0 - z0 : 1.0 + z0;
    CHECK(dn_apply(g, Field::Ones(g.slice())).abs().maxCoeff() < 1e-10);
    for (auto [p, q] : {std::pair{1, 0}, {2, 3}, {5, -4}, {7, 7}}) {
      Field f = (p * geom.grid().nodes_u() + q * geom.grid().nodes_v()).cos();
      const double kk = std::hypot(p, q);
      Field out = dn_apply(g, f);
      CHECK((out - kk * std::tanh(kk * d) * f).abs().maxCoeff() < 1e-8 * kk);
    }
  }
}

TEST_CASE("assembled DN on a curved interface") {
  auto geom = wavy_geometry(12, 0.1, 0.08);
  for (Side side : {Side::Plus, Side::Minus}) {
    BulkGrid g = harmonic_coordinates(geom, side, 16);
    DNOperator dn = dn_assemble(g, geom);
    CHECK(dn.kernel_dimension(1e-8) == 1);
    CHECK(dn.eigenvalues()[0] > -1e-8);
    CHECK(dn.eigenvalues()[1] > 1e-3);
    CHECK((dn.matrix() * Eigen::VectorXd::Ones(g.slice())).cwiseAbs().maxCoeff() < 1e-8);
    std::mt19937 rng(9);
    for (int t = 0; t < 3; ++t) {
      Field f = random_band_limited(g.fourier(), rng, 4), h = random_band_limited(g.fourier(), rng, 4);
      CHECK(dn.symmetry_defect(f, h, geom.area_density) < 1e-8);
    }
    // Inverse on mean-zero data and rejection on constants.
    Field f = random_band_limited(g.fourier(), rng, 3);
    f -= geom.integrate(f) / geom.area();
    Field back = dn.solve(dn.apply(f), geom.area_density);
    back -= geom.integrate(back) / geom.area();
    CHECK((back - g.fourier().band_limit(f)).abs().maxCoeff() < 1e-7);
    CHECK_THROWS_AS(dn.solve(Field::Ones(g.slice()), geom.area_density), Error);

    const std::string path = "dn_cache_test.bin";
    dn.save(path);
    DNOperator back_op = DNOperator::load(path);
    CHECK(back_op.gamma_hash() == dn.gamma_hash());
    CHECK((back_op.matrix() - dn.matrix()).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
  }
}

TEST_CASE("fractional surface powers") {
  const double z0 = 0.0;
  auto geom = flat_geometry(8, z0);
  BulkGrid g = harmonic_coordinates(geom, Side::Plus, 24);
  auto dn = std::make_shared<const DNOperator>(dn_assemble(g, geom));
  SurfacePowers powers(dn, geom);
  const Field u = geom.grid().nodes_u();
  Field f = (2.0 * u).cos();
  const double lam = 2.0 * std::tanh(2.0), lap = 4.0;
  for (int l = 0; l <= 3; ++l) {
    Field out = fractional_surface_power(powers, l, f);
    const double expect = std::pow(lam * lap, 0.5 * l) * std::sqrt(lam);
    CHECK((out - expect * f).abs().maxCoeff() < 1e-8);
    CHECK(fractional_surface_power(powers, l, Field::Ones(g.slice())).abs().maxCoeff() < 1e-8);
  }
  auto curved = wavy_geometry(10, 0.0, 0.08);
  BulkGrid gc = harmonic_coordinates(curved, Side::Plus, 16);
  auto dnc = std::make_shared<const DNOperator>(dn_assemble(gc, curved));
  SurfacePowers pc(dnc, curved);
  std::mt19937 rng(2);
  Field h = random_band_limited(gc.fourier(), rng, 3);
  const double lhs = pc.norm2(0, h);
  const double rhs = curved.integrate(h * dnc->apply(h));
  CHECK(std::abs(lhs - rhs) < 1e-8 * std::abs(rhs));
  Field half = pc.apply(0, h);
  CHECK(std::abs(curved.integrate(half * half) - lhs) < 1e-8 * lhs);

  // Equivalence ratio of (I + N) and (I - Lap)^{1/2} forms, logged.
  double lo = 1e300, hi = 0.0;
  for (int t = 0; t < 20; ++t) {
    Field r = random_band_limited(gc.fourier(), rng, 4);
    r -= curved.integrate(r) / curved.area();
    const double a = curved.integrate(r * r) + curved.integrate(r * dnc->apply(r));
    const double b = curved.integrate(r * gc.fourier().apply_symbol(r, [](double p, double q) {
      return std::sqrt(1.0 + p * p + q * q);
    }));
    lo = std::min(lo, a / b);
    hi = std::max(hi, a / b);
  }
  MESSAGE("equivalence ratio range [" << lo << ", " << hi << "]");
  CHECK(lo > 0.1);
  CHECK(hi < 10.0);
}

TEST_CASE("bulk Poisson oracles") {
  auto geom = flat_geometry(8, 0.1);
  BulkGrid g = harmonic_coordinates(geom, Side::Plus, 16);
  Field zero = Field::Zero(g.size());
  CHECK(poisson_bulk(g, zero, Field::Zero(g.slice())).abs().maxCoeff() == 0.0);

  // Constant source c, zero Dirichlet at z0, zero Neumann at z = 1.
  const double c = 2.0, z0 = 0.1;
  Field p = poisson_bulk(g, Field::Constant(g.size(), c), Field::Zero(g.slice()));
  Field z = g.position()[2];
  Field oracle = c * (0.5 * (z - z0).square() + (z0 - 1.0) * (z - z0));
  CHECK((p - oracle).abs().maxCoeff() < 1e-11);

  // Manufactured solution on a curved interface with given wall Neumann data.
  auto errors = [](int n, int nz) {
    auto geom = wavy_geometry(n, 0.0, 0.1);
    BulkGrid g = harmonic_coordinates(geom, Side::Plus, nz);
    const Field x = g.position()[0], y = g.position()[1], z = g.position()[2];
    auto exact = [](const Field& x, const Field& y, const Field& z) {
      return Field(x.sin() * y.cos() * (0.5 * z).exp() + z * z);
    };
    Field u = exact(x, y, z);
    Field src = -1.75 * x.sin() * y.cos() * (0.5 * z).exp() + 2.0;
    Field wall_flux = g.wall_trace(Field(0.5 * x.sin() * y.cos() * (0.5 * z).exp() + 2.0 * z));
    Field sol = poisson_bulk(g, src, g.interface_trace(u), OuterCondition{wall_flux});
    return (sol - u).abs().maxCoeff();
  };
  const double e1 = errors(8, 6), e2 = errors(32, 20);
  MESSAGE("manufactured Poisson errors " << e1 << " " << e2);
  CHECK(e2 < 1e-9);
  CHECK(e2 < e1);
}

TEST_CASE("pure Neumann compatibility is enforced") {
  auto geom = wavy_geometry(8, 0.0, 0.05);
  BulkGrid g = harmonic_coordinates(geom, Side::Plus, 8);
  try {
    solve_elliptic(g, Field::Zero(g.size()), BoundaryData::neumann(Field::Ones(g.slice())),
                   BoundaryData::neumann());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IncompatibleData);
  }
  // Compatible: harmonic function z has n.grad z = n_z on the interface, 1 on the wall.
  EllipticReport rep;
  Field sol = solve_elliptic(g, Field::Zero(g.size()), BoundaryData::neumann(geom.normal[2]),
                             BoundaryData::neumann(Field::Ones(g.slice())), {}, &rep);
  Field z = g.position()[2];
  Field diff = sol - z;
  diff -= g.integrate(diff) / g.integrate(Field::Ones(g.size()));
  CHECK(diff.abs().maxCoeff() < 1e-8);
}
