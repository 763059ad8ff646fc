#include "pil/error.hpp"
#include "pil/harmonic.hpp"

namespace pil::harmonic {

BulkGrid reference_grid(const surface::ReferenceSurface& ref, Side side, int intervals) {
  auto cheb = std::make_shared<Chebyshev>(intervals);
  const std::size_t ns = ref.grid().points();
  const int nl = cheb->nodes();
  const double w = wall_height(side);
  const Vec3Field base = ref.position();
  Vec3Field pos;
  for (auto& c : pos) c.resize(ns * nl);
  for (int k = 0; k < nl; ++k) {
    const double s = cheb->s()[k];
    pos[0].segment(k * ns, ns) = base[0] - s * ref.offset()[0];
    pos[1].segment(k * ns, ns) = base[1] - s * ref.offset()[1];
    pos[2].segment(k * ns, ns) = (1.0 - s) * base[2] + s * w;
  }
  return BulkGrid(side, ref.grid_ptr(), cheb, pos, ref.normal());
}

namespace {

Vec3Field displacement_field(const BulkGrid& reference, const Vec3Field& interface_data,
                             EllipticReport* report) {
  Vec3Field out;
  const Field zero = Field::Zero(reference.size());
  int iterations = 0;
  for (int c = 0; c < 3; ++c) {
    if (interface_data[c].abs().maxCoeff() == 0.0) {
      out[c] = zero;
      continue;
    }
    EllipticReport rep;
    out[c] = solve_elliptic(reference, zero, BoundaryData::dirichlet(interface_data[c]),
                            BoundaryData::dirichlet(), {}, &rep);
    iterations += rep.iterations;
  }
  if (report) report->iterations = iterations;
  return out;
}

}  // namespace

BulkGrid harmonic_coordinates(const surface::SurfaceGeometry& geom, Side side, int intervals,
                              EllipticReport* report) {
  return harmonic_coordinates(geom, reference_grid(*geom.reference, side, intervals), report);
}

BulkGrid harmonic_coordinates(const surface::SurfaceGeometry& geom, const BulkGrid& reference,
                              EllipticReport* report) {
  const Side side = reference.side();
  Vec3Field data;
  for (int c = 0; c < 3; ++c) data[c] = geom.gamma * geom.reference->transversal()[c];
  Vec3Field disp = displacement_field(reference, data, report);
  Vec3Field pos;
  for (int c = 0; c < 3; ++c) pos[c] = reference.position()[c] + disp[c];
  return BulkGrid(side, reference.fourier_ptr(), reference.cheb_ptr(), pos, geom.normal);
}

Vec3Field coordinate_velocity(const surface::SurfaceGeometry& geom, const BulkGrid& reference,
                              const Field& dgamma) {
  Vec3Field data;
  for (int c = 0; c < 3; ++c) data[c] = dgamma * geom.reference->transversal()[c];
  return displacement_field(reference, data, nullptr);
}

Field harmonic_extend(const BulkGrid& grid, const Field& f, EllipticReport* report) {
  return solve_elliptic(grid, Field::Zero(grid.size()), BoundaryData::dirichlet(f), BoundaryData::neumann(),
                        {}, report);
}

BulkField harmonic_extend(const surface::SurfaceGeometry& geom, Side side, int intervals, const Field& f) {
  const BulkGrid grid = harmonic_coordinates(geom, side, intervals);
  return BulkField::scalar(side, harmonic_extend(grid, f));
}

Field dn_apply(const BulkGrid& grid, const Field& f, EllipticReport* report) {
  const Field ext = harmonic_extend(grid, f, report);
  return orientation(grid.side()) * grid.interface_normal_derivative(ext);
}

Field poisson_bulk(const BulkGrid& grid, const Field& source, const Field& dirichlet,
                   const OuterCondition& outer, EllipticReport* report) {
  return solve_elliptic(grid, source, BoundaryData::dirichlet(dirichlet), BoundaryData::neumann(outer.neumann),
                        {}, report);
}

}  // namespace pil::harmonic
