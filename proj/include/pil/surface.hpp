#pragma once

#include "pil/spectral.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace pil::surface {

// 3x3 ambient tensor per grid point, row-major component index 3*i + j.
using TensorField = std::array<Field, 9>;

// Embedded periodic reference surface X*(u,v) = (u, v, 0) + offset(u,v) with a
// transversal unit field. The plasma lies above the surface, so its outward
// normal n* points towards the lower wall.
class ReferenceSurface {
 public:
  static std::shared_ptr<const ReferenceSurface> flat(std::shared_ptr<const Fourier2> grid,
                                                      double z0, double chart_radius,
                                                      double wall_gap);
  // General periodic embedding; the transversal field is the normal smoothed by a
  // Gaussian of `smoothing_cells` grid cells and renormalised.
  static std::shared_ptr<const ReferenceSurface> embedded(std::shared_ptr<const Fourier2> grid,
                                                          const Vec3Field& offset,
                                                          double chart_radius, double wall_gap,
                                                          double smoothing_cells);

  const Fourier2& grid() const { return *grid_; }
  std::shared_ptr<const Fourier2> grid_ptr() const { return grid_; }
  const Vec3Field& offset() const { return offset_; }
  Vec3Field position() const;
  const Vec3Field& transversal() const { return transversal_; }
  const Vec3Field& normal() const { return normal_; }
  double chart_radius() const { return chart_radius_; }
  double wall_gap() const { return wall_gap_; }
  // True when the surface is the plane z = height() with vertical transversal.
  bool is_flat() const { return flat_; }
  double height() const { return height_; }

 private:
  ReferenceSurface() = default;
  std::shared_ptr<const Fourier2> grid_;
  Vec3Field offset_, transversal_, normal_;
  double chart_radius_ = 0.0, wall_gap_ = 0.0, height_ = 0.0;
  bool flat_ = false;
};

class HeightField {
 public:
  HeightField() = default;
  explicit HeightField(Field values) : values_(std::move(values)) {}

  const Field& values() const { return values_; }
  Field& values() { return values_; }
  std::vector<cplx> spectral_coeffs(const Fourier2& grid) const;
  // sqrt of 4pi^2 * sum (1+|k|^2)^s |c_k|^2 with c_k the normalised Fourier coefficients.
  double sobolev_norm(const Fourier2& grid, double s) const;
  double max_abs() const { return values_.size() ? values_.abs().maxCoeff() : 0.0; }
  std::uint64_t hash(const Fourier2& grid) const;

 private:
  Field values_;
};

struct SurfaceGeometry {
  std::shared_ptr<const ReferenceSurface> reference;
  Field gamma;
  Vec3Field offset;    // position minus (u, v, 0); periodic
  Vec3Field position;  // Phi
  Vec3Field tangent_u, tangent_v;
  Vec3Field normal;    // unit, from the plasma side into the vacuum side
  Field g_uu, g_uv, g_vv;
  Field ginv_uu, ginv_uv, ginv_vv;
  Field area_density;  // sqrt(det g)
  Field ii_uu, ii_uv, ii_vv;  // second form in coordinates, II_ab = d_a n . Phi_b
  Field curvature;            // mean curvature, trace of II
  Field transversality;       // nu . n

  const Fourier2& grid() const { return reference->grid(); }
  std::size_t points() const { return gamma.size(); }
  double integrate(const Field& f) const;
  double area() const { return integrate(Field::Ones(points())); }
};

SurfaceGeometry build_geometry(std::shared_ptr<const ReferenceSurface> ref,
                               const HeightField& gamma);

// Tangential calculus.
Vec3Field surface_gradient(const SurfaceGeometry& geom, const Field& f);
Field laplace_beltrami(const SurfaceGeometry& geom, const Field& f);
Field surface_divergence(const SurfaceGeometry& geom, const Vec3Field& x);
// Row a-direction, column component: sum_a e^a (x) d_a X, e^a the dual tangent basis.
TensorField tangential_jacobian(const SurfaceGeometry& geom, const Vec3Field& x);
TensorField second_form_tensor(const SurfaceGeometry& geom);
TensorField tangent_projector(const SurfaceGeometry& geom);
// Rough (connection) Laplacian of a tangential symmetric tensor field.
TensorField tensor_laplacian(const SurfaceGeometry& geom, const TensorField& t);
TensorField hessian(const SurfaceGeometry& geom, const Field& f);

struct IdentityResiduals {
  double simons = 0.0;
  double normal_laplacian = 0.0;
};
IdentityResiduals geometric_identities(const SurfaceGeometry& geom);

// kappa + a^2 gamma
struct ModifiedCurvature {
  Field values;
  double stiffness = 0.0;
};

ModifiedCurvature kappa_a_forward(std::shared_ptr<const ReferenceSurface> ref,
                                  const HeightField& gamma, double stiffness);

struct NewtonOptions {
  double tolerance = 1e-11;
  int max_iter = 12;
  // Dense spectral Jacobian up to this many grid points, matrix-free Krylov above.
  std::size_t dense_limit = 1024;
  double fd_step = 1e-6;
};

struct NewtonReport {
  HeightField gamma;
  int iterations = 0;
  double residual = 0.0;
};

NewtonReport kappa_a_invert(std::shared_ptr<const ReferenceSurface> ref, const Field& target,
                            double stiffness, const HeightField& guess,
                            const NewtonOptions& opts = {});

// Real trigonometric basis of the grid. Entries are (ku, kv, sine?) with the
// Nyquist lines optionally excluded.
struct TrigMode {
  double ku, kv;
  bool sine;
};
std::vector<TrigMode> real_trig_modes(const Fourier2& grid, bool include_nyquist);
Field trig_mode_values(const Fourier2& grid, const TrigMode& mode);

void require_finite(const Field& f, const char* what);

}  // namespace pil::surface
