#pragma once

#include "pil/spectral.hpp"
#include "pil/surface.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace pil::harmonic {

// Plus is the plasma slab between the interface and the wall z = 1, minus the
// vacuum slab between the interface and z = -1. The vertical coordinate s runs
// from 0 on the interface to 1 on the wall on both sides.
enum class Side { Plus, Minus };

inline double wall_height(Side side) { return side == Side::Plus ? 1.0 : -1.0; }
// +1 when s increases with z.
inline double orientation(Side side) { return side == Side::Plus ? 1.0 : -1.0; }
const char* side_name(Side side);

enum class BcKind { Dirichlet, Neumann };

// Neumann data is n.grad f on the interface (n the interface normal, pointing
// from plus to minus) and the outward wall normal derivative on the wall.
struct BoundaryData {
  BcKind kind = BcKind::Dirichlet;
  Field values;  // one value per horizontal node; empty means zero

  static BoundaryData dirichlet(Field v = {}) { return {BcKind::Dirichlet, std::move(v)}; }
  static BoundaryData neumann(Field v = {}) { return {BcKind::Neumann, std::move(v)}; }
};

struct EllipticOptions {
  double tolerance = 1e-10;
  int restart = 60;
  int max_iter = 800;
  double compatibility_tolerance = 1e-6;
  const Field* initial_guess = nullptr;
};

struct EllipticReport {
  int iterations = 0;
  double residual = 0.0;
  double compatibility_defect = 0.0;  // relative, pure Neumann problems only
  double multiplier = 0.0;            // Lagrange multiplier of the mean constraint
};

class SlabPreconditioner;

// Mapped tensor grid: Fourier in (u,v), Chebyshev-Lobatto in s.
class BulkGrid {
 public:
  BulkGrid(Side side, std::shared_ptr<const Fourier2> fourier, std::shared_ptr<const Chebyshev> cheb,
           Vec3Field position, Vec3Field interface_normal);

  Side side() const { return side_; }
  const Fourier2& fourier() const { return *fourier_; }
  std::shared_ptr<const Fourier2> fourier_ptr() const { return fourier_; }
  const Chebyshev& cheb() const { return *cheb_; }
  std::shared_ptr<const Chebyshev> cheb_ptr() const { return cheb_; }
  int levels() const { return cheb_->nodes(); }
  std::size_t slice() const { return fourier_->points(); }
  std::size_t size() const { return slice() * levels(); }

  const Vec3Field& position() const { return position_; }
  const Field& jacobian() const { return jac_; }
  // d xi^i / d x_j at every node, index 3*i + j.
  const std::array<Field, 9>& inverse_jacobian() const { return finv_; }
  // d X_j / d xi^i at every node, index 3*i + j.
  const std::array<Field, 9>& tangents() const { return dx_; }
  const Vec3Field& interface_normal() const { return normal_; }
  const Field& interface_area() const { return interface_area_; }
  const Field& wall_area() const { return wall_area_; }
  const Field& quadrature() const { return quad_; }

  void xi_gradient(const Field& f, Field& du, Field& dv, Field& ds) const;
  Vec3Field gradient(const Field& f) const;
  Field divergence(const Vec3Field& u) const;
  Vec3Field curl(const Vec3Field& u) const;
  Field laplacian(const Field& f) const;
  // (a . grad) b
  Vec3Field advect(const Vec3Field& a, const Vec3Field& b) const;
  double integrate(const Field& f) const { return (quad_ * f).sum(); }

  Field level(const Field& f, int k) const { return f.segment(std::size_t(k) * slice(), slice()); }
  Field interface_trace(const Field& f) const { return level(f, 0); }
  Field wall_trace(const Field& f) const { return level(f, levels() - 1); }
  // Normal derivative n.grad f on the interface.
  Field interface_normal_derivative(const Field& f) const;
  // Outward wall normal derivative.
  Field wall_normal_derivative(const Field& f) const;
  // Apply a horizontal Fourier symbol to every level.
  Field apply_symbol(const Field& f, const std::function<double(double, double)>& symbol) const;

  const SlabPreconditioner& preconditioner(BcKind interface, BcKind wall) const;

 private:
  Side side_;
  std::shared_ptr<const Fourier2> fourier_;
  std::shared_ptr<const Chebyshev> cheb_;
  Vec3Field position_, normal_;
  Field jac_, quad_, interface_area_, wall_area_;
  std::array<Field, 9> finv_, dx_;
  std::array<Field, 6> gmet_;  // J g^{ij}: 00 01 02 11 12 22

  friend class SlabPreconditioner;
  friend Field solve_elliptic(const BulkGrid&, const Field&, const BoundaryData&, const BoundaryData&,
                              const EllipticOptions&, EllipticReport*);
  std::shared_ptr<std::mutex> cache_mutex_ = std::make_shared<std::mutex>();
  mutable std::map<int, std::shared_ptr<SlabPreconditioner>> precond_;
};

struct BulkField {
  Side side = Side::Plus;
  std::vector<Field> comps;

  int components() const { return int(comps.size()); }
  static BulkField scalar(Side side, Field f) { return {side, {std::move(f)}}; }
  static BulkField vector(Side side, Vec3Field v) {
    return {side, {std::move(v[0]), std::move(v[1]), std::move(v[2])}};
  }
  Vec3Field as_vector() const { return {comps.at(0), comps.at(1), comps.at(2)}; }
};

// Solves the variable-coefficient Laplacian Lf = source (interior rows) with
// the given boundary rows. Pure Neumann problems are bordered with a mean-zero
// constraint and checked for compatibility.
Field solve_elliptic(const BulkGrid& grid, const Field& source, const BoundaryData& interface,
                     const BoundaryData& wall, const EllipticOptions& opts = {},
                     EllipticReport* report = nullptr);

// Reference slab between Gamma* and the wall, affine in s along each column.
BulkGrid reference_grid(const surface::ReferenceSurface& ref, Side side, int intervals);

// Harmonic coordinates: X harmonic in the reference slab, X = Phi on Gamma*, identity on the wall.
BulkGrid harmonic_coordinates(const surface::SurfaceGeometry& geom, Side side, int intervals,
                              EllipticReport* report = nullptr);
// Same, reusing a prebuilt reference slab.
BulkGrid harmonic_coordinates(const surface::SurfaceGeometry& geom, const BulkGrid& reference,
                              EllipticReport* report = nullptr);

// Derivative of the harmonic coordinate map with respect to its interface data:
// the reference-harmonic extension of dgamma * nu, vanishing on the wall.
Vec3Field coordinate_velocity(const surface::SurfaceGeometry& geom, const BulkGrid& reference,
                              const Field& dgamma);

Field harmonic_extend(const BulkGrid& grid, const Field& f, EllipticReport* report = nullptr);
BulkField harmonic_extend(const surface::SurfaceGeometry& geom, Side side, int intervals, const Field& f);

// +-n . grad(H f) on the interface.
Field dn_apply(const BulkGrid& grid, const Field& f, EllipticReport* report = nullptr);

struct OuterCondition {
  // Empty values mean zero Neumann data on the wall.
  Field neumann;
};

Field poisson_bulk(const BulkGrid& grid, const Field& source, const Field& dirichlet,
                   const OuterCondition& outer = {}, EllipticReport* report = nullptr);

class DNOperator {
 public:
  Side side() const { return side_; }
  std::uint64_t gamma_hash() const { return hash_; }
  // Dense nodal matrix on the resolved (Nyquist-free) subspace.
  const Eigen::MatrixXd& matrix() const { return nodal_; }
  const std::vector<surface::TrigMode>& basis_modes() const { return modes_; }
  const Eigen::MatrixXd& basis() const { return basis_; }    // nodal values, orthonormal columns
  const Eigen::MatrixXd& coords() const { return coords_; }  // operator in basis coordinates
  const Eigen::MatrixXd& gram() const { return gram_; }      // dS inner product in coordinates
  const Eigen::VectorXd& eigenvalues() const { return evals_; }
  const Eigen::MatrixXd& eigenvectors() const { return evecs_; }  // gram-orthonormal

  Field apply(const Field& f) const;
  // Inverse on dS-mean-zero data.
  Field solve(const Field& f, const Field& area_density) const;
  double symmetry_defect(const Field& f, const Field& g, const Field& area_density) const;
  int kernel_dimension(double tol) const;

  void save(const std::string& path) const;
  static DNOperator load(const std::string& path);

 private:
  friend DNOperator dn_assemble(const BulkGrid&, const surface::SurfaceGeometry&, int);
  void finish(const Field& area_density, double cell_area);

  Side side_ = Side::Plus;
  std::uint64_t hash_ = 0;
  std::vector<surface::TrigMode> modes_;
  Eigen::MatrixXd basis_, coords_, gram_, nodal_, evecs_;
  Eigen::VectorXd evals_;
};

DNOperator dn_assemble(const BulkGrid& grid, const surface::SurfaceGeometry& geom, int threads = 1);

// Caches operators by side and gamma hash; owned by the caller.
class DnCache {
 public:
  std::shared_ptr<const DNOperator> get(const BulkGrid& grid, const surface::SurfaceGeometry& geom,
                                        int threads = 1);
  std::size_t size() const { return entries_.size(); }

 private:
  std::mutex mutex_;
  std::map<std::pair<int, std::uint64_t>, std::shared_ptr<const DNOperator>> entries_;
};

// D^l N^{1/2} with D = (-N^{1/2} Lap N^{1/2})^{1/2}, realised in the DN eigenbasis.
class SurfacePowers {
 public:
  SurfacePowers(std::shared_ptr<const DNOperator> dn, const surface::SurfaceGeometry& geom,
                double tol_eig = 1e-9);
  Field apply(int l, const Field& f) const;
  // Integral over the surface of |D^l N^{1/2} f|^2.
  double norm2(int l, const Field& f) const;
  // Integral of |D^l N f|^2, used by the Rayleigh-Taylor weighted term.
  double norm2_full(int l, const Field& f) const;
  const Eigen::VectorXd& composite_eigenvalues() const { return mu_; }

 private:
  Eigen::VectorXd coefficients(int l, const Field& f, bool full) const;
  std::shared_ptr<const DNOperator> dn_;
  Eigen::VectorXd sqrt_lambda_, mu_;
  Eigen::MatrixXd z_;  // eigenvectors of the composite operator in DN-eigen coordinates
  Eigen::MatrixXd to_eig_;  // maps nodal values to DN-eigen coordinates
  Eigen::MatrixXd from_eig_;
  Field area_density_;
  double cell_area_ = 0.0;
};

Field fractional_surface_power(const SurfacePowers& powers, int l, const Field& f);

}  // namespace pil::harmonic
