#pragma once

#include "pil/fields.hpp"

#include <memory>
#include <string>

namespace pil::evolution {

using fields::Fluxes;
using fields::SurfaceCurrent;
using harmonic::BulkGrid;

// v and h hold nodal values on the plus grid induced by gamma; the vacuum field
// is recomputed from gamma and the wall current.
struct SimState {
  double t = 0.0;
  long step = 0;
  Field gamma;
  Vec3Field v, h;
  Fluxes fluxes;
};

struct FilterConfig {
  bool enabled = false;
  double strength = 36.0;
  int order = 16;
};

struct StepperConfig {
  double dt = 0.01;
  double t_end = 1.0;
  double alpha = 0.0;
  int intervals = 12;  // Chebyshev intervals per slab
  FilterConfig filter;
  bool project = true;
  bool dealias = false;
  int threads = 1;
};

// Geometry, mapped grids and vacuum field belonging to one interface position.
struct Frame {
  surface::SurfaceGeometry geom;
  std::shared_ptr<const BulkGrid> plus;
  std::shared_ptr<const BulkGrid> minus;  // null when the vacuum field vanishes identically
  Vec3Field hhat;                          // on the minus grid, or zeros of the minus size
  std::array<Field, 2> current;            // wall current at the frame time
};

struct Rates {
  Field gamma;
  Vec3Field v, h;
  Fluxes fluxes;
  Vec3Field grid_velocity;
  Field pressure;
};

struct StepReport {
  double projection_v = 0.0;  // largest correction applied by the Leray projections
  double projection_h = 0.0;
  double volume_correction = 0.0;  // mean normal velocity removed
  double filter_change = 0.0;
  double cfl = 0.0;  // max|v| dt / dx, logged only
  int elliptic_iterations = 0;
};

// Kinematic condition (v.n)/(nu.n) on the interface.
Field kinematic_rhs(const surface::SurfaceGeometry& geom, const BulkGrid& plus, const Vec3Field& v);

// Effective pressure: Laplacian balancing the momentum source, trace alpha^2 kappa + |hhat|^2/2.
Field effective_pressure(const BulkGrid& plus, const surface::SurfaceGeometry& geom, const Vec3Field& v,
                         const Vec3Field& h, const Field& hhat_sq_interface, double alpha,
                         const Field* initial_guess = nullptr);

struct BulkRates {
  Vec3Field v, h;
};
// Nodal rates on a grid moving with velocity w.
BulkRates bulk_rhs(const BulkGrid& plus, const Vec3Field& v, const Vec3Field& h, const Field& pressure,
                   const Vec3Field& grid_velocity);

Fluxes flux_rhs(const BulkGrid& plus, const Vec3Field& v, const Vec3Field& h, const Field& pressure);

struct TransportPair {
  Vec3Field xi, eta;  // curl v - curl h, curl v + curl h
};
TransportPair transport_pair(const BulkGrid& plus, const Vec3Field& v, const Vec3Field& h);
// Sum over l of grad v_l x grad h_l.
Vec3Field gradient_cross_trace(const BulkGrid& plus, const Vec3Field& v, const Vec3Field& h);
// Eulerian rates of xi and eta.
TransportPair transport_rhs(const BulkGrid& plus, const Vec3Field& v, const Vec3Field& h);

// Removes the divergence of u. With `tangential` the interface normal trace is
// removed as well; otherwise only its surface mean. The wall normal trace is
// always removed. Returns the largest correction.
double leray_project(const BulkGrid& grid, Vec3Field& u, bool tangential, double* mean_normal = nullptr,
                     int* iterations = nullptr);

Field exp_filter(const Fourier2& grid, const Field& f, const FilterConfig& cfg, int levels = 1);
Field dealias(const Fourier2& grid, const Field& f, int levels = 1);

class Stepper {
 public:
  Stepper(std::shared_ptr<const surface::ReferenceSurface> ref, StepperConfig cfg, SurfaceCurrent current);

  const StepperConfig& config() const { return cfg_; }
  const SurfaceCurrent& current() const { return current_; }
  const surface::ReferenceSurface& reference() const { return *ref_; }
  std::shared_ptr<const surface::ReferenceSurface> reference_ptr() const { return ref_; }
  const BulkGrid& reference_plus() const { return *ref_plus_; }
  const BulkGrid& reference_minus() const { return *ref_minus_; }

  Frame frame(const Field& gamma, double t) const;
  Rates rates(const SimState& s, const Frame& f) const;
  Rates rates(const SimState& s) const { return rates(s, frame(s.gamma, s.t)); }

  // One RK4 step; any stage failure is rethrown as StepRejected.
  SimState step(const SimState& s, StepReport* report = nullptr) const;
  // Applies the configured filter, dealiasing and projections in place.
  void clean(SimState& s, StepReport* report = nullptr) const;
  // Interface/wall distance and chart checks; throws StepRejected.
  void check_state(const surface::SurfaceGeometry& geom) const;

  // Wall-horizontal integrals of v and h.
  Fluxes measured_fluxes(const SimState& s, const Frame& f) const;

 private:
  std::shared_ptr<const surface::ReferenceSurface> ref_;
  StepperConfig cfg_;
  SurfaceCurrent current_;
  std::shared_ptr<const BulkGrid> ref_plus_, ref_minus_;
};

double wall_gap(const surface::SurfaceGeometry& geom);

}  // namespace pil::evolution
