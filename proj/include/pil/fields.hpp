#pragma once

#include "pil/harmonic.hpp"
#include "pil/surface.hpp"

#include <string>
#include <vector>

namespace pil::fields {

using harmonic::BulkField;
using harmonic::BulkGrid;
using harmonic::Side;

struct Fluxes {
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  Eigen::Vector2d h = Eigen::Vector2d::Zero();
};

// Tangential current on the lower wall: (uniform + sum of modes) * law(t).
class SurfaceCurrent {
 public:
  enum class Law { Constant, Ramp, Sine };
  struct Mode {
    int ku = 0, kv = 0;
    double x_cos = 0, x_sin = 0, y_cos = 0, y_sin = 0;
  };

  SurfaceCurrent() = default;
  SurfaceCurrent(Eigen::Vector2d uniform, std::vector<Mode> modes, Law law = Law::Constant,
                 double frequency = 1.0);

  bool is_zero() const;
  double factor(double t) const;
  double factor_rate(double t) const;
  // Largest |k . j| over the modes; zero for a divergence-free current.
  double divergence_defect() const;
  // Components (x, y) on the wall grid at time t (rate=true gives the time derivative).
  std::array<Field, 2> sample(const Fourier2& grid, double t, bool rate = false) const;
  // Same current with time reversed, t -> -t.
  SurfaceCurrent reversed() const;

  const Eigen::Vector2d& uniform() const { return uniform_; }
  const std::vector<Mode>& modes() const { return modes_; }
  Law law() const { return law_; }
  double frequency() const { return frequency_; }

 private:
  Eigen::Vector2d uniform_ = Eigen::Vector2d::Zero();
  std::vector<Mode> modes_;
  Law law_ = Law::Constant;
  double frequency_ = 1.0;
  double time_sign_ = 1.0;
};

struct RecoveryReport {
  int iterations = 0;
  double theta_correction = 0.0;  // surface-mean shift applied to the normal trace
  double curl_flux_defect = 0.0;  // mean interface flux removed from the curl data
};

// Field with curl f whose vertical covariant component vanishes, built by
// integrating along s from the interface. The mean interface flux of f is removed.
Vec3Field curl_particular(const BulkGrid& grid, const Vec3Field& f, double* flux_defect = nullptr);

// e_i + grad psi_i for i = x, y: curl- and divergence-free, tangent to both boundaries.
std::array<Vec3Field, 2> cycle_fields(const BulkGrid& grid, int* iterations = nullptr);

// u with curl u = f, div u = g, u.n = theta on the interface, u.e_z = 0 on the
// wall and wall integral of the horizontal components equal to flux.
Vec3Field solve_divcurl_plus(const BulkGrid& grid, const Vec3Field& f, const Field& g, const Field& theta,
                             const Eigen::Vector2d& flux, RecoveryReport* report = nullptr,
                             const harmonic::EllipticOptions& opts = {});

// Curl-free, divergence-free vacuum field tangent to the interface with
// n_minus x h = J on the lower wall. `current` holds the (x, y) wall components.
Vec3Field solve_vacuum_field(const BulkGrid& minus, const std::array<Field, 2>& current,
                             RecoveryReport* report = nullptr);

// Time derivative of the vacuum field for interface velocity v (plus grid) and
// the current rate.
Vec3Field solve_time_derivative_vacuum(const BulkGrid& minus, const BulkGrid& plus, const Vec3Field& v,
                                       const Vec3Field& hhat, const std::array<Field, 2>& current_rate,
                                       RecoveryReport* report = nullptr);

struct PressureParts {
  Field p_vv, p_hh, q, p_hat, p_kappa, total;
  Field interface_total;
};

// Sum of d_i a_j d_j b_i.
Field gradient_trace(const BulkGrid& grid, const Vec3Field& a, const Vec3Field& b);

PressureParts pressure_decomposition(const BulkGrid& plus, const surface::SurfaceGeometry& geom,
                                     const Vec3Field& v, const Vec3Field& h, const Field& hhat_sq_interface,
                                     double alpha);

struct WResidual {
  Vec3Field bulk;
  Field normal_trace;
};

WResidual w_residual(const BulkGrid& plus, const PressureParts& parts, const Vec3Field& h,
                     const Vec3Field& material_dv);

enum class RtPressure { Q, Total };
Field rt_indicator(const BulkGrid& plus, const PressureParts& parts, RtPressure which = RtPressure::Q);

Field normal_component(const BulkGrid& grid, const Vec3Field& u);  // u.n on the interface
double max_abs(const Field& f);
Vec3Field interface_trace(const BulkGrid& grid, const Vec3Field& u);

}  // namespace pil::fields
