#pragma once

#include "pil/evolution.hpp"

#include <map>
#include <string>
#include <vector>

namespace pil::diagnostics {

using evolution::Frame;
using evolution::SimState;
using evolution::Stepper;

// Surface traces of the state on the interface.
struct InterfaceData {
  Vec3Field v, h, hhat;
  Field theta;   // v . n
  Field dgamma;  // kinematic rate
};
InterfaceData interface_data(const Frame& f, const SimState& s);

struct ElectricField {
  Vec3Field e;                      // on the minus grid
  Eigen::Vector2d cycle_coefficients = Eigen::Vector2d::Zero();
  double tangential_residual = 0.0;  // L2 mismatch of n x E = (v.n) hhat on the interface
  double curl_flux_defect = 0.0;
  double input_power = 0.0;          // wall integral of E . J
};

// Vacuum electric field with curl E = -dt hhat, div E = 0, tangential trace
// (v.n) hhat x n on the interface and no normal component on the lower wall.
ElectricField reconstruct_electric_field(const Frame& f, const Vec3Field& v, const std::array<Field, 2>& current_rate);

struct EnergyReport {
  double kinetic = 0.0, magnetic_plus = 0.0, magnetic_vacuum = 0.0, surface = 0.0, total = 0.0;
  double input_power = 0.0;
  bool input_power_valid = true;
  double reconstruction_residual = 0.0;
};

EnergyReport physical_energy(const Stepper& st, const SimState& s, const Frame& f, bool with_input = true);

// Centered dE/dt minus the input power at the middle snapshot.
double energy_budget(const std::array<double, 3>& energy, const std::array<double, 3>& input, double dt);

struct StabilityReport {
  double rt_min = 0.0, upsilon = 0.0, wall_gap = 0.0, chart_margin = 0.0, syrovatskij_margin = 0.0;
};

// Pointwise minimum over unit tangents a of |a.h|^2 + |a.hhat|^2.
Field upsilon_field(const surface::SurfaceGeometry& geom, const Vec3Field& h, const Vec3Field& hhat);
// Same quantity from 360 sampled directions refined by golden-section search.
Field upsilon_bruteforce(const surface::SurfaceGeometry& geom, const Vec3Field& h, const Vec3Field& hhat);
double upsilon(const surface::SurfaceGeometry& geom, const Vec3Field& h, const Vec3Field& hhat);

StabilityReport stability_monitors(const Stepper& st, const SimState& s, const Frame& f,
                                   fields::RtPressure which = fields::RtPressure::Q);

// Right-hand side of the first-order curvature evolution identity.
Field kappa_rate(const surface::SurfaceGeometry& geom, const Vec3Field& v_trace);

struct IdentityResidualReport {
  double simons = 0.0, lap_n = 0.0, ds_transport = 0.0;
  double kappa_first_order = 0.0, kappa_second_order = 0.0, energy_budget = 0.0;
  std::map<std::string, double> second_order_terms;  // max magnitude of each explicit term
  int n = 0, nz = 0;
  double dt = 0.0;
  bool filtered = false;
};

// Needs five consecutive snapshots spaced by dt; evaluates at the middle one.
IdentityResidualReport kappa_evolution_residuals(const Stepper& st, const std::vector<SimState>& window);

struct SobolevReport {
  double e_l = 0.0, e_alpha = 0.0;
  std::array<double, 4> calE{};
};

SobolevReport sobolev_energies(const Stepper& st, const SimState& s, const Frame& f, int l, int k,
                               harmonic::DnCache* cache = nullptr);

}  // namespace pil::diagnostics
