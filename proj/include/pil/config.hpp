#pragma once

#include "pil/evolution.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pil::scenario {

// Version tag written into every output header; bump when the key tree changes.
inline constexpr const char* kConfigDialect = "pil-scenario/1";

// a cos(ku u + kv v) + b sin(ku u + kv v)
struct SpectralMode {
  int ku = 0, kv = 0;
  double cos = 0.0, sin = 0.0;
};

// Horizontal stream-function mode a(x,y) cos(kz pi (z - 1)) giving the field
// (d_y a, -d_x a, 0), which is divergence-free and tangent to the wall.
struct StreamMode {
  int ku = 0, kv = 0;
  double kz = 0.0;
  double cos = 0.0, sin = 0.0;
};

// Initial bulk field: uniform part, gradients of harmonic potentials with no
// wall flux, and stream modes.
struct FieldSpec {
  Eigen::Vector3d uniform = Eigen::Vector3d::Zero();
  std::vector<SpectralMode> potential;
  std::vector<StreamMode> stream;

  bool empty() const { return uniform.isZero(0.0) && potential.empty() && stream.empty(); }
};

struct RandomModes {
  double amplitude = 0.0;  // largest coefficient magnitude
  int kmax = 0;
};

struct ScenarioConfig {
  struct Geometry {
    int n_u = 16, n_v = 16, n_z = 10;
    double z0 = 0.0;
    double delta0 = 0.5;  // chart radius
    double c0 = 0.1;      // minimum interface/wall gap
    double sigma_nu = 2.0;
    double a = 10.0;
  } geometry;

  struct Physics {
    std::string preset = "custom";
    double alpha = 0.0;
    std::vector<SpectralMode> gamma;
    RandomModes gamma_random;
    FieldSpec velocity, field;
    fields::SurfaceCurrent current;
    std::optional<Eigen::Vector2d> v_flux, h_flux;
    double upsilon_floor = 0.0;  // threshold reported by the noncollinear monitor
  } physics;

  evolution::StepperConfig stepper;

  struct Diagnostics {
    int cadence = 1;
    bool input_power = true;
    bool identities = false;
    bool sobolev = false;
    int sobolev_l = 0, sobolev_k = 3;
    fields::RtPressure rt_pressure = fields::RtPressure::Q;
  } diagnostics;

  struct Output {
    std::string dir = "pil-out";
    std::vector<double> checkpoint_at;
  } output;

  std::uint64_t seed = 0;

  // Fully resolved key tree (defaults and preset filled in); the hash is taken
  // over its canonical dump.
  nlohmann::json resolved;

  std::uint64_t hash() const;
  std::string hash_hex() const;
  long total_steps() const;
  std::string filter_state() const;
};

// Preset key trees; "custom" is the empty tree.
nlohmann::json preset_tree(const std::string& name);
std::vector<std::string> preset_names();

ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config(const nlohmann::json& tree);
ScenarioConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");

// Returns a copy with one key replaced, re-validated.
ScenarioConfig with_override(const ScenarioConfig& cfg, const std::string& json_pointer, const nlohmann::json& value);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace pil::scenario
