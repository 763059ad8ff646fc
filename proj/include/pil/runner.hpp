#pragma once

#include "pil/config.hpp"
#include "pil/output.hpp"

#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace pil::scenario {

struct RunOptions {
  std::string out_dir;  // empty: the config's output.dir
  int threads = 1;
  int cadence = 0;      // 0: the config's diagnostics.cadence
  std::ostream* log = nullptr;
  // Return right after the first checkpoint is written.
  bool stop_at_checkpoint = false;
  // Called with every state the run produces, the initial one included.
  std::function<void(const evolution::SimState&)> on_state;
};

struct RunResult {
  std::vector<TimeSeriesRow> rows;  // rows emitted by this invocation
  evolution::SimState final_state;
  std::string series_path;
  std::vector<std::string> checkpoints;
  bool stopped_at_checkpoint = false;
  // Largest high-wavenumber share of the interface spectrum seen at row steps,
  // and whether it grew more than tenfold past 1e-6 over the run (a growth flag, not a blow-up claim).
  double high_mode_fraction = 0.0;
  bool high_mode_growth = false;
  bool upsilon_floor_held = true;
  bool wall_gap_held = true;
};

class Runner {
 public:
  Runner(ScenarioConfig cfg, RunOptions opts = {});

  const ScenarioConfig& config() const { return cfg_; }
  const evolution::Stepper& stepper() const { return *stepper_; }
  std::string out_dir() const;

  // Interface, velocity and field built from the physics section, projected and
  // with fluxes set; the initial state of run().
  evolution::SimState initial_state() const;

  RunResult run();
  // Continues from a checkpoint written by a run of the same config.
  RunResult resume(const Checkpoint& ck);

  // Diagnostics of one state (budget and identity columns left NaN).
  TimeSeriesRow diagnose(const evolution::SimState& s, const evolution::StepReport& rep) const;

 private:
  struct Slot;
  RunResult loop(std::vector<HistoryEntry> history, bool fresh);
  int delay() const { return cfg_.diagnostics.identities ? 2 : 1; }
  int cadence() const;
  void log(const std::string& msg) const;

  ScenarioConfig cfg_;
  RunOptions opts_;
  std::shared_ptr<const surface::ReferenceSurface> ref_;
  std::unique_ptr<evolution::Stepper> stepper_;
};

// Reloads the embedded config of a checkpoint and continues the run.
RunResult restore_run(const std::string& checkpoint_path, RunOptions opts = {});

struct IdentityCheck {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass() const { return value <= tolerance; }
};

// Static geometry suite on the initial interface of a config; no stepping.
std::vector<IdentityCheck> verify_identities(const ScenarioConfig& cfg, int threads = 1);

struct SweepEntry {
  double alpha = 0.0;
  Field gamma;  // interface at t_end
  std::string out_dir;
};

struct SweepResult {
  std::vector<SweepEntry> runs;
  std::vector<double> distances;  // L2 distance between runs i and i+1
  bool monotone_decreasing = false;
};

SweepResult sweep_alpha(const ScenarioConfig& cfg, const std::vector<double>& alphas, RunOptions opts = {});

// sqrt of the torus integral of (a - b)^2 on the grid.
double interface_distance(const Fourier2& grid, const Field& a, const Field& b);

}  // namespace pil::scenario
