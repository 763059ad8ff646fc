#pragma once

#include "pil/evolution.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace pil::scenario {

inline constexpr int kSeriesFormat = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

// One CSV line. Quantities that were not computed are NaN.
struct TimeSeriesRow {
  double t = 0.0;
  long step = 0;
  double kinetic = 0, magnetic_plus = 0, magnetic_vacuum = 0, surface = 0, energy = 0;
  double input_power = 0, budget_residual = 0, reconstruction_residual = 0;
  double rt_min = 0, upsilon = 0, wall_gap = 0, chart_margin = 0, syrovatskij_margin = 0;
  double max_div_v = 0, max_div_h = 0, max_h_normal = 0;
  double projection_v = 0, projection_h = 0;
  double e_l = 0, e_alpha = 0;
  std::array<double, 4> cal_e{};
  double kappa_first_order = 0, kappa_second_order = 0;

  static const std::vector<std::string>& columns();
  // Values in column order, step excluded (it is written as an integer).
  std::vector<double> values() const;
  static TimeSeriesRow from_values(double t, long step, const std::vector<double>& values);
};

struct SeriesHeader {
  std::string config_hash;
  std::string filter_state;
  std::string preset;
  std::string dialect;

  std::string line() const;
};

std::string format_row(const TimeSeriesRow& row);

// Streams rows to a CSV file, flushing after each row.
class SeriesWriter {
 public:
  // With keep_through >= 0 an existing file with the same config hash is kept up
  // to and including that step; otherwise the file is replaced.
  SeriesWriter(const std::string& path, const SeriesHeader& header, long keep_through = -1);
  void write(const TimeSeriesRow& row);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

void write_series(const std::vector<TimeSeriesRow>& rows, const std::string& path, const SeriesHeader& header);

struct SeriesFile {
  SeriesHeader header;
  std::vector<TimeSeriesRow> rows;
};
SeriesFile read_series(const std::string& path);

// A state together with the step report that produced it.
struct HistoryEntry {
  evolution::SimState state;
  evolution::StepReport report;
};

// Trailing states of a run (oldest first, last is the current state) plus the
// resolved config they belong to.
struct Checkpoint {
  nlohmann::json config;
  std::uint64_t config_hash = 0;
  std::vector<HistoryEntry> history;
};

void write_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

// Single-state forms.
void checkpoint(const evolution::SimState& s, const nlohmann::json& config, const std::string& path);
evolution::SimState restore(const std::string& path);

}  // namespace pil::scenario
