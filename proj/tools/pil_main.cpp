#include "pil/error.hpp"
#include "pil/runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace pil;
using namespace pil::scenario;
using nlohmann::json;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::ValidationError: return 2;
    case ErrorKind::StepRejected: return 3;
    default: return 1;
  }
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("PIL_THREADS"); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1 || n > 1024)
      fail(ErrorKind::ParseError, std::string("PIL_THREADS must be a positive integer, got '") + env + "'",
           "PIL_THREADS");
    return int(n);
  }
  return 1;
}

std::string pick_config(const std::string& positional, const std::string& flag) {
  if (!positional.empty() && !flag.empty() && positional != flag)
    fail(ErrorKind::ParseError, "config given both positionally and with --config", "config");
  const std::string path = positional.empty() ? flag : positional;
  if (path.empty()) fail(ErrorKind::ParseError, "missing config path", "config");
  return path;
}

void write_json(const std::string& path, const json& j) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoError, "cannot write summary", path);
  out << j.dump(2) << '\n';
}

json run_summary(const ScenarioConfig& cfg, const RunResult& r, const std::string& dir) {
  return {{"status", r.stopped_at_checkpoint ? "stopped_at_checkpoint" : "completed"},
          {"config_hash", cfg.hash_hex()},
          {"filter", cfg.filter_state()},
          {"preset", cfg.physics.preset},
          {"t", r.final_state.t},
          {"step", r.final_state.step},
          {"rows", r.rows.size()},
          {"series", r.series_path},
          {"checkpoints", r.checkpoints},
          {"out_dir", dir},
          {"high_mode_fraction", r.high_mode_fraction},
          {"high_mode_growth", r.high_mode_growth},
          {"upsilon_floor_held", r.upsilon_floor_held},
          {"wall_gap_held", r.wall_gap_held}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plasma-vacuum interface solver"};
  app.require_subcommand(1);
  std::string config_flag, out_dir, alphas_text;
  int threads = 0, cadence = 0;
  bool quiet = false;
  app.add_option("--config", config_flag, "Scenario config (JSON)");
  app.add_option("--out-dir", out_dir, "Output directory (overrides output.dir)");
  app.add_option("--threads", threads, "Worker threads (falls back to PIL_THREADS, then 1)")->check(CLI::PositiveNumber);
  app.add_option("--cadence", cadence, "Diagnostics every this many steps")->check(CLI::PositiveNumber);
  bool stop_at_checkpoint = false;
  app.add_flag("--quiet", quiet, "Suppress progress lines on stderr");
  app.add_flag("--stop-at-checkpoint", stop_at_checkpoint, "Exit after writing the first checkpoint");

  std::string run_config, verify_config, sweep_config, checkpoint_path;
  auto* run = app.add_subcommand("run", "Integrate a scenario and write series.csv");
  run->add_option("config", run_config, "Scenario config");
  auto* verify = app.add_subcommand("verify-identities", "Static geometry checks on the initial interface");
  verify->add_option("config", verify_config, "Scenario config");
  auto* sweep = app.add_subcommand("sweep-alpha", "Repeat a run over surface tension values");
  sweep->add_option("config", sweep_config, "Scenario config");
  sweep->add_option("--alphas", alphas_text, "Comma-separated alpha values")->required();
  auto* restore = app.add_subcommand("restore", "Continue a run from a checkpoint");
  restore->add_option("checkpoint", checkpoint_path, "Checkpoint file")->required();
  for (auto* sub : {run, verify, sweep, restore}) sub->fallthrough();

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      fail(ErrorKind::ParseError, e.what(), "argv");
    }

    RunOptions opts;
    opts.out_dir = out_dir;
    opts.threads = resolve_threads(threads);
    opts.cadence = cadence;
    opts.log = quiet ? nullptr : &std::cerr;
    opts.stop_at_checkpoint = stop_at_checkpoint;

    if (*run) {
      const ScenarioConfig cfg = load_config(pick_config(run_config, config_flag));
      Runner runner(cfg, opts);
      const RunResult r = runner.run();
      const json summary = run_summary(cfg, r, runner.out_dir());
      write_json((std::filesystem::path(runner.out_dir()) / "summary.json").string(), summary);
      std::cout << summary.dump() << std::endl;
      return 0;
    }
    if (*restore) {
      const RunResult r = restore_run(checkpoint_path, opts);
      const Checkpoint ck = read_checkpoint(checkpoint_path);
      const ScenarioConfig cfg = parse_config(ck.config);
      const std::string dir = out_dir.empty() ? cfg.output.dir : out_dir;
      const json summary = run_summary(cfg, r, dir);
      write_json((std::filesystem::path(dir) / "summary.json").string(), summary);
      std::cout << summary.dump() << std::endl;
      return 0;
    }
    if (*verify) {
      const ScenarioConfig cfg = load_config(pick_config(verify_config, config_flag));
      bool all = true;
      for (const auto& c : verify_identities(cfg, opts.threads)) {
        std::printf("%s %s value=%.3e tol=%.1e\n", c.pass() ? "PASS" : "FAIL", c.name.c_str(), c.value, c.tolerance);
        all = all && c.pass();
      }
      return all ? 0 : 1;
    }
    if (*sweep) {
      const ScenarioConfig cfg = load_config(pick_config(sweep_config, config_flag));
      std::vector<double> alphas;
      for (const auto& tok : CLI::detail::split(alphas_text, ',')) {
        try {
          std::size_t used = 0;
          const double a = std::stod(tok, &used);
          if (used != tok.size()) throw std::invalid_argument(tok);
          alphas.push_back(a);
        } catch (const std::exception&) {
          fail(ErrorKind::ParseError, "cannot read alpha value '" + tok + "'", "--alphas");
        }
      }
      const SweepResult res = sweep_alpha(cfg, alphas, opts);
      const std::string dir = out_dir.empty() ? cfg.output.dir : out_dir;
      const std::string table = (std::filesystem::path(dir) / "sweep.csv").string();
      std::ofstream out(table);
      if (!out) fail(ErrorKind::IoError, "cannot write sweep table", table);
      out << "# pil-sweep config_hash=" << cfg.hash_hex() << " filter=" << cfg.filter_state() << '\n';
      out << "alpha_a,alpha_b,l2_distance\n";
      std::printf("alpha_a  alpha_b  l2_distance\n");
      for (std::size_t i = 0; i < res.distances.size(); ++i) {
        char line[128];
        std::snprintf(line, sizeof line, "%.16e,%.16e,%.16e", res.runs[i].alpha, res.runs[i + 1].alpha,
                      res.distances[i]);
        out << line << '\n';
        std::printf("%-8g %-8g %.6e\n", res.runs[i].alpha, res.runs[i + 1].alpha, res.distances[i]);
      }
      std::printf("trend: %s\n", res.monotone_decreasing ? "monotonically decreasing" : "not monotone");
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << e.to_json() << std::endl;
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "InternalError"}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  }
  return 1;
}
