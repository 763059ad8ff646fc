#include "pil/runner.hpp"

#include "pil/diagnostics.hpp"
#include "pil/error.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <limits>
#include <random>
#include <set>

namespace pil::scenario {

using evolution::SimState;
using evolution::StepReport;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Field mode_sum(const Fourier2& grid, const std::vector<SpectralMode>& modes) {
  const Field u = grid.nodes_u(), v = grid.nodes_v();
  Field out = Field::Zero(grid.points());
  for (const auto& m : modes) {
    const Field phase = m.ku * u + m.kv * v;
    out += m.cos * phase.cos() + m.sin * phase.sin();
  }
  return out;
}

Field initial_gamma(const ScenarioConfig& cfg, const Fourier2& grid) {
  Field gamma = mode_sum(grid, cfg.physics.gamma);
  const auto& rnd = cfg.physics.gamma_random;
  if (rnd.amplitude > 0 && rnd.kmax > 0) {
    std::mt19937_64 gen(cfg.seed);
    std::vector<SpectralMode> modes;
    for (int ku = 0; ku <= rnd.kmax; ++ku)
      for (int kv = -rnd.kmax; kv <= rnd.kmax; ++kv) {
        if (ku == 0 && kv <= 0) continue;
        // Uniform in [-1, 1] built from the raw 64-bit draw so the sequence does
        // not depend on the standard library's distribution implementation.
        auto draw = [&] { return 2.0 * (double(gen() >> 11) * 0x1.0p-53) - 1.0; };
        const double decay = 1.0 / (1.0 + ku * ku + kv * kv);
        modes.push_back({ku, kv, rnd.amplitude * decay * draw(), rnd.amplitude * decay * draw()});
      }
    gamma += mode_sum(grid, modes);
  }
  return gamma;
}

// Evaluates a field spec at the nodes of the plus grid (wall at z = 1).
Vec3Field sample_field(const FieldSpec& spec, const harmonic::BulkGrid& plus, double z0) {
  const Field& x = plus.position()[0];
  const Field& y = plus.position()[1];
  const Field& z = plus.position()[2];
  const std::size_t n = plus.size();
  Vec3Field out{Field::Constant(n, spec.uniform.x()), Field::Constant(n, spec.uniform.y()),
                Field::Constant(n, spec.uniform.z())};
  for (const auto& m : spec.potential) {
    // Harmonic potential with no flux through the wall, normalised to unit
    // amplitude at the reference height.
    const double k = std::hypot(double(m.ku), double(m.kv));
    const double norm = std::cosh(k * (z0 - 1.0));
    const Field phase = m.ku * x + m.kv * y;
    const Field wave = m.cos * phase.cos() + m.sin * phase.sin();
    const Field dwave = -m.cos * phase.sin() + m.sin * phase.cos();
    const Field ch = (k * (z - 1.0)).cosh() / norm, sh = (k * (z - 1.0)).sinh() / norm;
    out[0] += m.ku * dwave * ch;
    out[1] += m.kv * dwave * ch;
    out[2] += k * wave * sh;
  }
  for (const auto& m : spec.stream) {
    const Field phase = m.ku * x + m.kv * y;
    const Field dwave = -m.cos * phase.sin() + m.sin * phase.cos();
    const Field vertical = (m.kz * 0.5 * kTwoPi * (z - 1.0)).cos();
    out[0] += m.kv * dwave * vertical;
    out[1] -= m.ku * dwave * vertical;
  }
  return out;
}

double high_mode_fraction(const Fourier2& grid, const Field& gamma) {
  const auto c = surface::HeightField(gamma).spectral_coeffs(grid);
  double total = 0.0, high = 0.0;
  const int nu2 = grid.nu() / 2 + 1;
  for (int j = 0; j < grid.nv(); ++j)
    for (int i = 0; i < nu2; ++i) {
      const double w = (i == 0 || 2 * i == grid.nu()) ? 1.0 : 2.0;
      const double e = w * std::norm(c[std::size_t(j) * nu2 + i]);
      total += e;
      if (4 * std::max(std::abs(grid.ku(i)), std::abs(grid.kv(j))) > std::min(grid.nu(), grid.nv())) high += e;
    }
  return total > 0 ? high / total : 0.0;
}

double vmax(const Vec3Field& a) {
  return std::max({fields::max_abs(a[0]), fields::max_abs(a[1]), fields::max_abs(a[2])});
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

struct Runner::Slot {
  HistoryEntry entry;
  double energy = kNaN;
  bool has_row = false;
  TimeSeriesRow row;
};

Runner::Runner(ScenarioConfig cfg, RunOptions opts) : cfg_(std::move(cfg)), opts_(std::move(opts)) {
  const auto& g = cfg_.geometry;
  ref_ = surface::ReferenceSurface::flat(std::make_shared<Fourier2>(g.n_u, g.n_v), g.z0, g.delta0, g.c0);
  evolution::StepperConfig sc = cfg_.stepper;
  sc.threads = std::max(1, opts_.threads);
  stepper_ = std::make_unique<evolution::Stepper>(ref_, sc, cfg_.physics.current);
}

std::string Runner::out_dir() const { return opts_.out_dir.empty() ? cfg_.output.dir : opts_.out_dir; }

int Runner::cadence() const { return opts_.cadence > 0 ? opts_.cadence : cfg_.diagnostics.cadence; }

void Runner::log(const std::string& msg) const {
  if (opts_.log) *opts_.log << msg << std::endl;
}

SimState Runner::initial_state() const {
  const auto& st = *stepper_;
  SimState s;
  s.gamma = initial_gamma(cfg_, ref_->grid());
  if (fields::max_abs(s.gamma) >= cfg_.geometry.delta0)
    fail(ErrorKind::ValidationError, "initial interface leaves the chart (max |gamma| >= delta0)", "physics.gamma");
  const evolution::Frame f = st.frame(s.gamma, 0.0);
  st.check_state(f.geom);
  const auto& plus = *f.plus;
  s.v = sample_field(cfg_.physics.velocity, plus, cfg_.geometry.z0);
  s.h = sample_field(cfg_.physics.field, plus, cfg_.geometry.z0);

  auto project = [&] {
    if (!cfg_.stepper.project) return;
    evolution::leray_project(plus, s.v, false);
    evolution::leray_project(plus, s.h, true);
  };
  project();
  // Uniform horizontal shifts move the wall fluxes onto the requested values;
  // projection afterwards only adds periodic gradients, which carry no flux.
  const double wall_area = kTwoPi * kTwoPi;
  fields::Fluxes measured = st.measured_fluxes(s, f);
  if (cfg_.physics.v_flux || cfg_.physics.h_flux) {
    for (int c = 0; c < 2; ++c) {
      if (cfg_.physics.v_flux) s.v[c] += ((*cfg_.physics.v_flux)[c] - measured.v[c]) / wall_area;
      if (cfg_.physics.h_flux) s.h[c] += ((*cfg_.physics.h_flux)[c] - measured.h[c]) / wall_area;
    }
    project();
    measured = st.measured_fluxes(s, f);
  }
  s.fluxes = measured;
  return s;
}

TimeSeriesRow Runner::diagnose(const SimState& s, const StepReport& rep) const {
  const auto& st = *stepper_;
  const evolution::Frame f = st.frame(s.gamma, s.t);
  TimeSeriesRow r;
  r.t = s.t;
  r.step = s.step;
  const auto e = diagnostics::physical_energy(st, s, f, cfg_.diagnostics.input_power);
  r.kinetic = e.kinetic;
  r.magnetic_plus = e.magnetic_plus;
  r.magnetic_vacuum = e.magnetic_vacuum;
  r.surface = e.surface;
  r.energy = e.total;
  r.input_power = cfg_.diagnostics.input_power ? e.input_power : kNaN;
  r.reconstruction_residual = cfg_.diagnostics.input_power ? e.reconstruction_residual : kNaN;
  r.budget_residual = kNaN;
  const auto m = diagnostics::stability_monitors(st, s, f, cfg_.diagnostics.rt_pressure);
  r.rt_min = m.rt_min;
  r.upsilon = m.upsilon;
  r.wall_gap = m.wall_gap;
  r.chart_margin = m.chart_margin;
  r.syrovatskij_margin = m.syrovatskij_margin;
  r.max_div_v = fields::max_abs(f.plus->divergence(s.v));
  r.max_div_h = fields::max_abs(f.plus->divergence(s.h));
  r.max_h_normal = fields::max_abs(fields::normal_component(*f.plus, s.h));
  r.projection_v = rep.projection_v;
  r.projection_h = rep.projection_h;
  if (cfg_.diagnostics.sobolev) {
    const auto so = diagnostics::sobolev_energies(st, s, f, cfg_.diagnostics.sobolev_l, cfg_.diagnostics.sobolev_k);
    r.e_l = so.e_l;
    r.e_alpha = so.e_alpha;
    r.cal_e = so.calE;
  } else {
    r.e_l = r.e_alpha = kNaN;
    r.cal_e.fill(kNaN);
  }
  r.kappa_first_order = r.kappa_second_order = kNaN;
  return r;
}

RunResult Runner::run() {
  SimState s0 = initial_state();
  return loop({HistoryEntry{std::move(s0), {}}}, true);
}

RunResult Runner::resume(const Checkpoint& ck) {
  if (ck.config_hash != cfg_.hash())
    fail(ErrorKind::VersionMismatch, "checkpoint belongs to config " + std::to_string(ck.config_hash));
  return loop(ck.history, false);
}

RunResult Runner::loop(std::vector<HistoryEntry> history, bool fresh) {
  const auto& st = *stepper_;
  const double dt = cfg_.stepper.dt;
  const long total = cfg_.total_steps();
  const int every = cadence();
  const int lag = delay();
  const std::string dir = out_dir();

  std::set<long> checkpoint_steps;
  for (double t : cfg_.output.checkpoint_at) checkpoint_steps.insert(std::lround(t / dt));

  RunResult result;
  result.series_path = (std::filesystem::path(dir) / "series.csv").string();
  const long current = history.back().state.step;
  SeriesHeader header{cfg_.hash_hex(), cfg_.filter_state(), cfg_.physics.preset, kConfigDialect};
  SeriesWriter writer(result.series_path, header, fresh ? -1 : current - lag);

  std::deque<Slot> window;
  double first_fraction = -1.0;
  auto observe = [&](const TimeSeriesRow& row, const SimState& s) {
    const double frac = high_mode_fraction(ref_->grid(), s.gamma);
    if (first_fraction < 0) first_fraction = frac;
    result.high_mode_fraction = std::max(result.high_mode_fraction, frac);
    // Roundoff-level content below 1e-6 of the spectrum is not counted as growth.
    if (frac > std::max(10.0 * first_fraction, 1e-6)) result.high_mode_growth = true;
    if (row.upsilon < cfg_.physics.upsilon_floor) result.upsilon_floor_held = false;
    if (row.wall_gap < cfg_.geometry.c0) result.wall_gap_held = false;
  };

  // Energy of every state, plus the partial row when the step is a row step
  // whose row has not been written yet.
  auto admit = [&](HistoryEntry entry, bool row_pending) {
    Slot slot;
    slot.entry = std::move(entry);
    const SimState& s = slot.entry.state;
    if (row_pending && s.step % every == 0) {
      slot.row = diagnose(s, slot.entry.report);
      slot.has_row = true;
      slot.energy = slot.row.energy;
      observe(slot.row, s);
    } else {
      slot.energy = diagnostics::physical_energy(st, s, st.frame(s.gamma, s.t), false).total;
    }
    if (opts_.on_state && (fresh || s.step > current)) opts_.on_state(s);
    window.push_back(std::move(slot));
    while (window.size() > std::size_t(2 * lag + 1)) window.pop_front();
  };
  auto find = [&](long step) -> const Slot* {
    for (const auto& sl : window)
      if (sl.entry.state.step == step) return &sl;
    return nullptr;
  };
  auto finalize = [&](long m, long last) {
    const Slot* mid = find(m);
    if (!mid || !mid->has_row) return;
    TimeSeriesRow row = mid->row;
    const Slot* prev = find(m - 1);
    const Slot* next = m + 1 <= last ? find(m + 1) : nullptr;
    double rate = kNaN;
    if (prev && next) rate = (next->energy - prev->energy) / (2.0 * dt);
    else if (next) rate = (next->energy - mid->energy) / dt;
    else if (prev) rate = (mid->energy - prev->energy) / dt;
    const double input = std::isnan(row.input_power) ? 0.0 : row.input_power;
    row.budget_residual = rate - input;
    if (cfg_.diagnostics.identities) {
      std::vector<SimState> snaps;
      for (long k = m - 2; k <= m + 2; ++k)
        if (const Slot* sl = k <= last ? find(k) : nullptr) snaps.push_back(sl->entry.state);
      if (snaps.size() == 5) {
        const auto id = diagnostics::kappa_evolution_residuals(st, snaps);
        row.kappa_first_order = id.kappa_first_order;
        row.kappa_second_order = id.kappa_second_order;
      }
    }
    writer.write(row);
    result.rows.push_back(row);
  };

  if (fresh) {
    admit(std::move(history.front()), true);
  } else {
    for (auto& e : history) {
      const bool pending = e.state.step > current - lag;
      admit(std::move(e), pending);
    }
    log("resumed at step " + std::to_string(current) + " t=" + fmt(window.back().entry.state.t));
  }

  for (long n = current + 1; n <= total; ++n) {
    const SimState& prev = window.back().entry.state;
    HistoryEntry next;
    try {
      next.state = st.step(prev, &next.report);
    } catch (const Error& e) {
      for (long m = n - lag; m < n; ++m)
        if (m >= 0) finalize(m, n - 1);
      throw;
    }
    admit(std::move(next), true);
    finalize(n - lag, n);
    if (n % 50 == 0 || n == total) {
      const auto& s = window.back().entry.state;
      log("step " + std::to_string(n) + "/" + std::to_string(total) + " t=" + fmt(s.t) +
          " max|gamma|=" + fmt(fields::max_abs(s.gamma)) + " energy=" + fmt(window.back().energy));
    }
    if (checkpoint_steps.count(n)) {
      Checkpoint ck;
      ck.config = cfg_.resolved;
      ck.config_hash = cfg_.hash();
      for (const auto& sl : window)
        if (sl.entry.state.step > n - 2 * lag) ck.history.push_back(sl.entry);
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_%06ld.bin", n);
      const std::string path = (std::filesystem::path(dir) / name).string();
      write_checkpoint(ck, path);
      result.checkpoints.push_back(path);
      log("wrote " + path);
      if (opts_.stop_at_checkpoint) {
        result.stopped_at_checkpoint = true;
        result.final_state = window.back().entry.state;
        return result;
      }
    }
  }
  const long last = window.back().entry.state.step;
  for (long m = std::max<long>(0, last - lag + 1); m <= last; ++m) finalize(m, last);
  result.final_state = window.back().entry.state;
  return result;
}

RunResult restore_run(const std::string& checkpoint_path, RunOptions opts) {
  const Checkpoint ck = read_checkpoint(checkpoint_path);
  ScenarioConfig cfg = parse_config(ck.config);
  if (cfg.hash() != ck.config_hash)
    fail(ErrorKind::VersionMismatch, "embedded config no longer parses to the same hash", checkpoint_path);
  Runner runner(std::move(cfg), std::move(opts));
  return runner.resume(ck);
}

std::vector<IdentityCheck> verify_identities(const ScenarioConfig& cfg, int threads) {
  ScenarioConfig local = cfg;
  local.output.checkpoint_at.clear();
  RunOptions opts;
  opts.threads = threads;
  Runner runner(local, opts);
  const auto& st = runner.stepper();
  const SimState s = runner.initial_state();
  const evolution::Frame f = st.frame(s.gamma, 0.0);
  const auto& geom = f.geom;
  const auto& grid = st.reference().grid();
  std::vector<IdentityCheck> out;

  const auto ids = surface::geometric_identities(geom);
  out.push_back({"simons_identity", ids.simons, 1e-6});
  out.push_back({"normal_laplacian_identity", ids.normal_laplacian, 1e-6});

  const auto kmap = surface::kappa_a_forward(st.reference_ptr(), surface::HeightField(s.gamma), cfg.geometry.a);
  const auto back = surface::kappa_a_invert(st.reference_ptr(), kmap.values, cfg.geometry.a,
                                            surface::HeightField(Field::Zero(grid.points())));
  out.push_back({"kmap_round_trip", fields::max_abs(back.gamma.values() - s.gamma), 1e-10});

  const Field u = grid.nodes_u(), v = grid.nodes_v();
  const Field f1 = (u + 2.0 * v).sin() + 0.5 * (2.0 * u).cos();
  const Field f2 = (u - v).cos() + 0.3 * (3.0 * v).sin();
  auto dn_checks = [&](const harmonic::BulkGrid& g, const std::string& side) {
    const Field kernel = harmonic::dn_apply(g, Field::Ones(grid.points()));
    out.push_back({"dn_constant_kernel_" + side, fields::max_abs(kernel), 1e-8});
    const Field a = harmonic::dn_apply(g, f1), b = harmonic::dn_apply(g, f2);
    const double asym = geom.integrate(f1 * b) - geom.integrate(f2 * a);
    const double scale = std::sqrt(geom.integrate(f1 * a) * geom.integrate(f2 * b));
    out.push_back({"dn_symmetry_" + side, std::abs(asym) / scale, 1e-8});
  };
  dn_checks(*f.plus, "plus");
  const auto minus = f.minus ? f.minus : std::make_shared<const harmonic::BulkGrid>(
                                             harmonic::harmonic_coordinates(geom, st.reference_minus()));
  dn_checks(*minus, "minus");

  const auto data = diagnostics::interface_data(f, s);
  const Field eig = diagnostics::upsilon_field(geom, data.h, data.hhat);
  const Field brute = diagnostics::upsilon_bruteforce(geom, data.h, data.hhat);
  out.push_back({"upsilon_eigen_vs_bruteforce", fields::max_abs(eig - brute), 1e-6});

  out.push_back({"transversality_margin", std::max(0.0, 0.9 - geom.transversality.minCoeff()), 0.0});
  out.push_back({"initial_div_v", fields::max_abs(f.plus->divergence(s.v)), 1e-8});
  out.push_back({"initial_div_h", fields::max_abs(f.plus->divergence(s.h)), 1e-8});
  out.push_back({"initial_h_normal", fields::max_abs(fields::normal_component(*f.plus, s.h)), 1e-8});
  if (f.minus) {
    out.push_back({"vacuum_field_normal", fields::max_abs(fields::normal_component(*f.minus, f.hhat)), 1e-8});
    out.push_back({"vacuum_field_divergence", fields::max_abs(f.minus->divergence(f.hhat)), 1e-8});
    out.push_back({"vacuum_field_curl", vmax(f.minus->curl(f.hhat)), 1e-8});
  }
  return out;
}

double interface_distance(const Fourier2& grid, const Field& a, const Field& b) {
  return std::sqrt((a - b).square().sum() * grid.cell_area());
}

SweepResult sweep_alpha(const ScenarioConfig& cfg, const std::vector<double>& alphas, RunOptions opts) {
  if (alphas.size() < 2) fail(ErrorKind::ValidationError, "sweep needs at least two alpha values", "alphas");
  SweepResult res;
  const std::string base = opts.out_dir.empty() ? cfg.output.dir : opts.out_dir;
  for (double a : alphas) {
    ScenarioConfig c = with_override(cfg, "/physics/alpha", a);
    c.output.checkpoint_at.clear();
    RunOptions o = opts;
    o.stop_at_checkpoint = false;
    o.out_dir = (std::filesystem::path(base) / ("alpha_" + fmt(a))).string();
    Runner runner(c, o);
    if (opts.log) *opts.log << "sweep: alpha=" << fmt(a) << std::endl;
    const RunResult r = runner.run();
    res.runs.push_back({a, r.final_state.gamma, o.out_dir});
  }
  Fourier2 grid(cfg.geometry.n_u, cfg.geometry.n_v);
  for (std::size_t i = 0; i + 1 < res.runs.size(); ++i)
    res.distances.push_back(interface_distance(grid, res.runs[i].gamma, res.runs[i + 1].gamma));
  res.monotone_decreasing = true;
  for (std::size_t i = 0; i + 1 < res.distances.size(); ++i)
    if (!(res.distances[i + 1] < res.distances[i])) res.monotone_decreasing = false;
  return res;
}

}  // namespace pil::scenario
