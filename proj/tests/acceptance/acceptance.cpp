// Acceptance suite: one PASS/FAIL line per criterion. PIL_ACCEPT_ONLY="1,5"
// restricts the run to the listed criteria.

#include "pil/diagnostics.hpp"
#include "pil/error.hpp"
#include "pil/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace pil;
namespace fs = std::filesystem;
using harmonic::BulkGrid;
using harmonic::Side;
using surface::HeightField;
using surface::ReferenceSurface;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double vdiff(const Vec3Field& a, const Vec3Field& b) {
  return std::max({fields::max_abs(a[0] - b[0]), fields::max_abs(a[1] - b[1]), fields::max_abs(a[2] - b[2])});
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path p = fs::temp_directory_path() / "pil_acceptance";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

int threads() {
  if (const char* env = std::getenv("PIL_THREADS")) return std::max(1, std::atoi(env));
  return 1;
}

std::shared_ptr<const ReferenceSurface> flat_ref(int n, double z0) {
  return ReferenceSurface::flat(std::make_shared<Fourier2>(n, n), z0, 0.5, 0.1);
}

// 1. Flat Dirichlet-Neumann spectra against |k| tanh(|k| d).
Outcome dn_flat_spectrum() {
  const auto start = std::chrono::steady_clock::now();
  const int n = 32, levels = 22;
  double worst = 0.0;
  for (double z0 : {0.0, 0.3}) {
    auto ref = flat_ref(n, z0);
    const auto geom = surface::build_geometry(ref, HeightField(Field::Zero(ref->grid().points())));
    for (Side side : {Side::Plus, Side::Minus}) {
      const BulkGrid g = harmonic::harmonic_coordinates(geom, side, levels);
      const auto dn = harmonic::dn_assemble(g, geom, threads());
      const double depth = side == Side::Plus ? 1.0 - z0 : 1.0 + z0;
      std::vector<double> expect;
      for (const auto& m : surface::real_trig_modes(ref->grid(), false)) {
        const double k = std::hypot(m.ku, m.kv);
        expect.push_back(k * std::tanh(k * depth));
      }
      std::sort(expect.begin(), expect.end());
      std::vector<double> got(dn.eigenvalues().data(), dn.eigenvalues().data() + dn.eigenvalues().size());
      std::sort(got.begin(), got.end());
      if (got.size() != expect.size()) return {false, "eigenvalue count mismatch"};
      for (std::size_t i = 0; i < got.size(); ++i)
        worst = std::max(worst, std::abs(got[i] - expect[i]) / std::max(expect[i], 1.0));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-6 && secs < 60.0,
          "max relative eigenvalue error " + fmt("%.2e", worst) + " (tol 1e-6), runtime " + fmt("%.1f", secs) +
              " s (limit 60 s)"};
}

// 2. Geometric identities and graph curvature.
Outcome geometric_identities() {
  auto residuals = [](int n) {
    auto ref = flat_ref(n, 0.0);
    const Field u = ref->grid().nodes_u(), v = ref->grid().nodes_v();
    const auto geom = surface::build_geometry(ref, HeightField(0.1 * u.sin() + 0.05 * (u + v).cos()));
    return surface::geometric_identities(geom);
  };
  const auto coarse = residuals(16), fine = residuals(48);
  const double simons_drop = coarse.simons / std::max(fine.simons, 1e-300);
  const double lap_drop = coarse.normal_laplacian / std::max(fine.normal_laplacian, 1e-300);

  auto ref = flat_ref(64, 0.0);
  const Field u = ref->grid().nodes_u(), v = ref->grid().nodes_v();
  const Field gamma = 0.1 * u.sin() + 0.05 * (u + v).cos();
  const auto geom = surface::build_geometry(ref, HeightField(gamma));
  // The interface is the graph z = -gamma, and the normal points down.
  const Field gu = 0.1 * u.cos() - 0.05 * (u + v).sin(), gv = -0.05 * (u + v).sin();
  const Field guu = -0.1 * u.sin() - 0.05 * (u + v).cos(), guv = -0.05 * (u + v).cos(), gvv = guv;
  const Field w2 = 1.0 + gu.square() + gv.square();
  const Field oracle =
      -((1.0 + gv.square()) * guu - 2.0 * gu * gv * guv + (1.0 + gu.square()) * gvv) / w2.pow(1.5);
  const double kerr = (geom.curvature - oracle).abs().maxCoeff();
  const bool pass = simons_drop >= 1e3 && lap_drop >= 1e3 && kerr <= 1e-8;
  return {pass, "Simons " + fmt("%.2e", coarse.simons) + " -> " + fmt("%.2e", fine.simons) + " (drop " +
                    fmt("%.1e", simons_drop) + "), normal Laplacian " + fmt("%.2e", coarse.normal_laplacian) +
                    " -> " + fmt("%.2e", fine.normal_laplacian) + " (drop " + fmt("%.1e", lap_drop) +
                    "), graph curvature error " + fmt("%.2e", kerr) + " at 64^2"};
}

// 3. Modified-curvature map round trip.
Outcome kmap_round_trip() {
  const int n = 16;
  auto ref = flat_ref(n, 0.0);
  const Field u = ref->grid().nodes_u(), v = ref->grid().nodes_v();
  std::mt19937_64 rng(20261019);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  int max_iter = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Field gamma = Field::Zero(ref->grid().points());
    for (int p = -4; p <= 4; ++p)
      for (int q = 0; q <= 4; ++q) {
        if (q == 0 && p <= 0) continue;
        const double decay = std::exp(-0.6 * std::hypot(p, q));
        gamma += decay * (nd(rng) * (p * u + q * v).cos() + nd(rng) * (p * u + q * v).sin());
      }
    // Amplitudes spread over a fraction of the chart radius 0.5.
    const double amp = 0.05 + 0.15 * (trial % 10) / 9.0;
    gamma *= amp / gamma.abs().maxCoeff();
    const auto target = surface::kappa_a_forward(ref, HeightField(gamma), 10.0);
    const auto back = surface::kappa_a_invert(ref, target.values, 10.0, HeightField(Field::Zero(gamma.size())));
    worst = std::max(worst, (back.gamma.values() - gamma).abs().maxCoeff());
    max_iter = std::max(max_iter, back.iterations);
  }
  return {worst <= 1e-10 && max_iter <= 8,
          "100 fields, max error " + fmt("%.2e", worst) + " (tol 1e-10), max Newton iterations " +
              std::to_string(max_iter) + " (limit 8)"};
}

// 4. Div-curl recovery: manufactured field on a curved interface.
struct Manufactured {
  Vec3Field u, curl;
  Field div;
};

Manufactured manufactured(const BulkGrid& g) {
  const Field& x = g.position()[0];
  const Field& y = g.position()[1];
  const Field& z = g.position()[2];
  Manufactured m;
  const Field sxz = (x + z).sin(), cxz = (x + z).cos();
  m.u[0] = -sxz * y.sin() - x.sin() * (z - 1.0).cosh() + 0.3;
  m.u[1] = -cxz * y.cos() + y.cos() * (z - 1.0).square() - 0.2;
  m.u[2] = x.cos() * (z - 1.0).sinh() + 2.0 * y.sin() * (z - 1.0);
  m.curl = {Field(-sxz * y.cos()), Field(-cxz * y.sin()), Field(2.0 * sxz * y.cos())};
  m.div = y.sin() * (2.0 - (z - 1.0).square());
  return m;
}

Outcome divcurl_recovery() {
  const Eigen::Vector2d flux = Eigen::Vector2d(0.3, -0.2) * kTwoPi * kTwoPi;
  auto solve = [&](int n, int levels, Vec3Field* out = nullptr, const BulkGrid** grid = nullptr) {
    auto ref = flat_ref(n, 0.0);
    const Field u = ref->grid().nodes_u(), v = ref->grid().nodes_v();
    static std::vector<std::unique_ptr<BulkGrid>> keep;
    const auto geom = surface::build_geometry(ref, HeightField(0.1 * u.sin() + 0.05 * (u + v).cos()));
    keep.push_back(std::make_unique<BulkGrid>(harmonic::harmonic_coordinates(geom, Side::Plus, levels)));
    const BulkGrid& g = *keep.back();
    const Manufactured m = manufactured(g);
    const Vec3Field rec = fields::solve_divcurl_plus(g, m.curl, m.div, fields::normal_component(g, m.u), flux);
    if (out) *out = rec;
    if (grid) *grid = &g;
    return vdiff(rec, m.u);
  };
  std::vector<double> horiz, vert;
  for (int n : {8, 12, 16, 24}) horiz.push_back(solve(n, 24));
  for (int levels : {6, 10, 14, 18}) vert.push_back(solve(24, levels));
  bool pass = true;
  for (std::size_t i = 0; i + 1 < horiz.size(); ++i) pass = pass && horiz[i + 1] < horiz[i];
  for (std::size_t i = 0; i + 1 < vert.size(); ++i) pass = pass && vert[i + 1] < vert[i];
  // Spectral decay: the error falls by orders of magnitude, not by a fixed power.
  pass = pass && horiz.back() < 1e-4 * horiz.front() && vert.back() < 1e-4 * vert.front();

  // Uniqueness: the data of the recovered field reproduces that field.
  Vec3Field first;
  const BulkGrid* g = nullptr;
  solve(24, 24, &first, &g);
  const Vec3Field second = fields::solve_divcurl_plus(*g, g->curl(first), g->divergence(first),
                                                      fields::normal_component(*g, first), flux);
  // The curl/divergence of the recovered field are evaluated spectrally and fed back.
  const double cross = vdiff(first, second);
  pass = pass && cross <= 1e-9;
  std::string d = "horizontal N=8..24 errors";
  for (double e : horiz) d += " " + fmt("%.1e", e);
  d += "; vertical 6..18 levels";
  for (double e : vert) d += " " + fmt("%.1e", e);
  d += "; uniqueness cross-solve " + fmt("%.1e", cross) + " (tol 1e-9)";
  return {pass, d};
}

// Shared by criteria 5, 7 and 11: the capillary-mode preset, unbroken, with a
// mid-run checkpoint recorded for the later split comparison.
struct CapillaryRun {
  bool done = false;
  scenario::ScenarioConfig cfg;
  scenario::RunResult result;
  std::vector<double> times, probe;  // gamma at the first node
  double seconds = 0.0;
};

CapillaryRun& capillary_run() {
  static CapillaryRun run;
  if (run.done) return run;
  run.cfg = scenario::parse_config_text(R"({"preset": "capillary-mode", "output": {"checkpoint_at": [3.6]}})");
  scenario::RunOptions opts;
  opts.out_dir = (workdir() / "capillary").string();
  opts.threads = threads();
  opts.on_state = [&](const evolution::SimState& s) {
    run.times.push_back(s.t);
    run.probe.push_back(s.gamma[0]);
  };
  const auto start = std::chrono::steady_clock::now();
  scenario::Runner runner(run.cfg, opts);
  run.result = runner.run();
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run.done = true;
  return run;
}

// 5. Energy conservation and the budget under a ramped wall current.
Outcome energy_conservation() {
  const auto& run = capillary_run();
  const auto& rows = run.result.rows;
  const double e0 = rows.front().energy;
  double drift = 0.0, kin_max = 0.0;
  for (const auto& r : rows) {
    drift = std::max(drift, std::abs(r.energy - e0));
    kin_max = std::max(kin_max, r.kinetic);
  }
  const double rel = drift / e0;
  // The surface term includes the flat area; drift against the oscillating
  // part is the stricter figure and is reported alongside.
  const double rel_pert = drift / kin_max;

  // Ramped current over a wavy interface with a moving plasma.
  const auto cfg = scenario::parse_config_text(R"({
    "geometry": {"n_u": 16, "n_v": 16, "n_z": 10},
    "physics": {"alpha": 0.5,
                "gamma": {"modes": [{"k": [1, 0], "cos": 0.03}, {"k": [0, 1], "sin": 0.02}]},
                "velocity": {"potential": [{"k": [1, 1], "cos": 0.05}]},
                "field": {"uniform": [0.4, 0.2, 0.0]},
                "j_hat": {"uniform": [0.3, -0.2], "modes": [{"k": [1, 0], "y_cos": 0.2}],
                          "law": "ramp", "frequency": 1.0}},
    "stepper": {"dt": 0.02, "t_end": 0.8}})");
  scenario::RunOptions opts;
  opts.out_dir = (workdir() / "ramp").string();
  opts.threads = threads();
  scenario::Runner runner(cfg, opts);
  const auto ramp = runner.run().rows;
  // Composite Simpson rule for the injected energy (even number of intervals).
  const std::size_t m = ramp.size() - 1;
  double injected = 0.0, magnitude = 0.0;
  const double h = cfg.stepper.dt;
  bool valid = m % 2 == 0;
  for (std::size_t i = 0; i <= m; ++i) {
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    if (std::isnan(ramp[i].input_power)) valid = false;
    injected += w * ramp[i].input_power * h / 3.0;
    magnitude += w * std::abs(ramp[i].input_power) * h / 3.0;
  }
  const double change = ramp.back().energy - ramp.front().energy;
  const double mismatch = std::abs(change - injected);
  const bool budget_ok = valid && magnitude > 0 && mismatch <= 1e-3 * magnitude;
  return {rel <= 1e-4 && budget_ok,
          "capillary N=32 dt=" + fmt("%g", run.cfg.stepper.dt) + " over t=" + fmt("%.2f", rows.back().t) +
              ": relative drift " + fmt("%.2e", rel) + " (tol 1e-4), drift/max kinetic " + fmt("%.2e", rel_pert) +
              "; ramped current: dE " + fmt("%.4e", change) + ", integrated input " + fmt("%.4e", injected) +
              ", mismatch " + fmt("%.2e", mismatch) + " vs 1e-3*integral|P| = " + fmt("%.2e", 1e-3 * magnitude)};
}

// 6. Flat constant-field equilibrium is a fixed point.
Outcome equilibrium_fixed_point() {
  double worst = 0.0;
  for (double alpha : {0.0, 0.5, 1.0}) {
    auto cfg = scenario::parse_config_text(R"({"preset": "equilibrium"})");
    cfg = scenario::with_override(cfg, "/physics/alpha", alpha);
    scenario::Runner runner(cfg, {(workdir() / ("equilibrium_" + fmt("%g", alpha))).string(), threads()});
    const auto s0 = runner.initial_state();
    evolution::SimState s = s0;
    for (int i = 0; i < 100; ++i) s = runner.stepper().step(s);
    worst = std::max({worst, fields::max_abs(s.gamma - s0.gamma), vdiff(s.v, s0.v), vdiff(s.h, s0.h),
                      (s.fluxes.v - s0.fluxes.v).norm(), (s.fluxes.h - s0.fluxes.h).norm()});
  }
  return {worst <= 1e-10, "largest change after 100 steps over alpha in {0, 0.5, 1}: " + fmt("%.2e", worst) +
                              " (tol 1e-10)"};
}

// 7. Capillary frequency against the linearised slab relation for a massless
// vacuum, omega^2 = alpha^2 k^3 tanh(k (1 - z0)).
Outcome capillary_dispersion() {
  const auto& run = capillary_run();
  std::vector<double> crossings;
  for (std::size_t i = 1; i < run.probe.size(); ++i) {
    const double a = run.probe[i - 1], b = run.probe[i];
    if ((a > 0) != (b > 0)) crossings.push_back(run.times[i - 1] + (run.times[i] - run.times[i - 1]) * a / (a - b));
  }
  if (crossings.size() < 2) return {false, "fewer than two zero crossings"};
  const double half_period = (crossings.back() - crossings.front()) / double(crossings.size() - 1);
  const double omega = 0.5 * kTwoPi / half_period;
  const double alpha = run.cfg.physics.alpha, k = 1.0, depth = 1.0 - run.cfg.geometry.z0;
  const double oracle = alpha * std::sqrt(k * k * k * std::tanh(k * depth));
  const double rel = std::abs(omega / oracle - 1.0);
  return {rel <= 0.02, "measured omega " + fmt("%.6f", omega) + ", linearised " + fmt("%.6f", oracle) +
                           ", relative difference " + fmt("%.2e", rel) + " (tol 2e-2) from " +
                           std::to_string(crossings.size()) + " zero crossings"};
}

// 8. Curvature evolution identities under refinement.
Outcome kappa_identity() {
  auto residuals = [](int n, double dt) {
    const auto cfg = scenario::parse_config_text(
        R"({"preset": "capillary-mode", "geometry": {"n_u": )" + std::to_string(n) + R"(, "n_v": )" +
        std::to_string(n) + R"(, "n_z": 12}, "physics": {"gamma": {"modes": [{"k": [1, 0], "cos": 0.05}, {"k": [1, 1], "sin": 0.02}]}}, "stepper": {"dt": )" +
        fmt("%.17g", dt) + "}}");
    scenario::Runner runner(cfg, {"", threads()});
    std::vector<evolution::SimState> window{runner.initial_state()};
    // Start a little into the run so the window sees a moving interface.
    for (int i = 0; i < 4 + int(std::lround(0.4 / dt)); ++i) {
      window.push_back(runner.stepper().step(window.back()));
      if (window.size() > 5) window.erase(window.begin());
    }
    return diagnostics::kappa_evolution_residuals(runner.stepper(), window);
  };
  const double dt = 0.04;
  const auto coarse = residuals(16, dt), fine = residuals(32, dt / 2);
  const double drop = coarse.kappa_first_order / std::max(fine.kappa_first_order, 1e-300);
  const double growth = fine.kappa_second_order / std::max(coarse.kappa_second_order, 1e-300);
  std::string terms;
  for (const auto& [name, value] : fine.second_order_terms) terms += " " + name + "=" + fmt("%.1e", value);
  return {drop >= 10.0 && growth <= 2.0,
          "first order " + fmt("%.2e", coarse.kappa_first_order) + " -> " + fmt("%.2e", fine.kappa_first_order) +
              " (drop " + fmt("%.1f", drop) + ", need 10); second order net of terms " +
              fmt("%.2e", coarse.kappa_second_order) + " -> " + fmt("%.2e", fine.kappa_second_order) + " (ratio " +
              fmt("%.2f", growth) + ", limit 2); term magnitudes:" + terms};
}

// 9. Stability monitors.
Outcome stability_monitors() {
  auto ref = flat_ref(16, 0.0);
  const Field u = ref->grid().nodes_u(), v = ref->grid().nodes_v();
  const auto geom = surface::build_geometry(ref, HeightField(0.1 * u.sin() + 0.05 * (u + v).cos()));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  const std::size_t np = geom.points();
  auto random_field = [&] {
    Vec3Field f;
    for (auto& c : f) {
      c = Field(np);
      for (std::size_t p = 0; p < np; ++p) c[p] = nd(rng);
    }
    return f;
  };
  double agree = 0.0, collinear = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    const Vec3Field h = random_field(), hh = random_field();
    agree = std::max(agree, fields::max_abs(diagnostics::upsilon_field(geom, h, hh) -
                                            diagnostics::upsilon_bruteforce(geom, h, hh)));
    const double c = nd(rng);
    const Vec3Field par{Field(c * h[0]), Field(c * h[1]), Field(c * h[2])};
    collinear = std::max(collinear, fields::max_abs(diagnostics::upsilon_field(geom, h, par)));
  }

  const auto cfg = scenario::parse_config_text(R"({"preset": "noncollinear"})");
  scenario::RunOptions opts;
  opts.out_dir = (workdir() / "noncollinear").string();
  opts.threads = threads();
  scenario::Runner runner(cfg, opts);
  const auto res = runner.run();
  double up_min = 1e300, gap_min = 1e300;
  for (const auto& r : res.rows) {
    up_min = std::min(up_min, r.upsilon);
    gap_min = std::min(gap_min, r.wall_gap);
  }
  const bool pass = agree <= 1e-6 && collinear == 0.0 && up_min >= cfg.physics.upsilon_floor &&
                    gap_min >= cfg.geometry.c0;
  return {pass, "eigen vs 360-direction search " + fmt("%.2e", agree) + " (tol 1e-6); collinear max " +
                    fmt("%.1e", collinear) + " (must be 0); noncollinear preset to t=" + fmt("%g", cfg.stepper.t_end) +
                    ": min upsilon " + fmt("%.4f", up_min) + " (floor " + fmt("%g", cfg.physics.upsilon_floor) +
                    "), min wall gap " + fmt("%.4f", gap_min) + " (c0 " + fmt("%g", cfg.geometry.c0) + ")"};
}

// 10. Vanishing surface tension trend under the rt-stable preset.
Outcome alpha_sweep() {
  const auto cfg = scenario::parse_config_text(R"({"preset": "rt-stable"})");
  scenario::RunOptions opts;
  opts.out_dir = (workdir() / "sweep").string();
  opts.threads = threads();
  const auto res = scenario::sweep_alpha(cfg, {1.0, 0.5, 0.25, 0.1}, opts);
  std::string d = "L2 distances at t=" + fmt("%g", cfg.stepper.t_end) + ":";
  for (std::size_t i = 0; i < res.distances.size(); ++i)
    d += " d(" + fmt("%g", res.runs[i].alpha) + "," + fmt("%g", res.runs[i + 1].alpha) + ")=" +
         fmt("%.3e", res.distances[i]);
  d += res.monotone_decreasing ? "; monotonically decreasing" : "; not monotone";
  return {res.monotone_decreasing, d};
}

// 11. The criterion-5 run split at its checkpoint reproduces the unbroken series.
Outcome determinism_restore() {
  const auto& run = capillary_run();
  if (run.result.checkpoints.empty()) return {false, "unbroken run wrote no checkpoint"};
  const fs::path split = workdir() / "capillary_split";
  scenario::RunOptions first;
  first.out_dir = split.string();
  first.threads = threads();
  first.stop_at_checkpoint = true;
  scenario::Runner runner(run.cfg, first);
  const auto part = runner.run();
  if (!part.stopped_at_checkpoint) return {false, "split run did not stop at its checkpoint"};
  scenario::RunOptions rest;
  rest.out_dir = split.string();
  rest.threads = threads();
  scenario::restore_run(part.checkpoints.front(), rest);
  const std::string a = slurp(run.result.series_path), b = slurp((split / "series.csv").string());
  const auto ra = scenario::read_series(run.result.series_path).rows;
  const auto rb = scenario::read_series((split / "series.csv").string()).rows;
  double worst = ra.size() == rb.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(ra.size(), rb.size()); ++i) {
    const auto va = ra[i].values(), vb = rb[i].values();
    for (std::size_t j = 0; j < va.size(); ++j)
      if (!(std::isnan(va[j]) && std::isnan(vb[j]))) worst = std::max(worst, std::abs(va[j] - vb[j]));
  }
  return {a == b || worst <= 1e-12,
          std::string(a == b ? "byte-identical" : "differs") + " series (" + std::to_string(ra.size()) +
              " rows, split at " + fs::path(part.checkpoints.front()).filename().string() + "), max difference " +
              fmt("%.1e", worst)};
}

}  // namespace

int main() {
  std::set<int> only;
  if (const char* env = std::getenv("PIL_ACCEPT_ONLY")) {
    std::stringstream in(env);
    std::string tok;
    while (std::getline(in, tok, ',')) only.insert(std::atoi(tok.c_str()));
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"DN flat-mode spectrum", dn_flat_spectrum},
      {"geometric identity suite", geometric_identities},
      {"K-map round trip", kmap_round_trip},
      {"div-curl recovery", divcurl_recovery},
      {"energy conservation and budget", energy_conservation},
      {"equilibrium fixed point", equilibrium_fixed_point},
      {"capillary dispersion", capillary_dispersion},
      {"curvature evolution identity", kappa_identity},
      {"stability monitors", stability_monitors},
      {"alpha sweep trend", alpha_sweep},
      {"determinism and restore", determinism_restore},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const Error& e) {
      out = {false, std::string("error ") + e.to_json()};
    } catch (const std::exception& e) {
      out = {false, std::string("exception ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
