#include "pil/config.hpp"

#include "pil/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace pil::scenario {

using nlohmann::json;

namespace {

// Typed view of one JSON object that remembers which keys were consumed, so
// leftovers can be reported as unknown with their full path.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorKind::ValidationError, where() + " must be an object", path_);
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& path() const { return path_; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  double number(const std::string& key, double def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_number()) bad(key, "must be a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) bad(key, "must be finite");
    return x;
  }

  int integer(const std::string& key, int def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_number_integer()) bad(key, "must be an integer");
    return v->get<int>();
  }

  bool boolean(const std::string& key, bool def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_boolean()) bad(key, "must be true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_string()) bad(key, "must be a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::size_t count) {
    const json* v = find(key);
    if (!v) return {};
    if (!v->is_array() || (count && v->size() != count))
      bad(key, count ? "must be an array of " + std::to_string(count) + " numbers" : "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) bad(key, "entries must be finite numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        fail(ErrorKind::ValidationError, "unknown key '" + sub(item.key()) + "'", sub(item.key()));
  }

  [[noreturn]] void bad(const std::string& key, const std::string& what) const {
    fail(ErrorKind::ValidationError, sub(key) + " " + what, sub(key));
  }

 private:
  std::string where() const { return path_.empty() ? "config root" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::pair<int, int> wavevector(Section& s) {
  const json* k = s.find("k");
  if (!k) s.bad("k", "is required");
  if (!k->is_array() || k->size() != 2 || !(*k)[0].is_number_integer() || !(*k)[1].is_number_integer())
    s.bad("k", "must be a pair of integers");
  return {(*k)[0].get<int>(), (*k)[1].get<int>()};
}

void check_resolved(const Section& s, int ku, int kv, const ScenarioConfig::Geometry& g) {
  if (2 * std::abs(ku) >= g.n_u || 2 * std::abs(kv) >= g.n_v)
    s.bad("k", "lies outside the resolved band of the " + std::to_string(g.n_u) + "x" + std::to_string(g.n_v) + " grid");
}

template <class F>
void for_each_entry(Section& parent, const std::string& key, F&& f) {
  const json* arr = parent.find(key);
  if (!arr) return;
  if (!arr->is_array()) parent.bad(key, "must be an array");
  for (std::size_t i = 0; i < arr->size(); ++i) {
    Section e((*arr)[i], parent.sub(key) + "[" + std::to_string(i) + "]");
    f(e);
    e.finish();
  }
}

std::vector<SpectralMode> parse_modes(Section& parent, const std::string& key, const ScenarioConfig::Geometry& g,
                                      bool allow_zero) {
  std::vector<SpectralMode> out;
  for_each_entry(parent, key, [&](Section& e) {
    SpectralMode m;
    std::tie(m.ku, m.kv) = wavevector(e);
    check_resolved(e, m.ku, m.kv, g);
    if (!allow_zero && m.ku == 0 && m.kv == 0) e.bad("k", "must be nonzero");
    m.cos = e.number("cos", 0.0);
    m.sin = e.number("sin", 0.0);
    out.push_back(m);
  });
  return out;
}

FieldSpec parse_field(Section& parent, const std::string& key, const ScenarioConfig::Geometry& g) {
  FieldSpec spec;
  const json* node = parent.find(key);
  if (!node) return spec;
  Section s(*node, parent.sub(key));
  const auto u = s.numbers("uniform", 3);
  if (!u.empty()) {
    spec.uniform = Eigen::Vector3d(u[0], u[1], u[2]);
    if (spec.uniform.z() != 0.0) s.bad("uniform", "must have zero vertical component (walls are impermeable)");
  }
  spec.potential = parse_modes(s, "potential", g, false);
  for_each_entry(s, "stream", [&](Section& e) {
    StreamMode m;
    std::tie(m.ku, m.kv) = wavevector(e);
    check_resolved(e, m.ku, m.kv, g);
    if (m.ku == 0 && m.kv == 0) e.bad("k", "must be nonzero");
    m.kz = e.number("kz", 0.0);
    m.cos = e.number("cos", 0.0);
    m.sin = e.number("sin", 0.0);
    spec.stream.push_back(m);
  });
  s.finish();
  return spec;
}

json modes_tree(const std::vector<SpectralMode>& modes) {
  json a = json::array();
  for (const auto& m : modes) a.push_back({{"k", {m.ku, m.kv}}, {"cos", m.cos}, {"sin", m.sin}});
  return a;
}

json field_tree(const FieldSpec& f) {
  json stream = json::array();
  for (const auto& m : f.stream)
    stream.push_back({{"k", {m.ku, m.kv}}, {"kz", m.kz}, {"cos", m.cos}, {"sin", m.sin}});
  return {{"uniform", {f.uniform.x(), f.uniform.y(), f.uniform.z()}},
          {"potential", modes_tree(f.potential)},
          {"stream", stream}};
}

const char* law_name(fields::SurfaceCurrent::Law law) {
  switch (law) {
    case fields::SurfaceCurrent::Law::Ramp: return "ramp";
    case fields::SurfaceCurrent::Law::Sine: return "sine";
    default: return "constant";
  }
}

json to_tree(const ScenarioConfig& c) {
  const auto& g = c.geometry;
  const auto& p = c.physics;
  json jmodes = json::array();
  for (const auto& m : p.current.modes())
    jmodes.push_back({{"k", {m.ku, m.kv}}, {"x_cos", m.x_cos}, {"x_sin", m.x_sin}, {"y_cos", m.y_cos}, {"y_sin", m.y_sin}});
  json physics = {
      {"alpha", p.alpha},
      {"gamma", {{"modes", modes_tree(p.gamma)},
                 {"random", {{"amplitude", p.gamma_random.amplitude}, {"kmax", p.gamma_random.kmax}}}}},
      {"velocity", field_tree(p.velocity)},
      {"field", field_tree(p.field)},
      {"j_hat", {{"uniform", {p.current.uniform().x(), p.current.uniform().y()}},
                 {"modes", jmodes},
                 {"law", law_name(p.current.law())},
                 {"frequency", p.current.frequency()}}},
      {"upsilon_floor", p.upsilon_floor}};
  physics["v_flux"] = p.v_flux ? json{p.v_flux->x(), p.v_flux->y()} : json(nullptr);
  physics["h_flux"] = p.h_flux ? json{p.h_flux->x(), p.h_flux->y()} : json(nullptr);
  const auto& st = c.stepper;
  const auto& d = c.diagnostics;
  return {
      {"format", kConfigDialect},
      {"preset", p.preset},
      {"seed", c.seed},
      {"geometry", {{"n_u", g.n_u}, {"n_v", g.n_v}, {"n_z", g.n_z}, {"z0", g.z0}, {"delta0", g.delta0},
                    {"c0", g.c0}, {"sigma_nu", g.sigma_nu}, {"a", g.a}}},
      {"physics", physics},
      {"stepper", {{"dt", st.dt}, {"t_end", st.t_end}, {"project", st.project}, {"dealias", st.dealias},
                   {"filter", {{"enabled", st.filter.enabled}, {"strength", st.filter.strength},
                               {"order", st.filter.order}}}}},
      {"diagnostics", {{"cadence", d.cadence}, {"input_power", d.input_power}, {"identities", d.identities},
                       {"sobolev", {{"enabled", d.sobolev}, {"l", d.sobolev_l}, {"k", d.sobolev_k}}},
                       {"rt_pressure", d.rt_pressure == fields::RtPressure::Q ? "q" : "total"}}},
      {"output", {{"dir", c.output.dir}, {"checkpoint_at", c.output.checkpoint_at}}},
  };
}

// Objects merge key by key; everything else (arrays included) is replaced.
void merge_into(json& base, const json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (const auto& item : patch.items()) {
    if (base.contains(item.key())) merge_into(base[item.key()], item.value());
    else base[item.key()] = item.value();
  }
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"custom", "equilibrium", "capillary-mode", "rt-stable", "noncollinear", "collinear-control"};
}

nlohmann::json preset_tree(const std::string& name) {
  if (name == "custom") return json::object();
  if (name == "equilibrium")
    return json::parse(R"({
      "geometry": {"n_u": 16, "n_v": 16, "n_z": 8},
      "physics": {"alpha": 0.5, "field": {"uniform": [0.8, 0.0, 0.0]},
                  "j_hat": {"uniform": [0.5, 0.0]}},
      "stepper": {"dt": 0.05, "t_end": 5.0}
    })");
  if (name == "capillary-mode")
    // One standing-wave period of the k = 1 mode is 2 pi / sqrt(tanh 1) = 7.2287.
    return json::parse(R"({
      "geometry": {"n_u": 32, "n_v": 32, "n_z": 12},
      "physics": {"alpha": 1.0, "gamma": {"modes": [{"k": [1, 0], "cos": 0.01}]}},
      "stepper": {"dt": 0.05, "t_end": 7.25}
    })");
  if (name == "rt-stable")
    return json::parse(R"({
      "geometry": {"n_u": 16, "n_v": 16, "n_z": 10},
      "physics": {"alpha": 1.0,
                  "gamma": {"modes": [{"k": [1, 0], "cos": 0.02}, {"k": [0, 1], "sin": 0.01}]},
                  "velocity": {"potential": [{"k": [1, 0], "cos": 0.1}, {"k": [1, 1], "sin": 0.05}]}},
      "stepper": {"dt": 0.05, "t_end": 1.0}
    })");
  if (name == "noncollinear")
    return json::parse(R"({
      "geometry": {"n_u": 16, "n_v": 16, "n_z": 10},
      "physics": {"alpha": 0.0,
                  "gamma": {"modes": [{"k": [1, 0], "cos": 0.01}, {"k": [0, 1], "cos": 0.01}]},
                  "velocity": {"potential": [{"k": [1, 1], "cos": 0.02}]},
                  "field": {"uniform": [1.0, 0.0, 0.0]},
                  "j_hat": {"uniform": [1.0, 0.0]},
                  "upsilon_floor": 0.5},
      "stepper": {"dt": 0.05, "t_end": 1.0}
    })");
  if (name == "collinear-control")
    // Cellular flow: the pressure makes the Rayleigh-Taylor indicator change
    // sign while plasma and vacuum fields are parallel.
    return json::parse(R"({
      "geometry": {"n_u": 16, "n_v": 16, "n_z": 10},
      "physics": {"alpha": 0.0,
                  "gamma": {"modes": [{"k": [0, 1], "cos": 0.01}, {"k": [0, 3], "cos": 0.002}]},
                  "velocity": {"stream": [{"k": [1, 0], "cos": 0.3}, {"k": [0, 1], "cos": 0.3}]},
                  "field": {"uniform": [1.0, 0.0, 0.0]},
                  "j_hat": {"uniform": [0.0, -0.8]}},
      "stepper": {"dt": 0.05, "t_end": 3.0}
    })");
  fail(ErrorKind::ValidationError, "unknown preset '" + name + "'", "preset");
}

ScenarioConfig parse_config(const nlohmann::json& user) {
  if (!user.is_object()) fail(ErrorKind::ValidationError, "config root must be an object", "");
  std::string preset = "custom";
  if (auto it = user.find("preset"); it != user.end()) {
    if (!it->is_string()) fail(ErrorKind::ValidationError, "preset must be a string", "preset");
    preset = it->get<std::string>();
  }
  json tree = preset_tree(preset);
  merge_into(tree, user);

  ScenarioConfig c;
  Section root(tree, "");
  const std::string format = root.string("format", kConfigDialect);
  if (format != kConfigDialect)
    fail(ErrorKind::ValidationError, "format '" + format + "' is not " + kConfigDialect, "format");
  c.physics.preset = root.string("preset", "custom");
  {
    const json* seed = root.find("seed");
    if (seed) {
      if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<long long>() >= 0))
        root.bad("seed", "must be a nonnegative integer");
      c.seed = seed->get<std::uint64_t>();
    }
  }

  auto& g = c.geometry;
  if (const json* node = root.find("geometry")) {
    Section s(*node, "geometry");
    g.n_u = s.integer("n_u", g.n_u);
    g.n_v = s.integer("n_v", g.n_v);
    g.n_z = s.integer("n_z", g.n_z);
    g.z0 = s.number("z0", g.z0);
    g.delta0 = s.number("delta0", g.delta0);
    g.c0 = s.number("c0", g.c0);
    g.sigma_nu = s.number("sigma_nu", g.sigma_nu);
    g.a = s.number("a", g.a);
    for (const char* key : {"n_u", "n_v"}) {
      const int n = std::string(key) == "n_u" ? g.n_u : g.n_v;
      if (n < 4 || n % 2) s.bad(key, "must be an even integer >= 4");
    }
    if (g.n_z < 4) s.bad("n_z", "must be >= 4");
    if (g.delta0 <= 0) s.bad("delta0", "must be positive");
    if (g.c0 <= 0) s.bad("c0", "must be positive");
    if (g.sigma_nu < 0) s.bad("sigma_nu", "must be nonnegative");
    if (g.a <= 0) s.bad("a", "must be positive");
    if (std::abs(g.z0) + g.delta0 + g.c0 >= 1.0) s.bad("z0", "leaves no room for the chart and wall gap inside (-1, 1)");
    s.finish();
  }

  auto& p = c.physics;
  if (const json* node = root.find("physics")) {
    Section s(*node, "physics");
    p.alpha = s.number("alpha", p.alpha);
    if (p.alpha < 0.0 || p.alpha > 1.0) s.bad("alpha", "must lie in [0, 1]");
    if (const json* gnode = s.find("gamma")) {
      Section gs(*gnode, s.sub("gamma"));
      p.gamma = parse_modes(gs, "modes", g, true);
      if (const json* rnode = gs.find("random")) {
        Section rs(*rnode, gs.sub("random"));
        p.gamma_random.amplitude = rs.number("amplitude", 0.0);
        p.gamma_random.kmax = rs.integer("kmax", 0);
        if (p.gamma_random.amplitude < 0) rs.bad("amplitude", "must be nonnegative");
        if (p.gamma_random.kmax < 0 || 2 * p.gamma_random.kmax >= std::min(g.n_u, g.n_v))
          rs.bad("kmax", "must lie in the resolved band");
        rs.finish();
      }
      gs.finish();
    }
    p.velocity = parse_field(s, "velocity", g);
    p.field = parse_field(s, "field", g);
    if (const json* jnode = s.find("j_hat")) {
      Section js(*jnode, s.sub("j_hat"));
      Eigen::Vector2d uniform = Eigen::Vector2d::Zero();
      const auto u = js.numbers("uniform", 2);
      if (!u.empty()) uniform = Eigen::Vector2d(u[0], u[1]);
      std::vector<fields::SurfaceCurrent::Mode> modes;
      for_each_entry(js, "modes", [&](Section& e) {
        fields::SurfaceCurrent::Mode m;
        std::tie(m.ku, m.kv) = wavevector(e);
        check_resolved(e, m.ku, m.kv, g);
        m.x_cos = e.number("x_cos", 0.0);
        m.x_sin = e.number("x_sin", 0.0);
        m.y_cos = e.number("y_cos", 0.0);
        m.y_sin = e.number("y_sin", 0.0);
        modes.push_back(m);
      });
      const std::string law = js.string("law", "constant");
      fields::SurfaceCurrent::Law lw;
      if (law == "constant") lw = fields::SurfaceCurrent::Law::Constant;
      else if (law == "ramp") lw = fields::SurfaceCurrent::Law::Ramp;
      else if (law == "sine") lw = fields::SurfaceCurrent::Law::Sine;
      else js.bad("law", "must be one of constant, ramp, sine");
      const double freq = js.number("frequency", 1.0);
      if (freq <= 0) js.bad("frequency", "must be positive");
      js.finish();
      p.current = fields::SurfaceCurrent(uniform, modes, lw, freq);
    }
    for (const char* key : {"v_flux", "h_flux"}) {
      const auto f = s.numbers(key, 2);
      if (!f.empty()) (std::string(key) == "v_flux" ? p.v_flux : p.h_flux) = Eigen::Vector2d(f[0], f[1]);
    }
    p.upsilon_floor = s.number("upsilon_floor", p.upsilon_floor);
    if (p.upsilon_floor < 0) s.bad("upsilon_floor", "must be nonnegative");
    s.finish();
  }

  auto& st = c.stepper;
  st.alpha = p.alpha;
  st.intervals = g.n_z;
  if (const json* node = root.find("stepper")) {
    Section s(*node, "stepper");
    st.dt = s.number("dt", st.dt);
    st.t_end = s.number("t_end", st.t_end);
    st.project = s.boolean("project", st.project);
    st.dealias = s.boolean("dealias", st.dealias);
    if (st.dt <= 0) s.bad("dt", "must be positive");
    if (st.t_end < 0) s.bad("t_end", "must be nonnegative");
    if (const json* fnode = s.find("filter")) {
      Section fs(*fnode, s.sub("filter"));
      st.filter.enabled = fs.boolean("enabled", st.filter.enabled);
      st.filter.strength = fs.number("strength", st.filter.strength);
      st.filter.order = fs.integer("order", st.filter.order);
      if (st.filter.strength <= 0) fs.bad("strength", "must be positive");
      if (st.filter.order < 2 || st.filter.order % 2) fs.bad("order", "must be an even integer >= 2");
      fs.finish();
    }
    s.finish();
  }

  auto& d = c.diagnostics;
  if (const json* node = root.find("diagnostics")) {
    Section s(*node, "diagnostics");
    d.cadence = s.integer("cadence", d.cadence);
    if (d.cadence < 1) s.bad("cadence", "must be >= 1");
    d.input_power = s.boolean("input_power", d.input_power);
    d.identities = s.boolean("identities", d.identities);
    if (const json* snode = s.find("sobolev")) {
      Section ss(*snode, s.sub("sobolev"));
      d.sobolev = ss.boolean("enabled", d.sobolev);
      d.sobolev_l = ss.integer("l", d.sobolev_l);
      d.sobolev_k = ss.integer("k", d.sobolev_k);
      if (d.sobolev_l < 0) ss.bad("l", "must be nonnegative");
      if (d.sobolev_k < 2) ss.bad("k", "must be >= 2");
      ss.finish();
    }
    const std::string rt = s.string("rt_pressure", "q");
    if (rt == "q") d.rt_pressure = fields::RtPressure::Q;
    else if (rt == "total") d.rt_pressure = fields::RtPressure::Total;
    else s.bad("rt_pressure", "must be q or total");
    if (d.identities && (st.filter.enabled || st.dealias))
      s.bad("identities", "requires the filter and dealiasing to be off");
    s.finish();
  }

  auto& o = c.output;
  if (const json* node = root.find("output")) {
    Section s(*node, "output");
    o.dir = s.string("dir", o.dir);
    o.checkpoint_at = s.numbers("checkpoint_at", 0);
    for (double t : o.checkpoint_at)
      if (t <= 0 || t > st.t_end + 1e-12) s.bad("checkpoint_at", "times must lie in (0, t_end]");
    s.finish();
  }
  root.finish();

  c.resolved = to_tree(c);
  return c;
}

ScenarioConfig parse_config_text(const std::string& text, const std::string& origin) {
  json tree;
  try {
    tree = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ParseError, origin + ": " + e.what(), origin);
  }
  return parse_config(tree);
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::ParseError, "cannot open config file '" + path + "'", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

ScenarioConfig with_override(const ScenarioConfig& cfg, const std::string& pointer, const nlohmann::json& value) {
  json tree = cfg.resolved;
  tree[json::json_pointer(pointer)] = value;
  return parse_config(tree);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t ScenarioConfig::hash() const { return fnv1a(resolved.dump()); }

std::string ScenarioConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

long ScenarioConfig::total_steps() const {
  return static_cast<long>(std::floor(stepper.t_end / stepper.dt + 1e-9));
}

std::string ScenarioConfig::filter_state() const {
  std::string s = stepper.filter.enabled ? "exp(strength=" + nlohmann::json(stepper.filter.strength).dump() +
                                               ";order=" + std::to_string(stepper.filter.order) + ")"
                                         : "off";
  if (stepper.dealias) s += "+dealias";
  return s;
}

}  // namespace pil::scenario
