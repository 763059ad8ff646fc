#include "pil/output.hpp"

#include "pil/config.hpp"
#include "pil/error.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <sstream>

namespace pil::scenario {

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'I', 'L', 'C', 'K', 'P', 'T', '\0'};

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific, 16);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(ErrorKind::IoError, "malformed number '" + s + "' in series file");
  return x;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create directory '" + parent.string() + "': " + ec.message(), path);
}

class Sink {
 public:
  void raw(const void* p, std::size_t n) { bytes_.append(static_cast<const char*>(p), n); }
  template <class T>
  void pod(T x) { raw(&x, sizeof x); }
  void field(const Field& f) {
    pod<std::uint64_t>(f.size());
    raw(f.data(), sizeof(double) * f.size());
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Source {
 public:
  Source(const std::string& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}
  void raw(void* p, std::size_t n) {
    if (pos_ + n > bytes_.size()) fail(ErrorKind::IoError, "checkpoint is truncated", path_);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  template <class T>
  T pod() {
    T x;
    raw(&x, sizeof x);
    return x;
  }
  Field field() {
    const auto n = pod<std::uint64_t>();
    if (n > (bytes_.size() - pos_) / sizeof(double)) fail(ErrorKind::IoError, "checkpoint field size is corrupt", path_);
    Field f(static_cast<Eigen::Index>(n));
    raw(f.data(), sizeof(double) * n);
    return f;
  }
  std::size_t position() const { return pos_; }

 private:
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

const std::vector<std::string>& TimeSeriesRow::columns() {
  static const std::vector<std::string> names = {
      "t", "step", "kinetic", "magnetic_plus", "magnetic_vacuum", "surface", "energy", "input_power",
      "budget_residual", "reconstruction_residual", "rt_min", "upsilon", "wall_gap", "chart_margin",
      "syrovatskij_margin", "max_div_v", "max_div_h", "max_h_normal", "projection_v", "projection_h", "e_l",
      "e_alpha", "cal_e0", "cal_e1", "cal_e2", "cal_e3", "kappa_first_order", "kappa_second_order"};
  return names;
}

std::vector<double> TimeSeriesRow::values() const {
  return {kinetic, magnetic_plus, magnetic_vacuum, surface, energy, input_power, budget_residual,
          reconstruction_residual, rt_min, upsilon, wall_gap, chart_margin, syrovatskij_margin, max_div_v,
          max_div_h, max_h_normal, projection_v, projection_h, e_l, e_alpha, cal_e[0], cal_e[1], cal_e[2],
          cal_e[3], kappa_first_order, kappa_second_order};
}

TimeSeriesRow TimeSeriesRow::from_values(double t, long step, const std::vector<double>& v) {
  if (v.size() != columns().size() - 2) fail(ErrorKind::IoError, "series row has the wrong number of columns");
  TimeSeriesRow r;
  r.t = t;
  r.step = step;
  double* slots[] = {&r.kinetic, &r.magnetic_plus, &r.magnetic_vacuum, &r.surface, &r.energy, &r.input_power,
                     &r.budget_residual, &r.reconstruction_residual, &r.rt_min, &r.upsilon, &r.wall_gap,
                     &r.chart_margin, &r.syrovatskij_margin, &r.max_div_v, &r.max_div_h, &r.max_h_normal,
                     &r.projection_v, &r.projection_h, &r.e_l, &r.e_alpha, &r.cal_e[0], &r.cal_e[1],
                     &r.cal_e[2], &r.cal_e[3], &r.kappa_first_order, &r.kappa_second_order};
  for (std::size_t i = 0; i < v.size(); ++i) *slots[i] = v[i];
  return r;
}

std::string SeriesHeader::line() const {
  return "# pil-series format=" + std::to_string(kSeriesFormat) + " config=" + dialect + " config_hash=" +
         config_hash + " filter=" + filter_state + " preset=" + preset;
}

std::string format_row(const TimeSeriesRow& row) {
  std::string line = format_double(row.t) + "," + std::to_string(row.step);
  for (double x : row.values()) line += "," + format_double(x);
  return line;
}

SeriesWriter::SeriesWriter(const std::string& path, const SeriesHeader& header, long keep_through) : path_(path) {
  ensure_parent(path);
  std::vector<std::string> kept;
  if (keep_through >= 0 && std::filesystem::exists(path)) {
    const SeriesFile old = read_series(path);
    if (old.header.config_hash != header.config_hash)
      fail(ErrorKind::IoError, "existing series was written for config " + old.header.config_hash, path);
    for (const auto& r : old.rows)
      if (r.step <= keep_through) kept.push_back(format_row(r));
  }
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) fail(ErrorKind::IoError, "cannot open series file for writing", path);
  out_ << header.line() << '\n';
  const auto& cols = TimeSeriesRow::columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
  out_ << '\n';
  for (const auto& line : kept) out_ << line << '\n';
  out_.flush();
}

void SeriesWriter::write(const TimeSeriesRow& row) {
  out_ << format_row(row) << '\n';
  out_.flush();
  if (!out_) fail(ErrorKind::IoError, "write to series file failed", path_);
}

void write_series(const std::vector<TimeSeriesRow>& rows, const std::string& path, const SeriesHeader& header) {
  SeriesWriter w(path, header);
  for (const auto& r : rows) w.write(r);
}

SeriesFile read_series(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open series file", path);
  SeriesFile file;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# pil-series", 0) != 0)
    fail(ErrorKind::IoError, "missing series header line", path);
  for (const auto& tok : split(line, ' ')) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
    if (key == "format" && value != std::to_string(kSeriesFormat))
      fail(ErrorKind::VersionMismatch, "series format " + value + " is not supported", path);
    if (key == "config") file.header.dialect = value;
    if (key == "config_hash") file.header.config_hash = value;
    if (key == "filter") file.header.filter_state = value;
    if (key == "preset") file.header.preset = value;
  }
  if (!std::getline(in, line)) fail(ErrorKind::IoError, "missing column header", path);
  if (split(line, ',') != TimeSeriesRow::columns()) fail(ErrorKind::IoError, "unexpected column header", path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != TimeSeriesRow::columns().size())
      fail(ErrorKind::IoError, "series row has the wrong number of columns", path);
    std::vector<double> vals;
    for (std::size_t i = 2; i < cells.size(); ++i) vals.push_back(parse_double(cells[i]));
    file.rows.push_back(TimeSeriesRow::from_values(parse_double(cells[0]), std::stol(cells[1]), vals));
  }
  return file;
}

void write_checkpoint(const Checkpoint& ck, const std::string& path) {
  Sink s;
  s.raw(kMagic, sizeof kMagic);
  s.pod<std::uint32_t>(kCheckpointVersion);
  s.pod<std::uint64_t>(ck.config_hash);
  const std::string cfg = ck.config.dump();
  s.pod<std::uint64_t>(cfg.size());
  s.raw(cfg.data(), cfg.size());
  s.pod<std::uint64_t>(ck.history.size());
  for (const auto& e : ck.history) {
    const auto& st = e.state;
    s.pod<double>(st.t);
    s.pod<std::int64_t>(st.step);
    s.field(st.gamma);
    for (const auto& c : st.v) s.field(c);
    for (const auto& c : st.h) s.field(c);
    for (double x : {st.fluxes.v.x(), st.fluxes.v.y(), st.fluxes.h.x(), st.fluxes.h.y()}) s.pod<double>(x);
    const auto& r = e.report;
    for (double x : {r.projection_v, r.projection_h, r.volume_correction, r.filter_change, r.cfl}) s.pod<double>(x);
    s.pod<std::int32_t>(r.elliptic_iterations);
  }
  s.pod<std::uint64_t>(fnv1a(s.bytes()));

  ensure_parent(path);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open checkpoint for writing", path);
    out.write(s.bytes().data(), static_cast<std::streamsize>(s.bytes().size()));
    if (!out) fail(ErrorKind::IoError, "checkpoint write failed", path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::IoError, "cannot move checkpoint into place: " + ec.message(), path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open checkpoint", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  Source src(bytes, path);
  char magic[8];
  src.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) fail(ErrorKind::IoError, "not a checkpoint file", path);
  const auto version = src.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    fail(ErrorKind::VersionMismatch,
         "checkpoint version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion), path);
  if (bytes.size() < sizeof(std::uint64_t) ||
      fnv1a(bytes.substr(0, bytes.size() - 8)) !=
          [&] {
            std::uint64_t h;
            std::memcpy(&h, bytes.data() + bytes.size() - 8, 8);
            return h;
          }())
    fail(ErrorKind::IoError, "checkpoint checksum mismatch", path);

  Checkpoint ck;
  ck.config_hash = src.pod<std::uint64_t>();
  const auto len = src.pod<std::uint64_t>();
  if (len > bytes.size()) fail(ErrorKind::IoError, "checkpoint config length is corrupt", path);
  std::string cfg(len, '\0');
  src.raw(cfg.data(), len);
  try {
    ck.config = nlohmann::json::parse(cfg);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::IoError, std::string("embedded config is unreadable: ") + e.what(), path);
  }
  if (fnv1a(ck.config.dump()) != ck.config_hash) fail(ErrorKind::IoError, "embedded config does not match its hash", path);
  const auto count = src.pod<std::uint64_t>();
  if (count == 0 || count > 64) fail(ErrorKind::IoError, "checkpoint history length is corrupt", path);
  for (std::uint64_t i = 0; i < count; ++i) {
    HistoryEntry e;
    auto& st = e.state;
    st.t = src.pod<double>();
    st.step = static_cast<long>(src.pod<std::int64_t>());
    st.gamma = src.field();
    for (auto& c : st.v) c = src.field();
    for (auto& c : st.h) c = src.field();
    const double vx = src.pod<double>(), vy = src.pod<double>(), hx = src.pod<double>(), hy = src.pod<double>();
    st.fluxes.v = Eigen::Vector2d(vx, vy);
    st.fluxes.h = Eigen::Vector2d(hx, hy);
    auto& r = e.report;
    r.projection_v = src.pod<double>();
    r.projection_h = src.pod<double>();
    r.volume_correction = src.pod<double>();
    r.filter_change = src.pod<double>();
    r.cfl = src.pod<double>();
    r.elliptic_iterations = src.pod<std::int32_t>();
    ck.history.push_back(std::move(e));
  }
  if (src.position() + 8 != bytes.size()) fail(ErrorKind::IoError, "checkpoint has trailing bytes", path);
  return ck;
}

void checkpoint(const evolution::SimState& s, const nlohmann::json& config, const std::string& path) {
  Checkpoint ck;
  ck.config = config;
  ck.config_hash = fnv1a(config.dump());
  ck.history.push_back({s, {}});
  write_checkpoint(ck, path);
}

evolution::SimState restore(const std::string& path) { return read_checkpoint(path).history.back().state; }

}  // namespace pil::scenario
