#include "io/files.hpp"

#include "core/errors.hpp"
#include "core/profiles.hpp"
#include "io/line_index.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace tdoa::io {

namespace {

using nlohmann::json;

struct Source {
  std::string file;
  const LineIndex* index = nullptr;
  int fixed_line = 1;

  [[noreturn]] void fail(const std::string& pointer, const std::string& reason) const {
    const int line = index != nullptr ? index->line_of(pointer) : fixed_line;
    throw InputError(file, line, pointer.empty() ? "/" : pointer, reason);
  }
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_at_byte(const std::string& text, std::size_t byte) {
  const auto end = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(end), '\n'));
}

json parse_or_fail(const std::string& text, const Source& src, int line_offset = 0) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const int line = line_offset > 0 ? line_offset : line_at_byte(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string reason = e.what();
    if (const auto pos = reason.find("syntax error"); pos != std::string::npos) reason = reason.substr(pos);
    throw InputError(src.file, line, "/", reason);
  }
}

// A parsed JSON document with line lookup for diagnostics.
class Document {
 public:
  explicit Document(const fs::path& path) : text_(read_text(path)), index_(text_) {
    src_.file = path.string();
    src_.index = &index_;
    root_ = parse_or_fail(text_, src_);
  }

  const json& root() const { return root_; }
  const Source& source() const { return src_; }

 private:
  std::string text_;
  LineIndex index_;
  Source src_;
  json root_;
};

std::string child(const std::string& pointer, const std::string& key) {
  return pointer + "/" + escape_pointer_token(key);
}

std::string child(const std::string& pointer, std::size_t index) { return pointer + "/" + std::to_string(index); }

void require_object(const json& j, const std::string& ptr, const Source& src) {
  if (!j.is_object()) src.fail(ptr, "expected an object");
}

const json& field(const json& obj, const std::string& ptr, const char* key, const Source& src) {
  require_object(obj, ptr, src);
  auto it = obj.find(key);
  if (it == obj.end()) src.fail(child(ptr, key), "missing required field");
  return *it;
}

const json* optional_field(const json& obj, const std::string& ptr, const char* key, const Source& src) {
  require_object(obj, ptr, src);
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const json& j, const std::string& ptr, const Source& src) {
  if (!j.is_number()) src.fail(ptr, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) src.fail(ptr, "must be finite");
  return v;
}

double positive(const json& j, const std::string& ptr, const Source& src) {
  const double v = number(j, ptr, src);
  if (!(v > 0.0)) src.fail(ptr, "must be positive");
  return v;
}

double non_negative(const json& j, const std::string& ptr, const Source& src) {
  const double v = number(j, ptr, src);
  if (!(v >= 0.0)) src.fail(ptr, "must be non-negative");
  return v;
}

long integer(const json& j, const std::string& ptr, const Source& src) {
  if (!j.is_number_integer()) src.fail(ptr, "expected an integer");
  return j.get<long>();
}

std::string text(const json& j, const std::string& ptr, const Source& src) {
  if (!j.is_string()) src.fail(ptr, "expected a string");
  return j.get<std::string>();
}

Vec3 vec3(const json& j, const std::string& ptr, const Source& src) {
  if (!j.is_array() || j.size() != 3) src.fail(ptr, "expected an array of 3 numbers");
  return {number(j[0], child(ptr, 0), src), number(j[1], child(ptr, 1), src), number(j[2], child(ptr, 2), src)};
}

const json& array(const json& j, const std::string& ptr, const Source& src) {
  if (!j.is_array()) src.fail(ptr, "expected an array");
  return j;
}

double optional_number(const json& obj, const std::string& ptr, const char* key, double fallback,
                       const Source& src) {
  const json* v = optional_field(obj, ptr, key, src);
  return v != nullptr ? number(*v, child(ptr, key), src) : fallback;
}

Box parse_box(const json& j, const std::string& ptr, const Source& src) {
  Box b;
  b.min = vec3(field(j, ptr, "min", src), child(ptr, "min"), src);
  b.max = vec3(field(j, ptr, "max", src), child(ptr, "max"), src);
  for (int k = 0; k < 3; ++k) {
    if (!(b.min[k] < b.max[k])) src.fail(child(ptr, "max"), "max must exceed min on every axis");
  }
  return b;
}

Environment parse_environment(const json& root, const Source& src) {
  Environment env;
  if (const json* name = optional_field(root, "", "name", src)) env.name = text(*name, "/name", src);
  env.boundary = parse_box(field(root, "", "boundary", src), "/boundary", src);
  if (const json* obs = optional_field(root, "", "obstacles", src)) {
    array(*obs, "/obstacles", src);
    for (std::size_t k = 0; k < obs->size(); ++k) {
      const auto ptr = child("/obstacles", k);
      Box b = parse_box((*obs)[k], ptr, src);
      if (!env.boundary.contains(b)) src.fail(ptr, "obstacle is not inside the boundary");
      env.obstacles.push_back(b);
    }
  }
  return env;
}

AnchorPlacement parse_placement(const json& root, const Source& src) {
  AnchorPlacement p;
  const json& anchors = array(field(root, "", "anchors", src), "/anchors", src);
  if (anchors.size() < 2) src.fail("/anchors", "at least two anchors are required");
  for (std::size_t k = 0; k < anchors.size(); ++k) p.anchors.push_back(vec3(anchors[k], child("/anchors", k), src));

  const long m = static_cast<long>(p.anchors.size());
  const json& pairs = array(field(root, "", "pairs", src), "/pairs", src);
  if (pairs.empty()) src.fail("/pairs", "pair schedule is empty");
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto ptr = child("/pairs", k);
    if (!pairs[k].is_array() || pairs[k].size() != 2) src.fail(ptr, "expected [i, j]");
    const long i = integer(pairs[k][0], child(ptr, 0), src);
    const long j = integer(pairs[k][1], child(ptr, 1), src);
    if (i < 1 || i > m) src.fail(child(ptr, 0), "anchor index out of range 1.." + std::to_string(m));
    if (j < 1 || j > m) src.fail(child(ptr, 1), "anchor index out of range 1.." + std::to_string(m));
    if (i == j) src.fail(ptr, "a pair needs two distinct anchors");
    p.pairs.push_back({static_cast<int>(i), static_cast<int>(j)});
  }

  if (const json* mode = optional_field(root, "", "mode", src)) {
    const auto s = text(*mode, "/mode", src);
    if (s == "centralized") {
      p.mode = TdoaMode::Centralized;
    } else if (s == "decentralized") {
      p.mode = TdoaMode::Decentralized;
    } else {
      src.fail("/mode", "expected \"centralized\" or \"decentralized\"");
    }
  }
  return p;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json quat_json(const UnitQuaternion& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, path.string() + ": cannot open for writing");
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, path.string() + ": write failed");
}

json summary_json(const EvalSummary& s) {
  json j;
  j["rmse"] = num(s.rmse);
  j["axis_rmse"] = json::array({num(s.axis_rmse.x()), num(s.axis_rmse.y()), num(s.axis_rmse.z())});
  j["max_error"] = num(s.max_error);
  j["mean_nees"] = num(s.mean_nees);
  j["reject_rate"] = num(s.reject_rate);
  j["bound_rmse"] = num(s.bound_rmse);
  j["samples"] = s.samples;
  j["diverged"] = s.diverged;
  j["divergence_time"] = num(s.divergence_time);
  return j;
}

TrajectorySpec parse_trajectory(const json& t, const std::string& ptr, const Source& src) {
  TrajectorySpec spec;
  const auto kind = text(field(t, ptr, "kind", src), child(ptr, "kind"), src);
  spec.timing.speed = 1.0;
  spec.timing.hold = 2.0;
  spec.timing.ramp = 6.0;
  if (const json* v = optional_field(t, ptr, "speed", src)) spec.timing.speed = positive(*v, child(ptr, "speed"), src);
  if (const json* v = optional_field(t, ptr, "hold", src)) spec.timing.hold = non_negative(*v, child(ptr, "hold"), src);
  if (const json* v = optional_field(t, ptr, "ramp", src)) spec.timing.ramp = non_negative(*v, child(ptr, "ramp"), src);
  if (const json* v = optional_field(t, ptr, "static_duration", src)) {
    spec.static_duration = positive(*v, child(ptr, "static_duration"), src);
  }

  if (kind == "waypoints") {
    spec.kind = TrajectoryKind::Waypoints;
    const auto wptr = child(ptr, "waypoints");
    const json& w = array(field(t, ptr, "waypoints", src), wptr, src);
    if (w.size() < 2) src.fail(wptr, "at least two waypoints are required");
    for (std::size_t k = 0; k < w.size(); ++k) spec.waypoints.push_back(vec3(w[k], child(wptr, k), src));
  } else if (kind == "lissajous") {
    spec.kind = TrajectoryKind::Lissajous;
    spec.center = vec3(field(t, ptr, "center", src), child(ptr, "center"), src);
    spec.amplitude = vec3(field(t, ptr, "amplitude", src), child(ptr, "amplitude"), src);
    if (const json* v = optional_field(t, ptr, "frequency", src)) spec.frequency = vec3(*v, child(ptr, "frequency"), src);
    if (const json* v = optional_field(t, ptr, "phase", src)) spec.phase = vec3(*v, child(ptr, "phase"), src);
    if (const json* v = optional_field(t, ptr, "laps", src)) spec.laps = positive(*v, child(ptr, "laps"), src);
  } else if (kind == "stairs") {
    spec.kind = TrajectoryKind::Stairs;
    spec.start = vec3(field(t, ptr, "start", src), child(ptr, "start"), src);
    spec.heading = optional_number(t, ptr, "heading", spec.heading, src);
    if (const json* v = optional_field(t, ptr, "flights", src)) {
      const long f = integer(*v, child(ptr, "flights"), src);
      if (f < 1) src.fail(child(ptr, "flights"), "must be at least 1");
      spec.flights = static_cast<int>(f);
    }
    if (const json* v = optional_field(t, ptr, "rise", src)) spec.rise = number(*v, child(ptr, "rise"), src);
    if (const json* v = optional_field(t, ptr, "run", src)) spec.run = positive(*v, child(ptr, "run"), src);
    if (const json* v = optional_field(t, ptr, "landing", src)) spec.landing = non_negative(*v, child(ptr, "landing"), src);
    if (const json* v = optional_field(t, ptr, "width", src)) spec.width = non_negative(*v, child(ptr, "width"), src);
  } else {
    src.fail(child(ptr, "kind"), "expected \"waypoints\", \"lissajous\" or \"stairs\"");
  }
  return spec;
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

Environment load_environment(const fs::path& path) {
  Document doc(path);
  return parse_environment(doc.root(), doc.source());
}

AnchorPlacement load_placement(const fs::path& path) {
  Document doc(path);
  return parse_placement(doc.root(), doc.source());
}

TargetSet load_targets(const fs::path& path) {
  Document doc(path);
  const auto& src = doc.source();
  const json& pts = array(field(doc.root(), "", "points", src), "/points", src);
  if (pts.empty()) src.fail("/points", "at least one target point is required");
  TargetSet targets;
  for (std::size_t k = 0; k < pts.size(); ++k) targets.points.push_back(vec3(pts[k], child("/points", k), src));
  return targets;
}

Scenario load_scenario(const fs::path& path) {
  Document doc(path);
  const auto& src = doc.source();
  const json& root = doc.root();
  const fs::path base = path.parent_path();

  Scenario s;
  if (const json* v = optional_field(root, "", "name", src)) s.name = text(*v, "/name", src);

  const auto env_file = text(field(root, "", "environment", src), "/environment", src);
  const auto placement_file = text(field(root, "", "placement", src), "/placement", src);
  s.env = load_environment(base / env_file);
  s.placement = load_placement(base / placement_file);

  if (const json* v = optional_field(root, "", "profile", src)) {
    const auto name = text(*v, "/profile", src);
    const auto profile = parse_profile(name);
    if (!profile) src.fail("/profile", "unknown profile \"" + name + "\" (arena, staircase, multiroom)");
    s.profile = *profile;
  }
  s.tdoa = make_profile(s.profile).tdoa;

  if (const json* v = optional_field(root, "", "seed", src)) {
    if (!v->is_number_unsigned()) src.fail("/seed", "expected a non-negative integer");
    s.seed = v->get<std::uint64_t>();
  }
  if (const json* v = optional_field(root, "", "warmup", src)) s.warmup = non_negative(*v, "/warmup", src);

  if (const json* r = optional_field(root, "", "rates", src)) {
    if (const json* v = optional_field(*r, "/rates", "imu", src)) s.rates.imu = positive(*v, "/rates/imu", src);
    if (const json* v = optional_field(*r, "/rates", "tdoa", src)) s.rates.tdoa = positive(*v, "/rates/tdoa", src);
    if (const json* v = optional_field(*r, "/rates", "gt", src)) s.rates.gt = positive(*v, "/rates/gt", src);
  }

  if (const json* imu = optional_field(root, "", "imu", src)) {
    s.imu.sigma_a = optional_number(*imu, "/imu", "sigma_a", s.imu.sigma_a, src);
    s.imu.sigma_w = optional_number(*imu, "/imu", "sigma_w", s.imu.sigma_w, src);
    s.imu.sigma_ba = optional_number(*imu, "/imu", "sigma_ba", s.imu.sigma_ba, src);
    s.imu.sigma_bw = optional_number(*imu, "/imu", "sigma_bw", s.imu.sigma_bw, src);
    for (const char* key : {"sigma_a", "sigma_w", "sigma_ba", "sigma_bw"}) {
      if (const json* v = optional_field(*imu, "/imu", key, src)) non_negative(*v, child("/imu", key), src);
    }
    if (const json* g = optional_field(*imu, "/imu", "gravity", src)) s.imu.gravity = vec3(*g, "/imu/gravity", src);
  }

  if (const json* t = optional_field(root, "", "tdoa", src)) {
    if (const json* v = optional_field(*t, "/tdoa", "sigma", src)) s.tdoa.sigma = positive(*v, "/tdoa/sigma", src);
    if (const json* v = optional_field(*t, "/tdoa", "variance_oos", src)) {
      s.tdoa.variance_oos = positive(*v, "/tdoa/variance_oos", src);
    }
    if (const json* v = optional_field(*t, "/tdoa", "nlos_bias_per_meter", src)) {
      s.tdoa.nlos_bias_per_meter = non_negative(*v, "/tdoa/nlos_bias_per_meter", src);
    }
    if (const json* v = optional_field(*t, "/tdoa", "nlos_extra_sigma", src)) {
      s.tdoa.nlos_extra_sigma = non_negative(*v, "/tdoa/nlos_extra_sigma", src);
    }
    if (s.tdoa.variance_oos < s.tdoa.sigma * s.tdoa.sigma) {
      src.fail("/tdoa/variance_oos", "must be at least sigma squared");
    }
    if (const json* v = optional_field(*t, "/tdoa", "oos_fraction", src)) {
      s.synth.oos_fraction = non_negative(*v, "/tdoa/oos_fraction", src);
    }
    if (const json* v = optional_field(*t, "/tdoa", "radio_range", src)) {
      s.synth.radio_range = positive(*v, "/tdoa/radio_range", src);
    }
  }

  if (const json* v = optional_field(root, "", "lever_arm", src)) s.synth.lever_arm = vec3(*v, "/lever_arm", src);

  s.trajectory = parse_trajectory(field(root, "", "trajectory", src), "/trajectory", src);
  try {
    gen_trajectory(s.trajectory, &s.env.boundary);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InvalidArgument) throw;
    src.fail("/trajectory", e.what());
  }

  s.eskf = resolve_eskf(s.profile, s.imu, s.synth.lever_arm);
  if (const json* v = optional_field(root, "", "gate_mode", src)) {
    const auto mode = text(*v, "/gate_mode", src);
    if (mode == "scalar") {
      s.eskf.gate_mode = GateMode::Scalar;
    } else if (mode == "chi2") {
      s.eskf.gate_mode = GateMode::ChiSquare;
    } else {
      src.fail("/gate_mode", "expected \"scalar\" or \"chi2\"");
    }
  }
  return s;
}

MeasurementLog load_log(const fs::path& path, int anchor_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, path.string() + ": cannot open for reading");
  MeasurementLog log;
  std::string line;
  int lineno = 0;
  Source src{path.string(), nullptr, 1};
  while (std::getline(in, line)) {
    ++lineno;
    src.fixed_line = lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_or_fail(line, src, lineno);
    MeasurementRecord rec;
    rec.t = number(field(j, "", "t", src), "/t", src);
    const auto type = text(field(j, "", "type", src), "/type", src);
    if (type == "imu") {
      rec.payload = ImuSample{vec3(field(j, "", "acc", src), "/acc", src), vec3(field(j, "", "gyro", src), "/gyro", src)};
    } else if (type == "tdoa") {
      const long i = integer(field(j, "", "i", src), "/i", src);
      const long jj = integer(field(j, "", "j", src), "/j", src);
      if (i < 1) src.fail("/i", "anchor index must be at least 1");
      if (jj < 1) src.fail("/j", "anchor index must be at least 1");
      if (i == jj) src.fail("/j", "a pair needs two distinct anchors");
      if (anchor_count > 0 && i > anchor_count) src.fail("/i", "anchor index exceeds the placement size");
      if (anchor_count > 0 && jj > anchor_count) src.fail("/j", "anchor index exceeds the placement size");
      rec.payload = TdoaSample{{static_cast<int>(i), static_cast<int>(jj)}, number(field(j, "", "d", src), "/d", src)};
    } else if (type == "gt") {
      GroundTruthSample gt;
      gt.pose.position = vec3(field(j, "", "p", src), "/p", src);
      const json& q = field(j, "", "q", src);
      if (!q.is_array() || q.size() != 4) src.fail("/q", "expected [w, x, y, z]");
      const double w = number(q[0], "/q/0", src), x = number(q[1], "/q/1", src);
      const double y = number(q[2], "/q/2", src), z = number(q[3], "/q/3", src);
      if (std::abs(std::sqrt(w * w + x * x + y * y + z * z) - 1.0) > 1e-6) src.fail("/q", "quaternion is not unit");
      gt.pose.orientation = UnitQuaternion(w, x, y, z);
      if (const json* v = optional_field(j, "", "v", src)) gt.velocity = vec3(*v, "/v", src);
      rec.payload = gt;
    } else {
      src.fail("/type", "expected \"imu\", \"tdoa\" or \"gt\"");
    }
    if (!log.empty() && rec.t < log.back().t) src.fail("/t", "timestamp decreases (log must be sorted by time)");
    log.push_back(std::move(rec));
  }
  return log;
}

std::vector<EstimateSample> load_estimates(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, path.string() + ": cannot open for reading");
  std::vector<EstimateSample> out;
  std::string line;
  int lineno = 0;
  Source src{path.string(), nullptr, 1};
  while (std::getline(in, line)) {
    ++lineno;
    src.fixed_line = lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_or_fail(line, src, lineno);
    EstimateSample e;
    e.t = number(field(j, "", "t", src), "/t", src);
    e.state.t = e.t;
    e.state.p = vec3(field(j, "", "p", src), "/p", src);
    e.state.v = vec3(field(j, "", "v", src), "/v", src);
    const json& q = field(j, "", "q", src);
    if (!q.is_array() || q.size() != 4) src.fail("/q", "expected [w, x, y, z]");
    e.state.q = UnitQuaternion(number(q[0], "/q/0", src), number(q[1], "/q/1", src), number(q[2], "/q/2", src),
                               number(q[3], "/q/3", src));
    const json& pd = field(j, "", "P_diag", src);
    if (!pd.is_array() || pd.size() != static_cast<std::size_t>(kErrorDim)) src.fail("/P_diag", "expected 15 numbers");
    for (int k = 0; k < kErrorDim; ++k) e.P_diag[k] = number(pd[k], child("/P_diag", k), src);
    e.P_pos = e.P_diag.segment<3>(kPos).asDiagonal();
    if (!out.empty() && e.t < out.back().t) src.fail("/t", "timestamp decreases");
    out.push_back(e);
  }
  return out;
}

Heatmap load_heatmap_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, path.string() + ": cannot open for reading");
  Heatmap map;
  std::string line;
  int lineno = 0;
  std::set<double> xs, ys;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != "x,y,rmse_lb") throw InputError(path.string(), 1, "header", "expected x,y,rmse_lb");
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cols[3];
    for (auto& c : cols) {
      if (!std::getline(ss, c, ',')) throw InputError(path.string(), lineno, "row", "expected three columns");
    }
    HeatmapCell cell;
    try {
      cell.x = std::stod(cols[0]);
      cell.y = std::stod(cols[1]);
      cell.rmse_lb = std::stod(cols[2]);
    } catch (const std::exception&) {
      throw InputError(path.string(), lineno, "row", "unparsable number");
    }
    xs.insert(cell.x);
    ys.insert(cell.y);
    map.cells.push_back(cell);
  }
  map.nx = static_cast<int>(xs.size());
  map.ny = static_cast<int>(ys.size());
  return map;
}

void save_environment(const fs::path& path, const Environment& env) {
  json j;
  j["name"] = env.name;
  j["boundary"] = {{"min", vec_json(env.boundary.min)}, {"max", vec_json(env.boundary.max)}};
  j["obstacles"] = json::array();
  for (const auto& o : env.obstacles) j["obstacles"].push_back({{"min", vec_json(o.min)}, {"max", vec_json(o.max)}});
  write_json(path, j);
}

void save_placement(const fs::path& path, const AnchorPlacement& placement) {
  json j;
  j["anchors"] = json::array();
  for (const auto& a : placement.anchors) j["anchors"].push_back(vec_json(a));
  j["pairs"] = json::array();
  for (const auto& p : placement.pairs) j["pairs"].push_back(json::array({p.i, p.j}));
  j["mode"] = placement.mode == TdoaMode::Centralized ? "centralized" : "decentralized";
  write_json(path, j);
}

void save_targets(const fs::path& path, const TargetSet& targets) {
  json j;
  j["points"] = json::array();
  for (const auto& p : targets.points) j["points"].push_back(vec_json(p));
  write_json(path, j);
}

void save_log(const fs::path& path, const MeasurementLog& log) {
  auto out = open_out(path);
  for (const auto& rec : log) {
    json j;
    j["t"] = rec.t;
    if (const auto* imu = std::get_if<ImuSample>(&rec.payload)) {
      j["type"] = "imu";
      j["acc"] = vec_json(imu->acc);
      j["gyro"] = vec_json(imu->gyro);
    } else if (const auto* tdoa = std::get_if<TdoaSample>(&rec.payload)) {
      j["type"] = "tdoa";
      j["i"] = tdoa->pair.i;
      j["j"] = tdoa->pair.j;
      j["d"] = tdoa->d;
    } else if (const auto* gt = std::get_if<GroundTruthSample>(&rec.payload)) {
      j["type"] = "gt";
      j["p"] = vec_json(gt->pose.position);
      j["q"] = quat_json(gt->pose.orientation);
      j["v"] = vec_json(gt->velocity);
    }
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, path.string() + ": write failed");
}

void save_estimates(const fs::path& path, std::span<const EstimateSample> estimates) {
  auto out = open_out(path);
  for (const auto& e : estimates) {
    json j;
    j["t"] = e.t;
    j["p"] = vec_json(e.state.p);
    j["q"] = quat_json(e.state.q);
    j["v"] = vec_json(e.state.v);
    j["P_diag"] = json::array();
    for (int k = 0; k < kErrorDim; ++k) j["P_diag"].push_back(e.P_diag[k]);
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, path.string() + ": write failed");
}

void save_gating(const fs::path& path, const GatingReport& gating) {
  json j;
  j["accepted"] = gating.accepted;
  j["rejected"] = gating.rejected;
  j["skipped"] = gating.skipped;
  j["reject_rate"] = gating.reject_rate;
  j["gap_warnings"] = gating.gap_warnings;
  j["per_pair"] = json::array();
  for (const auto& p : gating.per_pair) {
    j["per_pair"].push_back({{"i", p.pair.i},
                             {"j", p.pair.j},
                             {"scheduled", p.scheduled},
                             {"accepted", p.accepted},
                             {"rejected", p.rejected},
                             {"skipped", p.skipped}});
  }
  write_json(path, j);
}

void save_report(const fs::path& path, const MetricReport& report, const ReportExtras& extras) {
  json j;
  j["per_point"] = json::array();
  for (const auto& p : report.per_point) {
    j["per_point"].push_back({{"point", vec_json(p.point)},
                              {"mse_lb", num(p.mse_lb)},
                              {"variance_term", num(p.variance_term)},
                              {"bias_term", num(p.bias_term)},
                              {"conditioning", num(p.conditioning)},
                              {"observable", p.observable}});
  }
  j["aggregate_rmse"] = num(report.aggregate_rmse);
  j["sweeps"] = extras.sweeps;
  j["history"] = json::array();
  for (double h : extras.history) j["history"].push_back(num(h));
  if (extras.has_target) {
    j["rmse_target"] = extras.rmse_target;
    j["success"] = extras.success;
    j["anchor_count"] = extras.anchor_count;
    j["steps"] = json::array();
    for (const auto& s : extras.steps) {
      j["steps"].push_back({{"anchor_count", s.anchor_count},
                            {"aggregate_rmse", num(s.aggregate_rmse)},
                            {"sweeps", s.sweeps}});
    }
  }
  write_json(path, j);
}

void save_heatmap_csv(const fs::path& path, const Heatmap& map) {
  auto out = open_out(path);
  out << "x,y,rmse_lb\n";
  for (const auto& c : map.cells) {
    out << format_number(c.x) << ',' << format_number(c.y) << ',' << format_number(c.rmse_lb) << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, path.string() + ": write failed");
}

void save_error_csv(const fs::path& path, std::span<const ErrorCurveRow> rows) {
  auto out = open_out(path);
  out << "t,err,bound\n";
  for (const auto& r : rows) {
    out << format_number(r.t) << ',' << format_number(r.err) << ',' << format_number(r.bound) << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, path.string() + ": write failed");
}

void save_summary(const fs::path& path, const EvalSummary& summary) { write_json(path, summary_json(summary)); }

void save_monte_carlo(const fs::path& path, const MonteCarloSummary& summary) {
  json j;
  j["trials"] = summary.trials.size();
  j["mean_rmse"] = num(summary.mean_rmse);
  j["std_rmse"] = num(summary.std_rmse);
  j["mean_nees"] = num(summary.mean_nees);
  j["mean_bound"] = num(summary.mean_bound);
  j["diverged_trials"] = summary.diverged_trials;
  j["per_trial"] = json::array();
  for (std::size_t k = 0; k < summary.trials.size(); ++k) {
    json t = summary_json(summary.trials[k]);
    t["seed"] = summary.seeds[k];
    j["per_trial"].push_back(std::move(t));
  }
  write_json(path, j);
}

}  // namespace tdoa::io
