#include "chfem/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace chfem {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool parse_full_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

// "1.2", "pi", "pi/4", "2*pi/3", "0.5pi" -> radians.
std::optional<double> parse_angle_text(const std::string& s) {
  double plain;
  if (parse_full_double(s, plain)) return plain;
  auto pos = s.find("pi");
  if (pos == std::string::npos) return std::nullopt;
  std::string head = trim(s.substr(0, pos));
  std::string tail = trim(s.substr(pos + 2));
  double coeff = 1.0;
  if (!head.empty()) {
    if (head.back() == '*') head = trim(head.substr(0, head.size() - 1));
    if (!head.empty() && !parse_full_double(head, coeff)) return std::nullopt;
  }
  double divisor = 1.0;
  if (!tail.empty()) {
    if (tail.front() != '/') return std::nullopt;
    if (!parse_full_double(trim(tail.substr(1)), divisor) || divisor == 0.0)
      return std::nullopt;
  }
  return coeff * kPi / divisor;
}

}  // namespace

ConfigMap ConfigMap::parse_string(const std::string& text, const std::string& origin) {
  ConfigMap m;
  m.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty key");
    for (char c : key)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '_')
        throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                 ": bad character in key '" + key + "'");
    m.entries_[key] = Entry{value, line_no, false};
  }
  return m;
}

ConfigMap ConfigMap::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path.string());
}

const ConfigMap::Entry* ConfigMap::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.used = true;
  return &it->second;
}

void ConfigMap::fail(const std::string& key, const std::string& what) const {
  auto it = entries_.find(key);
  std::string where = origin_;
  if (it != entries_.end()) where += ":" + std::to_string(it->second.line);
  throw std::runtime_error(where + ": " + what + " (key '" + key + "')");
}

bool ConfigMap::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

std::string ConfigMap::require_string(const std::string& key) {
  const Entry* e = find(key);
  if (!e) throw std::runtime_error(origin_ + ": missing required key '" + key + "'");
  return e->value;
}

double ConfigMap::get_double(const std::string& key, double fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  double v;
  if (!parse_full_double(e->value, v)) fail(key, "expected a number, got '" + e->value + "'");
  return v;
}

double ConfigMap::require_double(const std::string& key) {
  const Entry* e = find(key);
  if (!e) throw std::runtime_error(origin_ + ": missing required key '" + key + "'");
  double v;
  if (!parse_full_double(e->value, v)) fail(key, "expected a number, got '" + e->value + "'");
  return v;
}

int ConfigMap::get_int(const std::string& key, int fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  try {
    std::size_t pos = 0;
    long v = std::stol(e->value, &pos);
    if (pos != e->value.size()) throw std::invalid_argument("");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    fail(key, "expected an integer, got '" + e->value + "'");
  }
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::string v = e->value;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  fail(key, "expected a boolean, got '" + e->value + "'");
}

std::uint64_t ConfigMap::get_uint64(const std::string& key, std::uint64_t fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(e->value, &pos);
    if (pos != e->value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    fail(key, "expected an unsigned integer, got '" + e->value + "'");
  }
}

double ConfigMap::get_angle(const std::string& key, double fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  auto angle = parse_angle_text(e->value);
  if (!angle) fail(key, "expected an angle, got '" + e->value + "'");
  return *angle;
}

std::vector<std::pair<std::string, std::string>> ConfigMap::consume_prefix(
    const std::string& prefix) {
  std::string p = prefix + ".";
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& [key, entry] : entries_) {
    if (key.rfind(p, 0) != 0) continue;
    entry.used = true;
    out.emplace_back(key.substr(p.size()), entry.value);
  }
  return out;
}

void ConfigMap::assert_exhausted() const {
  std::vector<std::string> unknown;
  for (const auto& [key, entry] : entries_)
    if (!entry.used)
      unknown.push_back(key + " (line " + std::to_string(entry.line) + ")");
  if (unknown.empty()) return;
  std::string msg = origin_ + ": unknown key";
  if (unknown.size() > 1) msg += "s";
  msg += ": ";
  for (std::size_t i = 0; i < unknown.size(); ++i) {
    if (i) msg += ", ";
    msg += unknown[i];
  }
  throw std::runtime_error(msg);
}

BoundaryLabel parse_boundary_label(const std::string& text) {
  std::string t = trim(text);
  std::string tag = t;
  int sub = 0;
  auto colon = t.find(':');
  if (colon != std::string::npos) {
    tag = trim(t.substr(0, colon));
    std::string s = trim(t.substr(colon + 1));
    try {
      std::size_t pos = 0;
      sub = std::stoi(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::runtime_error("bad boundary label '" + text + "'");
    }
  }
  if (tag == "solid") return {BoundaryTag::Solid, sub};
  if (tag == "open") return {BoundaryTag::Open, sub};
  throw std::runtime_error("bad boundary label '" + text + "' (want solid[:n] or open[:n])");
}

std::string format_boundary_label(const BoundaryLabel& label) {
  return (label.tag == BoundaryTag::Solid ? std::string("solid:") : std::string("open:")) +
         std::to_string(label.sub_id);
}

namespace {

InitialCondition::Kind parse_ic_kind(const std::string& s) {
  if (s == "tanh_interface") return InitialCondition::Kind::TanhInterface;
  if (s == "droplet") return InitialCondition::Kind::Droplet;
  if (s == "two_droplets") return InitialCondition::Kind::TwoDroplets;
  if (s == "random_normal") return InitialCondition::Kind::RandomNormal;
  if (s == "constant") return InitialCondition::Kind::Constant;
  throw std::runtime_error("unknown ic.kind '" + s + "'");
}

std::vector<MeshConfig::Segment> parse_segments(const std::string& side,
                                                const std::string& text) {
  std::vector<MeshConfig::Segment> out;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ';')) {
    part = trim(part);
    if (part.empty()) continue;
    std::istringstream ss(part);
    MeshConfig::Segment seg;
    seg.side = side;
    std::string label;
    if (!(ss >> seg.a >> seg.b >> label) || !(seg.a < seg.b))
      throw std::runtime_error("bad segment '" + part + "' for mesh." + side +
                               "_segments (want 'a b tag:sub' with a < b)");
    seg.label = parse_boundary_label(label);
    out.push_back(seg);
  }
  return out;
}

int parse_sub_id(const std::string& key_tail, const std::string& context) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(key_tail, &pos);
    if (pos != key_tail.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("bad sub_id '" + key_tail + "' under " + context);
  }
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin) {
  ConfigMap m = ConfigMap::parse_string(text, origin);
  ScenarioConfig c;

  // Mesh.
  std::string mesh_kind = m.get_string("mesh.kind", "rectangle");
  if (mesh_kind == "rectangle") {
    c.mesh.kind = MeshConfig::Kind::Rectangle;
    c.mesh.lx = m.get_double("mesh.lx", 1.0);
    c.mesh.ly = m.get_double("mesh.ly", 1.0);
    c.mesh.nx = m.get_int("mesh.nx", 16);
    c.mesh.ny = m.get_int("mesh.ny", 16);
    c.mesh.labels.bottom = parse_boundary_label(m.get_string("mesh.bottom", "solid:0"));
    c.mesh.labels.right = parse_boundary_label(m.get_string("mesh.right", "open:0"));
    c.mesh.labels.top = parse_boundary_label(m.get_string("mesh.top", "open:0"));
    c.mesh.labels.left = parse_boundary_label(m.get_string("mesh.left", "open:0"));
    for (const char* side : {"bottom", "right", "top", "left"}) {
      std::string key = std::string("mesh.") + side + "_segments";
      std::string text_segs = m.get_string(key, "");
      if (!text_segs.empty()) {
        auto segs = parse_segments(side, text_segs);
        c.mesh.segments.insert(c.mesh.segments.end(), segs.begin(), segs.end());
      }
    }
  } else if (mesh_kind == "file") {
    c.mesh.kind = MeshConfig::Kind::File;
    c.mesh.file = m.require_string("mesh.file");
  } else {
    throw std::runtime_error("unknown mesh.kind '" + mesh_kind + "'");
  }

  // Physics.
  c.physics.epsilon = m.get_double("physics.epsilon", 0.01);
  c.physics.mobility = m.get_double("physics.mobility", 1.0);
  auto per_label = m.consume_prefix("physics.theta.solid");
  if (!per_label.empty()) {
    std::map<int, double> angles;
    for (auto& [tail, value] : per_label) {
      auto angle = parse_angle_text(value);
      if (!angle)
        throw std::runtime_error("bad angle '" + value + "' under physics.theta.solid");
      angles[parse_sub_id(tail, "physics.theta.solid")] = *angle;
    }
    c.physics.theta = ThetaField::make_per_label(std::move(angles));
  } else if (m.has("physics.theta.analytic.amplitude")) {
    double t0 = m.get_angle("physics.theta.analytic.theta0", kPi / 2);
    double amp = m.get_double("physics.theta.analytic.amplitude", 0.0);
    double fx = m.get_double("physics.theta.analytic.fx", 0.0);
    double fy = m.get_double("physics.theta.analytic.fy", 0.0);
    c.physics.theta = ThetaField::make_analytic(t0, amp, fx, fy);
  } else {
    c.physics.theta = ThetaField::make_uniform(m.get_angle("physics.theta", kPi / 2));
  }
  for (auto& [tail, value] : m.consume_prefix("physics.mdot")) {
    double v;
    if (!parse_full_double(value, v))
      throw std::runtime_error("bad number '" + value + "' under physics.mdot");
    c.physics.mdot[parse_sub_id(tail, "physics.mdot")] = v;
  }
  for (auto& [tail, value] : m.consume_prefix("physics.phi_dirichlet")) {
    double v;
    if (!parse_full_double(value, v))
      throw std::runtime_error("bad number '" + value + "' under physics.phi_dirichlet");
    c.physics.phi_dirichlet[parse_sub_id(tail, "physics.phi_dirichlet")] = v;
  }

  // Scheme.
  std::string variant = m.get_string("scheme.variant", "od2w");
  if (variant == "od1w") {
    c.scheme = SchemeParams::od1w();
  } else if (variant == "od2w") {
    c.scheme = SchemeParams::od2w();
  } else if (variant == "od2modw") {
    c.scheme = SchemeParams::od2modw(m.require_double("scheme.beta_coeff"));
  } else {
    throw std::runtime_error("unknown scheme.variant '" + variant +
                             "' (want od1w, od2w or od2modw)");
  }
  if (m.has("scheme.beta")) c.scheme.beta = m.get_double("scheme.beta", 0.0);

  // Time.
  c.T = m.require_double("time.T");
  c.adapt_time = m.get_bool("time.adapt", true);
  c.time_adapt.dt0 = m.get_double("time.dt0", c.time_adapt.dt0);
  c.time_adapt.dt_min = m.get_double("time.dt_min", c.time_adapt.dt_min);
  c.time_adapt.dt_max = m.get_double("time.dt_max", c.time_adapt.dt_max);
  c.time_adapt.dE_min = m.get_double("time.dE_min", c.time_adapt.dE_min);
  c.time_adapt.dE_max = m.get_double("time.dE_max", c.time_adapt.dE_max);
  c.time_adapt.factor = m.get_double("time.factor", c.time_adapt.factor);
  c.time_adapt.max_recalculations =
      m.get_int("time.max_recalculations", c.time_adapt.max_recalculations);
  if (!c.adapt_time) c.fixed_dt = m.require_double("time.fixed_dt");

  // Mesh adaptation.
  c.adapt_mesh = m.get_bool("mesh_adapt.enabled", false);
  c.metric.gamma = m.get_double("mesh_adapt.gamma", c.metric.gamma);
  c.metric.h_min = m.get_double("mesh_adapt.h_min", c.metric.h_min);
  c.metric.h_max = m.get_double("mesh_adapt.h_max", c.metric.h_max);
  c.metric.adapt_every = m.get_int("mesh_adapt.every", c.metric.adapt_every);
  c.metric.c_ref = m.get_double("mesh_adapt.c_ref", c.metric.c_ref);
  c.metric.c_coarse = m.get_double("mesh_adapt.c_coarse", c.metric.c_coarse);
  c.metric.max_passes = m.get_int("mesh_adapt.max_passes", c.metric.max_passes);
  c.metric.conserve_mass = m.get_bool("mesh_adapt.conserve_mass", false);
  c.initial_adapt_passes = m.get_int("mesh_adapt.initial_passes", c.initial_adapt_passes);

  // Initial condition.
  c.ic.kind = parse_ic_kind(m.require_string("ic.kind"));
  switch (c.ic.kind) {
    case InitialCondition::Kind::TanhInterface:
      c.ic.angle = m.get_angle("ic.angle", kPi / 2);
      c.ic.anchor_x = m.get_double("ic.anchor_x", 0.0);
      c.ic.anchor_y = m.get_double("ic.anchor_y", 0.0);
      break;
    case InitialCondition::Kind::Droplet:
      c.ic.center = Vec2{m.get_double("ic.center_x", 0.0), m.get_double("ic.center_y", 0.0)};
      c.ic.radius = m.require_double("ic.radius");
      break;
    case InitialCondition::Kind::TwoDroplets:
      c.ic.x1 = m.require_double("ic.x1");
      c.ic.x2 = m.require_double("ic.x2");
      c.ic.r = m.require_double("ic.r");
      c.ic.smoothing = m.get_double("ic.smoothing", -1.0);
      break;
    case InitialCondition::Kind::RandomNormal:
      c.ic.variance = m.get_double("ic.variance", 0.1);
      break;
    case InitialCondition::Kind::Constant:
      c.ic.value = m.get_double("ic.value", 0.0);
      break;
  }

  // Output.
  c.output.directory = m.get_string("output.directory", "out");
  c.output.prefix = m.get_string("output.prefix", "sim");
  c.output.vtk_every = m.get_int("output.vtk_every", 0);
  c.output.csv_every = m.get_int("output.csv_every", 1);

  // Solver.
  std::string method = m.get_string("solver.method", "direct");
  if (method == "direct") {
    c.solver.method = LinearSolveConfig::Method::Direct;
  } else if (method == "krylov") {
    c.solver.method = LinearSolveConfig::Method::Krylov;
  } else {
    throw std::runtime_error("unknown solver.method '" + method + "'");
  }
  c.solver.rel_tolerance = m.get_double("solver.rel_tolerance", c.solver.rel_tolerance);
  c.solver.max_iterations = m.get_int("solver.max_iterations", c.solver.max_iterations);
  std::string precond = m.get_string("solver.preconditioner", "ilu");
  if (precond == "ilu") {
    c.solver.preconditioner = LinearSolveConfig::Preconditioner::IncompleteLU;
  } else if (precond == "none") {
    c.solver.preconditioner = LinearSolveConfig::Preconditioner::None;
  } else {
    throw std::runtime_error("unknown solver.preconditioner '" + precond + "'");
  }

  c.seed = m.get_uint64("rng.seed", 0);
  c.ic.seed = c.seed;

  m.assert_exhausted();
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

void ScenarioConfig::validate() const {
  if (mesh.kind == MeshConfig::Kind::Rectangle) {
    if (!(mesh.lx > 0.0) || !(mesh.ly > 0.0))
      throw std::runtime_error("mesh.lx and mesh.ly must be positive");
    if (mesh.nx < 1 || mesh.ny < 1)
      throw std::runtime_error("mesh.nx and mesh.ny must be at least 1");
  } else if (!std::filesystem::exists(mesh.file)) {
    throw std::runtime_error("mesh.file does not exist: " + mesh.file.string());
  }
  if (!(physics.epsilon > 0.0)) throw std::runtime_error("physics.epsilon must be positive");
  if (!(physics.mobility > 0.0)) throw std::runtime_error("physics.mobility must be positive");
  physics.validate();
  if (!(T > 0.0)) throw std::runtime_error("time.T must be positive");
  if (adapt_time) {
    time_adapt.validate();
  } else if (!(fixed_dt > 0.0)) {
    throw std::runtime_error("time.fixed_dt must be positive when time.adapt = false");
  }
  if (adapt_mesh) {
    metric.validate();
    if (initial_adapt_passes < 0)
      throw std::runtime_error("mesh_adapt.initial_passes must be >= 0");
  }
  if (output.vtk_every < 0 || output.csv_every < 0)
    throw std::runtime_error("output cadences must be >= 0");
  solver.validate();
}

std::string ScenarioConfig::echo() const {
  std::ostringstream out;
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
  };
  if (mesh.kind == MeshConfig::Kind::Rectangle) {
    out << "mesh.kind = rectangle\n";
    out << "mesh.lx = " << num(mesh.lx) << "\nmesh.ly = " << num(mesh.ly) << "\n";
    out << "mesh.nx = " << mesh.nx << "\nmesh.ny = " << mesh.ny << "\n";
    out << "mesh.bottom = " << format_boundary_label(mesh.labels.bottom) << "\n";
    out << "mesh.right = " << format_boundary_label(mesh.labels.right) << "\n";
    out << "mesh.top = " << format_boundary_label(mesh.labels.top) << "\n";
    out << "mesh.left = " << format_boundary_label(mesh.labels.left) << "\n";
    for (const auto& seg : mesh.segments)
      out << "mesh." << seg.side << "_segment = " << num(seg.a) << " " << num(seg.b) << " "
          << format_boundary_label(seg.label) << "\n";
  } else {
    out << "mesh.kind = file\nmesh.file = " << mesh.file.string() << "\n";
  }
  out << "physics.epsilon = " << num(physics.epsilon) << "\n";
  out << "physics.mobility = " << num(physics.mobility) << "\n";
  switch (physics.theta.kind) {
    case ThetaField::Kind::Uniform:
      out << "physics.theta = " << num(physics.theta.uniform) << "\n";
      break;
    case ThetaField::Kind::PerLabel:
      for (const auto& [sub, angle] : physics.theta.per_label)
        out << "physics.theta.solid." << sub << " = " << num(angle) << "\n";
      break;
    case ThetaField::Kind::Analytic:
      out << "physics.theta.analytic.theta0 = " << num(physics.theta.theta0) << "\n";
      out << "physics.theta.analytic.amplitude = " << num(physics.theta.amplitude) << "\n";
      out << "physics.theta.analytic.fx = " << num(physics.theta.fx) << "\n";
      out << "physics.theta.analytic.fy = " << num(physics.theta.fy) << "\n";
      break;
  }
  for (const auto& [sub, v] : physics.mdot)
    out << "physics.mdot." << sub << " = " << num(v) << "\n";
  for (const auto& [sub, v] : physics.phi_dirichlet)
    out << "physics.phi_dirichlet." << sub << " = " << num(v) << "\n";
  out << "scheme.alpha = " << scheme.alpha << "\n";
  if (scheme.beta_mode == SchemeParams::BetaMode::ProportionalToDt)
    out << "scheme.beta_coeff = " << num(scheme.beta_coeff) << "\n";
  else
    out << "scheme.beta = " << num(scheme.beta) << "\n";
  out << "time.T = " << num(T) << "\n";
  out << "time.adapt = " << (adapt_time ? "true" : "false") << "\n";
  if (adapt_time) {
    out << "time.dt0 = " << num(time_adapt.dt0) << "\n";
    out << "time.dt_min = " << num(time_adapt.dt_min) << "\n";
    out << "time.dt_max = " << num(time_adapt.dt_max) << "\n";
    out << "time.dE_min = " << num(time_adapt.dE_min) << "\n";
    out << "time.dE_max = " << num(time_adapt.dE_max) << "\n";
    out << "time.factor = " << num(time_adapt.factor) << "\n";
    out << "time.max_recalculations = " << time_adapt.max_recalculations << "\n";
  } else {
    out << "time.fixed_dt = " << num(fixed_dt) << "\n";
  }
  out << "mesh_adapt.enabled = " << (adapt_mesh ? "true" : "false") << "\n";
  if (adapt_mesh) {
    out << "mesh_adapt.gamma = " << num(metric.gamma) << "\n";
    out << "mesh_adapt.h_min = " << num(metric.h_min) << "\n";
    out << "mesh_adapt.h_max = " << num(metric.h_max) << "\n";
    out << "mesh_adapt.every = " << metric.adapt_every << "\n";
    out << "mesh_adapt.c_ref = " << num(metric.c_ref) << "\n";
    out << "mesh_adapt.c_coarse = " << num(metric.c_coarse) << "\n";
    out << "mesh_adapt.max_passes = " << metric.max_passes << "\n";
    out << "mesh_adapt.conserve_mass = " << (metric.conserve_mass ? "true" : "false") << "\n";
    out << "mesh_adapt.initial_passes = " << initial_adapt_passes << "\n";
  }
  switch (ic.kind) {
    case InitialCondition::Kind::TanhInterface:
      out << "ic.kind = tanh_interface\n";
      out << "ic.angle = " << num(ic.angle) << "\n";
      out << "ic.anchor_x = " << num(ic.anchor_x) << "\nic.anchor_y = " << num(ic.anchor_y)
          << "\n";
      break;
    case InitialCondition::Kind::Droplet:
      out << "ic.kind = droplet\n";
      out << "ic.center_x = " << num(ic.center.x) << "\nic.center_y = " << num(ic.center.y)
          << "\n";
      out << "ic.radius = " << num(ic.radius) << "\n";
      break;
    case InitialCondition::Kind::TwoDroplets:
      out << "ic.kind = two_droplets\n";
      out << "ic.x1 = " << num(ic.x1) << "\nic.x2 = " << num(ic.x2) << "\n";
      out << "ic.r = " << num(ic.r) << "\n";
      out << "ic.smoothing = " << num(ic.smoothing) << "\n";
      break;
    case InitialCondition::Kind::RandomNormal:
      out << "ic.kind = random_normal\n";
      out << "ic.variance = " << num(ic.variance) << "\n";
      break;
    case InitialCondition::Kind::Constant:
      out << "ic.kind = constant\n";
      out << "ic.value = " << num(ic.value) << "\n";
      break;
  }
  out << "output.directory = " << output.directory.string() << "\n";
  out << "output.prefix = " << output.prefix << "\n";
  out << "output.vtk_every = " << output.vtk_every << "\n";
  out << "output.csv_every = " << output.csv_every << "\n";
  out << "solver.method = "
      << (solver.method == LinearSolveConfig::Method::Direct ? "direct" : "krylov") << "\n";
  out << "solver.rel_tolerance = " << num(solver.rel_tolerance) << "\n";
  out << "solver.max_iterations = " << solver.max_iterations << "\n";
  out << "solver.preconditioner = "
      << (solver.preconditioner == LinearSolveConfig::Preconditioner::IncompleteLU ? "ilu"
                                                                                   : "none")
      << "\n";
  out << "rng.seed = " << seed << "\n";
  return out.str();
}

void write_vtk(const Mesh& mesh,
               const std::vector<std::pair<std::string, const Field*>>& fields,
               const std::filesystem::path& path) {
  for (const auto& [name, f] : fields) {
    if (&f->space->mesh() != &mesh)
      throw std::invalid_argument("write_vtk: field '" + name +
                                  "' lives on a different mesh");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_vtk: cannot open " + path.string());
  char buf[96];
  out << "# vtk DataFile Version 3.0\nphase field snapshot\nASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.vertex_count() << " double\n";
  for (const Vec2& v : mesh.vertices()) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g 0\n", v.x, v.y);
    out << buf;
  }
  out << "CELLS " << mesh.triangle_count() << " " << 4 * mesh.triangle_count() << "\n";
  for (const auto& t : mesh.triangles())
    out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << "\n";
  out << "CELL_TYPES " << mesh.triangle_count() << "\n";
  for (int t = 0; t < mesh.triangle_count(); ++t) out << "5\n";
  if (!fields.empty()) {
    out << "POINT_DATA " << mesh.vertex_count() << "\n";
    for (const auto& [name, f] : fields) {
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int v = 0; v < mesh.vertex_count(); ++v) {
        std::snprintf(buf, sizeof buf, "%.17g\n", f->values[v]);
        out << buf;
      }
    }
  }
  if (!out) throw std::runtime_error("write_vtk: write failed for " + path.string());
}

namespace {

const char* kCsvHeader =
    "step,time,dt,recalculations,E_mix,E_wall,E_total,mass,dissipation,"
    "nd_philic,nd_phobic,nd_wall,dof_count\n";

std::string csv_row(long step, const RunRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%ld,%.15g,%.15g,%d,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g,%d\n",
                step, r.report.time, r.dt, r.recalculations, r.report.E_mix,
                r.report.E_wall, r.report.E_total, r.report.mass, r.report.dissipation,
                r.report.nd_philic, r.report.nd_phobic, r.report.nd_wall, r.dof_count);
  return buf;
}

}  // namespace

CsvWriter::CsvWriter(std::filesystem::path path) : path_(std::move(path)) {
  out_.open(path_, std::ios::trunc);
  if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path_.string());
}

void CsvWriter::append(long step, const RunRecord& record) {
  if (!header_written_) {
    out_ << kCsvHeader;
    header_written_ = true;
  }
  out_ << csv_row(step, record);
  out_.flush();
  if (!out_) throw std::runtime_error("CsvWriter: write failed for " + path_.string());
}

void append_csv(const std::filesystem::path& path, long step, const RunRecord& record) {
  bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("append_csv: cannot open " + path.string());
  if (fresh) out << kCsvHeader;
  out << csv_row(step, record);
  out.flush();
  if (!out) throw std::runtime_error("append_csv: write failed for " + path.string());
}

void save_checkpoint(const State& state, const std::filesystem::path& path) {
  if (state.phi.space->degree() != 1)
    throw std::invalid_argument("save_checkpoint: degree-1 states only");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  char buf[64];
  out << "checkpoint 1\n";
  std::snprintf(buf, sizeof buf, "time %.17g\n", state.time);
  out << buf;
  std::snprintf(buf, sizeof buf, "dt %.17g\n", state.dt);
  out << buf;
  out << "step " << state.step << "\n";
  export_mesh(state.phi.space->mesh(), out);
  auto dump = [&out, &buf](const char* name, const Vector& v) {
    out << name << " " << v.size() << "\n";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g\n", v[i]);
      out << buf;
    }
  };
  dump("field.phi", state.phi.values);
  dump("field.mu", state.mu.values);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

State load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  std::string word;
  int version = 0;
  in >> word >> version;
  if (word != "checkpoint" || version != 1)
    throw std::runtime_error("load_checkpoint: not a checkpoint file: " + path.string());
  State state;
  in >> word >> state.time;
  if (word != "time") throw std::runtime_error("load_checkpoint: expected 'time'");
  in >> word >> state.dt;
  if (word != "dt") throw std::runtime_error("load_checkpoint: expected 'dt'");
  in >> word >> state.step;
  if (word != "step") throw std::runtime_error("load_checkpoint: expected 'step'");
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');

  Mesh mesh = import_mesh(in);
  auto space = std::make_shared<FemSpace>(std::make_shared<const Mesh>(std::move(mesh)), 1);
  auto read_field = [&in, &space, &path](const char* name) {
    std::string n;
    Eigen::Index count = 0;
    in >> n >> count;
    if (n != name || count != space->dof_count())
      throw std::runtime_error("load_checkpoint: bad '" + std::string(name) +
                               "' section in " + path.string());
    Vector v(count);
    for (Eigen::Index i = 0; i < count; ++i)
      if (!(in >> v[i]))
        throw std::runtime_error("load_checkpoint: truncated field in " + path.string());
    return Field(space, std::move(v));
  };
  state.phi = read_field("field.phi");
  state.mu = read_field("field.mu");
  return state;
}

}  // namespace chfem
