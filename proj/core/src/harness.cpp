#include "chfem/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace chfem {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Which rectangle side a boundary-edge midpoint sits on, or "" off the frame.
std::string rectangle_side(Vec2 mid, double lx, double ly, double tol) {
  if (std::abs(mid.y) <= tol) return "bottom";
  if (std::abs(mid.y - ly) <= tol) return "top";
  if (std::abs(mid.x) <= tol) return "left";
  if (std::abs(mid.x - lx) <= tol) return "right";
  return "";
}

Mesh build_rectangle(const MeshConfig& mc) {
  Mesh mesh = generate_rectangle(mc.lx, mc.ly, mc.nx, mc.ny, mc.labels);
  if (mc.segments.empty()) return mesh;

  const double tol = 1e-9 * std::max({mc.lx, mc.ly, 1.0});
  std::vector<BoundaryEdge> edges = mesh.boundary_edges();
  for (BoundaryEdge& e : edges) {
    const Vec2 mid = 0.5 * (mesh.vertices()[e.a] + mesh.vertices()[e.b]);
    const std::string side = rectangle_side(mid, mc.lx, mc.ly, tol);
    const double run = (side == "bottom" || side == "top") ? mid.x : mid.y;
    // Later segments override earlier ones.
    for (const MeshConfig::Segment& seg : mc.segments) {
      if (seg.side != side) continue;
      if (run >= seg.a - tol && run <= seg.b + tol) e.label = seg.label;
    }
  }
  return Mesh(mesh.vertices(), mesh.triangles(), std::move(edges));
}

bool deterministic_profile(InitialCondition::Kind kind) {
  return kind != InitialCondition::Kind::RandomNormal;
}

std::string scheme_name(const SchemeParams& s) {
  if (s.alpha == 1) return "od1w";
  if (s.beta_mode == SchemeParams::BetaMode::ProportionalToDt || s.beta != 0.0)
    return "od2modw";
  return "od2w";
}

// Fixed-dt run of a prebuilt scenario (time and mesh adaptation off).
Field run_fixed(const Scenario& scenario, const ScenarioConfig& cfg, double dt) {
  State initial = scenario.state;
  initial.dt = dt;
  RunOptions options;
  options.adapt_time = false;
  options.fixed_dt = dt;
  RunResult rr = run_to_time(cfg.physics, cfg.scheme, cfg.solver, std::move(initial),
                             cfg.time_adapt, cfg.T, options);
  return std::move(rr.final_state.phi);
}

double l2_norm(const Vector& d, const SparseMatrix& M) {
  return std::sqrt(std::max(0.0, d.dot(M * d)));
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

}  // namespace

Scenario build_scenario(const ScenarioConfig& config) {
  config.validate();

  Mesh mesh = config.mesh.kind == MeshConfig::Kind::Rectangle
                  ? build_rectangle(config.mesh)
                  : import_mesh(config.mesh.file);
  auto space = std::make_shared<const FemSpace>(
      std::make_shared<const Mesh>(std::move(mesh)), 1);

  Field phi = initial_condition(config.ic, space, config.physics.epsilon);

  if (config.adapt_mesh && config.initial_adapt_passes > 0) {
    for (int round = 0; round < config.initial_adapt_passes; ++round) {
      AdaptResult res = adapt_to_field(phi, {}, config.metric);
      if (res.passes == 0) break;
      if (deterministic_profile(config.ic.kind)) {
        // Analytic profiles are re-sampled on the adapted mesh instead of
        // interpolated, so the rounds converge to the profile's own metric.
        phi = initial_condition(config.ic, res.space, config.physics.epsilon);
      } else {
        phi = std::move(res.fields[0]);
      }
      space = phi.space;
    }
  }

  Scenario scenario;
  scenario.config = config;
  scenario.state.mu = Field(space);
  scenario.state.phi = std::move(phi);
  scenario.state.time = 0.0;
  scenario.state.dt = config.adapt_time ? config.time_adapt.dt0 : config.fixed_dt;
  scenario.state.step = 0;
  return scenario;
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
  Scenario scenario = build_scenario(config);
  const fs::path dir = config.output.directory;
  fs::create_directories(dir);

  {
    std::ofstream echo(dir / (config.output.prefix + ".config.txt"));
    echo << config.echo();
  }

  std::unique_ptr<CsvWriter> csv;
  if (config.output.csv_every > 0)
    csv = std::make_unique<CsvWriter>(dir / (config.output.prefix + ".csv"));

  auto snapshot = [&](const State& s) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%06ld.vtk", config.output.prefix.c_str(),
                  s.step);
    write_vtk(s.phi.space->mesh(), {{"phi", &s.phi}, {"mu", &s.mu}}, dir / name);
  };
  if (config.output.vtk_every > 0) snapshot(scenario.state);

  RunOptions options;
  options.adapt_time = config.adapt_time;
  options.fixed_dt = config.fixed_dt;
  options.on_step = [&](const StepOutcome& o) {
    if (csv && o.state.step % config.output.csv_every == 0) {
      RunRecord rec;
      rec.report = o.report;
      rec.dt = o.dt_used;
      rec.recalculations = o.recalculations;
      rec.dof_count = o.state.phi.space->dof_count();
      csv->append(o.state.step, rec);
    }
    if (config.output.vtk_every > 0 && o.state.step % config.output.vtk_every == 0)
      snapshot(o.state);
  };
  if (config.adapt_mesh) {
    options.reshape_every = config.metric.adapt_every;
    options.reshape = [&](const State& s) {
      AdaptResult res = adapt_to_field(s.phi, {&s.mu}, config.metric);
      if (res.passes == 0) return s;
      State out;
      out.phi = std::move(res.fields[0]);
      out.mu = std::move(res.fields[1]);
      out.time = s.time;
      out.dt = s.dt;
      out.step = s.step;
      return out;
    };
  }

  const auto t0 = std::chrono::steady_clock::now();
  RunResult rr = run_to_time(config.physics, config.scheme, config.solver,
                             scenario.state, config.time_adapt, config.T, options);
  const double wall = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();

  if (config.output.vtk_every > 0 &&
      rr.final_state.step % config.output.vtk_every != 0)
    snapshot(rr.final_state);

  ScenarioResult result;
  result.final_state = std::move(rr.final_state);
  result.records = std::move(rr.records);
  result.total_recalculations = rr.total_recalculations;
  result.wall_seconds = wall;
  if (csv) result.csv_path = csv->path();

  double dt_min = 0.0, dt_max = 0.0;
  for (const RunRecord& r : result.records) {
    dt_min = dt_min == 0.0 ? r.dt : std::min(dt_min, r.dt);
    dt_max = std::max(dt_max, r.dt);
  }
  const EnergyReport* last =
      result.records.empty() ? nullptr : &result.records.back().report;

  json j;
  j["final_time"] = result.final_state.time;
  j["final_energy"] = last ? last->E_total : 0.0;
  j["final_mass"] = last ? last->mass : 0.0;
  j["final_dof_count"] = result.final_state.phi.space->dof_count();
  j["steps"] = result.final_state.step;
  j["total_recalculations"] = result.total_recalculations;
  j["wall_seconds"] = result.wall_seconds;
  j["min_dt"] = dt_min;
  j["max_dt"] = dt_max;
  j["csv"] = result.csv_path.string();
  result.result_path = dir / (config.output.prefix + ".json");
  write_json(j, result.result_path);
  return result;
}

double fit_order(const std::vector<ConvergencePoint>& points) {
  std::vector<std::pair<double, double>> logs;
  for (const ConvergencePoint& p : points)
    if (p.parameter > 0.0 && p.error > 0.0)
      logs.emplace_back(std::log(p.parameter), std::log(p.error));
  if (logs.size() < 2) return 0.0;

  double mx = 0.0, my = 0.0;
  for (auto [x, y] : logs) {
    mx += x;
    my += y;
  }
  mx /= logs.size();
  my /= logs.size();
  double cov = 0.0, var = 0.0;
  for (auto [x, y] : logs) {
    cov += (x - mx) * (y - my);
    var += (x - mx) * (x - mx);
  }
  if (var <= 0.0) return 0.0;
  return cov / var;
}

std::vector<ConvergenceResult> converge_time(const ScenarioConfig& base,
                                             const std::vector<double>& dts, double dt_ref,
                                             const std::vector<NamedScheme>& variants,
                                             const fs::path& out_dir) {
  if (dts.empty() || variants.empty())
    throw std::invalid_argument("converge_time: need at least one dt and one variant");
  for (double dt : dts)
    if (!(dt > dt_ref))
      throw std::invalid_argument("converge_time: every dt must exceed dt_ref");

  ScenarioConfig cfg = base;
  cfg.adapt_time = false;
  cfg.adapt_mesh = false;

  // One mesh and one initial state shared by every run.
  Scenario scenario = build_scenario(cfg);
  const SparseMatrix M = assemble_mass(*scenario.state.phi.space);

  std::vector<ConvergenceResult> results;
  for (const NamedScheme& variant : variants) {
    ScenarioConfig vc = cfg;
    vc.scheme = variant.scheme;

    const Field ref = run_fixed(scenario, vc, dt_ref);
    ConvergenceResult r;
    r.variant = variant.name;
    r.reference = dt_ref;
    for (double dt : dts) {
      const Field phi = run_fixed(scenario, vc, dt);
      r.points.push_back({dt, l2_norm(phi.values - ref.values, M)});
    }
    r.order = fit_order(r.points);
    results.push_back(std::move(r));
  }

  fs::create_directories(out_dir);
  json j;
  j["T"] = cfg.T;
  j["reference_dt"] = dt_ref;
  json jv = json::array();
  for (const ConvergenceResult& r : results) {
    json pts = json::array();
    for (const ConvergencePoint& p : r.points)
      pts.push_back({{"dt", p.parameter}, {"error", p.error}});
    jv.push_back({{"name", r.variant}, {"points", pts}, {"order", r.order}});
  }
  j["variants"] = jv;
  write_json(j, out_dir / "converge_time.json");
  return results;
}

ConvergenceResult converge_space(const ScenarioConfig& base, const std::vector<double>& hs,
                                 double h_ref, const fs::path& out_dir) {
  if (base.mesh.kind != MeshConfig::Kind::Rectangle)
    throw std::invalid_argument("converge_space: needs a generated rectangle mesh");
  if (hs.empty()) throw std::invalid_argument("converge_space: need at least one h");
  if (!(base.fixed_dt > 0.0))
    throw std::invalid_argument("converge_space: base.fixed_dt must be positive");

  auto configure = [&](double h) {
    ScenarioConfig cfg = base;
    cfg.adapt_time = false;
    cfg.adapt_mesh = false;
    cfg.mesh.nx = std::max(1, static_cast<int>(std::lround(cfg.mesh.lx / h)));
    cfg.mesh.ny = std::max(1, static_cast<int>(std::lround(cfg.mesh.ly / h)));
    return cfg;
  };

  const ScenarioConfig ref_cfg = configure(h_ref);
  const Scenario ref_scenario = build_scenario(ref_cfg);
  const Field ref = run_fixed(ref_scenario, ref_cfg, base.fixed_dt);
  const SparseMatrix M_ref = assemble_mass(*ref.space);
  const std::vector<Vec2>& ref_points = ref.space->dof_coordinates();

  ConvergenceResult r;
  r.variant = scheme_name(base.scheme);
  r.reference = h_ref;
  for (double h : hs) {
    const ScenarioConfig cfg = configure(h);
    const Scenario scenario = build_scenario(cfg);
    const Field phi = run_fixed(scenario, cfg, base.fixed_dt);

    MeshLocator locator(phi.space->mesh_ptr());
    Vector d(static_cast<Eigen::Index>(ref_points.size()));
    for (std::size_t i = 0; i < ref_points.size(); ++i)
      d[static_cast<Eigen::Index>(i)] = evaluate(phi, ref_points[i], locator) -
                                        ref.values[static_cast<Eigen::Index>(i)];
    r.points.push_back({h, l2_norm(d, M_ref)});
  }
  r.order = fit_order(r.points);

  fs::create_directories(out_dir);
  json j;
  j["T"] = base.T;
  j["dt"] = base.fixed_dt;
  j["reference_h"] = h_ref;
  j["variant"] = r.variant;
  json pts = json::array();
  for (const ConvergencePoint& p : r.points)
    pts.push_back({{"h", p.parameter}, {"error", p.error}});
  j["points"] = pts;
  j["order"] = r.order;
  write_json(j, out_dir / "converge_space.json");
  return r;
}

std::vector<AnglePoint> angle_test(const ScenarioConfig& base,
                                   const std::vector<double>& thetas,
                                   const fs::path& out_dir, double rate_threshold) {
  if (thetas.empty()) throw std::invalid_argument("angle_test: need at least one theta");

  std::vector<AnglePoint> points;
  for (double theta : thetas) {
    ScenarioConfig cfg = base;
    cfg.physics.theta = ThetaField::make_uniform(theta);
    Scenario scenario = build_scenario(cfg);

    // Quasi-equilibrium detector: max nodal |delta phi| per unit time. Mesh
    // reshaping invalidates the comparison vector, so skip those steps.
    Vector prev = scenario.state.phi.values;
    const FemSpace* prev_space = scenario.state.phi.space.get();
    bool equilibrated = false;

    RunOptions options;
    options.adapt_time = cfg.adapt_time;
    options.fixed_dt = cfg.fixed_dt;
    options.stop = [&](const StepOutcome& o) {
      const Field& phi = o.state.phi;
      if (phi.space.get() != prev_space) {
        prev = phi.values;
        prev_space = phi.space.get();
        return false;
      }
      const double rate = (phi.values - prev).lpNorm<Eigen::Infinity>() / o.dt_used;
      prev = phi.values;
      if (rate < rate_threshold) equilibrated = true;
      return equilibrated;
    };
    if (cfg.adapt_mesh) {
      options.reshape_every = cfg.metric.adapt_every;
      options.reshape = [&](const State& s) {
        AdaptResult res = adapt_to_field(s.phi, {&s.mu}, cfg.metric);
        if (res.passes == 0) return s;
        State out;
        out.phi = std::move(res.fields[0]);
        out.mu = std::move(res.fields[1]);
        out.time = s.time;
        out.dt = s.dt;
        out.step = s.step;
        return out;
      };
    }

    RunResult rr = run_to_time(cfg.physics, cfg.scheme, cfg.solver, scenario.state,
                               cfg.time_adapt, cfg.T, options);

    const std::vector<BoundaryLabel> solid =
        distinct_boundary_labels(rr.final_state.phi.space->mesh(), BoundaryTag::Solid);
    if (solid.empty()) throw std::runtime_error("angle_test: mesh has no solid boundary");

    AnglePoint p;
    p.theta = theta;
    p.theta_star = equilibrium_angle(rr.final_state.phi, solid.front(), cfg.physics);
    p.ratio = p.theta_star / theta;
    p.steps = rr.final_state.step;
    p.final_time = rr.final_state.time;
    p.equilibrated = equilibrated;
    points.push_back(p);
  }

  fs::create_directories(out_dir);
  json j;
  j["rate_threshold"] = rate_threshold;
  json jp = json::array();
  for (const AnglePoint& p : points)
    jp.push_back({{"theta", p.theta},
                  {"theta_star", p.theta_star},
                  {"ratio", p.ratio},
                  {"steps", p.steps},
                  {"final_time", p.final_time},
                  {"equilibrated", p.equilibrated}});
  j["points"] = jp;
  write_json(j, out_dir / "angle_test.json");
  return points;
}

}  // namespace chfem
