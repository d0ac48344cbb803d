#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "chfem/linalg.hpp"
#include "chfem/mesh_adapt.hpp"
#include "chfem/time_adapt.hpp"

namespace chfem {

/// Flat `section.key = value` text. '#' starts a comment, blank lines are
/// skipped, keys may repeat (last one wins). Every key must be consumed by a
/// getter before assert_exhausted(), which turns typos into hard errors.
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::filesystem::path& path);
  static ConfigMap parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  double get_double(const std::string& key, double fallback);
  double require_double(const std::string& key);
  int get_int(const std::string& key, int fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback);
  /// Accepts plain numbers or pi expressions: "pi", "pi/4", "2*pi/3", "0.5pi".
  double get_angle(const std::string& key, double fallback);

  /// All entries whose key starts with `prefix` + '.', as (suffix, value),
  /// marked consumed. Sorted by suffix.
  std::vector<std::pair<std::string, std::string>> consume_prefix(const std::string& prefix);

  /// Throws listing every never-consumed key with its line number.
  void assert_exhausted() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };
  std::map<std::string, Entry> entries_;
  std::string origin_;

  const Entry* find(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
};

/// Parses "solid:2" / "open" (sub_id defaults to 0).
BoundaryLabel parse_boundary_label(const std::string& text);
std::string format_boundary_label(const BoundaryLabel& label);

struct MeshConfig {
  enum class Kind { Rectangle, File };
  Kind kind = Kind::Rectangle;
  // Rectangle [0,lx] x [0,ly] with nx x ny cells.
  double lx = 1.0, ly = 1.0;
  int nx = 16, ny = 16;
  RectangleLabels labels;
  /// Relabeled spans of a rectangle side; `a`/`b` bound the running
  /// coordinate (x on bottom/top, y on left/right).
  struct Segment {
    std::string side;
    double a = 0.0, b = 0.0;
    BoundaryLabel label;
  };
  std::vector<Segment> segments;

  std::filesystem::path file;  // Kind::File
};

struct OutputConfig {
  std::filesystem::path directory = "out";
  std::string prefix = "sim";
  int vtk_every = 0;  // accepted steps between snapshots; 0 disables
  int csv_every = 1;  // 0 disables
};

struct ScenarioConfig {
  MeshConfig mesh;
  PhysicsParams physics;
  SchemeParams scheme;

  double T = 1.0;
  bool adapt_time = true;
  TimeAdaptParams time_adapt;
  double fixed_dt = 0.0;  // when adapt_time is false

  bool adapt_mesh = false;
  MetricParams metric;
  int initial_adapt_passes = 3;

  InitialCondition ic;
  OutputConfig output;
  LinearSolveConfig solver;
  std::uint64_t seed = 0;

  void validate() const;
  /// Resolved key = value listing (what the run actually uses).
  std::string echo() const;
};

ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_scenario(const std::string& text, const std::string& origin = "<string>");

/// Legacy ASCII VTK unstructured grid with one SCALARS block per field
/// (vertex values; for degree-2 fields the vertex dofs are written).
void write_vtk(const Mesh& mesh,
               const std::vector<std::pair<std::string, const Field*>>& fields,
               const std::filesystem::path& path);

/// Columns: step, time, dt, recalculations, E_mix, E_wall, E_total, mass,
/// dissipation, nd_philic, nd_phobic, nd_wall, dof_count. 15 significant
/// digits, one header line, flushed per row.
class CsvWriter {
 public:
  explicit CsvWriter(std::filesystem::path path);  // truncates

  void append(long step, const RunRecord& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  bool header_written_ = false;
};

/// One-shot append to a possibly existing file (header added when empty).
void append_csv(const std::filesystem::path& path, long step, const RunRecord& record);

/// Single-file text checkpoint: time/dt/step, the mesh, then phi and mu.
/// The refinement history is not stored, so a restarted run can only coarsen
/// refinements made after the restart.
void save_checkpoint(const State& state, const std::filesystem::path& path);
State load_checkpoint(const std::filesystem::path& path);

}  // namespace chfem
