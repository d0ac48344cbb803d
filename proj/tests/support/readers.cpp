#include "support/readers.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace readers {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

}  // namespace

VtkFile read_vtk(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");
  VtkFile file;
  std::string word;
  while (in >> word) {
    if (word == "POINTS") {
      int n = 0;
      std::string type;
      in >> n >> type;
      file.points.resize(n);
      for (auto& p : file.points)
        if (!(in >> p[0] >> p[1] >> p[2])) fail(path, "truncated POINTS");
    } else if (word == "CELLS") {
      int n = 0, total = 0;
      in >> n >> total;
      file.cells.resize(n);
      for (auto& c : file.cells) {
        int k = 0;
        if (!(in >> k >> c[0] >> c[1] >> c[2])) fail(path, "truncated CELLS");
        if (k != 3) fail(path, "cell is not a triangle");
      }
    } else if (word == "SCALARS") {
      std::string name, type;
      in >> name >> type;
      // Skip the component count if present, then LOOKUP_TABLE default.
      std::string tok;
      in >> tok;
      if (tok != "LOOKUP_TABLE") in >> tok;  // tok was the component count
      in >> tok;                             // table name
      std::vector<double> values(file.points.size());
      for (double& v : values)
        if (!(in >> v)) fail(path, "truncated SCALARS " + name);
      file.point_data[name] = std::move(values);
    }
  }
  if (file.points.empty()) fail(path, "no POINTS section");
  return file;
}

int CsvFile::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvFile read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");
  CsvFile file;
  std::string line;
  if (!std::getline(in, line)) fail(path, "empty file");
  std::istringstream head(line);
  std::string cell;
  while (std::getline(head, cell, ',')) file.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::vector<double> values;
    while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
    if (values.size() != file.header.size()) fail(path, "ragged row");
    file.rows.push_back(std::move(values));
  }
  return file;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace readers
