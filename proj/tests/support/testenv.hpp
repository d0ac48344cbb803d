#pragma once

#include <filesystem>
#include <string>

namespace testenv {

/// Fresh empty directory under the system temp root; wiped if it already
/// exists so reruns start clean.
inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "chfem_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testenv
