#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

namespace tree {

/// Relative path -> file contents for every regular file under `root`.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[std::filesystem::relative(e.path(), root).generic_string()] =
        std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tree
