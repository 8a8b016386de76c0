#pragma once

#include <filesystem>
#include <fstream>
#include <string>

inline std::filesystem::path test_dir() {
  auto p = std::filesystem::temp_directory_path() / "dplda_unit";
  std::filesystem::create_directories(p);
  return p;
}

inline std::string test_path(const std::string& name) {
  return (test_dir() / name).string();
}

inline std::string write_file(const std::string& name, const std::string& text) {
  const std::string p = test_path(name);
  std::ofstream out(p);
  out << text;
  return p;
}
