#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace testutil {

// Unique scratch directory, removed on scope exit.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& stem) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           (stem + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Real-dataset root for the integration tests; unset or missing => skipped.
inline std::filesystem::path dataset_dir(const char* name) {
  const char* root = std::getenv("DAPT_DATA_DIR");
  if (root && *root) return std::filesystem::path(root) / name;
  return std::filesystem::path("data") / name;
}

}  // namespace testutil
