#pragma once

#include <moeload/error.hpp>

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

// Checks that `expr` throws moeload::Error carrying `expected_code`.
#define CHECK_THROWS_CODE(expr, expected_code)                                  \
  do {                                                                          \
    bool thrown_ = false;                                                       \
    try {                                                                       \
      (void)(expr);                                                             \
    } catch (const moeload::Error& e_) {                                        \
      thrown_ = true;                                                           \
      CHECK_MESSAGE(e_.code() == (expected_code), e_.what());                   \
    }                                                                           \
    CHECK_MESSAGE(thrown_, "expected moeload::Error from " #expr);              \
  } while (false)

namespace testing {

// Fresh, empty scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("moeload_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
