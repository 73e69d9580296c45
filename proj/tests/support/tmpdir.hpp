// Scoped scratch directory for file-based tests.

#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

namespace coughtest {

class TmpDir {
 public:
  explicit TmpDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("coughhmm_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }

  ~TmpDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  TmpDir(const TmpDir&) = delete;
  TmpDir& operator=(const TmpDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace coughtest
