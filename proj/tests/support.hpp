#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "saedet/rng.hpp"
#include "saedet/tensor_io.hpp"

namespace saedet::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("saedet-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
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

inline Tensor2D random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::vector<float> v(rows * cols);
  for (auto& x : v) x = static_cast<float>(scale * rng.normal());
  return Tensor2D(rows, cols, std::move(v));
}

}  // namespace saedet::testing
