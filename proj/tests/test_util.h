// tests/test_util.h

// Copyright 2026  The paeattr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef PAE_TESTS_TEST_UTIL_H_
#define PAE_TESTS_TEST_UTIL_H_

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>

#include <unistd.h>

#include "pae/error.h"

namespace pae::test {

inline std::filesystem::path DataDir() { return PAE_DATA_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("paeattr_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Error code raised by `fn`, or nothing if it returns normally.
template <typename Fn>
std::optional<ErrorCode> CodeOf(Fn &&fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace pae::test

#endif  // PAE_TESTS_TEST_UTIL_H_
