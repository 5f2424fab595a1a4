// pae/util.h

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

#ifndef PAE_UTIL_H_
#define PAE_UTIL_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace pae {

inline constexpr std::string_view kToolkitVersion = "1.0.0";

/// All randomness in the toolkit flows from generators of this type.
using Rng = std::mt19937_64;

/// Hex SHA-256 of a byte string.
std::string Sha256Hex(std::string_view bytes);

/// Hex SHA-256 of a file's contents.
std::string Sha256File(const std::filesystem::path &path);

/// Stable seed for a sub-task: hash of (run seed, module name, index).
std::uint64_t DeriveSeed(std::uint64_t run_seed, std::string_view module,
                         std::uint64_t index = 0);

/// Calls fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// handled exactly once, so results written to per-index slots do not depend
/// on the worker count. The first exception thrown is rethrown.
void ParallelFor(std::size_t n, int workers,
                 const std::function<void(std::size_t)> &fn);

/// Default worker count (available hardware parallelism, at least 1).
int DefaultWorkers();

/// Index of the largest element; ties go to the lowest index. -inf entries
/// lose to anything finite; NaN is never selected unless all are NaN.
template <typename Derived>
Eigen::Index ArgMax(const Eigen::DenseBase<Derived> &v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best) || (v(best) != v(best) && v(i) == v(i))) best = i;
  }
  return best;
}

std::string ReadTextFile(const std::filesystem::path &path);
void WriteTextFile(const std::filesystem::path &path, std::string_view text);

}  // namespace pae

#endif  // PAE_UTIL_H_
