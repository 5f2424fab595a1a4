// src/util.cc

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

#include "pae/util.h"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "pae/error.h"

namespace pae {

namespace {

std::string ToHex(const unsigned char *data, unsigned int len) {
  static const char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0xf]);
  }
  return out;
}

}  // namespace

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    Fail(ErrorCode::kIoError, "SHA-256 computation failed");
  }
  return ToHex(digest, len);
}

std::string Sha256File(const std::filesystem::path &path) {
  return Sha256Hex(ReadTextFile(path));
}

std::uint64_t DeriveSeed(std::uint64_t run_seed, std::string_view module,
                         std::uint64_t index) {
  std::string key = std::to_string(run_seed);
  key.push_back('/');
  key.append(module);
  key.push_back('/');
  key.append(std::to_string(index));
  const std::string hex = Sha256Hex(key);
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

int DefaultWorkers() {
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void ParallelFor(std::size_t n, int workers,
                 const std::function<void(std::size_t)> &fn) {
  const std::size_t nthreads =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> threads;
    threads.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
      threads.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

std::string ReadTextFile(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::filesystem::path &path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) Fail(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace pae
