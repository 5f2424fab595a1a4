// src/nnet.cc

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

#include "pae/nnet.h"

#include <cstdint>
#include <cstring>

namespace pae {

namespace {

constexpr char kMagic[4] = {'P', 'A', 'E', 'M'};
constexpr std::uint32_t kVersion = 1;

void PutU32(std::string *out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out->append(buf, 4);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t U32() {
    std::uint32_t v;
    Take(&v, 4);
    return v;
  }
  void Floats(float *dst, std::size_t n) { Take(dst, 4 * n); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void Take(void *dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      Fail(ErrorCode::kParseError, "truncated network checkpoint");
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<int> OneHotToIndices(const Eigen::MatrixXf &one_hot) {
  std::vector<int> out;
  for (Eigen::Index r = 0; r < one_hot.rows(); ++r) {
    int hot = -1;
    for (Eigen::Index c = 0; c < one_hot.cols(); ++c) {
      const float v = one_hot(r, c);
      if (v == 1.0f && hot < 0) {
        hot = static_cast<int>(c);
      } else if (v != 0.0f) {
        hot = -2;
        break;
      }
    }
    if (hot < 0) {
      Fail(ErrorCode::kInvalidArgument,
           "row " + std::to_string(r) + " is not a valid one-hot target");
    }
    out.push_back(hot);
  }
  return out;
}

std::string SerializeMlp(const Mlp<float> &model) {
  std::string out(kMagic, 4);
  PutU32(&out, kVersion);
  PutU32(&out, static_cast<std::uint32_t>(model.layers().size()));
  PutU32(&out, static_cast<std::uint32_t>(model.input_dim()));
  for (const auto &l : model.layers()) {
    PutU32(&out, static_cast<std::uint32_t>(l.out_dim()));
    PutU32(&out, static_cast<std::uint32_t>(l.activation));
  }
  for (const auto &l : model.layers()) {
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
        w = l.weights;
    out.append(reinterpret_cast<const char *>(w.data()), 4 * w.size());
    out.append(reinterpret_cast<const char *>(l.bias.data()), 4 * l.bias.size());
  }
  return out;
}

Mlp<float> ParseMlp(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    Fail(ErrorCode::kMagicMismatch, "not a network checkpoint");
  }
  Reader in(bytes.substr(4));
  if (in.U32() != kVersion) {
    Fail(ErrorCode::kParseError, "unsupported checkpoint version");
  }
  const std::uint32_t num_layers = in.U32();
  std::uint32_t in_dim = in.U32();
  std::vector<DenseLayer<float>> layers(num_layers);
  for (auto &l : layers) {
    const std::uint32_t out_dim = in.U32();
    const std::uint32_t act = in.U32();
    if (act > static_cast<std::uint32_t>(Activation::kSoftmax)) {
      Fail(ErrorCode::kParseError, "unknown activation tag");
    }
    l.weights.resize(out_dim, in_dim);
    l.bias.resize(out_dim);
    l.activation = static_cast<Activation>(act);
    in_dim = out_dim;
  }
  for (auto &l : layers) {
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(
        l.weights.rows(), l.weights.cols());
    in.Floats(w.data(), w.size());
    l.weights = w;
    in.Floats(l.bias.data(), l.bias.size());
  }
  if (!in.done()) Fail(ErrorCode::kParseError, "trailing bytes in checkpoint");
  return Mlp<float>(std::move(layers));
}

void SaveMlp(const Mlp<float> &model, const std::filesystem::path &path) {
  WriteTextFile(path, SerializeMlp(model));
}

Mlp<float> LoadMlp(const std::filesystem::path &path) {
  return ParseMlp(ReadTextFile(path));
}

}  // namespace pae
