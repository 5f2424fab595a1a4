// pae/error.h

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

#ifndef PAE_ERROR_H_
#define PAE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace pae {

/// Machine-readable failure categories. The CLI reports these verbatim.
enum class ErrorCode {
  kIoError,
  kParseError,
  kInvalidArgument,
  // dataio
  kMagicMismatch,
  kDimensionMismatch,
  kNonFiniteValue,
  kDuplicateUtteranceId,
  kCountMismatch,
  kUnknownValueName,
  kMissingAttribute,
  kNoAttributeGroundTruth,
  kUnknownUtterance,
  kPartitionConflict,
  // nnet
  kNonFiniteActivation,
  kEmptyDataset,
  kNonFiniteLoss,
  // attribank
  kNoSpoofedData,
  kAttributeWithSingleValueInTrain,
  kDegenerateScorePool,
  // backends
  kEmptyClass,
  kSchemaMismatch,
  kSingleClass,
  kEmptyData,
  kUnknownClass,
  // metrics
  kEmptyPool,
  kEmptyClassRow,
  // explain
  kTooManyFeatures,
  kEmptyBackground,
  kEmptyReportSet,
  // protogen
  kMissingSpeaker,
  kUnknownAttack,
  // cli
  kReplayMismatch,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string &message) {
  throw Error(code, message);
}

}  // namespace pae

#endif  // PAE_ERROR_H_
