// src/error.cc

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

#include "pae/error.h"

namespace pae {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMagicMismatch: return "MagicMismatch";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kDuplicateUtteranceId: return "DuplicateUtteranceId";
    case ErrorCode::kCountMismatch: return "CountMismatch";
    case ErrorCode::kUnknownValueName: return "UnknownValueName";
    case ErrorCode::kMissingAttribute: return "MissingAttribute";
    case ErrorCode::kNoAttributeGroundTruth: return "NoAttributeGroundTruth";
    case ErrorCode::kUnknownUtterance: return "UnknownUtterance";
    case ErrorCode::kPartitionConflict: return "PartitionConflict";
    case ErrorCode::kNonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kNoSpoofedData: return "NoSpoofedData";
    case ErrorCode::kAttributeWithSingleValueInTrain:
      return "AttributeWithSingleValueInTrain";
    case ErrorCode::kDegenerateScorePool: return "DegenerateScorePool";
    case ErrorCode::kEmptyClass: return "EmptyClass";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kEmptyData: return "EmptyData";
    case ErrorCode::kUnknownClass: return "UnknownClass";
    case ErrorCode::kEmptyPool: return "EmptyPool";
    case ErrorCode::kEmptyClassRow: return "EmptyClassRow";
    case ErrorCode::kTooManyFeatures: return "TooManyFeatures";
    case ErrorCode::kEmptyBackground: return "EmptyBackground";
    case ErrorCode::kEmptyReportSet: return "EmptyReportSet";
    case ErrorCode::kMissingSpeaker: return "MissingSpeaker";
    case ErrorCode::kUnknownAttack: return "UnknownAttack";
    case ErrorCode::kReplayMismatch: return "ReplayMismatch";
  }
  return "Unknown";
}

}  // namespace pae
