// Copyright 2026 The Colearn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace colearn {

enum class ErrorCode {
  // feature bank / model file I/O
  BadMagic,
  UnsupportedVersion,
  Truncated,
  TrailingData,
  NonFiniteValue,
  LabelOutOfRange,
  DuplicateClassName,
  EmptyBank,
  MalformedFile,
  Io,
  // numerics
  DimensionMismatch,
  InvalidArgument,
  DegenerateLogits,
  UnresolvedTemperature,
  MissingTemplates,
  EmptyBatch,
  NumericalBlowup,
  // engine / selection
  EmptyPseudolabels,
  SampleCountMismatch,
  DegenerateProxyLabels,
  MissingShotClass,
  NonConvergence,
  ImpossibleSplit,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a stable, machine-readable code. Every failure the
/// library reports goes through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace colearn
