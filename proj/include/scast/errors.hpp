// Copyright 2026 The scast-lab Authors.
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

namespace scast {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : Error {
  using Error::Error;
};

// SCST decoding failures. Each cause has its own type so callers can tell a
// foreign file from a cut-off one.
struct ValidationError : Error {
  using Error::Error;
};
struct FormatError : ValidationError {
  using ValidationError::ValidationError;
};
struct DTypeError : ValidationError {
  using ValidationError::ValidationError;
};
struct TruncatedError : ValidationError {
  using ValidationError::ValidationError;
};

struct ConfigError : Error {
  ConfigError(std::string field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct ShapeError : Error {
  using Error::Error;
};
struct LabelError : Error {
  using Error::Error;
};
struct LossError : Error {
  using Error::Error;
};
struct TrainingError : Error {
  using Error::Error;
};
struct GenerationError : Error {
  using Error::Error;
};
struct DiscoveryError : Error {
  using Error::Error;
};
struct StateError : Error {
  using Error::Error;
};

}  // namespace scast
