/*
 * Copyright 2026 The riemce Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef RIEMCE_ERRORS_H_
#define RIEMCE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace riemce {

// Base class for all library errors. Callers that only care about failure
// can catch this; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension mismatch between an input and the object consuming it.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameters, impossible configurations, or bad CLI input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values encountered during evaluation or optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A metric could not be factorized even after the maximal jitter.
class SingularMetricError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Malformed input files: missing columns, bad checkpoint headers.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// An operation was invoked in the wrong order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace riemce

#endif  // RIEMCE_ERRORS_H_
