// Copyright 2026 The curvlens Authors
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

namespace curvlens {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

/// Dense oracle asked to handle a matrix above its configured size limit.
class OracleLimitError : public Error {
 public:
  using Error::Error;
};

class UnsupportedLoss : public Error {
 public:
  using Error::Error;
};

/// The operator handed to an eigensolver failed the symmetry probe.
class OperatorError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver ran out of budget. Carries the smallest residual seen.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

/// Power iteration collapsed to the zero vector.
class BreakdownError : public Error {
 public:
  using Error::Error;
};

/// Malformed user input: loss specs, checkpoints, datasets, configs.
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& what, std::string path)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace curvlens
