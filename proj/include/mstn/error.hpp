// Copyright 2026 The MSTN Authors. All Rights Reserved.
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

namespace mstn {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition of an operation (programming error on the caller side).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Incompatible tensor shapes.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Invalid hyperparameter or command-line configuration. Exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data. Exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered during training. Exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace mstn
