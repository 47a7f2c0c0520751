/*
 * Copyright 2026 The histpolicy Authors.
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

#ifndef HISTPOLICY_ERRORS_H_
#define HISTPOLICY_ERRORS_H_

#include <stdexcept>
#include <string>

namespace histpolicy {

// Invalid configuration: bad fractions, empty state specs, unknown names.
// Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Anything wrong with the data itself. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input record. `line` is 1-based, 0 when unknown.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Records that parse but violate the cohort schema or episode invariants.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// Model fitting could not proceed (e.g. a single class in the training data).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loss became non-finite during iterative training.
class DivergenceError : public FitError {
 public:
  using FitError::FitError;
};

// The model kind cannot handle the requested task (risk scores with K > 2).
class UnsupportedModelError : public FitError {
 public:
  using FitError::FitError;
};

// Caller violated a model contract, e.g. mismatched feature names.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Metric is undefined for the given input (e.g. AUROC with one class).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace histpolicy

#endif  // HISTPOLICY_ERRORS_H_
