/*
 * Copyright 2026 The Melody Authors.
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

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace melody {

// Base of every error the library throws. The CLI maps subclasses onto
// exit codes (input → 2, config → 3, anything else → 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable input data.
class InputError : public Error {
 public:
  using Error::Error;
};

class EmptyMatrix : public InputError {
 public:
  EmptyMatrix() : InputError("explanation matrix has no nonzero entries") {}
};

class UnmappedFeature : public InputError {
 public:
  explicit UnmappedFeature(std::vector<std::string> offenders)
      : InputError(describe(offenders)), offenders_(std::move(offenders)) {}

  const std::vector<std::string>& offenders() const { return offenders_; }

 private:
  static std::string describe(const std::vector<std::string>& names) {
    std::string msg = "features without a topic:";
    for (const auto& n : names) msg += " " + n;
    return msg;
  }
  std::vector<std::string> offenders_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  explicit NotFound(const std::string& what, std::vector<std::string> offenders = {})
      : Error(what), offenders_(std::move(offenders)) {}

  const std::vector<std::string>& offenders() const { return offenders_; }

 private:
  std::vector<std::string> offenders_;
};

class ZeroMass : public Error {
 public:
  using Error::Error;
};

class InfiniteDivergence : public Error {
 public:
  InfiniteDivergence()
      : Error("p(x) > 0 where q(x) = 0; divergence is infinite") {}
};

class EmptyPool : public Error {
 public:
  EmptyPool() : Error("random_pop on an empty cluster list") {}
};

class TooLarge : public Error {
 public:
  using Error::Error;
};

class ZeroDegree : public Error {
 public:
  using Error::Error;
};

}  // namespace melody
