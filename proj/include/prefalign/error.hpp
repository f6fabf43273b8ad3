// Copyright 2026 The Authors.
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

namespace prefalign {

// Base class for every error raised by the library. Callers that only need
// to report failures can catch this; the subclasses let the CLI and the HTTP
// layer map failures to exit codes and status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// An alignment metric was asked to evaluate without the context it needs.
class ContextError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

// A reward is constant over the EPIC coverage sample.
class DegenerateReward : public Error {
 public:
  using Error::Error;
};

// The candidate pool has no unasked query left.
class Exhausted : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

// State-mutating request that does not fit the session's current state.
class Conflict : public Error {
 public:
  using Error::Error;
};

}  // namespace prefalign
