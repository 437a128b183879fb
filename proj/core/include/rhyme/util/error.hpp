// Copyright 2026 The Rhyme Authors
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

namespace rhyme {

/// Base of every error thrown by the library. The command-line tool maps
/// the subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unknown configuration, invalid parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that violates a documented precondition (NaN reward, empty
/// group list, missing epoch, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// An ingest for an epoch that is not newer than what the store already has.
class StaleEpochError : public Error {
 public:
  using Error::Error;
};

/// Stepping a response that has already produced all of its tokens.
class CompletedResponseError : public Error {
 public:
  using Error::Error;
};

/// No worker allocation satisfies the planner's constraints.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// File-system failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rhyme
