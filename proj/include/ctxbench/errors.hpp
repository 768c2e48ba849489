// Copyright 2026 The ctxbench Authors.
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

#ifndef CTXBENCH_ERRORS_HPP_
#define CTXBENCH_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ctxbench {

// Base for all toolkit failures. CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed on-disk input (names the offending field and line).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A precondition of an in-process API was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Upstream artifact changed since the manifest recorded it. Exit code 2.
class StalenessError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxbench

#endif  // CTXBENCH_ERRORS_HPP_
