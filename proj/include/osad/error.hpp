// Copyright 2026 The OSAD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace osad {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: dimension mismatch, non-finite values, out-of-range parameters.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A design or identification problem that has no solution for the given data
/// (rank constraint violated, unsolvable eigenpair assignment, rank too high).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed file content. Carries the 1-based line number.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A metric that has no value for its input, e.g. precision with no predictions.
class UndefinedMetric : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

} // namespace detail
} // namespace osad
