// Copyright 2025 The pfermion Authors
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

namespace pfermion {

enum class ErrorCode {
    InvalidArgument = 1,
    PoleCollision = 2,
    QuadratureNonconvergence = 3,
    OptimizerNonconvergence = 4,
    DegenerateGrid = 5,
    RegulatorTooSmall = 6,
    IndexOutOfRange = 7,
    DimensionMismatch = 8,
    LayoutMismatch = 9,
    StepSizeUnderflow = 10,
    DegenerateNullSpace = 11,
    NoConvergence = 12,
    ParityViolation = 13,
    InsufficientTimeWindow = 14,
    Parse = 15,
    Io = 16,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, double achieved = 0.0)
        : std::runtime_error(what), code_(code), achieved_(achieved) {}

    ErrorCode code() const noexcept { return code_; }
    // Achieved tolerance or residual for numerical failures.
    double achieved() const noexcept { return achieved_; }

private:
    ErrorCode code_;
    double achieved_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what, double achieved = 0.0) {
    throw Error(code, what, achieved);
}

}  // namespace pfermion
