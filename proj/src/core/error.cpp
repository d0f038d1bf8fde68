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

#include "error.hpp"

namespace pfermion {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::PoleCollision: return "pole-collision";
        case ErrorCode::QuadratureNonconvergence: return "quadrature-nonconvergence";
        case ErrorCode::OptimizerNonconvergence: return "optimizer-nonconvergence";
        case ErrorCode::DegenerateGrid: return "degenerate-grid";
        case ErrorCode::RegulatorTooSmall: return "regulator-too-small";
        case ErrorCode::IndexOutOfRange: return "index-out-of-range";
        case ErrorCode::DimensionMismatch: return "dimension-mismatch";
        case ErrorCode::LayoutMismatch: return "layout-mismatch";
        case ErrorCode::StepSizeUnderflow: return "step-size-underflow";
        case ErrorCode::DegenerateNullSpace: return "degenerate-null-space";
        case ErrorCode::NoConvergence: return "no-convergence";
        case ErrorCode::ParityViolation: return "parity-violation";
        case ErrorCode::InsufficientTimeWindow: return "insufficient-time-window";
        case ErrorCode::Parse: return "parse";
        case ErrorCode::Io: return "io";
    }
    return "unknown";
}

}  // namespace pfermion
