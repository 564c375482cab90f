// SPDX-License-Identifier: Apache-2.0
//
// pwrsim: passive Wi-Fi radar multitarget localization with
// beamforming-feedback fusion
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef pwr_errors_H
#define pwr_errors_H

#include <stdexcept>

namespace pwr {

// Numeric argument violates an operation's contract.
struct invalid_input : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Target lies on or behind the array plane (|angle| >= pi/2).
struct out_of_field : std::domain_error {
    using std::domain_error::domain_error;
};

// AoD/AoA rays are parallel or do not meet ahead of both arrays.
struct no_intersection : std::domain_error {
    using std::domain_error::domain_error;
};

// Random placement could not satisfy the geometric constraints.
struct infeasible_geometry : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or unsupported configuration value.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace pwr

#endif
