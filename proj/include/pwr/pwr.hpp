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

#ifndef pwr_pwr_H
#define pwr_pwr_H

#include "pwr/assignment.hpp"
#include "pwr/bff.hpp"
#include "pwr/channel.hpp"
#include "pwr/errors.hpp"
#include "pwr/estimator.hpp"
#include "pwr/geometry.hpp"
#include "pwr/harness.hpp"
#include "pwr/localize.hpp"
#include "pwr/scenario.hpp"

#endif
