// Copyright (c) 2026, The idlike Authors. All rights reserved.
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

#ifndef IDLIKE_IDLIKE_HPP_
#define IDLIKE_IDLIKE_HPP_

// Umbrella header: every public component of the library.

#include "idlike/errors.hpp"
#include "idlike/embedcore.hpp"
#include "idlike/image.hpp"
#include "idlike/encoder.hpp"
#include "idlike/miner.hpp"
#include "idlike/promptlearn.hpp"
#include "idlike/detect.hpp"
#include "idlike/metrics.hpp"
#include "idlike/binary_io.hpp"
#include "idlike/cache.hpp"
#include "idlike/checkpoint.hpp"
#include "idlike/config.hpp"
#include "idlike/dataset.hpp"
#include "idlike/synth.hpp"
#include "idlike/report.hpp"
#include "idlike/adapter.hpp"
#include "idlike/experiment.hpp"

#endif  // IDLIKE_IDLIKE_HPP_
