// Copyright 2026 The ordmil Authors.
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

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>

namespace ordmil {

/// Runs body(i) for i in [0, n) on up to MaxThreads() workers. Results must
/// be written to per-index slots; the first exception is rethrown.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace ordmil
