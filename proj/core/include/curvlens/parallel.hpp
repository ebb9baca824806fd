// Copyright 2026 The curvlens Authors
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

#include <cstddef>
#include <functional>

namespace curvlens {

/// Worker count for index-parallel loops. `threads == 0` means
/// std::thread::hardware_concurrency().
struct Exec {
  unsigned threads = 0;
  unsigned resolved() const;
};

/// Runs body(i) for every i in [0, count) across `exec` workers. Indices are
/// handed out in contiguous chunks; callers write results into slot i and
/// reduce afterwards in index order, so output never depends on the worker
/// count. The first exception thrown by any body is rethrown here.
void parallel_for(std::size_t count, const Exec& exec,
                  const std::function<void(std::size_t)>& body);

}  // namespace curvlens
