/*
 * Copyright 2026 The histpolicy Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef HISTPOLICY_PARALLEL_H_
#define HISTPOLICY_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace histpolicy {

inline constexpr const char* kThreadsEnv = "HISTPOLICY_THREADS";

// Worker count from HISTPOLICY_THREADS, else the hardware concurrency.
std::size_t default_thread_count();

// Runs task(i) for i in [0, n) on up to `threads` workers (0 = default).
// Each index runs exactly once; the first exception is rethrown after all
// workers finish.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& task);

}  // namespace histpolicy

#endif  // HISTPOLICY_PARALLEL_H_
