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

#ifndef HISTPOLICY_CSV_H_
#define HISTPOLICY_CSV_H_

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace histpolicy::csv {

// Splits one RFC-4180 style record. Quoted fields may contain commas and
// doubled quotes; embedded newlines are not supported.
std::vector<std::string> split_line(std::string_view line);

std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

// Fixed-point formatting used by every report table ("%.6f" by default).
std::string fixed(double value, int precision = 6);

// Reads all records, skipping blank lines. Strips a trailing '\r'.
std::vector<std::vector<std::string>> read_all(std::istream& in);

}  // namespace histpolicy::csv

#endif  // HISTPOLICY_CSV_H_
