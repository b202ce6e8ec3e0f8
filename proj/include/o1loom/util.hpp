// Copyright 2026-present the o1loom authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace o1loom::util {

// SHA-256 as a 64-char lowercase hex string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file_hex(const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// Write-to-temp then rename, so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Joins the nonempty segments with the separator; empty segments vanish
// without leaving a doubled separator behind.
std::string join_nonempty(const std::vector<std::string>& segments, std::string_view separator);

std::vector<std::string> split(std::string_view s, char delim);

} // namespace o1loom::util
