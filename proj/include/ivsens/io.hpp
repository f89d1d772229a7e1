// Copyright 2026 The ivsens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "ivsens/core.hpp"

namespace ivsens::io {

// Dataset CSV: header `x1,...,xp,z,d,s,y`; z, d, s in {0, 1}; y empty (or
// `NA`) exactly when s = 0. UTF-8, LF line endings, '.' decimal point.

/// Throws ParseError with the 1-based file line and the column name.
Dataset parse_dataset_csv(std::string_view text);
std::string format_dataset_csv(const Dataset& data);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// 64-bit FNV-1a content hash as 16 lowercase hex digits.
std::string content_digest(std::string_view bytes);

}  // namespace ivsens::io
