// Copyright 2026 The sllab Authors
// SPDX-License-Identifier: Apache-2.0
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

// Seeded synthetic Q&A generators with (near-)disjoint word vocabularies.
// Each domain draws from a small fixed fact table and a handful of question
// templates, so answers are learnable and domains interfere.

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sllab/stream.hpp"

namespace sllab {

// "medical", "genetic", "legal" in generation order.
const std::vector<std::string>& synthetic_domains();

// Throws ConfigError for an unknown domain name.
std::vector<QARecord> generate_synthetic(std::string_view domain, std::size_t count,
                                         std::uint64_t seed);

// Lower-cased alphanumeric word types appearing in questions and answers.
std::set<std::string> word_types(const std::vector<QARecord>& records);

}  // namespace sllab
