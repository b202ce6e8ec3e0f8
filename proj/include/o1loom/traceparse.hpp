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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace o1loom::trace {

// Tag tokens of the output grammar. The countdown tag is configurable
// because the model-facing prompt exposes it; the rest are fixed by the
// reflection and synthesis prompts.
struct TraceTags {
    std::string count = "count";
    std::string reflection = "reflection";
    std::string reward = "reward";
    std::string answer = "answer";
};

struct Step {
    int budget = 0;
    std::string content;
    std::optional<std::string> reflection;
    std::optional<double> reward; // in [0, 1]; present only with a reflection

    bool operator==(const Step&) const = default;
};

struct ReasoningTrace {
    int starting_budget = 0; // the first observed countdown value
    std::vector<Step> steps; // budgets strictly decreasing
    std::optional<std::string> answer;

    bool operator==(const ReasoningTrace&) const = default;
};

enum class ParseMode { strict, lenient };

// Steps are the maximal text runs between consecutive countdown tags;
// reflection, reward, and answer spans are cut out of step content. The
// answer is the inner text of the last answer-tag pair. Strict mode demands
// exact-decrement budgets and well-formed tag pairs; lenient mode accepts
// any strictly decreasing budgets and reads an unterminated final tag to end
// of text.
ReasoningTrace parse_trace(std::string_view text, ParseMode mode, const TraceTags& tags = {});

// Inner text of the last answer-tag pair, trimmed. Without one, falls back
// to the trailing text after the last recognized tag (the whole text when
// untagged). Throws Error(answer_empty) when the result trims to nothing.
std::string extract_answer(std::string_view text, const TraceTags& tags = {});

// Parses the last reward-tag pair. Throws reward_missing / reward_range.
double extract_reward(std::string_view text, const TraceTags& tags = {});

// Emits the canonical grammar form. parse_trace(serialize_trace(t), strict)
// reproduces t for every valid strict trace. Contents must not embed any
// grammar tag token (callers escape adversarial text first).
std::string serialize_trace(const ReasoningTrace& trace, const TraceTags& tags = {});

void validate(const ReasoningTrace& trace, const TraceTags& tags = {});

} // namespace o1loom::trace
