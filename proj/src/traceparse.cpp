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

#include "o1loom/traceparse.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>

#include "o1loom/error.hpp"
#include "o1loom/util.hpp"

namespace o1loom::trace {

namespace {

struct TagSpan {
    std::size_t begin = 0;       // offset of '<'
    std::size_t end = 0;         // one past '>' of the close tag (or text end)
    std::size_t inner_begin = 0;
    std::size_t inner_end = 0;
    bool closed = true;
};

// Finds <tag> ... </tag> pairs of one tag name, left to right. An
// unterminated final open tag yields a span with closed = false that runs to
// the end of the text.
std::vector<TagSpan> find_tag_spans(std::string_view text, const std::string& tag) {
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    std::vector<TagSpan> spans;
    std::size_t pos = 0;
    while (true) {
        const auto at = text.find(open, pos);
        if (at == std::string_view::npos) break;
        TagSpan span;
        span.begin = at;
        span.inner_begin = at + open.size();
        const auto close_at = text.find(close, span.inner_begin);
        if (close_at == std::string_view::npos) {
            span.inner_end = text.size();
            span.end = text.size();
            span.closed = false;
            spans.push_back(span);
            break;
        }
        span.inner_end = close_at;
        span.end = close_at + close.size();
        spans.push_back(span);
        pos = span.end;
    }
    return spans;
}

std::optional<long> parse_nonnegative_int(std::string_view s) {
    const std::string t = util::trim(s);
    if (t.empty()) return std::nullopt;
    long value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || value < 0) return std::nullopt;
    return value;
}

std::optional<double> parse_double(std::string_view s) {
    const std::string t = util::trim(s);
    if (t.empty()) return std::nullopt;
    char* end = nullptr;
    const double value = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) return std::nullopt;
    return value;
}

std::string format_reward(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return ec == std::errc() ? std::string(buf, ptr) : std::to_string(value);
}

// Removes the given spans from a text region and trims the remainder.
std::string cut_spans(std::string_view text, std::size_t begin, std::size_t end,
                      const std::vector<TagSpan>& cuts) {
    std::string out;
    std::size_t at = begin;
    for (const auto& c : cuts) {
        if (c.end <= begin || c.begin >= end) continue;
        const auto cut_begin = std::max(c.begin, begin);
        if (cut_begin > at) out += text.substr(at, cut_begin - at);
        at = std::min(std::max(c.end, at), end);
    }
    if (at < end) out += text.substr(at, end - at);
    return util::trim(out);
}

} // namespace

ReasoningTrace parse_trace(std::string_view text, ParseMode mode, const TraceTags& tags) {
    const bool strict = mode == ParseMode::strict;

    const auto counts = find_tag_spans(text, tags.count);
    if (counts.empty()) {
        throw ParseError(ParseKind::no_steps, 0, "no <" + tags.count + "> tag found");
    }
    if (strict && !counts.back().closed) {
        throw ParseError(ParseKind::unclosed_tag, counts.back().begin,
                         "unclosed <" + tags.count + "> tag");
    }

    const auto answers = find_tag_spans(text, tags.answer);
    const auto reflections = find_tag_spans(text, tags.reflection);
    const auto rewards = find_tag_spans(text, tags.reward);
    if (strict) {
        for (const auto* group : {&answers, &reflections, &rewards}) {
            for (const auto& s : *group) {
                if (!s.closed) {
                    throw ParseError(ParseKind::unclosed_tag, s.begin, "unclosed tag");
                }
            }
        }
    }

    ReasoningTrace result;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto& count = counts[i];
        const auto budget = parse_nonnegative_int(
            text.substr(count.inner_begin, count.inner_end - count.inner_begin));
        if (!budget) {
            throw ParseError(ParseKind::bad_budget, count.begin, "non-numeric budget");
        }
        Step step;
        step.budget = static_cast<int>(*budget);
        if (i == 0) {
            result.starting_budget = step.budget;
        } else {
            const int prev = result.steps.back().budget;
            if (step.budget >= prev) {
                throw ParseError(ParseKind::budget_order, count.begin,
                                 "budgets must strictly decrease");
            }
            if (strict && prev - step.budget != 1) {
                throw ParseError(ParseKind::budget_order, count.begin,
                                 "strict mode requires exact-decrement budgets");
            }
        }

        const std::size_t region_begin = count.end;
        const std::size_t region_end = i + 1 < counts.size() ? counts[i + 1].begin : text.size();

        std::vector<TagSpan> cuts;
        const TagSpan* last_reflection = nullptr;
        const TagSpan* last_reward = nullptr;
        for (const auto& s : reflections) {
            if (s.begin >= region_begin && s.begin < region_end) {
                cuts.push_back(s);
                last_reflection = &s;
            }
        }
        for (const auto& s : rewards) {
            if (s.begin >= region_begin && s.begin < region_end) {
                cuts.push_back(s);
                last_reward = &s;
            }
        }
        for (const auto& s : answers) {
            if (s.begin >= region_begin && s.begin < region_end) cuts.push_back(s);
        }
        std::sort(cuts.begin(), cuts.end(),
                  [](const TagSpan& a, const TagSpan& b) { return a.begin < b.begin; });

        if (last_reflection) {
            step.reflection = util::trim(text.substr(
                last_reflection->inner_begin,
                last_reflection->inner_end - last_reflection->inner_begin));
        }
        if (last_reward) {
            const auto value = parse_double(text.substr(
                last_reward->inner_begin, last_reward->inner_end - last_reward->inner_begin));
            if (!value) {
                if (strict) {
                    throw ParseError(ParseKind::reward_range, last_reward->begin,
                                     "malformed reward value");
                }
            } else if (*value < 0.0 || *value > 1.0) {
                throw ParseError(ParseKind::reward_range, last_reward->begin,
                                 "reward outside [0, 1]");
            } else {
                step.reward = *value;
                if (!step.reflection) {
                    if (strict) {
                        throw ParseError(ParseKind::orphan_reward, last_reward->begin,
                                         "reward without a reflection in the same step");
                    }
                    step.reflection = std::string();
                }
            }
        }
        step.content = cut_spans(text, region_begin, region_end, cuts);
        result.steps.push_back(std::move(step));
    }

    if (!answers.empty()) {
        const auto& last = answers.back();
        const std::string inner =
            util::trim(text.substr(last.inner_begin, last.inner_end - last.inner_begin));
        if (inner.empty()) {
            if (strict) {
                throw ParseError(ParseKind::answer_empty, last.begin, "empty answer");
            }
        } else {
            result.answer = inner;
        }
    }
    return result;
}

std::string extract_answer(std::string_view text, const TraceTags& tags) {
    const auto answers = find_tag_spans(text, tags.answer);
    if (!answers.empty()) {
        const auto& last = answers.back();
        const std::string inner =
            util::trim(text.substr(last.inner_begin, last.inner_end - last.inner_begin));
        if (inner.empty()) {
            throw Error(ErrorKind::answer_empty, "answer is empty after trimming");
        }
        return inner;
    }
    // No answer pair: take the trailing text after the last recognized tag.
    std::size_t tail = 0;
    for (const auto& tag : {tags.count, tags.reflection, tags.reward, tags.answer}) {
        for (const auto& token : {"<" + tag + ">", "</" + tag + ">"}) {
            const auto at = text.rfind(token);
            if (at != std::string_view::npos) {
                tail = std::max(tail, at + token.size());
            }
        }
    }
    const std::string result = util::trim(text.substr(tail));
    if (result.empty()) {
        throw Error(ErrorKind::answer_empty, "answer is empty after trimming");
    }
    return result;
}

double extract_reward(std::string_view text, const TraceTags& tags) {
    const auto rewards = find_tag_spans(text, tags.reward);
    if (rewards.empty() || !rewards.back().closed) {
        throw Error(ErrorKind::reward_missing, "no reward tag pair found");
    }
    const auto& last = rewards.back();
    const auto value =
        parse_double(text.substr(last.inner_begin, last.inner_end - last.inner_begin));
    if (!value) {
        throw Error(ErrorKind::reward_range, "malformed reward value");
    }
    if (*value < 0.0 || *value > 1.0) {
        throw Error(ErrorKind::reward_range, "reward outside [0, 1]");
    }
    return *value;
}

void validate(const ReasoningTrace& trace, const TraceTags& tags) {
    if (trace.steps.empty()) {
        throw Error(ErrorKind::validation, "steps: empty list");
    }
    if (trace.steps.front().budget != trace.starting_budget) {
        throw Error(ErrorKind::validation, "starting_budget: does not match the first step");
    }
    const std::vector<std::string> tokens = {
        "<" + tags.count + ">",      "</" + tags.count + ">",
        "<" + tags.reflection + ">", "</" + tags.reflection + ">",
        "<" + tags.reward + ">",     "</" + tags.reward + ">",
        "<" + tags.answer + ">",     "</" + tags.answer + ">",
    };
    auto check_text = [&](const std::string& field, const std::string& value) {
        for (const auto& token : tokens) {
            if (value.find(token) != std::string::npos) {
                throw Error(ErrorKind::validation, field + ": embeds grammar tag " + token);
            }
        }
        if (value != util::trim(value)) {
            throw Error(ErrorKind::validation, field + ": not whitespace-trimmed");
        }
    };
    int prev = -1;
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const auto& step = trace.steps[i];
        if (step.budget < 0) {
            throw Error(ErrorKind::validation, "budget: negative");
        }
        if (i > 0 && step.budget >= prev) {
            throw Error(ErrorKind::validation, "budget: not strictly decreasing");
        }
        prev = step.budget;
        if (step.reward) {
            if (*step.reward < 0.0 || *step.reward > 1.0) {
                throw Error(ErrorKind::reward_range, "reward outside [0, 1]");
            }
            if (!step.reflection) {
                throw Error(ErrorKind::validation, "reward: present without a reflection");
            }
        }
        check_text("content", step.content);
        if (step.reflection) check_text("reflection", *step.reflection);
    }
    if (trace.answer) {
        if (util::trim(*trace.answer).empty()) {
            throw Error(ErrorKind::answer_empty, "answer: empty");
        }
        check_text("answer", *trace.answer);
    }
}

std::string serialize_trace(const ReasoningTrace& trace, const TraceTags& tags) {
    validate(trace, tags);
    std::string out;
    bool first = true;
    for (const auto& step : trace.steps) {
        if (!first) out += "\n";
        first = false;
        out += "<" + tags.count + "> " + std::to_string(step.budget) + " </" + tags.count + ">\n";
        if (!step.content.empty()) {
            out += step.content + "\n";
        }
        if (step.reflection) {
            out += "<" + tags.reflection + "> " + *step.reflection + " </" + tags.reflection +
                   ">\n";
        }
        if (step.reward) {
            out += "<" + tags.reward + "> " + format_reward(*step.reward) + " </" + tags.reward +
                   ">\n";
        }
    }
    if (trace.answer) {
        out += "\n<" + tags.answer + "> " + *trace.answer + " </" + tags.answer + ">\n";
    }
    return out;
}

} // namespace o1loom::trace
