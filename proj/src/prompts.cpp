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

#include "o1loom/prompts.hpp"

#include <algorithm>
#include <optional>

#include "o1loom/error.hpp"
#include "o1loom/util.hpp"

namespace o1loom::prompts {

std::string to_string(TemplateName name) {
    switch (name) {
    case TemplateName::reasoning_high: return "reasoning_high";
    case TemplateName::reasoning_general: return "reasoning_general";
    case TemplateName::reflection_high: return "reflection_high";
    case TemplateName::reflection_general: return "reflection_general";
    case TemplateName::synthesis_high: return "synthesis_high";
    case TemplateName::synthesis_general: return "synthesis_general";
    case TemplateName::combined_instantial: return "combined_instantial";
    case TemplateName::screening: return "screening";
    }
    return "reasoning_high";
}

std::optional<TemplateName> template_name_from_string(const std::string& s) {
    static const std::map<std::string, TemplateName> names = {
        {"reasoning_high", TemplateName::reasoning_high},
        {"reasoning_general", TemplateName::reasoning_general},
        {"reflection_high", TemplateName::reflection_high},
        {"reflection_general", TemplateName::reflection_general},
        {"synthesis_high", TemplateName::synthesis_high},
        {"synthesis_general", TemplateName::synthesis_general},
        {"combined_instantial", TemplateName::combined_instantial},
        {"screening", TemplateName::screening},
    };
    auto it = names.find(s);
    if (it == names.end()) return std::nullopt;
    return it->second;
}

const std::vector<std::string>& allowed_placeholders(TemplateName name) {
    static const std::vector<std::string> reasoning_high = {"task_description",
                                                            "ambiguous_instruction", "budget"};
    static const std::vector<std::string> reasoning_general = {"experience",
                                                               "ambiguous_instruction"};
    static const std::vector<std::string> none = {};
    static const std::vector<std::string> reflection_general = {
        "ambiguous_instruction", "clear_instruction", "experience"};
    static const std::vector<std::string> synthesis_general = {"clear_instruction",
                                                               "ambiguous_instruction"};
    static const std::vector<std::string> screening = {"ambiguous_instruction"};
    switch (name) {
    case TemplateName::reasoning_high: return reasoning_high;
    case TemplateName::reasoning_general: return reasoning_general;
    case TemplateName::reflection_high: return none;
    case TemplateName::reflection_general: return reflection_general;
    case TemplateName::synthesis_high: return none;
    case TemplateName::synthesis_general: return synthesis_general;
    case TemplateName::combined_instantial: return reasoning_high;
    case TemplateName::screening: return screening;
    }
    return none;
}

namespace {

// Walks the body, calling on_literal for plain runs and on_placeholder for
// each {name}. Doubled braces decode to literals.
template <typename LiteralFn, typename PlaceholderFn>
void scan_body(const std::string& body, LiteralFn&& on_literal, PlaceholderFn&& on_placeholder) {
    std::size_t i = 0;
    const std::size_t n = body.size();
    while (i < n) {
        const char c = body[i];
        if (c == '{') {
            if (i + 1 < n && body[i + 1] == '{') {
                on_literal('{');
                i += 2;
                continue;
            }
            const auto close = body.find('}', i + 1);
            if (close == std::string::npos) {
                throw Error(ErrorKind::validation, "unbalanced '{' in template body");
            }
            on_placeholder(body.substr(i + 1, close - i - 1));
            i = close + 1;
            continue;
        }
        if (c == '}') {
            if (i + 1 < n && body[i + 1] == '}') {
                on_literal('}');
                i += 2;
                continue;
            }
            throw Error(ErrorKind::validation, "unbalanced '}' in template body");
        }
        on_literal(c);
        ++i;
    }
}

bool is_allowed(TemplateName name, const std::string& placeholder) {
    const auto& allowed = allowed_placeholders(name);
    return std::find(allowed.begin(), allowed.end(), placeholder) != allowed.end();
}

} // namespace

void validate_template(const PromptTemplate& tmpl) {
    scan_body(
        tmpl.body, [](char) {},
        [&](const std::string& ph) {
            if (!is_allowed(tmpl.name, ph)) {
                throw Error(ErrorKind::validation, "unknown placeholder: " + ph);
            }
        });
}

std::string render(const PromptTemplate& tmpl, const Bindings& bindings) {
    std::string out;
    out.reserve(tmpl.body.size());
    scan_body(
        tmpl.body, [&](char c) { out.push_back(c); },
        [&](const std::string& ph) {
            if (!is_allowed(tmpl.name, ph)) {
                throw Error(ErrorKind::validation, "unknown placeholder: " + ph);
            }
            auto it = bindings.find(ph);
            if (it == bindings.end()) {
                throw Error(ErrorKind::validation, "unbound placeholder: " + ph);
            }
            out += it->second;
        });
    return out;
}

const PromptTemplate& TemplateSet::get(TemplateName name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw Error(ErrorKind::internal, "no template named " + prompts::to_string(name));
    }
    return it->second;
}

void TemplateSet::set(PromptTemplate tmpl) {
    validate_template(tmpl);
    templates_[tmpl.name] = std::move(tmpl);
}

namespace {

std::string reasoning_high_body(const std::string& tag) {
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    const std::string pair = open + " " + close;
    return "You are a helpful assistant in normal conversation.\n"
           "{task_description}\n"
           "Follow these instructions carefully:\n"
           "1. Read the given question carefully and reset counter between " + open + " and " +
           close + "\n"
           "2. Generate a detailed, logical step-by-step solution.\n"
           "3. Enclose each step of your solution within reasoning tags.\n"
           "4. You are allowed to use at most {budget} steps (starting budget), keep track of it "
           "by counting down within tags " + pair +
           ", STOP GENERATING MORE STEPS when hitting 0. You don't have to use all of them.\n"
           "\n"
           "Example format:\n"
           "\n" + open + " [starting budget] " + close + "\n"
           "[Content of step 1]\n"
           "\n" + open + " [remaining budget] " + close + "\n"
           "[Content of step 2]\n"
           "\n" + open + " [remaining budget] " + close + "\n"
           "[Content of step 3 or Content of some previous step]\n"
           "\n" + open + " [remaining budget] " + close + "\n"
           "...\n"
           "\n" + open + " [remaining budget] " + close + "\n"
           "[Content of final step]\n"
           "\n"
           "Description: {ambiguous_instruction}\n"
           "Provide a detailed, step-by-step solution to a given question.";
}

const char* reflection_high_body() {
    return "Follow these instructions carefully:\n"
           "5. Do a self-reflection when you are unsure about how to proceed; based on the "
           "self-reflection and reward, decide whether you need to return to the previous "
           "steps.\n"
           "6. Provide a critical, honest, and subjective self-evaluation of your reasoning "
           "process within <reflection> and </reflection> tags.\n"
           "7. Assign a quality score to your solution as a float between 0.0 (lowest quality) "
           "and 1.0 (highest quality), enclosed in <reward> and </reward> tags.\n"
           "8. If the image or question is not clear enough, you need to reflect and try to get "
           "answers from the unclear image or question.\n"
           "\n"
           "Example format:\n"
           "<reflection> [Evaluation of the solution] </reflection>\n"
           "<reward> [Float between 0.0 and 1.0] </reward>";
}

const char* synthesis_high_body() {
    return "After completing the solution steps, reorganize and synthesize the steps into the "
           "final answer within <answer> and </answer> tags. The final answer cannot be empty.";
}

const char* reasoning_general_body() {
    return "{experience} {ambiguous_instruction}";
}

const char* reflection_general_body() {
    return "According to the instruction you generated last time, the annotator has rewritten "
           "{ambiguous_instruction} as {clear_instruction}. Please correct or rewrite your "
           "instruction based on the image situation. The image and the result of the data "
           "annotator are only for your evaluation. Please do not include the specific case in "
           "the instructions. You need to generate the full instruction even if no change is "
           "needed.\n"
           "\n"
           "If the annotator cannot find it, please let the annotator guess the one with the "
           "highest probability.\n"
           "\n"
           "Make sure the annotator only responds to the rewritten phrase and does not include "
           "any other thing.\n"
           "\n"
           "Instruction:\n"
           "{experience}";
}

const char* synthesis_general_body() {
    return "Disambiguated question: {clear_instruction}\n"
           "Original question: {ambiguous_instruction}";
}

const char* screening_body() {
    return "You are screening task instructions for ambiguity.\n"
           "Decide whether the following instruction is ambiguous when combined with its visual "
           "context, and classify the cause as exactly one of: ellipsis, colloquialism, "
           "subjectivity, relativity, other. If the instruction is not ambiguous, reply none.\n"
           "Instruction: {ambiguous_instruction}\n"
           "Reply with a single word.";
}

} // namespace

TemplateSet default_templates(const std::string& budget_tag) {
    TemplateSet set;
    const std::string rsn = reasoning_high_body(budget_tag);
    set.set({TemplateName::reasoning_high, rsn});
    set.set({TemplateName::reasoning_general, reasoning_general_body()});
    set.set({TemplateName::reflection_high, reflection_high_body()});
    set.set({TemplateName::reflection_general, reflection_general_body()});
    set.set({TemplateName::synthesis_high, synthesis_high_body()});
    set.set({TemplateName::synthesis_general, synthesis_general_body()});
    // The high-intelligence path runs in a single output, so the three
    // prompts are issued together.
    set.set({TemplateName::combined_instantial,
             rsn + std::string("\n\n") + reflection_high_body() + "\n\n" + synthesis_high_body()});
    set.set({TemplateName::screening, screening_body()});
    return set;
}

TemplateSet load_template_overrides(const std::filesystem::path& dir, TemplateSet base) {
    if (!std::filesystem::is_directory(dir)) {
        throw Error(ErrorKind::io, "template directory not found: " + dir.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".prompt") continue;
        const auto stem = entry.path().stem().string();
        auto name = template_name_from_string(stem);
        if (!name) {
            throw Error(ErrorKind::config, "unknown template override: " + stem);
        }
        PromptTemplate tmpl{*name, util::read_file(entry.path())};
        base.set(std::move(tmpl)); // set() revalidates the placeholder contract
    }
    return base;
}

} // namespace o1loom::prompts
