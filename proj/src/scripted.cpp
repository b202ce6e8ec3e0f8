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

#include "o1loom/scripted.hpp"

#include <json.hpp>

#include <fstream>

#include "o1loom/util.hpp"

namespace o1loom::scripted {

using nlohmann::json;

std::shared_ptr<ScriptedBackend> ScriptedBackend::play(const std::filesystem::path& script_file) {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->id_ = "script:" + script_file.generic_string();
    backend->load_script(script_file);
    return backend;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::record(std::shared_ptr<Backend> inner,
                                                         const std::filesystem::path& script_file) {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->id_ = "record:" + script_file.generic_string();
    if (std::filesystem::exists(script_file)) {
        backend->load_script(script_file);
    }
    backend->record_inner_ = std::move(inner);
    backend->record_file_ = script_file;
    return backend;
}

void ScriptedBackend::load_script(const std::filesystem::path& script_file) {
    const std::string content = util::read_file(script_file);
    int line_no = 0;
    for (const auto& line : util::split(content, '\n')) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::schema, "script line " + std::to_string(line_no) + ": " +
                                               e.what());
        }
        if (j.contains("request_digest")) {
            const auto digest = j.at("request_digest").get<std::string>();
            if (digest.size() != 64) {
                throw Error(ErrorKind::schema, "script line " + std::to_string(line_no) +
                                                   ": request_digest must be 64 hex chars");
            }
            digest_records_[digest] = j.at("response_text").get<std::string>();
            continue;
        }
        ScriptRule rule;
        const std::string match = j.value("match", std::string("contains_text"));
        if (match == "exact_digest") {
            rule.match = ScriptRule::Match::exact_digest;
        } else if (match == "contains_text") {
            rule.match = ScriptRule::Match::contains_text;
        } else {
            throw Error(ErrorKind::schema,
                        "script line " + std::to_string(line_no) + ": unknown match: " + match);
        }
        rule.key = j.value("key", std::string());
        rule.response = j.at("response").get<std::string>();
        rule.fail_times = j.value("fail_times", 0);
        rule.max_uses = j.value("max_uses", -1);
        if (rule.fail_times < 0) {
            throw Error(ErrorKind::schema,
                        "script line " + std::to_string(line_no) + ": fail_times must be >= 0");
        }
        if (rule.match == ScriptRule::Match::exact_digest && rule.key.size() != 64) {
            throw Error(ErrorKind::schema, "script line " + std::to_string(line_no) +
                                               ": exact_digest key must be 64 hex chars");
        }
        rules_.push_back(RuleState{std::move(rule), 0, 0});
    }
}

void ScriptedBackend::add_rule(ScriptRule rule) {
    std::lock_guard lock(mutex_);
    rules_.push_back(RuleState{std::move(rule), 0, 0});
}

backends::ModelResponse ScriptedBackend::complete(const backends::ModelRequest& request) {
    backends::validate(request);
    const std::string digest = backends::cache_key(request);
    const std::string text = backends::request_text(request);

    std::unique_lock lock(mutex_);
    log_.push_back(request);
    if (counters_) counters_->backend_calls.fetch_add(1);

    if (const auto it = digest_records_.find(digest); it != digest_records_.end()) {
        return backends::ModelResponse{it->second, {}, false, 0};
    }
    for (auto& state : rules_) {
        const auto& rule = state.rule;
        const bool key_matches = rule.match == ScriptRule::Match::exact_digest
                                     ? rule.key == digest
                                     : rule.key.empty() || text.find(rule.key) != std::string::npos;
        if (!key_matches) continue;
        if (rule.max_uses >= 0 && state.uses >= rule.max_uses) continue;
        if (state.failures_injected < rule.fail_times) {
            ++state.failures_injected;
            throw backends::TransientError("injected transient failure " +
                                           std::to_string(state.failures_injected) + "/" +
                                           std::to_string(rule.fail_times));
        }
        ++state.uses;
        return backends::ModelResponse{rule.response, {}, false, 0};
    }
    if (record_inner_) {
        lock.unlock();
        backends::ModelResponse response = record_inner_->complete(request);
        lock.lock();
        if (digest_records_.emplace(digest, response.text).second && record_file_) {
            json j;
            j["request_digest"] = digest;
            j["response_text"] = response.text;
            std::ofstream out(*record_file_, std::ios::app | std::ios::binary);
            out << j.dump() << "\n";
        }
        return response;
    }
    throw Error(ErrorKind::script_miss, "no script entry for request digest " + digest);
}

std::vector<backends::ModelRequest> ScriptedBackend::call_log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

long ScriptedBackend::calls() const {
    std::lock_guard lock(mutex_);
    return static_cast<long>(log_.size());
}

std::string escape_tag_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (const char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

std::shared_ptr<ScriptedBackend> build_grammar_responder(int budget, const std::string& answer,
                                                         const trace::TraceTags& tags) {
    if (budget < 1) {
        throw Error(ErrorKind::config, "grammar responder budget must be >= 1");
    }
    trace::ReasoningTrace t;
    t.starting_budget = budget;
    for (int b = budget; b >= 0; --b) {
        trace::Step step;
        step.budget = b;
        step.content = "Work the instruction against the visual context with " +
                       std::to_string(b) + " steps remaining.";
        if (b == 0) {
            step.reflection = "The reasoning chain resolves the instruction without gaps.";
            step.reward = 1.0;
        }
        t.steps.push_back(std::move(step));
    }
    t.answer = escape_tag_text(answer);
    auto backend = std::make_shared<ScriptedBackend>();
    backend->add_rule(ScriptRule{ScriptRule::Match::contains_text, "",
                                 trace::serialize_trace(t, tags), 0, -1});
    return backend;
}

namespace {

const char* kInstantialInstruction = "between two bears and not plate";

std::string fixture_text() {
    return std::string(kInstantialInstruction) +
           "\n"
           "\n<count> 7 </count>\n"
           "Identify the objects marked as bears in the image.\n"
           "\n<count> 6 </count>\n"
           "The bears in the image are part of the design on the mugs, which are marked with [7] "
           "and [3].\n"
           "\n<count> 5 </count>\n"
           "Locate objects that are not plates. In this image, the plate is a prominent object, "
           "but we need to identify objects that are not plates.\n"
           "\n<count> 4 </count>\n"
           "Exclude the objects that are on the plate, such as the sandwich marked with [4], the "
           "soup bowl marked with [2], and the pickle marked with [8].\n"
           "\n<count> 3 </count>\n"
           "Identify any objects that are between the two bears but are not on the plate.\n"
           "\n<count> 2 </count>\n"
           "<reflection> It seems that the description provided was to find an object that is "
           "situated between the two bears but is not a plate itself. The steps taken so far have "
           "led to the exclusion of items on the plate and the identification of the bears on the "
           "mugs. </reflection>\n"
           "<reward> 0.8 </reward>\n"
           "\n<count> 1 </count>\n"
           "Looking at the objects, the mugs marked with [7] and [3] are situated on either side "
           "of the image. The only object that is directly between them and not on the plate "
           "seems to be the salt or pepper shaker marked with [5].\n"
           "\n<count> 0 </count>\n"
           "The object that fits the description \"between two bears and not plate\" is the salt "
           "or pepper shaker marked with [5].\n"
           "<reflection> The process involved a systematic exclusion of objects on the plate and "
           "identifying the bears on the mugs. The final object that fit the description was "
           "found to be between the bears (mugs) and not on the plate. The reasoning was sound, "
           "and followed the instructions accurately. </reflection>\n"
           "<reward> 1.0 </reward>\n"
           "\n<answer> The object that fits the description \"between two bears and not plate\" "
           "is the salt or pepper shaker marked with [5]. </answer>\n";
}

trace::ReasoningTrace fixture_expected() {
    trace::ReasoningTrace t;
    t.starting_budget = 7;
    auto step = [&](int budget, std::string content) {
        trace::Step s;
        s.budget = budget;
        s.content = std::move(content);
        t.steps.push_back(std::move(s));
    };
    step(7, "Identify the objects marked as bears in the image.");
    step(6, "The bears in the image are part of the design on the mugs, which are marked with "
            "[7] and [3].");
    step(5, "Locate objects that are not plates. In this image, the plate is a prominent object, "
            "but we need to identify objects that are not plates.");
    step(4, "Exclude the objects that are on the plate, such as the sandwich marked with [4], "
            "the soup bowl marked with [2], and the pickle marked with [8].");
    step(3, "Identify any objects that are between the two bears but are not on the plate.");
    step(2, "");
    t.steps.back().reflection =
        "It seems that the description provided was to find an object that is situated between "
        "the two bears but is not a plate itself. The steps taken so far have led to the "
        "exclusion of items on the plate and the identification of the bears on the mugs.";
    t.steps.back().reward = 0.8;
    step(1, "Looking at the objects, the mugs marked with [7] and [3] are situated on either "
            "side of the image. The only object that is directly between them and not on the "
            "plate seems to be the salt or pepper shaker marked with [5].");
    step(0, "The object that fits the description \"between two bears and not plate\" is the "
            "salt or pepper shaker marked with [5].");
    t.steps.back().reflection =
        "The process involved a systematic exclusion of objects on the plate and identifying the "
        "bears on the mugs. The final object that fit the description was found to be between "
        "the bears (mugs) and not on the plate. The reasoning was sound, and followed the "
        "instructions accurately.";
    t.steps.back().reward = 1.0;
    t.answer = "The object that fits the description \"between two bears and not plate\" is the "
               "salt or pepper shaker marked with [5].";
    return t;
}

} // namespace

TraceFixture instantial_transcript_fixture() {
    return TraceFixture{fixture_text(), fixture_expected()};
}

const std::vector<std::string>& empirical_experience_sequence() {
    static const std::vector<std::string> sequence = {
        "Repeat the question.",

        "Please review the image provided and use its details to rephrase the ambiguous and "
        "blurry question into a clear and precise one that can be effectively answered. Ensure "
        "that your revised question is directly related to the content of the image.",

        "Please ensure that your revised question is specific and directly references observable "
        "elements in the image. Your question should guide the respondent in addressing "
        "particular details or aspects present in the image clearly despite any blurriness. "
        "Avoid general or vague terms and aim for specificity that will elicit a precise answer.",

        "When rephrasing the question, focus on the discernible elements in the image, such as "
        "text, icons, or specific features visible on the computer monitor. Your question should "
        "ask for details about these specific elements, avoiding any reference to the clarity of "
        "the picture or the physical location, as these are not relevant to the content "
        "displayed on the screen. Aim to formulate a question that inquires about the "
        "information or processes shown in the image, which can be answered with the visible "
        "data.",
    };
    return sequence;
}

} // namespace o1loom::scripted
