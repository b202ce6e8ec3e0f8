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

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "o1loom/backends.hpp"
#include "o1loom/traceparse.hpp"

namespace o1loom::scripted {

// One deterministic behavior of a scripted model. Rules are evaluated in
// order; contains_text matches against the request's joined text parts, an
// empty key matches everything. fail_times injects that many transient
// failures before the rule starts answering; max_uses < 0 means unlimited.
struct ScriptRule {
    enum class Match { exact_digest, contains_text };
    Match match = Match::contains_text;
    std::string key;
    std::string response;
    int fail_times = 0;
    int max_uses = -1;
};

// Deterministic model stand-in. Answers from recorded request digests first,
// then from the rule list; play mode throws script_miss on anything else.
// In record mode a wrapped real backend answers misses and the exchange is
// appended to the script file, one line per distinct request digest.
class ScriptedBackend : public backends::Backend {
  public:
    static std::shared_ptr<ScriptedBackend> play(const std::filesystem::path& script_file);
    static std::shared_ptr<ScriptedBackend> record(std::shared_ptr<Backend> inner,
                                                   const std::filesystem::path& script_file);
    ScriptedBackend() = default;

    void add_rule(ScriptRule rule);

    backends::ModelResponse complete(const backends::ModelRequest& request) override;
    std::string id() const override { return id_; }

    void set_counters(std::shared_ptr<backends::CallCounters> counters) {
        counters_ = std::move(counters);
    }

    // Every request seen, failed attempts included.
    std::vector<backends::ModelRequest> call_log() const;
    long calls() const;

  private:
    struct RuleState {
        ScriptRule rule;
        int failures_injected = 0;
        int uses = 0;
    };

    void load_script(const std::filesystem::path& script_file);

    mutable std::mutex mutex_;
    std::string id_ = "scripted";
    std::vector<RuleState> rules_;
    std::map<std::string, std::string> digest_records_;
    std::vector<backends::ModelRequest> log_;
    std::shared_ptr<Backend> record_inner_;
    std::optional<std::filesystem::path> record_file_;
    std::shared_ptr<backends::CallCounters> counters_;
};

// Replaces angle brackets and ampersands so embedded tag-like text cannot be
// mistaken for grammar tags.
std::string escape_tag_text(const std::string& text);

// A backend that answers every request with a strict-grammar trace counting
// budget..0, one reflection with reward 1.0, and the given answer.
std::shared_ptr<ScriptedBackend> build_grammar_responder(int budget, const std::string& answer,
                                                         const trace::TraceTags& tags = {});

struct TraceFixture {
    std::string text;                    // transcript in the output grammar
    trace::ReasoningTrace expected;      // its hand-parsed form
};

// The worked instantial transcript: 8 steps counting 7..0, reflections with
// rewards 0.8 and 1.0, and an answer naming the shaker marked with [5].
TraceFixture instantial_transcript_fixture();

// The worked empirical refinement sequence, from the initial
// "Repeat the question." through three rewrites.
const std::vector<std::string>& empirical_experience_sequence();

} // namespace o1loom::scripted
