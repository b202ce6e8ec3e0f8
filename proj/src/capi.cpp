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

#include "o1loom.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <memory>
#include <sstream>
#include <vector>

#include "o1loom/commands.hpp"
#include "o1loom/error.hpp"
#include "o1loom/metrics.hpp"
#include "o1loom/traceparse.hpp"
#include "o1loom/version.hpp"

namespace {

thread_local std::string g_last_error;

void set_last_error(std::string message) { g_last_error = std::move(message); }

o1l_status status_for(const o1loom::Error& e) {
    using o1loom::ErrorKind;
    switch (e.kind()) {
    case ErrorKind::parse:
        return O1L_ERR_PARSE;
    case ErrorKind::config:
    case ErrorKind::io:
        return O1L_ERR_CONFIG;
    case ErrorKind::auth:
    case ErrorKind::transport:
    case ErrorKind::script_miss:
    case ErrorKind::malformed_response:
        return O1L_ERR_BACKEND;
    case ErrorKind::internal:
        return O1L_ERR_INTERNAL;
    default:
        return O1L_ERR_VALIDATION;
    }
}

template <typename Fn>
o1l_status guarded(Fn&& fn) {
    try {
        fn();
        set_last_error("");
        return O1L_OK;
    } catch (const o1loom::Error& e) {
        set_last_error(e.what());
        return status_for(e);
    } catch (const std::exception& e) {
        set_last_error(e.what());
        return O1L_ERR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

} // namespace

struct o1l_opts {
    o1loom::cli::Options options;
};

struct o1l_trace {
    o1loom::trace::ReasoningTrace trace;
};

extern "C" {

const char* o1l_version(void) { return o1loom::kVersion; }

const char* o1l_last_error(void) { return g_last_error.c_str(); }

void o1l_string_free(char* text) { std::free(text); }

o1l_opts* o1l_opts_new(void) { return new o1l_opts(); }

void o1l_opts_free(o1l_opts* opts) { delete opts; }

o1l_status o1l_opts_add(o1l_opts* opts, const char* key, const char* value) {
    if (!opts || !key || !value) {
        set_last_error("null argument");
        return O1L_ERR_CONFIG;
    }
    opts->options[key].push_back(value);
    return O1L_OK;
}

static int run_command(const char* command, const o1l_opts* opts) {
    static const o1l_opts empty;
    const auto& options = (opts ? opts : &empty)->options;
    std::ostringstream err;
    const int code = o1loom::cli::dispatch(command, options, std::cout, err);
    const std::string message = err.str();
    if (!message.empty()) {
        std::cerr << message;
    }
    set_last_error(code == 0 ? "" : message);
    return code;
}

int o1l_cmd_optimize(const o1l_opts* opts) { return run_command("optimize", opts); }
int o1l_cmd_run(const o1l_opts* opts) { return run_command("run", opts); }
int o1l_cmd_eval(const o1l_opts* opts) { return run_command("eval", opts); }
int o1l_cmd_screen(const o1l_opts* opts) { return run_command("screen", opts); }
int o1l_cmd_report(const o1l_opts* opts) { return run_command("report", opts); }

int o1l_dispatch(const char* command, const o1l_opts* opts) {
    if (!command) {
        set_last_error("null command");
        return 2;
    }
    return run_command(command, opts);
}

o1l_status o1l_trace_parse(const char* text, int strict, o1l_trace** out_trace) {
    if (!text || !out_trace) {
        set_last_error("null argument");
        return O1L_ERR_CONFIG;
    }
    return guarded([&] {
        auto handle = std::make_unique<o1l_trace>();
        handle->trace = o1loom::trace::parse_trace(
            text, strict ? o1loom::trace::ParseMode::strict : o1loom::trace::ParseMode::lenient);
        *out_trace = handle.release();
    });
}

void o1l_trace_free(o1l_trace* trace) { delete trace; }

size_t o1l_trace_step_count(const o1l_trace* trace) {
    return trace ? trace->trace.steps.size() : 0;
}

int o1l_trace_starting_budget(const o1l_trace* trace) {
    return trace ? trace->trace.starting_budget : -1;
}

int o1l_trace_step_budget(const o1l_trace* trace, size_t index) {
    if (!trace || index >= trace->trace.steps.size()) return -1;
    return trace->trace.steps[index].budget;
}

const char* o1l_trace_step_content(const o1l_trace* trace, size_t index) {
    if (!trace || index >= trace->trace.steps.size()) return nullptr;
    return trace->trace.steps[index].content.c_str();
}

const char* o1l_trace_step_reflection(const o1l_trace* trace, size_t index) {
    if (!trace || index >= trace->trace.steps.size()) return nullptr;
    const auto& reflection = trace->trace.steps[index].reflection;
    return reflection ? reflection->c_str() : nullptr;
}

int o1l_trace_step_reward(const o1l_trace* trace, size_t index, double* out_reward) {
    if (!trace || index >= trace->trace.steps.size()) return 0;
    const auto& reward = trace->trace.steps[index].reward;
    if (!reward) return 0;
    if (out_reward) *out_reward = *reward;
    return 1;
}

const char* o1l_trace_answer(const o1l_trace* trace) {
    if (!trace || !trace->trace.answer) return nullptr;
    return trace->trace.answer->c_str();
}

o1l_status o1l_trace_serialize(const o1l_trace* trace, char** out_text) {
    if (!trace || !out_text) {
        set_last_error("null argument");
        return O1L_ERR_CONFIG;
    }
    return guarded([&] { *out_text = dup_string(o1loom::trace::serialize_trace(trace->trace)); });
}

o1l_status o1l_extract_answer(const char* text, char** out_answer) {
    if (!text || !out_answer) {
        set_last_error("null argument");
        return O1L_ERR_CONFIG;
    }
    return guarded([&] { *out_answer = dup_string(o1loom::trace::extract_answer(text)); });
}

o1l_status o1l_extract_reward(const char* text, double* out_reward) {
    if (!text || !out_reward) {
        set_last_error("null argument");
        return O1L_ERR_CONFIG;
    }
    return guarded([&] { *out_reward = o1loom::trace::extract_reward(text); });
}

o1l_status o1l_iou(const unsigned char* a, const unsigned char* b, int width, int height,
                   double* out_value) {
    if (!a || !b || !out_value || width <= 0 || height <= 0) {
        set_last_error("bad mask arguments");
        return O1L_ERR_CONFIG;
    }
    return guarded([&] {
        const auto count = static_cast<size_t>(width) * static_cast<size_t>(height);
        o1loom::metrics::BitMask ma{width, height, {a, a + count}};
        o1loom::metrics::BitMask mb{width, height, {b, b + count}};
        *out_value = o1loom::metrics::iou(ma, mb);
    });
}

o1l_status o1l_vqa_accuracy(const char* pred, const char* const* answers, size_t n_answers,
                            double* out_value) {
    if (!pred || !answers || !out_value) {
        set_last_error("null argument");
        return O1L_ERR_CONFIG;
    }
    return guarded([&] {
        std::vector<std::string> humans(answers, answers + n_answers);
        *out_value = o1loom::metrics::vqa_accuracy(pred, humans);
    });
}

o1l_status o1l_bleu1(const char* pred, const char* const* references, size_t n_references,
                     double* out_value) {
    if (!pred || !references || !out_value) {
        set_last_error("null argument");
        return O1L_ERR_CONFIG;
    }
    return guarded([&] {
        std::vector<std::string> refs(references, references + n_references);
        *out_value = o1loom::metrics::bleu1(pred, refs);
    });
}

o1l_status o1l_improvement_pct(double new_value, double old_value, double* out_value) {
    if (!out_value) {
        set_last_error("null argument");
        return O1L_ERR_CONFIG;
    }
    return guarded([&] { *out_value = o1loom::metrics::improvement_pct(new_value, old_value); });
}

o1l_status o1l_format_improvement(double new_value, double old_value, char* buffer,
                                  size_t buffer_size) {
    if (!buffer || buffer_size == 0) {
        set_last_error("null argument");
        return O1L_ERR_CONFIG;
    }
    return guarded([&] {
        const std::string text = o1loom::metrics::format_improvement(new_value, old_value);
        if (text.size() + 1 > buffer_size) {
            throw o1loom::Error(o1loom::ErrorKind::config, "buffer too small");
        }
        std::memcpy(buffer, text.c_str(), text.size() + 1);
    });
}

} // extern "C"
