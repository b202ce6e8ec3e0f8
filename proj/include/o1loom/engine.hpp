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

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "o1loom/backends.hpp"
#include "o1loom/core.hpp"
#include "o1loom/prompts.hpp"
#include "o1loom/traceparse.hpp"

namespace o1loom::engine {

struct InferenceResult {
    std::string sample_id;
    std::optional<Instruction> clear_instruction; // empirical path
    std::string answer;
    std::optional<trace::ReasoningTrace> trace;   // instantial single-shot
    std::string transcript;                       // raw model output or accumulated A
    int turns_used = 0;
    int model_calls = 0;
    long latency_ms = 0;
};

// Instantial inference. single_shot renders the combined prompt and makes
// one call; turn_based alternates reasoning and reflection calls, growing
// the experience A by concatenation, then synthesizes the answer.
InferenceResult run_instantial(const Sample& sample, const RunConfig& config,
                               backends::Backend& task_model,
                               const prompts::TemplateSet& templates);

// Empirical inference: one call rewrites the ambiguous instruction into a
// clear one under the learned experience, a second call answers from the
// clear and original instructions together. disable_synthesis drops the
// second call and returns the clear instruction as the answer;
// disable_reasoning_reflection bypasses the experience entirely.
InferenceResult run_empirical(const Sample& sample, const Experience& experience,
                              const RunConfig& config, backends::Backend& task_model,
                              const prompts::TemplateSet& templates);

struct PredictionRecord {
    std::string id;
    std::string answer;
    std::optional<std::string> clear_instruction;
    std::optional<std::string> trace_ref;
    int model_calls = 0;
    long latency_ms = 0;
    std::optional<std::string> error;
};

std::string to_json_line(const PredictionRecord& record);
PredictionRecord prediction_from_json_line(const std::string& line);

struct RunDatasetOptions {
    int parallelism = 1;
    std::optional<std::filesystem::path> traces_dir;
};

// Processes samples with bounded parallelism and emits one record per sample
// in input order. Per-sample failures become error rows; only configuration
// problems abort before the first call.
void run_dataset(std::span<const Sample> samples, const RunConfig& config,
                 backends::Backend& task_model, const prompts::TemplateSet& templates,
                 const Experience* experience, const RunDatasetOptions& options,
                 const std::function<void(const PredictionRecord&)>& emit);

// Helpers shared with the optimizer.
backends::MessagePart image_part(const VisualContext& visual);
backends::ModelRequest make_request(const RunConfig& config, backends::Backend& backend,
                                    const std::string& prompt,
                                    const std::optional<VisualContext>& visual);

} // namespace o1loom::engine
