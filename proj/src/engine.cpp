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

#include "o1loom/engine.hpp"

#include <json.hpp>

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "o1loom/util.hpp"

namespace o1loom::engine {

using nlohmann::json;

backends::MessagePart image_part(const VisualContext& visual) {
    backends::MessagePart part;
    part.kind = backends::MessagePart::Kind::image;
    part.media_type = visual.media_type;
    part.image_path = visual.image_path;
    part.image_sha256 =
        visual.sha256.empty() ? util::sha256_file_hex(visual.image_path) : visual.sha256;
    return part;
}

backends::ModelRequest make_request(const RunConfig& config, backends::Backend& backend,
                                    const std::string& prompt,
                                    const std::optional<VisualContext>& visual) {
    backends::ModelRequest request;
    request.backend_id = backend.id();
    request.model = backend.id();
    request.temperature = config.temperature;
    request.seed = config.seed;
    request.max_tokens = config.max_tokens;
    backends::Message message;
    message.role = backends::Message::Role::user;
    backends::MessagePart text;
    text.kind = backends::MessagePart::Kind::text;
    text.text = prompt;
    message.parts.push_back(std::move(text));
    if (visual) {
        message.parts.push_back(image_part(*visual));
    }
    request.messages.push_back(std::move(message));
    return request;
}

namespace {

std::string task_description_for(const RunConfig& config, const Sample& sample) {
    return config.task_description.empty() ? default_task_description(sample.task)
                                           : config.task_description;
}

// The synthesis reply may or may not use answer tags; fall back to the whole
// trailing text, and surface emptiness as an inference failure.
std::string answer_from(const std::string& text, const trace::TraceTags& tags,
                        const std::string& sample_id) {
    try {
        return trace::extract_answer(text, tags);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::answer_empty) {
            throw Error(ErrorKind::inference_failed,
                        "sample " + sample_id + ": empty answer");
        }
        throw;
    }
}

InferenceResult run_direct(const Sample& sample, const RunConfig& config,
                           backends::Backend& task_model, const trace::TraceTags& tags) {
    // Experience bypassed: the plain task prompt over the raw instruction.
    const std::string description = task_description_for(config, sample);
    const std::string prompt = description.empty()
                                   ? sample.instruction.text
                                   : description + "\n" + sample.instruction.text;
    const auto response =
        task_model.complete(make_request(config, task_model, prompt, sample.visual));
    InferenceResult result;
    result.sample_id = sample.id;
    result.answer = answer_from(response.text, tags, sample.id);
    result.transcript = response.text;
    result.model_calls = 1;
    result.latency_ms = response.latency_ms;
    return result;
}

} // namespace

InferenceResult run_instantial(const Sample& sample, const RunConfig& config,
                               backends::Backend& task_model,
                               const prompts::TemplateSet& templates) {
    validate(sample);
    const trace::TraceTags tags{config.budget_tag, "reflection", "reward", "answer"};
    if (config.ablations.disable_reasoning_reflection) {
        return run_direct(sample, config, task_model, tags);
    }

    InferenceResult result;
    result.sample_id = sample.id;

    if (config.execution == Execution::single_shot) {
        prompts::Bindings bindings{
            {"task_description", task_description_for(config, sample)},
            {"ambiguous_instruction", sample.instruction.text},
            {"budget", std::to_string(config.budget.n_ins)},
        };
        const std::string prompt =
            prompts::render(templates.get(prompts::TemplateName::combined_instantial), bindings);
        const auto response =
            task_model.complete(make_request(config, task_model, prompt, sample.visual));
        result.latency_ms = response.latency_ms;
        result.model_calls = 1;
        result.transcript = response.text;
        try {
            result.trace = trace::parse_trace(response.text, trace::ParseMode::lenient, tags);
        } catch (const ParseError& e) {
            throw ParseError(e.parse_kind(), e.offset(),
                             std::string(e.what()) + "\nraw output:\n" + response.text);
        }
        result.turns_used = static_cast<int>(result.trace->steps.size());
        result.answer = result.trace->answer ? *result.trace->answer
                                             : answer_from(response.text, tags, sample.id);
        return result;
    }

    // Turn-based: reasoning call, reflection call, A ← A ⊕ rsn ⊕ rfl.
    std::string experience;
    const std::string answer_open = "<" + tags.answer + ">";
    long latency = 0;
    int calls = 0;
    int turns = 0;
    for (int i = 0; i < config.budget.n_ins; ++i) {
        prompts::Bindings bindings{
            {"task_description", task_description_for(config, sample)},
            {"ambiguous_instruction", sample.instruction.text},
            {"budget", std::to_string(config.budget.n_ins - i)},
        };
        std::string reasoning_prompt =
            prompts::render(templates.get(prompts::TemplateName::reasoning_high), bindings);
        if (!experience.empty()) {
            reasoning_prompt += "\n\n" + experience;
        }
        const auto reasoning = task_model.complete(
            make_request(config, task_model, reasoning_prompt, sample.visual));
        latency += reasoning.latency_ms;
        ++calls;

        std::string reflection_prompt =
            prompts::render(templates.get(prompts::TemplateName::reflection_high), {});
        reflection_prompt += "\n\n" + util::join_nonempty({experience, reasoning.text},
                                                          config.separator);
        const auto reflection =
            task_model.complete(make_request(config, task_model, reflection_prompt, std::nullopt));
        latency += reflection.latency_ms;
        ++calls;

        experience = util::join_nonempty({experience, reasoning.text, reflection.text},
                                         config.separator);
        ++turns;

        if (experience.find(answer_open) != std::string::npos) {
            if (config.budget.min_reward_accept <= 0.0) break;
            try {
                if (trace::extract_reward(reflection.text, tags) >=
                    config.budget.min_reward_accept) {
                    break;
                }
            } catch (const Error&) {
                // No usable reward this turn; keep reasoning.
            }
        }
    }

    result.transcript = experience;
    result.turns_used = turns;

    if (config.ablations.disable_synthesis) {
        result.answer = answer_from(experience, tags, sample.id);
    } else {
        std::string synthesis_prompt =
            prompts::render(templates.get(prompts::TemplateName::synthesis_high), {});
        synthesis_prompt += "\n\n" + experience;
        const auto synthesis = task_model.complete(make_request(
            config, task_model, synthesis_prompt,
            config.turn_synthesis_includes_image ? sample.visual
                                                 : std::optional<VisualContext>{}));
        latency += synthesis.latency_ms;
        ++calls;
        result.answer = answer_from(synthesis.text, tags, sample.id);
    }
    result.model_calls = calls;
    result.latency_ms = latency;
    return result;
}

InferenceResult run_empirical(const Sample& sample, const Experience& experience,
                              const RunConfig& config, backends::Backend& task_model,
                              const prompts::TemplateSet& templates) {
    validate(sample);
    if (experience.mode != ExperienceMode::empirical) {
        throw Error(ErrorKind::config, "run_empirical needs an empirical experience");
    }
    const trace::TraceTags tags{config.budget_tag, "reflection", "reward", "answer"};
    if (config.ablations.disable_reasoning_reflection) {
        return run_direct(sample, config, task_model, tags);
    }

    InferenceResult result;
    result.sample_id = sample.id;

    prompts::Bindings rewrite_bindings{
        {"experience", experience.text},
        {"ambiguous_instruction", sample.instruction.text},
    };
    const std::string rewrite_prompt =
        prompts::render(templates.get(prompts::TemplateName::reasoning_general), rewrite_bindings);
    const auto rewrite =
        task_model.complete(make_request(config, task_model, rewrite_prompt, sample.visual));
    result.latency_ms += rewrite.latency_ms;
    const std::string clear_text = util::trim(rewrite.text);
    if (clear_text.empty()) {
        throw Error(ErrorKind::inference_failed, "sample " + sample.id + ": empty rewrite");
    }
    result.clear_instruction = Instruction{clear_text, InstructionKind::clear};
    result.transcript = rewrite.text;

    if (config.ablations.disable_synthesis) {
        // Synthesis removed: the pipeline's output is the clear instruction.
        result.answer = clear_text;
        result.model_calls = 1;
        return result;
    }

    prompts::Bindings synthesis_bindings{
        {"clear_instruction", clear_text},
        {"ambiguous_instruction", sample.instruction.text},
    };
    const std::string synthesis_prompt = prompts::render(
        templates.get(prompts::TemplateName::synthesis_general), synthesis_bindings);
    const auto synthesis =
        task_model.complete(make_request(config, task_model, synthesis_prompt, sample.visual));
    result.latency_ms += synthesis.latency_ms;
    result.answer = answer_from(synthesis.text, tags, sample.id);
    result.model_calls = 2;
    return result;
}

std::string to_json_line(const PredictionRecord& record) {
    json j;
    j["id"] = record.id;
    j["answer"] = record.answer;
    if (record.clear_instruction) j["clear_instruction"] = *record.clear_instruction;
    if (record.trace_ref) j["trace_ref"] = *record.trace_ref;
    j["model_calls"] = record.model_calls;
    j["latency_ms"] = record.latency_ms;
    if (record.error) j["error"] = *record.error;
    return j.dump();
}

PredictionRecord prediction_from_json_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::schema, std::string("bad prediction line: ") + e.what());
    }
    PredictionRecord record;
    record.id = j.at("id").get<std::string>();
    record.answer = j.value("answer", std::string());
    if (j.contains("clear_instruction")) {
        record.clear_instruction = j["clear_instruction"].get<std::string>();
    }
    if (j.contains("trace_ref")) record.trace_ref = j["trace_ref"].get<std::string>();
    record.model_calls = j.value("model_calls", 0);
    record.latency_ms = j.value("latency_ms", 0L);
    if (j.contains("error")) record.error = j["error"].get<std::string>();
    return record;
}

namespace {

std::string sanitize_id(const std::string& id) {
    std::string out = id;
    for (auto& c : out) {
        if (c == '/' || c == '\\' || c == ':') c = '_';
    }
    return out;
}

} // namespace

void run_dataset(std::span<const Sample> samples, const RunConfig& config,
                 backends::Backend& task_model, const prompts::TemplateSet& templates,
                 const Experience* experience, const RunDatasetOptions& options,
                 const std::function<void(const PredictionRecord&)>& emit) {
    if (config.mode == ExperienceMode::empirical && !config.ablations.disable_reasoning_reflection
        && experience == nullptr) {
        throw Error(ErrorKind::config, "empirical mode requires an experience");
    }
    if (options.parallelism < 1) {
        throw Error(ErrorKind::config, "parallelism must be >= 1");
    }
    if (options.traces_dir) {
        std::filesystem::create_directories(*options.traces_dir);
    }

    const auto n = samples.size();
    std::vector<std::optional<PredictionRecord>> results(n);
    std::mutex mutex;
    std::size_t next_emit = 0;
    std::atomic<std::size_t> next_index{0};

    auto process = [&](std::size_t i) {
        const Sample& sample = samples[i];
        PredictionRecord record;
        record.id = sample.id;
        try {
            InferenceResult r =
                config.mode == ExperienceMode::instantial
                    ? run_instantial(sample, config, task_model, templates)
                    : run_empirical(sample, experience ? *experience : Experience{}, config,
                                    task_model, templates);
            record.answer = r.answer;
            if (r.clear_instruction) record.clear_instruction = r.clear_instruction->text;
            record.model_calls = r.model_calls;
            record.latency_ms = r.latency_ms;
            if (options.traces_dir && !r.transcript.empty()) {
                const auto path = *options.traces_dir / (sanitize_id(sample.id) + ".txt");
                util::atomic_write_file(path, r.transcript);
                record.trace_ref = path.generic_string();
            }
        } catch (const std::exception& e) {
            record.error = e.what();
        }
        std::lock_guard lock(mutex);
        results[i] = std::move(record);
        while (next_emit < n && results[next_emit]) {
            emit(*results[next_emit]);
            ++next_emit;
        }
    };

    if (options.parallelism == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) process(i);
        return;
    }
    const auto workers = std::min<std::size_t>(options.parallelism, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next_index.fetch_add(1);
                if (i >= n) break;
                process(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace o1loom::engine
