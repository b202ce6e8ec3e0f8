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

#include "o1loom/optimizer.hpp"

#include <set>

#include "o1loom/engine.hpp"
#include "o1loom/metrics.hpp"
#include "o1loom/util.hpp"

namespace o1loom::optim {

OptimizationRun optimize_empirical(std::span<const Sample> samples, const RunConfig& config,
                                   backends::Backend& general, backends::Backend& reflector,
                                   const prompts::TemplateSet& templates) {
    const int iterations = config.budget.n_emp;
    const bool single = config.ablations.single_example_optimization;
    const bool text_only = config.ablations.text_only_optimization;
    const auto required = static_cast<std::size_t>(single ? 1 : iterations);
    if (samples.size() < required) {
        throw Error(ErrorKind::insufficient_samples,
                    "insufficient samples: need " + std::to_string(required) + ", have " +
                        std::to_string(samples.size()));
    }
    for (std::size_t i = 0; i < required; ++i) {
        validate(samples[i]);
    }
    if (!single) {
        std::set<std::string> ids;
        for (std::size_t i = 0; i < required; ++i) {
            if (!ids.insert(samples[i].id).second) {
                throw Error(ErrorKind::validation,
                            "samples: duplicate id in optimization set: " + samples[i].id);
            }
        }
    }

    OptimizationRun run;
    run.general_model = general.id();
    run.reflector_model = reflector.id();
    run.seed = config.seed;

    auto make_checkpoint = [&](const std::string& text,
                               const std::vector<IterationRecord>& history) {
        Experience e;
        e.mode = ExperienceMode::empirical;
        e.text = text;
        e.history = history;
        e.seed = config.seed;
        e.budget = iterations;
        e.task = config.task;
        e.update = config.empirical_update;
        e.separator = config.separator;
        return e;
    };

    std::string experience = config.initial_empirical_experience;
    std::vector<IterationRecord> history;
    run.checkpoints.push_back(make_checkpoint(experience, history));

    for (int i = 0; i < iterations; ++i) {
        const Sample& sample = samples[single ? 0 : static_cast<std::size_t>(i)];
        run.samples_used.push_back(sample.id);
        const auto visual = text_only ? std::optional<VisualContext>{} : sample.visual;

        prompts::Bindings rewrite_bindings{
            {"experience", experience},
            {"ambiguous_instruction", sample.instruction.text},
        };
        const std::string rewrite_prompt = prompts::render(
            templates.get(prompts::TemplateName::reasoning_general), rewrite_bindings);
        const auto rewrite =
            general.complete(engine::make_request(config, general, rewrite_prompt, visual));
        const std::string reasoning = util::trim(rewrite.text);

        prompts::Bindings reflect_bindings{
            {"ambiguous_instruction", sample.instruction.text},
            {"clear_instruction", reasoning},
            {"experience", experience},
        };
        const std::string reflect_prompt = prompts::render(
            templates.get(prompts::TemplateName::reflection_general), reflect_bindings);
        const auto reflect =
            reflector.complete(engine::make_request(config, reflector, reflect_prompt, visual));
        const std::string reflection = util::trim(reflect.text);

        history.push_back(IterationRecord{i, sample.id, reasoning, reflection, std::nullopt});
        experience =
            config.empirical_update == EmpiricalUpdate::reflection ? reflection : reasoning;
        run.checkpoints.push_back(make_checkpoint(experience, history));
    }
    return run;
}

Experience select_best_checkpoint(const OptimizationRun& run, std::span<const Sample> dev,
                                  const std::string& metric, const RunConfig& config,
                                  backends::Backend& task_model,
                                  const prompts::TemplateSet& templates,
                                  std::vector<double>* scores_out) {
    if (dev.empty()) {
        throw Error(ErrorKind::empty_dataset, "dev set is empty");
    }
    if (metric != "acc" && metric != "bleu1") {
        throw Error(ErrorKind::metric_mismatch,
                    "checkpoint selection supports acc and bleu1, got: " + metric);
    }
    for (const auto& sample : dev) {
        if (sample.task != Task::vqa) {
            throw Error(ErrorKind::metric_mismatch, metric + " needs a vqa dev set");
        }
        validate(sample);
    }

    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t c = 0; c < run.checkpoints.size(); ++c) {
        double sum = 0.0;
        for (const auto& sample : dev) {
            std::string answer;
            try {
                answer = engine::run_empirical(sample, run.checkpoints[c], config, task_model,
                                               templates)
                             .answer;
            } catch (const Error&) {
                // Failed inference scores as an empty answer.
            }
            sum += metric == "acc" ? metrics::vqa_accuracy(answer, *sample.answers)
                                   : metrics::bleu1(answer, *sample.answers);
        }
        const double score = sum / static_cast<double>(dev.size());
        if (scores_out) scores_out->push_back(score);
        if (score > best_score) {
            best_score = score;
            best = c;
        }
    }
    return run.checkpoints[best];
}

void save_checkpoints(const OptimizationRun& run, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < run.checkpoints.size(); ++i) {
        save_experience(run.checkpoints[i], dir / ("checkpoint_" + std::to_string(i) + ".json"));
    }
}

} // namespace o1loom::optim
