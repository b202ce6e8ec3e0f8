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

#include <span>
#include <string>
#include <vector>

#include "o1loom/backends.hpp"
#include "o1loom/core.hpp"
#include "o1loom/prompts.hpp"

namespace o1loom::optim {

struct OptimizationRun {
    std::vector<Experience> checkpoints; // iterations + 1, [0] is the initial
    std::vector<std::string> samples_used;
    std::string general_model;
    std::string reflector_model;
    long seed = 42;
};

// One-time optimization of empirical experience. Each iteration rewrites a
// fresh sample's instruction under the current experience (general model),
// asks the reflector to correct the experience, and keeps only the new
// reflection as the next experience. Backend failures abort the run.
OptimizationRun optimize_empirical(std::span<const Sample> samples, const RunConfig& config,
                                   backends::Backend& general, backends::Backend& reflector,
                                   const prompts::TemplateSet& templates);

// Evaluates every checkpoint over the dev set with run_empirical and returns
// the one with the highest metric; ties break toward the earliest
// checkpoint. metric is "acc" or "bleu1" (vqa dev sets).
Experience select_best_checkpoint(const OptimizationRun& run, std::span<const Sample> dev,
                                  const std::string& metric, const RunConfig& config,
                                  backends::Backend& task_model,
                                  const prompts::TemplateSet& templates,
                                  std::vector<double>* scores_out = nullptr);

void save_checkpoints(const OptimizationRun& run, const std::filesystem::path& dir);

} // namespace o1loom::optim
