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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace o1loom {

enum class Task { ris, vqa, vln };
enum class InstructionKind { ambiguous, clear };
enum class MediaType { png, jpeg };
enum class Ambiguity { ellipsis, colloquialism, subjectivity, relativity, other };
enum class ExperienceMode { instantial, empirical };
enum class Execution { single_shot, turn_based };

std::string to_string(Task t);
std::string to_string(Ambiguity a);
std::string to_string(MediaType m);
std::string to_string(ExperienceMode m);
std::optional<Task> task_from_string(const std::string& s);
std::optional<Ambiguity> ambiguity_from_string(const std::string& s);
std::optional<MediaType> media_type_from_string(const std::string& s);
std::optional<ExperienceMode> mode_from_string(const std::string& s);

// A task instruction; text is trimmed at ingest, interior whitespace kept.
struct Instruction {
    std::string text;
    InstructionKind kind = InstructionKind::ambiguous;
};

struct VisualContext {
    std::filesystem::path image_path;
    MediaType media_type = MediaType::png;
    std::string sha256; // digest of the file bytes, filled at load
};

// One task instance: visual context, ambiguous instruction, ground truth.
struct Sample {
    std::string id;
    Task task = Task::vqa;
    std::optional<VisualContext> visual; // absent for vln episode records
    Instruction instruction;
    std::optional<Ambiguity> ambiguity;
    std::optional<std::filesystem::path> gt_mask;         // ris
    std::optional<std::vector<std::string>> answers;      // vqa, exactly 10
};

// Throws Error(validation) naming the first violated field, in field order:
// id, task, visual, instruction, ambiguity, gt_mask, answers.
void validate(const Sample& sample);

// Key-sorted compact JSON, LF newline terminated records elsewhere; this is
// the canonical byte form used for hashing and round-trip guarantees.
std::string canonical_json(const Sample& sample);
std::string canonical_sample_digest(const Sample& sample);
Sample sample_from_canonical_json(const std::string& json_text,
                                  const std::filesystem::path& base_dir = {});

struct IterationRecord {
    int iteration = 0; // 0-based, strictly increasing within an Experience
    std::string sample_id;
    std::string reasoning;
    std::string reflection;
    std::optional<double> reward; // in [0, 1] when present
};

enum class EmpiricalUpdate { reflection, reasoning };

// The evolving disambiguation prompt with its full iteration history.
struct Experience {
    ExperienceMode mode = ExperienceMode::empirical;
    std::string text;
    std::vector<IterationRecord> history;
    long seed = 42;
    int budget = 0;
    std::optional<Task> task;
    EmpiricalUpdate update = EmpiricalUpdate::reflection;
    std::string separator = "\n"; // instantial concatenation separator
};

void validate(const Experience& experience);
std::string experience_to_json(const Experience& experience);
Experience experience_from_json(const std::string& json_text);
void save_experience(const Experience& experience, const std::filesystem::path& path);
Experience load_experience(const std::filesystem::path& path);

struct BudgetConfig {
    int n_ins = 10;
    int n_emp = 3;
    double min_reward_accept = 0.0; // 0.0 disables the early-accept gate
};

struct Ablations {
    bool disable_synthesis = false;
    bool disable_reasoning_reflection = false;
    bool single_example_optimization = false;
    bool text_only_optimization = false;
};

// How a backend is constructed; parsed from strings such as
// "wire:gpt-4o", "script:rules.jsonl", "grammar:3:answer text".
struct BackendRef {
    std::string spec;
    bool empty() const { return spec.empty(); }
};

struct RunConfig {
    ExperienceMode mode = ExperienceMode::empirical;
    Execution execution = Execution::single_shot;
    Task task = Task::vqa;
    BackendRef task_model;
    BackendRef reflector_model;
    double temperature = 0.0;
    long seed = 42;
    int max_tokens = 1024;
    BudgetConfig budget;
    Ablations ablations;
    EmpiricalUpdate empirical_update = EmpiricalUpdate::reflection;
    std::string separator = "\n";   // the concatenation joint for instantial A
    std::string budget_tag = "count";
    bool turn_synthesis_includes_image = false; // the separate synthesis call
    std::string task_description;   // empty selects the per-task default
    std::string initial_empirical_experience = "Repeat the question.";
};

std::string default_task_description(Task task);
std::string canonical_json(const RunConfig& config);

} // namespace o1loom
