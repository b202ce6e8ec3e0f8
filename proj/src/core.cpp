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

#include "o1loom/core.hpp"

#include <json.hpp>

#include "o1loom/error.hpp"
#include "o1loom/util.hpp"

namespace o1loom {

using nlohmann::json;

std::string to_string(Task t) {
    switch (t) {
    case Task::ris: return "ris";
    case Task::vqa: return "vqa";
    case Task::vln: return "vln";
    }
    return "vqa";
}

std::string to_string(Ambiguity a) {
    switch (a) {
    case Ambiguity::ellipsis: return "ellipsis";
    case Ambiguity::colloquialism: return "colloquialism";
    case Ambiguity::subjectivity: return "subjectivity";
    case Ambiguity::relativity: return "relativity";
    case Ambiguity::other: return "other";
    }
    return "other";
}

std::string to_string(MediaType m) {
    return m == MediaType::png ? "png" : "jpeg";
}

std::string to_string(ExperienceMode m) {
    return m == ExperienceMode::instantial ? "instantial" : "empirical";
}

std::optional<Task> task_from_string(const std::string& s) {
    if (s == "ris") return Task::ris;
    if (s == "vqa") return Task::vqa;
    if (s == "vln") return Task::vln;
    return std::nullopt;
}

std::optional<Ambiguity> ambiguity_from_string(const std::string& s) {
    if (s == "ellipsis") return Ambiguity::ellipsis;
    if (s == "colloquialism") return Ambiguity::colloquialism;
    if (s == "subjectivity") return Ambiguity::subjectivity;
    if (s == "relativity") return Ambiguity::relativity;
    if (s == "other") return Ambiguity::other;
    return std::nullopt;
}

std::optional<MediaType> media_type_from_string(const std::string& s) {
    if (s == "png") return MediaType::png;
    if (s == "jpeg" || s == "jpg") return MediaType::jpeg;
    return std::nullopt;
}

std::optional<ExperienceMode> mode_from_string(const std::string& s) {
    if (s == "instantial") return ExperienceMode::instantial;
    if (s == "empirical") return ExperienceMode::empirical;
    return std::nullopt;
}

namespace {

[[noreturn]] void fail_field(const std::string& field, const std::string& detail) {
    throw Error(ErrorKind::validation, field + ": " + detail);
}

} // namespace

void validate(const Sample& sample) {
    if (sample.id.empty()) {
        fail_field("id", "must be nonempty");
    }
    if (sample.task != Task::vln && !sample.visual.has_value()) {
        fail_field("visual", "required for task " + to_string(sample.task));
    }
    if (util::trim(sample.instruction.text).empty()) {
        fail_field("instruction", "text empty after trimming");
    }
    if (sample.task == Task::ris && !sample.gt_mask.has_value()) {
        fail_field("gt_mask", "required for task ris");
    }
    if (sample.task == Task::vqa) {
        if (!sample.answers.has_value()) {
            fail_field("answers", "required for task vqa");
        }
        if (sample.answers->size() != 10) {
            fail_field("answers", "answers length " + std::to_string(sample.answers->size()) +
                                      " ≠ 10");
        }
    }
}

std::string canonical_json(const Sample& sample) {
    validate(sample);
    json j;
    j["id"] = sample.id;
    j["task"] = to_string(sample.task);
    j["instruction"] = sample.instruction.text;
    if (sample.visual) {
        j["image"] = sample.visual->image_path.generic_string();
        j["media_type"] = to_string(sample.visual->media_type);
        if (!sample.visual->sha256.empty()) {
            j["image_sha256"] = sample.visual->sha256;
        }
    }
    if (sample.ambiguity) {
        j["ambiguity"] = to_string(*sample.ambiguity);
    }
    if (sample.gt_mask) {
        j["gt_mask"] = sample.gt_mask->generic_string();
    }
    if (sample.answers) {
        j["answers"] = *sample.answers;
    }
    return j.dump(); // nlohmann keeps object keys sorted
}

std::string canonical_sample_digest(const Sample& sample) {
    return util::sha256_hex(canonical_json(sample));
}

Sample sample_from_canonical_json(const std::string& json_text,
                                  const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::schema, std::string("bad record: ") + e.what());
    }
    if (!j.is_object()) {
        throw Error(ErrorKind::schema, "record is not an object");
    }
    auto need_string = [&](const char* key) -> std::string {
        if (!j.contains(key) || !j[key].is_string()) {
            throw Error(ErrorKind::schema, std::string("missing or non-string field: ") + key);
        }
        return j[key].get<std::string>();
    };
    Sample s;
    s.id = need_string("id");
    auto task = task_from_string(need_string("task"));
    if (!task) {
        throw Error(ErrorKind::schema, "unknown task: " + j["task"].get<std::string>());
    }
    s.task = *task;
    s.instruction.text = util::trim(need_string("instruction"));
    s.instruction.kind = InstructionKind::ambiguous;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        if (path.is_relative() && !base_dir.empty()) return base_dir / path;
        return path;
    };
    if (j.contains("image")) {
        VisualContext v;
        v.image_path = resolve(j["image"].get<std::string>());
        std::string mt = j.value("media_type", std::string("png"));
        auto media = media_type_from_string(mt);
        if (!media) {
            throw Error(ErrorKind::schema, "unknown media_type: " + mt);
        }
        v.media_type = *media;
        if (j.contains("image_sha256")) {
            v.sha256 = j["image_sha256"].get<std::string>();
        }
        s.visual = std::move(v);
    }
    if (j.contains("ambiguity")) {
        auto a = ambiguity_from_string(j["ambiguity"].get<std::string>());
        if (!a) {
            throw Error(ErrorKind::schema,
                        "unknown ambiguity: " + j["ambiguity"].get<std::string>());
        }
        s.ambiguity = *a;
    }
    if (j.contains("gt_mask")) {
        s.gt_mask = resolve(j["gt_mask"].get<std::string>());
    }
    if (j.contains("answers")) {
        if (!j["answers"].is_array()) {
            throw Error(ErrorKind::schema, "answers must be an array");
        }
        s.answers = j["answers"].get<std::vector<std::string>>();
    }
    validate(s);
    return s;
}

void validate(const Experience& experience) {
    if (experience.budget > 0 &&
        static_cast<int>(experience.history.size()) > experience.budget) {
        fail_field("history", "length exceeds budget");
    }
    int last = -1;
    for (const auto& rec : experience.history) {
        if (rec.iteration <= last) {
            fail_field("history", "iteration indices must be strictly increasing");
        }
        last = rec.iteration;
        if (rec.reward && (*rec.reward < 0.0 || *rec.reward > 1.0)) {
            fail_field("history", "reward outside [0, 1]");
        }
    }
    if (!experience.history.empty()) {
        const auto& tail = experience.history.back();
        if (experience.mode == ExperienceMode::empirical) {
            const std::string& expect = experience.update == EmpiricalUpdate::reflection
                                            ? tail.reflection
                                            : tail.reasoning;
            if (experience.text != expect) {
                fail_field("text", "does not match the last update output");
            }
        } else {
            std::vector<std::string> segments;
            for (const auto& rec : experience.history) {
                segments.push_back(rec.reasoning);
                segments.push_back(rec.reflection);
            }
            // instantial text = initial ⊕ all (reasoning, reflection) pairs;
            // the initial segment is whatever precedes the first pair.
            const std::string suffix = util::join_nonempty(segments, experience.separator);
            if (!suffix.empty() &&
                (experience.text.size() < suffix.size() ||
                 experience.text.compare(experience.text.size() - suffix.size(), suffix.size(),
                                         suffix) != 0)) {
                fail_field("text", "does not end with the concatenated history");
            }
        }
    }
}

std::string experience_to_json(const Experience& experience) {
    validate(experience);
    json j;
    j["mode"] = to_string(experience.mode);
    j["text"] = experience.text;
    j["seed"] = experience.seed;
    j["budget"] = experience.budget;
    if (experience.task) j["task"] = to_string(*experience.task);
    j["update"] = experience.update == EmpiricalUpdate::reflection ? "reflection" : "reasoning";
    j["separator"] = experience.separator;
    json hist = json::array();
    for (const auto& rec : experience.history) {
        json r;
        r["iteration"] = rec.iteration;
        r["sample_id"] = rec.sample_id;
        r["reasoning"] = rec.reasoning;
        r["reflection"] = rec.reflection;
        if (rec.reward) r["reward"] = *rec.reward;
        hist.push_back(std::move(r));
    }
    j["history"] = std::move(hist);
    return j.dump();
}

Experience experience_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::schema, std::string("bad experience file: ") + e.what());
    }
    Experience e;
    auto mode = mode_from_string(j.value("mode", std::string("empirical")));
    if (!mode) {
        throw Error(ErrorKind::schema, "unknown experience mode");
    }
    e.mode = *mode;
    e.text = j.value("text", std::string());
    e.seed = j.value("seed", 42L);
    e.budget = j.value("budget", 0);
    if (j.contains("task")) {
        e.task = task_from_string(j["task"].get<std::string>());
    }
    const std::string update = j.value("update", std::string("reflection"));
    e.update = update == "reasoning" ? EmpiricalUpdate::reasoning : EmpiricalUpdate::reflection;
    e.separator = j.value("separator", std::string("\n"));
    for (const auto& r : j.value("history", json::array())) {
        IterationRecord rec;
        rec.iteration = r.value("iteration", 0);
        rec.sample_id = r.value("sample_id", std::string());
        rec.reasoning = r.value("reasoning", std::string());
        rec.reflection = r.value("reflection", std::string());
        if (r.contains("reward")) rec.reward = r["reward"].get<double>();
        e.history.push_back(std::move(rec));
    }
    validate(e);
    return e;
}

void save_experience(const Experience& experience, const std::filesystem::path& path) {
    util::atomic_write_file(path, experience_to_json(experience) + "\n");
}

Experience load_experience(const std::filesystem::path& path) {
    return experience_from_json(util::read_file(path));
}

std::string default_task_description(Task task) {
    switch (task) {
    case Task::vqa: return "Answer the question about the image.";
    case Task::ris: return "Rewrite the referring expression to identify exactly one object.";
    case Task::vln: return "";
    }
    return "";
}

std::string canonical_json(const RunConfig& config) {
    json j;
    j["mode"] = to_string(config.mode);
    j["execution"] = config.execution == Execution::single_shot ? "single_shot" : "turn_based";
    j["task"] = to_string(config.task);
    j["task_model"] = config.task_model.spec;
    j["reflector_model"] = config.reflector_model.spec;
    j["temperature"] = config.temperature;
    j["seed"] = config.seed;
    j["max_tokens"] = config.max_tokens;
    j["n_ins"] = config.budget.n_ins;
    j["n_emp"] = config.budget.n_emp;
    j["min_reward_accept"] = config.budget.min_reward_accept;
    j["disable_synthesis"] = config.ablations.disable_synthesis;
    j["disable_reasoning_reflection"] = config.ablations.disable_reasoning_reflection;
    j["single_example_optimization"] = config.ablations.single_example_optimization;
    j["text_only_optimization"] = config.ablations.text_only_optimization;
    j["empirical_update"] =
        config.empirical_update == EmpiricalUpdate::reflection ? "reflection" : "reasoning";
    j["separator"] = config.separator;
    j["budget_tag"] = config.budget_tag;
    j["turn_synthesis_includes_image"] = config.turn_synthesis_includes_image;
    j["task_description"] = config.task_description;
    j["initial_empirical_experience"] = config.initial_empirical_experience;
    return j.dump();
}

} // namespace o1loom
