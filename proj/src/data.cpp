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

#include "o1loom/data.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "o1loom/engine.hpp"
#include "o1loom/util.hpp"

namespace o1loom::data {

using nlohmann::json;

DatasetFile load_dataset(const std::filesystem::path& path, bool lenient,
                         std::vector<std::string>* warnings) {
    const std::string content = util::read_file(path);
    const auto base = path.parent_path();

    DatasetFile dataset;
    dataset.path = path;
    std::vector<std::string> errors;
    std::set<std::string> seen_ids;
    std::optional<Task> task;
    int line_no = 0;
    for (const auto& line : util::split(content, '\n')) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        try {
            Sample sample = sample_from_canonical_json(line, base);
            if (!seen_ids.insert(sample.id).second) {
                throw Error(ErrorKind::schema, "duplicate id: " + sample.id);
            }
            if (task && sample.task != *task) {
                throw Error(ErrorKind::schema, "mixed tasks in one dataset");
            }
            task = sample.task;
            if (sample.visual) {
                if (!std::filesystem::exists(sample.visual->image_path)) {
                    throw Error(ErrorKind::schema,
                                "image not found: " + sample.visual->image_path.string());
                }
                const std::string digest = util::sha256_file_hex(sample.visual->image_path);
                if (!sample.visual->sha256.empty() && sample.visual->sha256 != digest) {
                    throw Error(ErrorKind::schema,
                                "image digest mismatch: " + sample.visual->image_path.string());
                }
                sample.visual->sha256 = digest;
            }
            dataset.records.push_back(std::move(sample));
        } catch (const Error& e) {
            errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!errors.empty()) {
        if (!lenient) {
            std::string message = "invalid dataset " + path.string();
            for (const auto& e : errors) message += "\n  " + e;
            throw Error(ErrorKind::schema, message);
        }
        if (warnings) {
            for (const auto& e : errors) warnings->push_back(e);
        }
    }
    dataset.task = task.value_or(Task::vqa);
    return dataset;
}

std::string dataset_canonical_bytes(const DatasetFile& dataset) {
    std::string out;
    for (const auto& sample : dataset.records) {
        out += canonical_json(sample) + "\n";
    }
    return out;
}

void write_dataset(const DatasetFile& dataset, const std::filesystem::path& path) {
    util::atomic_write_file(path, dataset_canonical_bytes(dataset));
}

// ---------------------------------------------------------------------------
// Mask IO (PGM)

namespace {

// Reads one PGM header token, skipping whitespace and # comments.
std::string next_pgm_token(const std::string& bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
}

long pgm_int(const std::string& bytes, std::size_t& pos, const char* what) {
    const std::string token = next_pgm_token(bytes, pos);
    try {
        std::size_t used = 0;
        const long value = std::stol(token, &used);
        if (used != token.size() || value < 0) throw std::invalid_argument(token);
        return value;
    } catch (const std::exception&) {
        throw Error(ErrorKind::unsupported_format, std::string("bad PGM ") + what);
    }
}

} // namespace

metrics::BitMask load_mask(const std::filesystem::path& path) {
    const std::string bytes = util::read_file(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
        throw Error(ErrorKind::unsupported_format,
                    "not a PGM (P2/P5) raster: " + path.string());
    }
    const bool binary = bytes[1] == '5';
    std::size_t pos = 2;
    const long width = pgm_int(bytes, pos, "width");
    const long height = pgm_int(bytes, pos, "height");
    const long maxval = pgm_int(bytes, pos, "maxval");
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
        throw Error(ErrorKind::unsupported_format, "unsupported PGM geometry: " + path.string());
    }
    metrics::BitMask mask;
    mask.width = static_cast<int>(width);
    mask.height = static_cast<int>(height);
    const std::size_t count = static_cast<std::size_t>(width) * height;
    mask.bits.resize(count);
    if (binary) {
        ++pos; // single whitespace after maxval
        if (bytes.size() - pos < count) {
            throw Error(ErrorKind::unsupported_format, "truncated PGM: " + path.string());
        }
        for (std::size_t i = 0; i < count; ++i) {
            mask.bits[i] = bytes[pos + i] != 0 ? 1 : 0;
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            mask.bits[i] = pgm_int(bytes, pos, "pixel") != 0 ? 1 : 0;
        }
    }
    return mask;
}

void write_mask(const metrics::BitMask& mask, const std::filesystem::path& path) {
    if (mask.width <= 0 || mask.height <= 0 ||
        mask.bits.size() != static_cast<std::size_t>(mask.width) * mask.height) {
        throw Error(ErrorKind::validation, "bits: length does not match width × height");
    }
    std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) +
                      "\n255\n";
    out.reserve(out.size() + mask.bits.size());
    for (const auto bit : mask.bits) {
        out.push_back(bit ? static_cast<char>(255) : '\0');
    }
    util::atomic_write_file(path, out);
}

// ---------------------------------------------------------------------------
// Episodes

std::vector<metrics::EpisodeRecord> load_episodes(const std::filesystem::path& path,
                                                  double success_radius) {
    const std::string content = util::read_file(path);
    std::vector<metrics::EpisodeRecord> episodes;
    int line_no = 0;
    for (const auto& line : util::split(content, '\n')) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::schema,
                        "episode line " + std::to_string(line_no) + ": " + e.what());
        }
        metrics::EpisodeRecord e;
        try {
            e.id = j.at("id").get<std::string>();
            e.success = j.at("success").get<bool>();
            e.shortest_path_length = j.at("shortest_path_length").get<double>();
            e.agent_path_length = j.at("agent_path_length").get<double>();
            e.final_distance_to_goal = j.at("final_distance_to_goal").get<double>();
        } catch (const json::exception& ex) {
            throw Error(ErrorKind::schema,
                        "episode line " + std::to_string(line_no) + ": " + ex.what());
        }
        if (e.shortest_path_length <= 0.0) {
            throw Error(ErrorKind::schema, "episode line " + std::to_string(line_no) +
                                               ": shortest_path_length must be > 0");
        }
        if (e.agent_path_length < 0.0 || e.final_distance_to_goal < 0.0) {
            throw Error(ErrorKind::schema, "episode line " + std::to_string(line_no) +
                                               ": negative distance");
        }
        if (e.success && e.final_distance_to_goal > success_radius) {
            throw Error(ErrorKind::schema,
                        "episode line " + std::to_string(line_no) +
                            ": success inconsistent with distance " +
                            std::to_string(e.final_distance_to_goal) + " > radius " +
                            std::to_string(success_radius));
        }
        episodes.push_back(std::move(e));
    }
    return episodes;
}

void write_episodes(std::span<const metrics::EpisodeRecord> episodes,
                    const std::filesystem::path& path) {
    std::string out;
    for (const auto& e : episodes) {
        json j;
        j["id"] = e.id;
        j["success"] = e.success;
        j["shortest_path_length"] = e.shortest_path_length;
        j["agent_path_length"] = e.agent_path_length;
        j["final_distance_to_goal"] = e.final_distance_to_goal;
        out += j.dump() + "\n";
    }
    util::atomic_write_file(path, out);
}

// ---------------------------------------------------------------------------
// Screening

namespace {

bool word_at(const std::string& haystack, std::size_t pos, std::size_t len) {
    const bool left_ok =
        pos == 0 || !std::isalpha(static_cast<unsigned char>(haystack[pos - 1]));
    const std::size_t end = pos + len;
    const bool right_ok =
        end >= haystack.size() || !std::isalpha(static_cast<unsigned char>(haystack[end]));
    return left_ok && right_ok;
}

} // namespace

ScreeningVerdict screen_ambiguity(const Sample& sample, backends::Backend& backend,
                                  const prompts::TemplateSet& templates, const RunConfig& config) {
    validate(sample);
    prompts::Bindings bindings{{"ambiguous_instruction", sample.instruction.text}};
    const std::string prompt =
        prompts::render(templates.get(prompts::TemplateName::screening), bindings);
    const auto response =
        backend.complete(engine::make_request(config, backend, prompt, sample.visual));

    static const std::vector<std::string> categories = {
        "ellipsis", "colloquialism", "subjectivity", "relativity", "other", "none"};
    const std::string haystack = util::to_lower(response.text);
    std::size_t best_pos = std::string::npos;
    std::string best_category;
    for (const auto& category : categories) {
        std::size_t pos = haystack.find(category);
        while (pos != std::string::npos) {
            if (word_at(haystack, pos, category.size())) {
                if (pos < best_pos) {
                    best_pos = pos;
                    best_category = category;
                }
                break;
            }
            pos = haystack.find(category, pos + 1);
        }
    }
    ScreeningVerdict verdict;
    verdict.sample_id = sample.id;
    verdict.raw_model_text = response.text;
    if (best_pos == std::string::npos) {
        verdict.category = "none";
        verdict.parsed = false;
    } else {
        verdict.category = best_category;
    }
    return verdict;
}

std::map<Ambiguity, double> category_distribution(std::span<const Sample> samples) {
    std::map<Ambiguity, long> counts;
    long total = 0;
    for (const auto& sample : samples) {
        if (!sample.ambiguity) continue;
        ++counts[*sample.ambiguity];
        ++total;
    }
    if (total == 0) {
        throw Error(ErrorKind::no_tagged_samples, "no samples carry an ambiguity tag");
    }
    std::map<Ambiguity, double> out;
    double sum = 0.0;
    for (const auto& [category, count] : counts) {
        const double pct =
            std::round(1000.0 * static_cast<double>(count) / static_cast<double>(total)) / 10.0;
        out[category] = pct;
        sum += pct;
    }
    if (std::abs(sum - 100.0) > 0.1 + 1e-9) {
        throw Error(ErrorKind::internal,
                    "rounded distribution sums to " + std::to_string(sum) + ", outside 100 ± 0.1");
    }
    return out;
}

} // namespace o1loom::data
