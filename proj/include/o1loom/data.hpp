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

#include <map>
#include <span>
#include <string>
#include <vector>

#include "o1loom/backends.hpp"
#include "o1loom/core.hpp"
#include "o1loom/metrics.hpp"
#include "o1loom/prompts.hpp"

namespace o1loom::data {

struct DatasetFile {
    std::filesystem::path path;
    Task task = Task::vqa;
    std::vector<Sample> records;
    int schema_version = 1;
};

// One self-contained JSON record per line. Relative image and mask paths
// resolve against the dataset file's directory; image digests are computed
// (and verified when the record carries one) at load. Strict loads fail on
// the first collected batch of errors; lenient loads skip bad lines and
// report them through warnings.
DatasetFile load_dataset(const std::filesystem::path& path, bool lenient = false,
                         std::vector<std::string>* warnings = nullptr);

std::string dataset_canonical_bytes(const DatasetFile& dataset);
void write_dataset(const DatasetFile& dataset, const std::filesystem::path& path);

// PGM (P5 binary or P2 ASCII) rasters; nonzero pixels are foreground.
// Anything else is unsupported_format.
metrics::BitMask load_mask(const std::filesystem::path& path);
void write_mask(const metrics::BitMask& mask, const std::filesystem::path& path);

// Line-delimited episode records for VLN evaluation. success within an
// episode must be consistent with the success radius.
std::vector<metrics::EpisodeRecord> load_episodes(const std::filesystem::path& path,
                                                  double success_radius = 3.0);
void write_episodes(std::span<const metrics::EpisodeRecord> episodes,
                    const std::filesystem::path& path);

struct ScreeningVerdict {
    std::string sample_id;
    std::string category; // one of the five causes, or "none"
    std::string raw_model_text;
    bool parsed = true;   // false when the reply had no recognizable token
};

// Asks the backend to classify the cause of ambiguity and scans the reply
// for the first category token; unrecognizable replies map to "none" with
// parsed = false.
ScreeningVerdict screen_ambiguity(const Sample& sample, backends::Backend& backend,
                                  const prompts::TemplateSet& templates, const RunConfig& config);

// Percentages over tagged samples, rounded to one decimal. The rounded
// values must sum to 100 within 0.1.
std::map<Ambiguity, double> category_distribution(std::span<const Sample> samples);

} // namespace o1loom::data
