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

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace o1loom::metrics {

struct BitMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits; // row-major, nonzero = foreground

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
};

struct IouOptions {
    // Both masks empty: 1.0 (the two agree there is no object). The RIS
    // literature sometimes scores this 0.0; flip here for that convention.
    bool empty_pair_is_one = true;
};

double iou(const BitMask& a, const BitMask& b, const IouOptions& options = {});

using MaskPair = std::pair<BitMask, BitMask>; // (prediction, ground truth)

// Mean of per-pair IoU.
double giou_dataset(std::span<const MaskPair> pairs, const IouOptions& options = {});

// Sum of intersections over sum of unions.
double ciou_dataset(std::span<const MaskPair> pairs, const IouOptions& options = {});

// Lowercases, maps punctuation to spaces, drops the articles a/an/the, and
// collapses whitespace.
std::string normalize_answer(const std::string& text);

// Consensus accuracy over exactly 10 human answers: the mean over the 10
// leave-one-out subsets of min(matches / 3, 1).
double vqa_accuracy(const std::string& pred, std::span<const std::string> human_answers);

// Modified unigram precision with per-token clipping, times the brevity
// penalty exp(1 - r/c) when the candidate is shorter than the closest
// reference. An empty candidate scores 0.
double bleu1(const std::string& pred, std::span<const std::string> references);

// Corpus-level variant: pooled clipped counts and pooled brevity penalty.
double bleu1_corpus(std::span<const std::string> preds,
                    std::span<const std::vector<std::string>> references);

struct EpisodeRecord {
    std::string id;
    bool success = false;
    double shortest_path_length = 0.0; // meters, > 0
    double agent_path_length = 0.0;    // meters, >= 0
    double final_distance_to_goal = 0.0;
};

struct VlnSummary {
    double sr = 0.0;         // success rate, percent
    double spl = 0.0;        // success weighted by path length, percent
    double navi_error = 0.0; // mean final distance to goal, meters
};

VlnSummary vln_metrics(std::span<const EpisodeRecord> episodes);

// 100 * (new - old) / old. Throws division_by_zero when old == 0.
double improvement_pct(double new_value, double old_value);

// Sign-explicit, two decimals, e.g. "+359.07%" / "−24.65%".
std::string format_improvement_pct(double pct);

// "n/a" when the baseline is zero.
std::string format_improvement(double new_value, double old_value);

struct EvalReport {
    std::map<std::string, std::map<std::string, double>> per_sample; // id -> metric -> value
    std::map<std::string, double> aggregate;                         // metric -> value
    std::optional<std::map<std::string, double>> baseline;
    std::optional<std::map<std::string, double>> improvement; // percent vs baseline
};

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json_text);

} // namespace o1loom::metrics
