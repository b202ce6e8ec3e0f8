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

#include "o1loom/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "o1loom/error.hpp"
#include "o1loom/util.hpp"

namespace o1loom::metrics {

using nlohmann::json;

namespace {

void check_dimensions(const BitMask& a, const BitMask& b) {
    if (a.width != b.width || a.height != b.height) {
        throw Error(ErrorKind::dimension_mismatch,
                    "mask dimensions differ: " + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                        std::to_string(b.height));
    }
    const auto expect = static_cast<std::size_t>(a.width) * a.height;
    if (a.bits.size() != expect || b.bits.size() != expect) {
        throw Error(ErrorKind::validation, "bits: length does not match width × height");
    }
}

struct Overlap {
    long long intersection = 0;
    long long uni = 0;
};

Overlap overlap(const BitMask& a, const BitMask& b) {
    check_dimensions(a, b);
    Overlap o;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        const bool fa = a.bits[i] != 0;
        const bool fb = b.bits[i] != 0;
        o.intersection += fa && fb;
        o.uni += fa || fb;
    }
    return o;
}

} // namespace

double iou(const BitMask& a, const BitMask& b, const IouOptions& options) {
    const Overlap o = overlap(a, b);
    if (o.uni == 0) {
        return options.empty_pair_is_one ? 1.0 : 0.0;
    }
    return static_cast<double>(o.intersection) / static_cast<double>(o.uni);
}

double giou_dataset(std::span<const MaskPair> pairs, const IouOptions& options) {
    if (pairs.empty()) {
        throw Error(ErrorKind::empty_dataset, "no mask pairs");
    }
    double sum = 0.0;
    for (const auto& [pred, gt] : pairs) {
        sum += iou(pred, gt, options);
    }
    return sum / static_cast<double>(pairs.size());
}

double ciou_dataset(std::span<const MaskPair> pairs, const IouOptions& options) {
    if (pairs.empty()) {
        throw Error(ErrorKind::empty_dataset, "no mask pairs");
    }
    long long inter = 0;
    long long uni = 0;
    for (const auto& [pred, gt] : pairs) {
        const Overlap o = overlap(pred, gt);
        inter += o.intersection;
        uni += o.uni;
    }
    if (uni == 0) {
        return options.empty_pair_is_one ? 1.0 : 0.0;
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

std::vector<std::string> lower_tokens(const std::string& text, bool drop_articles) {
    std::string spaced;
    spaced.reserve(text.size());
    for (const char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::ispunct(u)) {
            spaced.push_back(' ');
        } else {
            spaced.push_back(static_cast<char>(std::tolower(u)));
        }
    }
    std::istringstream in(spaced);
    std::vector<std::string> tokens;
    std::string token;
    while (in >> token) {
        if (drop_articles && (token == "a" || token == "an" || token == "the")) continue;
        tokens.push_back(token);
    }
    return tokens;
}

} // namespace

std::string normalize_answer(const std::string& text) {
    std::string out;
    for (const auto& token : lower_tokens(text, /*drop_articles=*/true)) {
        if (!out.empty()) out.push_back(' ');
        out += token;
    }
    return out;
}

double vqa_accuracy(const std::string& pred, std::span<const std::string> human_answers) {
    if (human_answers.size() != 10) {
        throw Error(ErrorKind::wrong_answer_count,
                    "expected exactly 10 human answers, got " +
                        std::to_string(human_answers.size()));
    }
    const std::string norm_pred = normalize_answer(pred);
    std::vector<bool> match(10);
    int total_matches = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        match[i] = normalize_answer(human_answers[i]) == norm_pred;
        total_matches += match[i];
    }
    double sum = 0.0;
    for (std::size_t leave = 0; leave < 10; ++leave) {
        const int in_subset = total_matches - (match[leave] ? 1 : 0);
        sum += std::min(in_subset / 3.0, 1.0);
    }
    return sum / 10.0;
}

namespace {

// BLEU tokenization keeps articles; only the VQA consensus drops them.
std::vector<std::string> tokenize(const std::string& text) {
    return lower_tokens(text, /*drop_articles=*/false);
}

} // namespace

double bleu1(const std::string& pred, std::span<const std::string> references) {
    if (references.empty()) {
        throw Error(ErrorKind::empty_dataset, "bleu1 needs at least one reference");
    }
    const auto candidate = tokenize(pred);
    const auto c = static_cast<long>(candidate.size());
    if (c == 0) {
        return 0.0;
    }

    std::map<std::string, long> max_ref_counts;
    long closest_r = 0;
    long best_gap = -1;
    for (const auto& ref_text : references) {
        const auto ref = tokenize(ref_text);
        std::map<std::string, long> counts;
        for (const auto& t : ref) ++counts[t];
        for (const auto& [t, n] : counts) {
            max_ref_counts[t] = std::max(max_ref_counts[t], n);
        }
        const auto r = static_cast<long>(ref.size());
        const long gap = std::labs(r - c);
        if (best_gap < 0 || gap < best_gap || (gap == best_gap && r < closest_r)) {
            best_gap = gap;
            closest_r = r;
        }
    }

    std::map<std::string, long> cand_counts;
    for (const auto& t : candidate) ++cand_counts[t];
    long clipped = 0;
    for (const auto& [t, n] : cand_counts) {
        const auto it = max_ref_counts.find(t);
        if (it != max_ref_counts.end()) clipped += std::min(n, it->second);
    }
    const double precision = static_cast<double>(clipped) / static_cast<double>(c);
    const double bp = c < closest_r ? std::exp(1.0 - static_cast<double>(closest_r) / c) : 1.0;
    return precision * bp;
}

double bleu1_corpus(std::span<const std::string> preds,
                    std::span<const std::vector<std::string>> references) {
    if (preds.empty() || preds.size() != references.size()) {
        throw Error(ErrorKind::empty_dataset, "corpus bleu1 needs matched preds and references");
    }
    long total_clipped = 0;
    long total_c = 0;
    long total_r = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto candidate = tokenize(preds[i]);
        const auto c = static_cast<long>(candidate.size());
        std::map<std::string, long> max_ref_counts;
        long closest_r = 0;
        long best_gap = -1;
        for (const auto& ref_text : references[i]) {
            const auto ref = tokenize(ref_text);
            std::map<std::string, long> counts;
            for (const auto& t : ref) ++counts[t];
            for (const auto& [t, n] : counts) {
                max_ref_counts[t] = std::max(max_ref_counts[t], n);
            }
            const auto r = static_cast<long>(ref.size());
            const long gap = std::labs(r - c);
            if (best_gap < 0 || gap < best_gap || (gap == best_gap && r < closest_r)) {
                best_gap = gap;
                closest_r = r;
            }
        }
        std::map<std::string, long> cand_counts;
        for (const auto& t : candidate) ++cand_counts[t];
        for (const auto& [t, n] : cand_counts) {
            const auto it = max_ref_counts.find(t);
            if (it != max_ref_counts.end()) total_clipped += std::min(n, it->second);
        }
        total_c += c;
        total_r += closest_r;
    }
    if (total_c == 0) return 0.0;
    const double precision = static_cast<double>(total_clipped) / static_cast<double>(total_c);
    const double bp =
        total_c < total_r ? std::exp(1.0 - static_cast<double>(total_r) / total_c) : 1.0;
    return precision * bp;
}

VlnSummary vln_metrics(std::span<const EpisodeRecord> episodes) {
    if (episodes.empty()) {
        throw Error(ErrorKind::empty_dataset, "no episodes");
    }
    double successes = 0.0;
    double spl_sum = 0.0;
    double error_sum = 0.0;
    for (const auto& e : episodes) {
        successes += e.success ? 1.0 : 0.0;
        if (e.success) {
            const double denom = std::max(e.agent_path_length, e.shortest_path_length);
            spl_sum += denom > 0.0 ? e.shortest_path_length / denom : 0.0;
        }
        error_sum += e.final_distance_to_goal;
    }
    const auto n = static_cast<double>(episodes.size());
    return VlnSummary{100.0 * successes / n, 100.0 * spl_sum / n, error_sum / n};
}

double improvement_pct(double new_value, double old_value) {
    if (old_value == 0.0) {
        throw Error(ErrorKind::division_by_zero, "baseline value is zero");
    }
    return 100.0 * (new_value - old_value) / old_value;
}

std::string format_improvement_pct(double pct) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", std::abs(pct));
    // U+2212 minus for negatives, matching the reporting typography.
    const bool negative = pct < 0.0 && std::string(buf) != "0.00";
    return (negative ? "−" : "+") + std::string(buf) + "%";
}

std::string format_improvement(double new_value, double old_value) {
    if (old_value == 0.0) {
        return "n/a";
    }
    return format_improvement_pct(improvement_pct(new_value, old_value));
}

std::string report_to_json(const EvalReport& report) {
    json j;
    json per = json::object();
    for (const auto& [id, values] : report.per_sample) {
        per[id] = values;
    }
    j["per_sample"] = std::move(per);
    j["aggregate"] = report.aggregate;
    if (report.baseline) j["baseline"] = *report.baseline;
    if (report.improvement) j["improvement_pct"] = *report.improvement;
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::schema, std::string("bad report file: ") + e.what());
    }
    EvalReport report;
    for (const auto& [id, values] : j.value("per_sample", json::object()).items()) {
        report.per_sample[id] = values.get<std::map<std::string, double>>();
    }
    report.aggregate = j.value("aggregate", json::object()).get<std::map<std::string, double>>();
    if (j.contains("baseline")) {
        report.baseline = j["baseline"].get<std::map<std::string, double>>();
    }
    if (j.contains("improvement_pct")) {
        report.improvement = j["improvement_pct"].get<std::map<std::string, double>>();
    }
    return report;
}

} // namespace o1loom::metrics
