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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "o1loom/error.hpp"
#include "o1loom/metrics.hpp"

using namespace o1loom;
using namespace o1loom::metrics;

namespace {

BitMask mask2x2(std::initializer_list<int> bits) {
    BitMask m;
    m.width = 2;
    m.height = 2;
    for (const int b : bits) m.bits.push_back(static_cast<std::uint8_t>(b));
    return m;
}

// Independent set-based oracle.
double iou_oracle(const BitMask& a, const BitMask& b) {
    std::set<std::size_t> sa, sb;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        if (a.bits[i]) sa.insert(i);
        if (b.bits[i]) sb.insert(i);
    }
    std::set<std::size_t> inter, uni;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                          std::inserter(inter, inter.begin()));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(uni, uni.begin()));
    if (uni.empty()) return 1.0;
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

} // namespace

TEST_CASE("identical nonempty masks score 1") {
    const auto m = mask2x2({1, 0, 1, 1});
    CHECK(iou(m, m) == 1.0);
}

TEST_CASE("hand-counted 2x2 case is one third") {
    // a covers (0,0),(0,1); b covers (0,1),(1,1): intersection 1, union 3.
    const auto a = mask2x2({1, 0, 1, 0});
    const auto b = mask2x2({0, 0, 1, 1});
    CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("all 256 pairs of 2x2 masks match the set oracle exactly") {
    for (int x = 0; x < 16; ++x) {
        for (int y = 0; y < 16; ++y) {
            const auto a = mask2x2({x & 1, (x >> 1) & 1, (x >> 2) & 1, (x >> 3) & 1});
            const auto b = mask2x2({y & 1, (y >> 1) & 1, (y >> 2) & 1, (y >> 3) & 1});
            CHECK(iou(a, b) == iou_oracle(a, b));
        }
    }
}

TEST_CASE("degenerate masks follow the configured convention") {
    const auto empty = mask2x2({0, 0, 0, 0});
    const auto full = mask2x2({1, 1, 1, 1});
    CHECK(iou(empty, empty) == 1.0);
    CHECK(iou(empty, empty, {.empty_pair_is_one = false}) == 0.0);
    CHECK(iou(empty, full) == 0.0);
    CHECK(iou(full, empty) == 0.0);
}

TEST_CASE("dimension mismatch is an error") {
    BitMask wide;
    wide.width = 4;
    wide.height = 1;
    wide.bits = {1, 0, 0, 0};
    CHECK_THROWS_AS(iou(wide, mask2x2({1, 0, 0, 0})), Error);
}

TEST_CASE("iou is symmetric and bounded on random masks") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> bit(0, 1);
    for (int round = 0; round < 200; ++round) {
        BitMask a, b;
        a.width = b.width = 5;
        a.height = b.height = 3;
        for (int i = 0; i < 15; ++i) {
            a.bits.push_back(static_cast<std::uint8_t>(bit(rng)));
            b.bits.push_back(static_cast<std::uint8_t>(bit(rng)));
        }
        const double ab = iou(a, b);
        CHECK(ab == iou(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("gIoU is the mean, cIoU pools intersections and unions") {
    // pair1: identical 2x2 full masks (inter 4, union 4);
    // pair2: disjoint single pixels (inter 0, union 2).
    std::vector<MaskPair> pairs;
    pairs.emplace_back(mask2x2({1, 1, 1, 1}), mask2x2({1, 1, 1, 1}));
    pairs.emplace_back(mask2x2({1, 0, 0, 0}), mask2x2({0, 1, 0, 0}));
    CHECK(giou_dataset(pairs) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ciou_dataset(pairs) == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
    CHECK(giou_dataset(pairs) != ciou_dataset(pairs));
}

TEST_CASE("five-pair fixture matches the hand-derived aggregate to 1e-12") {
    std::vector<MaskPair> pairs;
    pairs.emplace_back(mask2x2({1, 1, 0, 0}), mask2x2({1, 0, 0, 0})); // 1/2
    pairs.emplace_back(mask2x2({1, 1, 1, 1}), mask2x2({1, 1, 1, 1})); // 1
    pairs.emplace_back(mask2x2({0, 0, 0, 0}), mask2x2({0, 0, 1, 1})); // 0
    pairs.emplace_back(mask2x2({1, 0, 1, 0}), mask2x2({0, 0, 1, 1})); // 1/3
    pairs.emplace_back(mask2x2({1, 1, 1, 0}), mask2x2({0, 1, 1, 1})); // 2/4
    const double expected_g = (0.5 + 1.0 + 0.0 + 1.0 / 3.0 + 0.5) / 5.0;
    const double expected_c = (1.0 + 4.0 + 0.0 + 1.0 + 2.0) / (2.0 + 4.0 + 2.0 + 3.0 + 4.0);
    CHECK(std::abs(giou_dataset(pairs) - expected_g) < 1e-12);
    CHECK(std::abs(ciou_dataset(pairs) - expected_c) < 1e-12);
    CHECK_THROWS_AS(giou_dataset(std::vector<MaskPair>{}), Error);

    std::vector<MaskPair> single(pairs.begin(), pairs.begin() + 1);
    CHECK(giou_dataset(single) == doctest::Approx(0.5));
}

TEST_CASE("when every pair scores equally, gIoU equals cIoU") {
    std::vector<MaskPair> pairs;
    pairs.emplace_back(mask2x2({1, 1, 1, 1}), mask2x2({1, 1, 1, 1}));
    pairs.emplace_back(mask2x2({1, 0, 0, 0}), mask2x2({1, 0, 0, 0}));
    CHECK(giou_dataset(pairs) == ciou_dataset(pairs));
}

// ---------------------------------------------------------------------------
// VQA consensus

namespace {

std::vector<std::string> humans_with(const std::string& match, int n) {
    std::vector<std::string> out;
    for (int i = 0; i < 10; ++i) {
        out.push_back(i < n ? match : "filler " + std::to_string(i));
    }
    return out;
}

// Leave-one-out enumeration oracle over normalized equality.
double vqa_oracle(int matches) {
    double sum = 0.0;
    for (int leave = 0; leave < 10; ++leave) {
        const int kept = matches - (leave < matches ? 1 : 0);
        sum += std::min(kept / 3.0, 1.0);
    }
    return sum / 10.0;
}

} // namespace

TEST_CASE("consensus accuracy follows the leave-one-out oracle") {
    CHECK(vqa_accuracy("bowl", humans_with("cup", 10)) == 0.0);
    CHECK(vqa_accuracy("bowl", humans_with("bowl", 2)) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(vqa_accuracy("bowl", humans_with("bowl", 2)) == doctest::Approx(vqa_oracle(2)));
    for (int n = 4; n <= 10; ++n) {
        CHECK(vqa_accuracy("bowl", humans_with("bowl", n)) == 1.0);
    }
    for (int n = 0; n <= 10; ++n) {
        CHECK(vqa_accuracy("bowl", humans_with("bowl", n)) == doctest::Approx(vqa_oracle(n)));
    }
}

TEST_CASE("normalization ignores case, punctuation, and articles") {
    const auto humans = humans_with("the red bowl", 3);
    const double base = vqa_accuracy("red bowl", humans);
    CHECK(base > 0.0);
    CHECK(vqa_accuracy("The Red Bowl!", humans) == base);
    CHECK(vqa_accuracy("a red bowl.", humans) == base);
    CHECK(vqa_accuracy("  red   bowl ", humans) == base);
}

TEST_CASE("answer order never matters") {
    std::vector<std::string> humans = humans_with("bowl", 3);
    const double before = vqa_accuracy("bowl", humans);
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(humans.begin(), humans.end(), rng);
        CHECK(vqa_accuracy("bowl", humans) == before);
    }
}

TEST_CASE("exactly ten answers are required") {
    std::vector<std::string> nine(9, "x");
    try {
        vqa_accuracy("x", nine);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::wrong_answer_count);
    }
}

// ---------------------------------------------------------------------------
// BLEU-1

TEST_CASE("bleu1 matches the brevity penalty formula") {
    CHECK(bleu1("the cat sat", std::vector<std::string>{"the cat sat"}) == 1.0);
    CHECK(bleu1("the cat", std::vector<std::string>{"the cat sat"}) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
    CHECK(bleu1("the the the", std::vector<std::string>{"the cat"}) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(bleu1("", std::vector<std::string>{"the cat"}) == 0.0);
}

TEST_CASE("bleu1 clips per token against the best reference count") {
    // "the" appears twice in one reference: clipping allows two of three.
    CHECK(bleu1("the the the", std::vector<std::string>{"the cat the"}) ==
          doctest::Approx(2.0 / 3.0));
}

TEST_CASE("closest reference length drives the brevity penalty") {
    // c=2; references of length 3 and 2: the length-2 reference is closest,
    // so no penalty applies.
    CHECK(bleu1("the cat", std::vector<std::string>{"the cat sat", "the cat"}) == 1.0);
}

TEST_CASE("bleu1 never exceeds one") {
    std::mt19937_64 rng(13);
    static const char* words[] = {"a", "b", "c", "d"};
    std::uniform_int_distribution<int> len(1, 6), pick(0, 3);
    for (int i = 0; i < 200; ++i) {
        auto sentence = [&] {
            std::string s;
            const int n = len(rng);
            for (int k = 0; k < n; ++k) {
                if (!s.empty()) s += " ";
                s += words[pick(rng)];
            }
            return s;
        };
        const double score = bleu1(sentence(), std::vector<std::string>{sentence(), sentence()});
        CHECK(score >= 0.0);
        CHECK(score <= 1.0);
    }
}

TEST_CASE("corpus bleu pools counts across samples") {
    const std::vector<std::string> preds = {"the cat", "a dog"};
    const std::vector<std::vector<std::string>> refs = {{"the cat"}, {"a dog"}};
    CHECK(bleu1_corpus(preds, refs) == 1.0);
}

// ---------------------------------------------------------------------------
// VLN

TEST_CASE("success weighted by path length follows the formula") {
    std::vector<EpisodeRecord> episodes = {{"e1", true, 5.0, 10.0, 0.5}};
    const auto summary = vln_metrics(episodes);
    CHECK(summary.sr == doctest::Approx(100.0));
    CHECK(summary.spl == doctest::Approx(50.0));
    CHECK(summary.navi_error == doctest::Approx(0.5));
}

TEST_CASE("all failures score zero rates and mean distance") {
    std::vector<EpisodeRecord> episodes = {{"e1", false, 5.0, 9.0, 6.0},
                                           {"e2", false, 4.0, 2.0, 8.0}};
    const auto summary = vln_metrics(episodes);
    CHECK(summary.sr == 0.0);
    CHECK(summary.spl == 0.0);
    CHECK(summary.navi_error == doctest::Approx(7.0));
    CHECK_THROWS_AS(vln_metrics(std::vector<EpisodeRecord>{}), Error);
}

TEST_CASE("improving a fixture moves the metrics in the reported directions") {
    std::vector<EpisodeRecord> before = {{"e1", false, 5.0, 7.0, 9.0},
                                         {"e2", true, 6.0, 8.0, 1.0},
                                         {"e3", false, 4.0, 4.0, 6.0}};
    std::vector<EpisodeRecord> after = {{"e1", true, 5.0, 6.0, 1.5},
                                        {"e2", true, 6.0, 6.5, 0.8},
                                        {"e3", false, 4.0, 5.0, 4.0}};
    const auto b = vln_metrics(before);
    const auto a = vln_metrics(after);
    CHECK(a.sr > b.sr);
    CHECK(a.spl > b.spl);
    CHECK(a.navi_error < b.navi_error);
    // Exact formula evaluation for the improved set.
    CHECK(a.spl == doctest::Approx(100.0 * (5.0 / 6.0 + 6.0 / 6.5) / 3.0).epsilon(1e-12));
    CHECK(a.navi_error == doctest::Approx((1.5 + 0.8 + 4.0) / 3.0).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// Improvement reporting

TEST_CASE("improvement percentages render sign and two decimals") {
    CHECK(format_improvement(0.1088, 0.0237) == "+359.07%");
    CHECK(format_improvement(5.99, 7.95) == "−24.65%");
    CHECK(format_improvement(1.0, 1.0) == "+0.00%");
    CHECK(format_improvement(5.0, 0.0) == "n/a");
    CHECK(improvement_pct(0.1088, 0.0237) == doctest::Approx(359.0717299578059));
    CHECK_THROWS_AS(improvement_pct(1.0, 0.0), Error);
}

TEST_CASE("aggregates are permutation invariant") {
    std::vector<MaskPair> pairs;
    pairs.emplace_back(mask2x2({1, 1, 0, 0}), mask2x2({1, 0, 0, 0}));
    pairs.emplace_back(mask2x2({0, 0, 0, 1}), mask2x2({0, 0, 1, 1}));
    pairs.emplace_back(mask2x2({1, 1, 1, 1}), mask2x2({1, 1, 1, 0}));
    auto reversed = pairs;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(giou_dataset(pairs) == giou_dataset(reversed));
    CHECK(ciou_dataset(pairs) == ciou_dataset(reversed));
}

TEST_CASE("reports round-trip through json") {
    EvalReport report;
    report.per_sample["s1"] = {{"acc", 0.6}, {"bleu1", 0.5}};
    report.aggregate = {{"acc", 60.0}, {"bleu1", 0.5}};
    report.baseline = std::map<std::string, double>{{"acc", 30.0}, {"bleu1", 0.4}};
    report.improvement = std::map<std::string, double>{{"acc", 100.0}, {"bleu1", 25.0}};
    const auto back = report_from_json(report_to_json(report));
    CHECK(back.per_sample == report.per_sample);
    CHECK(back.aggregate == report.aggregate);
    CHECK(back.baseline == report.baseline);
    CHECK(back.improvement == report.improvement);
}
