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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace o1loom {

enum class ErrorKind {
    validation,         // a domain invariant was violated (names the field)
    schema,             // malformed record in a dataset / experience / script file
    config,             // bad flag, missing option, unusable configuration
    io,                 // filesystem failure
    unsupported_format, // raster or file format we do not read
    parse,              // structured-output grammar violation (see ParseError)
    answer_empty,       // answer tag present but empty after trimming
    reward_range,       // reward outside [0, 1]
    reward_missing,     // no reward tag where one was required
    auth,               // missing or rejected credential
    transport,          // network-level failure (after retries when retried)
    malformed_response, // service reply missing the expected fields
    script_miss,        // scripted backend has no entry for the request
    no_mask,            // segmentation stub has no mask for the key
    dimension_mismatch, // mask shapes differ
    empty_dataset,      // aggregate asked over zero samples
    wrong_answer_count, // VQA consensus needs exactly 10 answers
    division_by_zero,   // improvement over a zero baseline
    insufficient_samples,
    metric_mismatch,    // metric not valid for the task
    no_tagged_samples,
    inference_failed,   // per-sample inference produced no usable answer
    internal,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

// Grammar-level parse failures carry a byte offset into the input text.
enum class ParseKind {
    no_steps,
    bad_budget,
    budget_order,
    reward_range,
    answer_empty,
    orphan_reward, // reward tag with no reflection in the same step
    unclosed_tag,
};

class ParseError : public Error {
  public:
    ParseError(ParseKind parse_kind, std::size_t offset, std::string message)
        : Error(ErrorKind::parse, std::move(message)), parse_kind_(parse_kind), offset_(offset) {}

    ParseKind parse_kind() const { return parse_kind_; }
    std::size_t offset() const { return offset_; }

  private:
    ParseKind parse_kind_;
    std::size_t offset_;
};

} // namespace o1loom
