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

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "o1loom/core.hpp"
#include "o1loom/error.hpp"

namespace o1loom::backends {

struct MessagePart {
    enum class Kind { text, image };
    Kind kind = Kind::text;
    std::string text;
    std::string image_sha256;            // identity of an image part
    MediaType media_type = MediaType::png;
    std::filesystem::path image_path;    // transport only, not hashed
};

struct Message {
    enum class Role { system, user, assistant };
    Role role = Role::user;
    std::vector<MessagePart> parts;
};

struct ModelRequest {
    std::string backend_id;
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.0;
    long seed = 42;
    int max_tokens = 1024;
};

void validate(const ModelRequest& request);

// Key-sorted canonical form over identity fields (image parts contribute
// their digest, never their path), and its SHA-256.
std::string canonical_json(const ModelRequest& request);
std::string cache_key(const ModelRequest& request);

// All text parts of the request joined by newlines; what contains-text
// script rules match against.
std::string request_text(const ModelRequest& request);

struct Usage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct ModelResponse {
    std::string text;
    Usage usage;
    bool cached = false;
    long latency_ms = 0;
};

// Shared across the wrapper stack so manifests can report totals.
struct CallCounters {
    std::atomic<long> cache_hits{0};
    std::atomic<long> cache_misses{0};
    std::atomic<long> backend_calls{0}; // completions actually executed
    std::atomic<long> retries{0};       // transient failures that were retried
};

class Backend {
  public:
    virtual ~Backend() = default;
    virtual ModelResponse complete(const ModelRequest& request) = 0;
    virtual std::string id() const = 0;
};

// Marks an error retryable by the retry wrapper (timeouts, 429, 5xx).
class TransientError : public Error {
  public:
    explicit TransientError(std::string message)
        : Error(ErrorKind::transport, std::move(message)) {}
};

struct RetryPolicy {
    long base_ms = 1000;
    double factor = 2.0;
    int max_attempts = 5;
};

using Sleeper = std::function<void(long /*ms*/)>;

// Retries TransientError with exponential backoff: sleep base * factor^(k-1)
// after attempt k, up to max_attempts attempts in total.
class RetryingBackend : public Backend {
  public:
    RetryingBackend(std::shared_ptr<Backend> inner, RetryPolicy policy,
                    std::shared_ptr<CallCounters> counters, Sleeper sleeper = nullptr);

    ModelResponse complete(const ModelRequest& request) override;
    std::string id() const override { return inner_->id(); }

  private:
    std::shared_ptr<Backend> inner_;
    RetryPolicy policy_;
    std::shared_ptr<CallCounters> counters_;
    Sleeper sleeper_;
};

// Content-addressed response cache: <dir>/<first 2 hex>/<digest>.entry.
// Entries replay the recorded text, usage, and latency, so a warm rerun is
// byte-stable. Writes are atomic; concurrent writers of one key converge.
class CachedBackend : public Backend {
  public:
    CachedBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir,
                  std::shared_ptr<CallCounters> counters);

    ModelResponse complete(const ModelRequest& request) override;
    std::string id() const override { return inner_->id(); }

  private:
    std::filesystem::path entry_path(const std::string& key) const;

    std::shared_ptr<Backend> inner_;
    std::filesystem::path dir_;
    std::shared_ptr<CallCounters> counters_;
};

struct WireOptions {
    std::string base_url;   // e.g. https://api.example.com
    std::string api_key;    // from O1LOOM_API_KEY unless set
    std::string model;
    long timeout_ms = 120000;
};

// POST {base_url}/v1/chat/completions with typed content parts; images ride
// as base64 data URLs. One attempt per call; wrap in RetryingBackend for the
// documented backoff schedule.
class WireBackend : public Backend {
  public:
    WireBackend(WireOptions options, std::shared_ptr<CallCounters> counters);

    ModelResponse complete(const ModelRequest& request) override;
    std::string id() const override { return "wire:" + options_.model; }

    // Exposed for tests: the JSON body sent on the wire.
    static std::string wire_body(const ModelRequest& request, const std::string& model);

  private:
    WireOptions options_;
    std::shared_ptr<CallCounters> counters_;
};

struct SegmentationResult {
    std::filesystem::path mask_path;
    int width = 0;
    int height = 0;
};

// Lookup-table stand-in for an external segmentation model, keyed by
// (sample_id, instruction digest).
class SegmentationStub {
  public:
    SegmentationStub() = default;
    explicit SegmentationStub(const std::filesystem::path& table_file);

    void add(const std::string& sample_id, const std::string& instruction_text,
             const std::filesystem::path& mask_path);

    // Throws Error(no_mask) on a miss.
    SegmentationResult segment(const std::string& sample_id,
                               const Instruction& instruction) const;

    void save(const std::filesystem::path& table_file) const;

  private:
    std::map<std::string, std::filesystem::path> table_; // sample_id \n digest -> mask
};

} // namespace o1loom::backends
