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

#include "o1loom/backends.hpp"

#include <json.hpp>

#include <chrono>
#include <thread>

#include "o1loom/util.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace o1loom::backends {

using nlohmann::json;

namespace {

const char* role_name(Message::Role role) {
    switch (role) {
    case Message::Role::system: return "system";
    case Message::Role::user: return "user";
    case Message::Role::assistant: return "assistant";
    }
    return "user";
}

long now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

} // namespace

void validate(const ModelRequest& request) {
    if (request.messages.empty()) {
        throw Error(ErrorKind::validation, "messages: at least one message required");
    }
    if (request.temperature < 0.0) {
        throw Error(ErrorKind::validation, "temperature: must be >= 0");
    }
    if (request.max_tokens <= 0) {
        throw Error(ErrorKind::validation, "max_tokens: must be positive");
    }
    for (const auto& message : request.messages) {
        for (const auto& part : message.parts) {
            if (part.kind == MessagePart::Kind::image && part.image_sha256.size() != 64) {
                throw Error(ErrorKind::validation,
                            "image_sha256: image parts must carry a 64-hex digest");
            }
        }
    }
}

std::string canonical_json(const ModelRequest& request) {
    validate(request);
    json j;
    j["backend_id"] = request.backend_id;
    j["model"] = request.model;
    j["temperature"] = request.temperature;
    j["seed"] = request.seed;
    j["max_tokens"] = request.max_tokens;
    json messages = json::array();
    for (const auto& message : request.messages) {
        json parts = json::array();
        for (const auto& part : message.parts) {
            if (part.kind == MessagePart::Kind::text) {
                parts.push_back({{"kind", "text"}, {"text", part.text}});
            } else {
                parts.push_back({{"kind", "image"},
                                 {"image_sha256", part.image_sha256},
                                 {"media_type", to_string(part.media_type)}});
            }
        }
        messages.push_back({{"role", role_name(message.role)}, {"parts", std::move(parts)}});
    }
    j["messages"] = std::move(messages);
    return j.dump();
}

std::string cache_key(const ModelRequest& request) {
    return util::sha256_hex(canonical_json(request));
}

std::string request_text(const ModelRequest& request) {
    std::string out;
    for (const auto& message : request.messages) {
        for (const auto& part : message.parts) {
            if (part.kind != MessagePart::Kind::text) continue;
            if (!out.empty()) out += "\n";
            out += part.text;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// RetryingBackend

RetryingBackend::RetryingBackend(std::shared_ptr<Backend> inner, RetryPolicy policy,
                                 std::shared_ptr<CallCounters> counters, Sleeper sleeper)
    : inner_(std::move(inner)), policy_(policy), counters_(std::move(counters)),
      sleeper_(std::move(sleeper)) {
    if (!sleeper_) {
        sleeper_ = [](long ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
    }
}

ModelResponse RetryingBackend::complete(const ModelRequest& request) {
    long delay = policy_.base_ms;
    for (int attempt = 1;; ++attempt) {
        try {
            return inner_->complete(request);
        } catch (const TransientError&) {
            if (attempt >= policy_.max_attempts) {
                throw;
            }
            if (counters_) counters_->retries.fetch_add(1);
            sleeper_(delay);
            delay = static_cast<long>(delay * policy_.factor);
        }
    }
}

// ---------------------------------------------------------------------------
// CachedBackend

CachedBackend::CachedBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir,
                             std::shared_ptr<CallCounters> counters)
    : inner_(std::move(inner)), dir_(std::move(dir)), counters_(std::move(counters)) {}

std::filesystem::path CachedBackend::entry_path(const std::string& key) const {
    return dir_ / key.substr(0, 2) / (key + ".entry");
}

ModelResponse CachedBackend::complete(const ModelRequest& request) {
    const std::string key = cache_key(request);
    const auto path = entry_path(key);
    if (std::filesystem::exists(path)) {
        try {
            const json entry = json::parse(util::read_file(path));
            ModelResponse response;
            response.text = entry.at("response").at("text").get<std::string>();
            response.usage.prompt_tokens = entry["response"].value("prompt_tokens", 0L);
            response.usage.completion_tokens = entry["response"].value("completion_tokens", 0L);
            response.latency_ms = entry["response"].value("latency_ms", 0L);
            response.cached = true;
            if (counters_) counters_->cache_hits.fetch_add(1);
            return response;
        } catch (const json::exception&) {
            // Corrupt entry: fall through and rewrite it.
        }
    }
    if (counters_) counters_->cache_misses.fetch_add(1);
    ModelResponse response = inner_->complete(request);
    json entry;
    entry["request"] = json::parse(canonical_json(request));
    entry["response"] = {{"text", response.text},
                         {"prompt_tokens", response.usage.prompt_tokens},
                         {"completion_tokens", response.usage.completion_tokens},
                         {"latency_ms", response.latency_ms}};
    entry["timestamp_ms"] = now_ms();
    util::atomic_write_file(path, entry.dump() + "\n");
    return response;
}

// ---------------------------------------------------------------------------
// WireBackend

WireBackend::WireBackend(WireOptions options, std::shared_ptr<CallCounters> counters)
    : options_(std::move(options)), counters_(std::move(counters)) {}

std::string WireBackend::wire_body(const ModelRequest& request, const std::string& model) {
    json body;
    body["model"] = model.empty() ? request.model : model;
    body["temperature"] = request.temperature;
    body["seed"] = request.seed;
    body["max_tokens"] = request.max_tokens;
    json messages = json::array();
    for (const auto& message : request.messages) {
        json content = json::array();
        for (const auto& part : message.parts) {
            if (part.kind == MessagePart::Kind::text) {
                content.push_back({{"type", "text"}, {"text", part.text}});
            } else {
                const std::string bytes = util::read_file(part.image_path);
                const std::string url = "data:image/" + to_string(part.media_type) + ";base64," +
                                        util::base64_encode(bytes);
                content.push_back(
                    {{"type", "image_url"}, {"image_url", {{"url", url}}}});
            }
        }
        messages.push_back({{"role", role_name(message.role)}, {"content", std::move(content)}});
    }
    body["messages"] = std::move(messages);
    return body.dump();
}

ModelResponse WireBackend::complete(const ModelRequest& request) {
    validate(request);
    if (options_.api_key.empty()) {
        throw Error(ErrorKind::auth, "missing credential: set O1LOOM_API_KEY");
    }
    if (options_.base_url.empty()) {
        throw Error(ErrorKind::config, "missing base URL: set --base-url or O1LOOM_BASE_URL");
    }

    httplib::Client client(options_.base_url);
    client.set_connection_timeout(options_.timeout_ms / 1000, (options_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(options_.timeout_ms / 1000, (options_.timeout_ms % 1000) * 1000);
    client.set_bearer_token_auth(options_.api_key);

    const std::string body = wire_body(request, options_.model);
    if (counters_) counters_->backend_calls.fetch_add(1);
    const long started = now_ms();
    httplib::Result result = client.Post("/v1/chat/completions", body, "application/json");
    const long elapsed = now_ms() - started;

    if (!result) {
        throw TransientError("transport failure: " + httplib::to_string(result.error()));
    }
    const int status = result->status;
    if (status == 401 || status == 403) {
        throw Error(ErrorKind::auth, "credential rejected (HTTP " + std::to_string(status) + ")");
    }
    if (status == 429 || status >= 500) {
        throw TransientError("HTTP " + std::to_string(status));
    }
    if (status != 200) {
        throw Error(ErrorKind::transport, "HTTP " + std::to_string(status) + ": " + result->body);
    }

    json reply;
    try {
        reply = json::parse(result->body);
    } catch (const json::exception&) {
        throw Error(ErrorKind::malformed_response, "response body is not JSON");
    }
    if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty() ||
        !reply["choices"][0].contains("message") ||
        !reply["choices"][0]["message"].contains("content") ||
        !reply["choices"][0]["message"]["content"].is_string()) {
        throw Error(ErrorKind::malformed_response, "missing choices[0].message.content");
    }
    ModelResponse response;
    response.text = reply["choices"][0]["message"]["content"].get<std::string>();
    if (response.text.empty()) {
        throw Error(ErrorKind::malformed_response, "service returned empty text");
    }
    if (reply.contains("usage")) {
        response.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0L);
        response.usage.completion_tokens = reply["usage"].value("completion_tokens", 0L);
    }
    response.latency_ms = elapsed;
    return response;
}

// ---------------------------------------------------------------------------
// SegmentationStub

namespace {

std::string stub_key(const std::string& sample_id, const std::string& instruction_text) {
    return sample_id + "\n" + util::sha256_hex(instruction_text);
}

} // namespace

SegmentationStub::SegmentationStub(const std::filesystem::path& table_file) {
    const std::string content = util::read_file(table_file);
    const auto base = table_file.parent_path();
    for (const auto& line : util::split(content, '\n')) {
        if (util::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::schema, std::string("bad segmentation table line: ") + e.what());
        }
        std::filesystem::path mask = j.at("mask").get<std::string>();
        if (mask.is_relative() && !base.empty()) mask = base / mask;
        table_[j.at("sample_id").get<std::string>() + "\n" +
               j.at("instruction_sha256").get<std::string>()] = mask;
    }
}

void SegmentationStub::add(const std::string& sample_id, const std::string& instruction_text,
                           const std::filesystem::path& mask_path) {
    table_[stub_key(sample_id, instruction_text)] = mask_path;
}

SegmentationResult SegmentationStub::segment(const std::string& sample_id,
                                             const Instruction& instruction) const {
    const auto it = table_.find(stub_key(sample_id, instruction.text));
    if (it == table_.end()) {
        throw Error(ErrorKind::no_mask,
                    "no mask for sample " + sample_id + " with this instruction");
    }
    return SegmentationResult{it->second, 0, 0};
}

void SegmentationStub::save(const std::filesystem::path& table_file) const {
    std::string out;
    for (const auto& [key, mask] : table_) {
        const auto split_at = key.find('\n');
        json j;
        j["sample_id"] = key.substr(0, split_at);
        j["instruction_sha256"] = key.substr(split_at + 1);
        j["mask"] = mask.generic_string();
        out += j.dump() + "\n";
    }
    util::atomic_write_file(table_file, out);
}

} // namespace o1loom::backends
