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
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "o1loom/core.hpp"
#include "o1loom/util.hpp"

namespace testsup {

// A caching directory inherited from the environment would break the
// call-count assertions; tests always pass --cache explicitly.
inline const int kEnvSanitized = [] {
    unsetenv("O1LOOM_CACHE_DIR");
    return 0;
}();

inline std::filesystem::path fixtures_dir() { return O1LOOM_FIXTURES_DIR; }
inline std::string cli_path() { return O1LOOM_CLI_PATH; }

class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("o1loom_test_" + std::to_string(rng() % 1000000000) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    o1loom::util::atomic_write_file(path, content);
}

inline std::filesystem::path copy_tiny_png(const std::filesystem::path& dir,
                                           const std::string& name = "img.png") {
    const auto dst = dir / name;
    std::filesystem::copy_file(fixtures_dir() / "tiny.png", dst,
                               std::filesystem::copy_options::overwrite_existing);
    return dst;
}

// n answers matching `match`, padded to 10 with distinct fillers.
inline std::vector<std::string> answers_with_matches(const std::string& match, int n) {
    std::vector<std::string> answers;
    for (int i = 0; i < 10; ++i) {
        answers.push_back(i < n ? match : "filler answer number " + std::to_string(i));
    }
    return answers;
}

inline o1loom::Sample vqa_sample(const std::string& id, const std::filesystem::path& image,
                                 const std::string& instruction,
                                 std::vector<std::string> answers) {
    o1loom::Sample s;
    s.id = id;
    s.task = o1loom::Task::vqa;
    s.visual = o1loom::VisualContext{image, o1loom::MediaType::png,
                                     o1loom::util::sha256_file_hex(image)};
    s.instruction = {instruction, o1loom::InstructionKind::ambiguous};
    s.answers = std::move(answers);
    return s;
}

struct CliResult {
    int code = -1;
    std::string output;
};

inline CliResult run_cli(const std::string& args) {
    CliResult result;
    const std::string command = cli_path() + " " + args + " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) return result;
    char buffer[4096];
    while (const auto n = fread(buffer, 1, sizeof buffer, pipe)) {
        result.output.append(buffer, n);
        if (n < sizeof buffer) break;
    }
    const int status = pclose(pipe);
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

} // namespace testsup
