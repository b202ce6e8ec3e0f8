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
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "o1loom/backends.hpp"
#include "o1loom/core.hpp"
#include "o1loom/scripted.hpp"

namespace o1loom::cli {

// String option bag shared by the CLI front end and the C API. Keys use the
// flag spelling without dashes ("task-model", "n-emp", ...); repeated values
// accumulate.
using Options = std::map<std::string, std::vector<std::string>>;

// Exit codes: 0 success, 1 internal, 2 usage/config, 3 backend/transport.
int cmd_optimize(const Options& options, std::ostream& out, std::ostream& err);
int cmd_run(const Options& options, std::ostream& out, std::ostream& err);
int cmd_eval(const Options& options, std::ostream& out, std::ostream& err);
int cmd_screen(const Options& options, std::ostream& out, std::ostream& err);
int cmd_report(const Options& options, std::ostream& out, std::ostream& err);

int dispatch(const std::string& command, const Options& options, std::ostream& out,
             std::ostream& err);

int exit_code_for(const Error& error);

// Effective configuration after flags > config file > environment > defaults.
struct Resolved {
    RunConfig config;
    std::string base_url;
    std::string api_key;
    std::string cache_dir;
    long retry_base_ms = 1000;
    int parallel = 1;
    std::string traces_dir;
    std::string templates_dir;
    bool lenient = false;
};

Resolved resolve_options(const Options& options);

struct BackendStack {
    std::shared_ptr<backends::Backend> backend; // outermost wrapper
    std::shared_ptr<scripted::ScriptedBackend> scripted; // set for script/grammar specs
    std::shared_ptr<backends::CallCounters> counters;
};

// "wire:<model>" (or bare model name), "script:<path>",
// "record:<model>@<path>", "grammar:<budget>:<answer>". The stack is
// retry-wrapped and, when a cache directory is configured, cache-wrapped.
BackendStack make_backend(const std::string& spec, const Resolved& resolved,
                          std::shared_ptr<backends::CallCounters> counters);

} // namespace o1loom::cli
