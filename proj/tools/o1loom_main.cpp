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

// Command-line front end. Parses flags and forwards them through the C API.

#include <CLI11.hpp>

#include <memory>
#include <string>
#include <vector>

#include "o1loom.h"

namespace {

struct OptsHandle {
    o1l_opts* opts = o1l_opts_new();
    ~OptsHandle() { o1l_opts_free(opts); }
};

void add_option(CLI::App* cmd, o1l_opts* opts, const std::string& name,
                const std::string& help) {
    cmd->add_option("--" + name, help)->each([opts, name](const std::string& value) {
        o1l_opts_add(opts, name.c_str(), value.c_str());
    });
}

void add_flag(CLI::App* cmd, o1l_opts* opts, const std::string& name, const std::string& help) {
    cmd->add_flag("--" + name, help)->each([opts, name](const std::string&) {
        o1l_opts_add(opts, name.c_str(), "true");
    });
}

void add_common(CLI::App* cmd, o1l_opts* opts) {
    add_option(cmd, opts, "config", "JSON config file (flags override it)");
    add_option(cmd, opts, "seed", "decoding seed (default 42)");
    add_option(cmd, opts, "temperature", "decoding temperature (default 0.0)");
    add_option(cmd, opts, "max-tokens", "completion token limit");
    add_option(cmd, opts, "base-url", "chat-completions endpoint (or O1LOOM_BASE_URL)");
    add_option(cmd, opts, "cache", "response cache directory (or O1LOOM_CACHE_DIR)");
    add_option(cmd, opts, "retry-base-ms", "backoff base in milliseconds (default 1000)");
    add_option(cmd, opts, "templates", "prompt template override directory");
    add_option(cmd, opts, "budget-tag", "countdown tag token (default count)");
    add_option(cmd, opts, "separator", "experience concatenation separator (default \\n)");
    add_option(cmd, opts, "ablations",
               "comma list: disable_synthesis, disable_reasoning_reflection, "
               "single_example_optimization, text_only_optimization");
    add_option(cmd, opts, "empirical-update", "reflection (default) or reasoning");
    add_option(cmd, opts, "task-description", "override the per-task description line");
    add_option(cmd, opts, "parallel", "worker count (default 1)");
    add_option(cmd, opts, "manifest", "manifest path override");
    add_flag(cmd, opts, "lenient", "skip invalid dataset records with warnings");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"o1loom: budget-tracked disambiguation engine and evaluation harness"};
    app.set_version_flag("--version", o1l_version());
    app.require_subcommand(1);

    OptsHandle optimize_opts, run_opts, eval_opts, screen_opts, report_opts;

    auto* optimize = app.add_subcommand("optimize", "learn an empirical experience once");
    add_common(optimize, optimize_opts.opts);
    add_option(optimize, optimize_opts.opts, "task", "ris, vqa, or vln");
    add_option(optimize, optimize_opts.opts, "data", "training dataset (JSONL)");
    add_option(optimize, optimize_opts.opts, "samples", "iterations / distinct samples (n_emp)");
    add_option(optimize, optimize_opts.opts, "n-emp", "alias for --samples");
    add_option(optimize, optimize_opts.opts, "general-model", "general-intelligence model spec");
    add_option(optimize, optimize_opts.opts, "reflector-model",
               "reflector model spec (defaults to the general model)");
    add_option(optimize, optimize_opts.opts, "out", "experience file to write");
    add_option(optimize, optimize_opts.opts, "dev", "dev dataset for checkpoint selection");
    add_option(optimize, optimize_opts.opts, "metric", "selection metric: acc or bleu1");
    add_option(optimize, optimize_opts.opts, "checkpoints", "checkpoint directory");
    add_option(optimize, optimize_opts.opts, "initial-experience",
               "starting experience text");

    auto* run = app.add_subcommand("run", "run inference over a dataset");
    add_common(run, run_opts.opts);
    add_option(run, run_opts.opts, "mode", "instantial or empirical");
    add_option(run, run_opts.opts, "execution", "single_shot (default) or turn_based");
    add_option(run, run_opts.opts, "data", "dataset (JSONL)");
    add_option(run, run_opts.opts, "experience", "experience file (empirical mode)");
    add_option(run, run_opts.opts, "task-model", "task model spec");
    add_option(run, run_opts.opts, "out", "predictions file to write");
    add_option(run, run_opts.opts, "n-ins", "instantial budget (default 10)");
    add_option(run, run_opts.opts, "min-reward-accept", "early-accept reward gate");
    add_option(run, run_opts.opts, "traces", "directory for raw trace transcripts");

    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    add_common(eval, eval_opts.opts);
    add_option(eval, eval_opts.opts, "task", "ris, vqa, or vln");
    add_option(eval, eval_opts.opts, "preds", "predictions file (episodes file for vln)");
    add_option(eval, eval_opts.opts, "data", "dataset with ground truth");
    add_option(eval, eval_opts.opts, "metrics", "comma list of metric ids");
    add_option(eval, eval_opts.opts, "baseline", "baseline report for improvement columns");
    add_option(eval, eval_opts.opts, "seg-table", "segmentation stub table (RIS)");
    add_option(eval, eval_opts.opts, "out", "report file (default <preds>.report.json)");
    add_option(eval, eval_opts.opts, "success-radius", "VLN success radius in meters");
    add_flag(eval, eval_opts.opts, "corpus-bleu", "corpus-level BLEU-1 instead of per-sample");

    auto* screen = app.add_subcommand("screen", "flag ambiguous instructions with a model");
    add_common(screen, screen_opts.opts);
    add_option(screen, screen_opts.opts, "data", "dataset to screen");
    add_option(screen, screen_opts.opts, "model", "screening model spec");
    add_option(screen, screen_opts.opts, "out", "flagged dataset to write");

    auto* report = app.add_subcommand("report", "compare run reports side by side");
    add_common(report, report_opts.opts);
    add_option(report, report_opts.opts, "runs", "report files (repeatable; first is baseline)");
    add_option(report, report_opts.opts, "format", "table (default) or csv");
    add_option(report, report_opts.opts, "out", "write the rendered report here too");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (optimize->parsed()) return o1l_cmd_optimize(optimize_opts.opts);
    if (run->parsed()) return o1l_cmd_run(run_opts.opts);
    if (eval->parsed()) return o1l_cmd_eval(eval_opts.opts);
    if (screen->parsed()) return o1l_cmd_screen(screen_opts.opts);
    if (report->parsed()) return o1l_cmd_report(report_opts.opts);
    return 2;
}
