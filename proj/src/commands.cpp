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

#include "o1loom/commands.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>

#include "o1loom/data.hpp"
#include "o1loom/engine.hpp"
#include "o1loom/metrics.hpp"
#include "o1loom/optimizer.hpp"
#include "o1loom/prompts.hpp"
#include "o1loom/util.hpp"
#include "o1loom/version.hpp"

namespace o1loom::cli {

using nlohmann::json;

namespace {

std::optional<std::string> opt(const Options& options, const std::string& key) {
    const auto it = options.find(key);
    if (it == options.end() || it->second.empty()) return std::nullopt;
    return it->second.back();
}

std::string require(const Options& options, const std::string& key) {
    auto value = opt(options, key);
    if (!value || value->empty()) {
        throw Error(ErrorKind::config, "missing required option: --" + key);
    }
    return *value;
}

long parse_long(const std::string& value, const std::string& key) {
    long out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw Error(ErrorKind::config, "option --" + key + " expects an integer, got: " + value);
    }
    return out;
}

double parse_double(const std::string& value, const std::string& key) {
    char* end = nullptr;
    const double out = std::strtod(value.c_str(), &end);
    if (end != value.c_str() + value.size() || value.empty()) {
        throw Error(ErrorKind::config, "option --" + key + " expects a number, got: " + value);
    }
    return out;
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1" || value == "yes" || value.empty()) return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw Error(ErrorKind::config, "option --" + key + " expects a boolean, got: " + value);
}

std::string unescape(const std::string& value) {
    std::string out;
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (value[i] == '\\' && i + 1 < value.size()) {
            const char next = value[i + 1];
            if (next == 'n') { out.push_back('\n'); ++i; continue; }
            if (next == 't') { out.push_back('\t'); ++i; continue; }
            if (next == '\\') { out.push_back('\\'); ++i; continue; }
        }
        out.push_back(value[i]);
    }
    return out;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "ablations",      "base-url",       "baseline",    "budget-tag",
        "cache",          "checkpoints",    "config",      "corpus-bleu",
        "data",           "dev",            "empirical-update",
        "execution",      "experience",     "format",      "general-model",
        "initial-experience",               "lenient",     "manifest",
        "max-tokens",     "metric",         "metrics",     "min-reward-accept",
        "mode",           "model",          "n-emp",       "n-ins",
        "out",            "parallel",       "preds",       "reflector-model",
        "retry-base-ms",  "runs",           "samples",     "seed",
        "seg-table",      "separator",      "success-radius",
        "task",           "task-description",              "task-model",
        "temperature",    "templates",      "traces",
    };
    return keys;
}

Options merge_layers(const Options& flags) {
    Options merged;
    if (const auto config_path = opt(flags, "config")) {
        json j;
        try {
            j = json::parse(util::read_file(*config_path));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::config,
                        "bad config file " + *config_path + ": " + e.what());
        }
        if (!j.is_object()) {
            throw Error(ErrorKind::config, "config file must hold a JSON object");
        }
        for (const auto& [key, value] : j.items()) {
            std::vector<std::string> values;
            if (value.is_string()) {
                values.push_back(value.get<std::string>());
            } else if (value.is_array()) {
                for (const auto& v : value) {
                    values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
                }
            } else {
                values.push_back(value.dump());
            }
            merged[key] = std::move(values);
        }
    }
    for (const auto& [key, values] : flags) {
        merged[key] = values; // flags win over the config file
    }
    return merged;
}

} // namespace

Resolved resolve_options(const Options& flags) {
    Resolved r;
    if (const char* v = std::getenv("O1LOOM_BASE_URL")) r.base_url = v;
    if (const char* v = std::getenv("O1LOOM_CACHE_DIR")) r.cache_dir = v;
    if (const char* v = std::getenv("O1LOOM_API_KEY")) r.api_key = v;

    const Options options = merge_layers(flags);
    for (const auto& [key, values] : options) {
        if (!known_keys().count(key)) {
            throw Error(ErrorKind::config, "unknown option: --" + key);
        }
    }

    if (const auto v = opt(options, "mode")) {
        const auto mode = mode_from_string(*v);
        if (!mode) throw Error(ErrorKind::config, "unknown mode: " + *v);
        r.config.mode = *mode;
    }
    if (const auto v = opt(options, "execution")) {
        if (*v == "single_shot") r.config.execution = Execution::single_shot;
        else if (*v == "turn_based") r.config.execution = Execution::turn_based;
        else throw Error(ErrorKind::config, "unknown execution: " + *v);
    }
    if (const auto v = opt(options, "task")) {
        const auto task = task_from_string(*v);
        if (!task) throw Error(ErrorKind::config, "unknown task: " + *v);
        r.config.task = *task;
    }
    if (const auto v = opt(options, "task-model")) r.config.task_model.spec = *v;
    if (const auto v = opt(options, "general-model")) r.config.task_model.spec = *v;
    if (const auto v = opt(options, "reflector-model")) r.config.reflector_model.spec = *v;
    if (const auto v = opt(options, "temperature")) {
        r.config.temperature = parse_double(*v, "temperature");
        if (r.config.temperature < 0) {
            throw Error(ErrorKind::config, "temperature must be >= 0");
        }
    }
    if (const auto v = opt(options, "seed")) r.config.seed = parse_long(*v, "seed");
    if (const auto v = opt(options, "max-tokens")) {
        r.config.max_tokens = static_cast<int>(parse_long(*v, "max-tokens"));
        if (r.config.max_tokens <= 0) {
            throw Error(ErrorKind::config, "max-tokens must be positive");
        }
    }
    if (const auto v = opt(options, "n-ins")) {
        r.config.budget.n_ins = static_cast<int>(parse_long(*v, "n-ins"));
    }
    if (const auto v = opt(options, "n-emp")) {
        r.config.budget.n_emp = static_cast<int>(parse_long(*v, "n-emp"));
    }
    if (const auto v = opt(options, "samples")) {
        r.config.budget.n_emp = static_cast<int>(parse_long(*v, "samples"));
    }
    if (r.config.budget.n_ins < 1 || r.config.budget.n_emp < 1) {
        throw Error(ErrorKind::config, "budgets must be >= 1");
    }
    if (const auto v = opt(options, "min-reward-accept")) {
        r.config.budget.min_reward_accept = parse_double(*v, "min-reward-accept");
        if (r.config.budget.min_reward_accept < 0 || r.config.budget.min_reward_accept > 1) {
            throw Error(ErrorKind::config, "min-reward-accept must be in [0, 1]");
        }
    }
    if (const auto it = options.find("ablations"); it != options.end()) {
        for (const auto& group : it->second) {
            for (const auto& raw : util::split(group, ',')) {
                const std::string name = util::trim(raw);
                if (name.empty()) continue;
                if (name == "disable_synthesis") r.config.ablations.disable_synthesis = true;
                else if (name == "disable_reasoning_reflection")
                    r.config.ablations.disable_reasoning_reflection = true;
                else if (name == "single_example_optimization")
                    r.config.ablations.single_example_optimization = true;
                else if (name == "text_only_optimization")
                    r.config.ablations.text_only_optimization = true;
                else throw Error(ErrorKind::config, "unknown ablation: " + name);
            }
        }
    }
    if (const auto v = opt(options, "empirical-update")) {
        if (*v == "reflection") r.config.empirical_update = EmpiricalUpdate::reflection;
        else if (*v == "reasoning") r.config.empirical_update = EmpiricalUpdate::reasoning;
        else throw Error(ErrorKind::config, "empirical-update must be reflection or reasoning");
    }
    if (const auto v = opt(options, "separator")) r.config.separator = unescape(*v);
    if (const auto v = opt(options, "budget-tag")) {
        if (v->empty() || v->find_first_of("<>/ \t\n") != std::string::npos) {
            throw Error(ErrorKind::config, "budget-tag must be a bare tag token");
        }
        r.config.budget_tag = *v;
    }
    if (const auto v = opt(options, "task-description")) r.config.task_description = *v;
    if (const auto v = opt(options, "initial-experience")) {
        r.config.initial_empirical_experience = *v;
    }
    if (const auto v = opt(options, "base-url")) r.base_url = *v;
    if (const auto v = opt(options, "cache")) r.cache_dir = *v;
    if (const auto v = opt(options, "retry-base-ms")) {
        r.retry_base_ms = parse_long(*v, "retry-base-ms");
        if (r.retry_base_ms < 0) throw Error(ErrorKind::config, "retry-base-ms must be >= 0");
    }
    if (const auto v = opt(options, "parallel")) {
        r.parallel = static_cast<int>(parse_long(*v, "parallel"));
        if (r.parallel < 1) throw Error(ErrorKind::config, "parallel must be >= 1");
    }
    if (const auto v = opt(options, "traces")) r.traces_dir = *v;
    if (const auto v = opt(options, "templates")) r.templates_dir = *v;
    if (const auto v = opt(options, "lenient")) r.lenient = parse_bool(*v, "lenient");
    return r;
}

BackendStack make_backend(const std::string& spec, const Resolved& resolved,
                          std::shared_ptr<backends::CallCounters> counters) {
    if (spec.empty()) {
        throw Error(ErrorKind::config, "missing model spec");
    }
    BackendStack stack;
    stack.counters = counters;
    std::shared_ptr<backends::Backend> inner;
    if (spec.rfind("script:", 0) == 0) {
        auto scripted = scripted::ScriptedBackend::play(spec.substr(7));
        scripted->set_counters(counters);
        stack.scripted = scripted;
        inner = scripted;
    } else if (spec.rfind("grammar:", 0) == 0) {
        const std::string rest = spec.substr(8);
        const auto colon = rest.find(':');
        if (colon == std::string::npos) {
            throw Error(ErrorKind::config, "grammar spec is grammar:<budget>:<answer>");
        }
        const int budget = static_cast<int>(parse_long(rest.substr(0, colon), "grammar budget"));
        auto scripted = scripted::build_grammar_responder(
            budget, rest.substr(colon + 1), trace::TraceTags{resolved.config.budget_tag});
        scripted->set_counters(counters);
        stack.scripted = scripted;
        inner = scripted;
    } else if (spec.rfind("record:", 0) == 0) {
        const std::string rest = spec.substr(7);
        const auto at = rest.find('@');
        if (at == std::string::npos) {
            throw Error(ErrorKind::config, "record spec is record:<model>@<script-file>");
        }
        auto wire = std::make_shared<backends::WireBackend>(
            backends::WireOptions{resolved.base_url, resolved.api_key, rest.substr(0, at)},
            counters);
        auto recorder = scripted::ScriptedBackend::record(wire, rest.substr(at + 1));
        stack.scripted = recorder;
        inner = recorder;
    } else {
        const std::string model = spec.rfind("wire:", 0) == 0 ? spec.substr(5) : spec;
        inner = std::make_shared<backends::WireBackend>(
            backends::WireOptions{resolved.base_url, resolved.api_key, model}, counters);
    }
    auto retrying = std::make_shared<backends::RetryingBackend>(
        inner, backends::RetryPolicy{resolved.retry_base_ms, 2.0, 5}, counters);
    if (resolved.cache_dir.empty()) {
        stack.backend = retrying;
    } else {
        stack.backend =
            std::make_shared<backends::CachedBackend>(retrying, resolved.cache_dir, counters);
    }
    return stack;
}

namespace {

prompts::TemplateSet make_templates(const Resolved& resolved) {
    auto templates = prompts::default_templates(resolved.config.budget_tag);
    if (!resolved.templates_dir.empty()) {
        templates = prompts::load_template_overrides(resolved.templates_dir, templates);
    }
    return templates;
}

std::string command_line_string(const std::string& command, const Options& options) {
    std::string out = "o1loom " + command;
    for (const auto& [key, values] : options) {
        for (const auto& value : values) {
            out += " --" + key + " " + value;
        }
    }
    return out;
}

struct Manifest {
    std::string command_line;
    long seed = 42;
    std::string config_sha256;
    std::string dataset_sha256;
    std::optional<std::string> experience_sha256;
    std::optional<std::string> output_sha256;
    long cache_hits = 0;
    long cache_misses = 0;
    long remote_calls = 0;
    long retries = 0;
    long warnings = 0;
    long wall_time_ms = 0;
};

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    json j;
    j["command_line"] = manifest.command_line;
    j["tool_version"] = kVersion;
    j["seed"] = manifest.seed;
    j["config_sha256"] = manifest.config_sha256;
    j["dataset_sha256"] = manifest.dataset_sha256;
    if (manifest.experience_sha256) j["experience_sha256"] = *manifest.experience_sha256;
    if (manifest.output_sha256) j["output_sha256"] = *manifest.output_sha256;
    j["cache_hits"] = manifest.cache_hits;
    j["cache_misses"] = manifest.cache_misses;
    j["remote_calls"] = manifest.remote_calls;
    j["retries"] = manifest.retries;
    j["warnings"] = manifest.warnings;
    j["wall_time_ms"] = manifest.wall_time_ms;
    util::atomic_write_file(path, j.dump(2) + "\n");
}

class CommandScope {
  public:
    CommandScope(const std::string& command, const Options& options, const Resolved& resolved)
        : started_(std::chrono::steady_clock::now()), resolved_(resolved) {
        manifest_.command_line = command_line_string(command, options);
        manifest_path_ = opt(options, "manifest").value_or("");
        counters_ = std::make_shared<backends::CallCounters>();
    }

    std::shared_ptr<backends::CallCounters> counters() { return counters_; }
    Manifest& manifest() { return manifest_; }

    void finish(const std::filesystem::path& default_manifest_path) {
        manifest_.seed = resolved_.config.seed;
        manifest_.config_sha256 = util::sha256_hex(canonical_json(resolved_.config));
        manifest_.cache_hits = counters_->cache_hits.load();
        manifest_.cache_misses = counters_->cache_misses.load();
        manifest_.remote_calls = counters_->backend_calls.load();
        manifest_.retries = counters_->retries.load();
        manifest_.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - started_)
                                     .count();
        const std::filesystem::path path =
            manifest_path_.empty() ? default_manifest_path : std::filesystem::path(manifest_path_);
        write_manifest(manifest_, path);
    }

  private:
    std::chrono::steady_clock::time_point started_;
    const Resolved& resolved_;
    Manifest manifest_;
    std::string manifest_path_;
    std::shared_ptr<backends::CallCounters> counters_;
};

int exit_guard(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

std::string shortest_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return ec == std::errc() ? std::string(buf, ptr) : std::to_string(value);
}

} // namespace

int exit_code_for(const Error& error) {
    switch (error.kind()) {
    case ErrorKind::config:
    case ErrorKind::validation:
    case ErrorKind::schema:
    case ErrorKind::io:
    case ErrorKind::unsupported_format:
    case ErrorKind::insufficient_samples:
    case ErrorKind::metric_mismatch:
    case ErrorKind::wrong_answer_count:
    case ErrorKind::empty_dataset:
    case ErrorKind::no_tagged_samples:
    case ErrorKind::division_by_zero:
        return 2;
    case ErrorKind::auth:
    case ErrorKind::transport:
    case ErrorKind::script_miss:
    case ErrorKind::malformed_response:
        return 3;
    default:
        return 1;
    }
}

// ---------------------------------------------------------------------------
// optimize

int cmd_optimize(const Options& options, std::ostream& out, std::ostream& err) {
    return exit_guard(err, [&]() -> int {
        Resolved resolved = resolve_options(options);
        resolved.config.mode = ExperienceMode::empirical;
        const std::string data_path = require(options, "data");
        const std::string out_path = require(options, "out");

        CommandScope scope("optimize", options, resolved);
        const auto dataset = data::load_dataset(data_path, resolved.lenient);
        resolved.config.task = dataset.task;
        scope.manifest().dataset_sha256 = util::sha256_file_hex(data_path);

        const std::string general_spec = resolved.config.task_model.spec;
        if (general_spec.empty()) {
            throw Error(ErrorKind::config, "missing required option: --general-model");
        }
        auto general = make_backend(general_spec, resolved, scope.counters());
        const std::string reflector_spec = resolved.config.reflector_model.spec.empty()
                                               ? general_spec
                                               : resolved.config.reflector_model.spec;
        resolved.config.reflector_model.spec = reflector_spec;
        auto reflector = reflector_spec == general_spec
                             ? general
                             : make_backend(reflector_spec, resolved, scope.counters());
        const auto templates = make_templates(resolved);

        const auto run = optim::optimize_empirical(dataset.records, resolved.config,
                                                   *general.backend, *reflector.backend,
                                                   templates);
        Experience chosen = run.checkpoints.back();
        if (const auto dev_path = opt(options, "dev")) {
            const auto dev = data::load_dataset(*dev_path, resolved.lenient);
            const std::string metric = opt(options, "metric").value_or("acc");
            std::vector<double> scores;
            chosen = optim::select_best_checkpoint(run, dev.records, metric, resolved.config,
                                                   *general.backend, templates, &scores);
            out << "checkpoint scores (" << metric << "):";
            for (const auto s : scores) out << " " << shortest_double(s);
            out << "\n";
        }
        save_experience(chosen, out_path);
        const std::string checkpoints_dir =
            opt(options, "checkpoints").value_or(out_path + ".checkpoints");
        optim::save_checkpoints(run, checkpoints_dir);

        const std::string digest = util::sha256_file_hex(out_path);
        scope.manifest().experience_sha256 = digest;
        scope.manifest().output_sha256 = digest;
        scope.finish(out_path + ".manifest.json");
        out << "optimized experience over " << run.samples_used.size() << " iterations -> "
            << out_path << "\n";
        return 0;
    });
}

// ---------------------------------------------------------------------------
// run

int cmd_run(const Options& options, std::ostream& out, std::ostream& err) {
    return exit_guard(err, [&]() -> int {
        Resolved resolved = resolve_options(options);
        if (const auto v = opt(options, "mode"); !v && !opt(options, "config")) {
            throw Error(ErrorKind::config, "missing required option: --mode");
        }
        const std::string data_path = require(options, "data");
        const std::string out_path = require(options, "out");

        std::optional<Experience> experience;
        if (const auto exp_path = opt(options, "experience")) {
            experience = load_experience(*exp_path);
        }
        if (resolved.config.mode == ExperienceMode::empirical && !experience &&
            !resolved.config.ablations.disable_reasoning_reflection) {
            throw Error(ErrorKind::config, "empirical mode requires --experience");
        }

        CommandScope scope("run", options, resolved);
        const auto dataset = data::load_dataset(data_path, resolved.lenient);
        resolved.config.task = dataset.task;
        scope.manifest().dataset_sha256 = util::sha256_file_hex(data_path);
        if (const auto exp_path = opt(options, "experience")) {
            scope.manifest().experience_sha256 = util::sha256_file_hex(*exp_path);
        }

        if (resolved.config.task_model.spec.empty()) {
            throw Error(ErrorKind::config, "missing required option: --task-model");
        }
        auto backend = make_backend(resolved.config.task_model.spec, resolved, scope.counters());
        const auto templates = make_templates(resolved);

        engine::RunDatasetOptions run_options;
        run_options.parallelism = resolved.parallel;
        if (!resolved.traces_dir.empty()) run_options.traces_dir = resolved.traces_dir;

        std::string buffer;
        long errors = 0;
        engine::run_dataset(dataset.records, resolved.config, *backend.backend, templates,
                            experience ? &*experience : nullptr, run_options,
                            [&](const engine::PredictionRecord& record) {
                                buffer += engine::to_json_line(record) + "\n";
                                if (record.error) ++errors;
                            });
        util::atomic_write_file(out_path, buffer);
        scope.manifest().output_sha256 = util::sha256_hex(buffer);
        scope.manifest().warnings = errors;
        scope.finish(out_path + ".manifest.json");
        out << dataset.records.size() << " predictions (" << errors << " errors) -> " << out_path
            << "\n";
        return 0;
    });
}

// ---------------------------------------------------------------------------
// eval

namespace {

const std::set<std::string>& metrics_for_task(Task task) {
    static const std::set<std::string> vqa = {"acc", "bleu1"};
    static const std::set<std::string> ris = {"giou", "ciou"};
    static const std::set<std::string> vln = {"sr", "spl", "navi_error"};
    switch (task) {
    case Task::vqa: return vqa;
    case Task::ris: return ris;
    case Task::vln: return vln;
    }
    return vqa;
}

std::vector<std::string> requested_metrics(const Options& options, Task task) {
    std::vector<std::string> metrics;
    if (const auto it = options.find("metrics"); it != options.end()) {
        for (const auto& group : it->second) {
            for (const auto& raw : util::split(group, ',')) {
                const auto name = util::trim(raw);
                if (!name.empty()) metrics.push_back(name);
            }
        }
    }
    if (metrics.empty()) {
        metrics.assign(metrics_for_task(task).begin(), metrics_for_task(task).end());
    }
    for (const auto& metric : metrics) {
        if (!metrics_for_task(task).count(metric)) {
            throw Error(ErrorKind::metric_mismatch,
                        "metric " + metric + " is not valid for task " + to_string(task));
        }
    }
    return metrics;
}

std::map<std::string, engine::PredictionRecord> load_predictions(
    const std::filesystem::path& path) {
    std::map<std::string, engine::PredictionRecord> preds;
    int line_no = 0;
    for (const auto& line : util::split(util::read_file(path), '\n')) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        try {
            auto record = engine::prediction_from_json_line(line);
            if (!preds.emplace(record.id, std::move(record)).second) {
                throw Error(ErrorKind::schema, "duplicate prediction id");
            }
        } catch (const Error& e) {
            throw Error(ErrorKind::schema,
                        "predictions line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return preds;
}

} // namespace

int cmd_eval(const Options& options, std::ostream& out, std::ostream& err) {
    return exit_guard(err, [&]() -> int {
        Resolved resolved = resolve_options(options);
        const std::string task_name = require(options, "task");
        const auto task = task_from_string(task_name);
        if (!task) throw Error(ErrorKind::config, "unknown task: " + task_name);
        resolved.config.task = *task;
        const auto metric_names = requested_metrics(options, *task);
        const std::string preds_path = require(options, "preds");

        CommandScope scope("eval", options, resolved);
        metrics::EvalReport report;
        long warnings = 0;

        if (*task == Task::vln) {
            const double radius = opt(options, "success-radius")
                                      ? parse_double(*opt(options, "success-radius"),
                                                     "success-radius")
                                      : 3.0;
            const auto episodes = data::load_episodes(preds_path, radius);
            scope.manifest().dataset_sha256 = util::sha256_file_hex(preds_path);
            const auto summary = metrics::vln_metrics(episodes);
            for (const auto& e : episodes) {
                report.per_sample[e.id] = {{"success", e.success ? 1.0 : 0.0},
                                           {"navi_error", e.final_distance_to_goal}};
            }
            for (const auto& metric : metric_names) {
                if (metric == "sr") report.aggregate["sr"] = summary.sr;
                if (metric == "spl") report.aggregate["spl"] = summary.spl;
                if (metric == "navi_error") report.aggregate["navi_error"] = summary.navi_error;
            }
        } else {
            const std::string data_path = require(options, "data");
            const auto dataset = data::load_dataset(data_path, resolved.lenient);
            if (dataset.task != *task) {
                throw Error(ErrorKind::config, "dataset task " + to_string(dataset.task) +
                                                   " does not match --task " + task_name);
            }
            scope.manifest().dataset_sha256 = util::sha256_file_hex(data_path);
            const auto preds = load_predictions(preds_path);
            if (preds.size() != dataset.records.size()) {
                throw Error(ErrorKind::config,
                            "id mismatch: " + std::to_string(preds.size()) + " predictions vs " +
                                std::to_string(dataset.records.size()) + " dataset records");
            }
            for (const auto& sample : dataset.records) {
                if (!preds.count(sample.id)) {
                    throw Error(ErrorKind::config,
                                "id mismatch: no prediction for sample " + sample.id);
                }
            }

            if (*task == Task::vqa) {
                const bool corpus = opt(options, "corpus-bleu").has_value() &&
                                    parse_bool(*opt(options, "corpus-bleu"), "corpus-bleu");
                double acc_sum = 0.0;
                double bleu_sum = 0.0;
                std::vector<std::string> answers;
                std::vector<std::vector<std::string>> refs;
                for (const auto& sample : dataset.records) {
                    const auto& pred = preds.at(sample.id);
                    const std::string answer = pred.error ? std::string() : pred.answer;
                    const double acc = metrics::vqa_accuracy(answer, *sample.answers);
                    const double bleu = metrics::bleu1(answer, *sample.answers);
                    report.per_sample[sample.id] = {{"acc", acc}, {"bleu1", bleu}};
                    acc_sum += acc;
                    bleu_sum += bleu;
                    answers.push_back(answer);
                    refs.push_back(*sample.answers);
                    if (pred.error) ++warnings;
                }
                const auto n = static_cast<double>(dataset.records.size());
                for (const auto& metric : metric_names) {
                    if (metric == "acc") report.aggregate["acc"] = 100.0 * acc_sum / n;
                    if (metric == "bleu1") {
                        report.aggregate["bleu1"] =
                            corpus ? metrics::bleu1_corpus(answers, refs) : bleu_sum / n;
                    }
                }
            } else { // ris
                const std::string table_path = require(options, "seg-table");
                const backends::SegmentationStub stub{std::filesystem::path(table_path)};
                std::vector<metrics::MaskPair> pairs;
                for (const auto& sample : dataset.records) {
                    const auto& pred = preds.at(sample.id);
                    auto gt = data::load_mask(*sample.gt_mask);
                    metrics::BitMask predicted;
                    predicted.width = gt.width;
                    predicted.height = gt.height;
                    predicted.bits.assign(gt.bits.size(), 0);
                    if (!pred.error) {
                        try {
                            const auto seg = stub.segment(
                                sample.id, Instruction{pred.answer, InstructionKind::clear});
                            auto mask = data::load_mask(seg.mask_path);
                            if (mask.width != gt.width || mask.height != gt.height) {
                                throw Error(ErrorKind::dimension_mismatch,
                                            "mask dimensions differ from ground truth");
                            }
                            predicted = std::move(mask);
                        } catch (const Error& e) {
                            ++warnings;
                            err << "warning: sample " << sample.id << ": " << e.what()
                                << " (scored as empty mask)\n";
                        }
                    } else {
                        ++warnings;
                    }
                    const double value = metrics::iou(predicted, gt);
                    report.per_sample[sample.id] = {{"iou", value}};
                    pairs.emplace_back(std::move(predicted), std::move(gt));
                }
                for (const auto& metric : metric_names) {
                    if (metric == "giou") report.aggregate["giou"] = metrics::giou_dataset(pairs);
                    if (metric == "ciou") report.aggregate["ciou"] = metrics::ciou_dataset(pairs);
                }
            }
        }

        if (const auto baseline_path = opt(options, "baseline")) {
            const auto baseline = metrics::report_from_json(util::read_file(*baseline_path));
            report.baseline = baseline.aggregate;
            std::map<std::string, double> improvement;
            for (const auto& [metric, value] : report.aggregate) {
                const auto it = baseline.aggregate.find(metric);
                if (it != baseline.aggregate.end() && it->second != 0.0) {
                    improvement[metric] = metrics::improvement_pct(value, it->second);
                }
            }
            report.improvement = std::move(improvement);
        }

        const std::string out_path = opt(options, "out").value_or(preds_path + ".report.json");
        util::atomic_write_file(out_path, metrics::report_to_json(report));
        scope.manifest().output_sha256 = util::sha256_file_hex(out_path);
        scope.manifest().warnings = warnings;

        char line[256];
        for (const auto& metric : metric_names) {
            const auto it = report.aggregate.find(metric);
            if (it == report.aggregate.end()) continue;
            std::snprintf(line, sizeof line, "%-12s %12.4f", metric.c_str(), it->second);
            out << line;
            if (report.improvement && report.improvement->count(metric)) {
                out << "  " << metrics::format_improvement_pct(report.improvement->at(metric));
            } else if (report.baseline && report.baseline->count(metric) &&
                       report.baseline->at(metric) == 0.0) {
                out << "  n/a";
            }
            out << "\n";
        }
        scope.finish(out_path + ".manifest.json");
        return 0;
    });
}

// ---------------------------------------------------------------------------
// screen

int cmd_screen(const Options& options, std::ostream& out, std::ostream& err) {
    return exit_guard(err, [&]() -> int {
        Resolved resolved = resolve_options(options);
        const std::string data_path = require(options, "data");
        const std::string out_path = require(options, "out");
        const std::string model_spec = opt(options, "model")
                                           .value_or(resolved.config.task_model.spec);

        CommandScope scope("screen", options, resolved);
        const auto dataset = data::load_dataset(data_path, resolved.lenient);
        scope.manifest().dataset_sha256 = util::sha256_file_hex(data_path);
        auto backend = make_backend(model_spec, resolved, scope.counters());
        const auto templates = make_templates(resolved);

        const auto n = dataset.records.size();
        std::vector<std::optional<std::string>> lines(n);
        std::atomic<long> warnings{0};
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto work = [&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                try {
                    const auto& sample = dataset.records[i];
                    const auto verdict = data::screen_ambiguity(sample, *backend.backend,
                                                                templates, resolved.config);
                    if (!verdict.parsed) warnings.fetch_add(1);
                    json j = json::parse(canonical_json(sample));
                    if (verdict.category != "none") {
                        j["ambiguity"] = verdict.category;
                    }
                    j["screening_raw"] = verdict.raw_model_text;
                    lines[i] = j.dump();
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next.store(n); // stop handing out work
                    break;
                }
            }
        };
        if (resolved.parallel == 1 || n <= 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < std::min<int>(resolved.parallel, static_cast<int>(n)); ++w) {
                pool.emplace_back(work);
            }
            for (auto& t : pool) t.join();
        }
        if (failure) std::rethrow_exception(failure);
        std::string buffer;
        for (const auto& line : lines) buffer += *line + "\n";
        util::atomic_write_file(out_path, buffer);

        scope.manifest().output_sha256 = util::sha256_hex(buffer);
        scope.manifest().warnings = warnings.load();
        scope.finish(out_path + ".manifest.json");
        out << n << " records screened (" << warnings.load() << " parse warnings) -> " << out_path
            << "\n";
        return 0;
    });
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const Options& options, std::ostream& out, std::ostream& err) {
    return exit_guard(err, [&]() -> int {
        Resolved resolved = resolve_options(options);
        const auto it = options.find("runs");
        if (it == options.end() || it->second.empty()) {
            throw Error(ErrorKind::config, "missing required option: --runs");
        }
        const auto& run_paths = it->second;
        const std::string format = opt(options, "format").value_or("table");
        if (format != "table" && format != "csv") {
            throw Error(ErrorKind::config, "format must be table or csv");
        }

        CommandScope scope("report", options, resolved);
        std::vector<metrics::EvalReport> reports;
        std::vector<std::string> names;
        std::string digest_input;
        for (const auto& path : run_paths) {
            reports.push_back(metrics::report_from_json(util::read_file(path)));
            names.push_back(std::filesystem::path(path).stem().string());
            digest_input += util::sha256_file_hex(path);
        }
        scope.manifest().dataset_sha256 = util::sha256_hex(digest_input);

        const auto& base_metrics = reports.front().aggregate;
        for (std::size_t i = 1; i < reports.size(); ++i) {
            for (const auto& [metric, value] : base_metrics) {
                if (!reports[i].aggregate.count(metric)) {
                    throw Error(ErrorKind::metric_mismatch,
                                "run " + names[i] + " is missing metric " + metric);
                }
            }
            if (reports[i].aggregate.size() != base_metrics.size()) {
                throw Error(ErrorKind::metric_mismatch,
                            "run " + names[i] + " reports a different metric set");
            }
        }

        std::ostringstream body;
        if (format == "csv") {
            body << "metric";
            for (const auto& name : names) body << "," << name;
            for (std::size_t i = 1; i < names.size(); ++i) body << ",delta_" << names[i];
            body << "\n";
            for (const auto& [metric, base_value] : base_metrics) {
                body << metric;
                for (const auto& report : reports) {
                    body << "," << shortest_double(report.aggregate.at(metric));
                }
                for (std::size_t i = 1; i < reports.size(); ++i) {
                    if (base_value == 0.0) {
                        body << ",n/a";
                    } else {
                        body << ","
                             << shortest_double(metrics::improvement_pct(
                                    reports[i].aggregate.at(metric), base_value));
                    }
                }
                body << "\n";
            }
        } else {
            char cell[128];
            std::snprintf(cell, sizeof cell, "%-12s", "metric");
            body << cell;
            for (const auto& name : names) {
                std::snprintf(cell, sizeof cell, " %14s", name.c_str());
                body << cell;
            }
            for (std::size_t i = 1; i < names.size(); ++i) {
                std::snprintf(cell, sizeof cell, " %14s", ("delta:" + names[i]).c_str());
                body << cell;
            }
            body << "\n";
            for (const auto& [metric, base_value] : base_metrics) {
                std::snprintf(cell, sizeof cell, "%-12s", metric.c_str());
                body << cell;
                for (const auto& report : reports) {
                    std::snprintf(cell, sizeof cell, " %14.4f", report.aggregate.at(metric));
                    body << cell;
                }
                for (std::size_t i = 1; i < reports.size(); ++i) {
                    const std::string delta =
                        base_value == 0.0
                            ? "n/a"
                            : metrics::format_improvement(reports[i].aggregate.at(metric),
                                                          base_value);
                    std::snprintf(cell, sizeof cell, " %14s", delta.c_str());
                    body << cell;
                }
                body << "\n";
            }
        }

        out << body.str();
        std::filesystem::path manifest_default;
        if (const auto out_path = opt(options, "out")) {
            util::atomic_write_file(*out_path, body.str());
            scope.manifest().output_sha256 = util::sha256_hex(body.str());
            manifest_default = *out_path + ".manifest.json";
        } else {
            manifest_default = run_paths.front() + ".compare.manifest.json";
        }
        scope.finish(manifest_default);
        return 0;
    });
}

int dispatch(const std::string& command, const Options& options, std::ostream& out,
             std::ostream& err) {
    if (command == "optimize") return cmd_optimize(options, out, err);
    if (command == "run") return cmd_run(options, out, err);
    if (command == "eval") return cmd_eval(options, out, err);
    if (command == "screen") return cmd_screen(options, out, err);
    if (command == "report") return cmd_report(options, out, err);
    err << "error: unknown command: " << command << "\n";
    return 2;
}

} // namespace o1loom::cli
