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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace o1loom::prompts {

enum class TemplateName {
    reasoning_high,
    reasoning_general,
    reflection_high,
    reflection_general,
    synthesis_high,
    synthesis_general,
    combined_instantial,
    screening,
};

std::string to_string(TemplateName name);
std::optional<TemplateName> template_name_from_string(const std::string& s);

// Placeholder syntax is single-brace {name}; literal braces are written
// doubled ({{ and }}). The declared placeholder vocabulary is fixed:
// task_description, ambiguous_instruction, clear_instruction, experience,
// budget.
struct PromptTemplate {
    TemplateName name = TemplateName::reasoning_high;
    std::string body;
};

using Bindings = std::map<std::string, std::string>;

// Placeholders a template of this name may use. Overrides must stay within
// this set so callers' bindings keep working.
const std::vector<std::string>& allowed_placeholders(TemplateName name);

// Throws Error(validation, "unknown placeholder: <name>") when the body uses
// a placeholder outside the template's allowed set, or on unbalanced braces.
void validate_template(const PromptTemplate& tmpl);

// Substitutes each placeholder occurrence exactly once; substituted values
// are emitted verbatim and never rescanned. Throws
// Error(validation, "unbound placeholder: <name>") on a missing binding.
std::string render(const PromptTemplate& tmpl, const Bindings& bindings);

class TemplateSet {
  public:
    const PromptTemplate& get(TemplateName name) const;
    void set(PromptTemplate tmpl); // validates, replaces by name
    std::size_t size() const { return templates_.size(); }

  private:
    std::map<TemplateName, PromptTemplate> templates_;
};

// The eight built-in templates. budget_tag parameterizes the countdown tag
// token shown to the model (default "count").
TemplateSet default_templates(const std::string& budget_tag = "count");

// Reads `<name>.prompt` files from dir and overrides the matching defaults.
// An override may only use placeholders the default for that name uses.
TemplateSet load_template_overrides(const std::filesystem::path& dir, TemplateSet base);

} // namespace o1loom::prompts
