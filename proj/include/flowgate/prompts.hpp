#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "flowgate/backends.hpp"
#include "flowgate/domain.hpp"

namespace flowgate::prompts {

// Bundled templates. Placeholders are literal "{key}" tokens; all other
// braces (JSON examples in the instructions) are left untouched by render().
extern const std::string_view kMathAuditor;      // keys: trigger_condition, task, role, agent_output
extern const std::string_view kCodeAuditor;      // same keys
extern const std::string_view kKeywordExtraction; // keys: task, role, agent_output
extern const std::string_view kTeacher;          // keys: problem, solution, agent_role, output
extern const std::string_view kDedupGate;        // keys: name, definition, trigger_condition, neighbors
extern const std::string_view kSelector;         // keys: roster, question, history

// Follow-up sent once when a model reply fails to parse.
extern const std::string_view kReaskNudge;

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values);

// Prompt context for one agent turn: system = role instructions, user = task
// question followed by the knowledge base in arrival order.
std::vector<ChatMessage> render_agent_context(const AgentState& agent, const TaskSpec& task);

} // namespace flowgate::prompts
