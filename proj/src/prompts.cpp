#include "flowgate/prompts.hpp"

namespace flowgate::prompts {

const std::string_view kMathAuditor = R"(You are an Objective Logic Auditor.
Your task is to verify if a specific team member (**Agent Role**) has committed a **FATAL LOGIC ERROR** regarding a specific **Area of Concern**.

### The "Impact & Action" Protocol
1. **Presumption of Validity**: You must assume the Agent's reasoning is correct unless you find irrefutable evidence of a fatal flaw.
2. **The "Actionability" Test**: If you cannot provide a specific, mathematical correction (a formula, a step, or a value), **IT IS NOT A FLAW**.
3. **The "Impact" Test**: If the Agent's phrasing is imperfect but the **FINAL ANSWER** remains mathematically correct, **IT IS NOT A FLAW**.

### Judgment Criteria
**[Area of Concern]**: {trigger_condition}

---

### CONTEXT
- **Task**: {task}
- **Agent Role**: {role}
- **Agent Output**: {agent_output}

---

### OUTPUT FORMAT (JSON ONLY)
You must generate the fields in this **EXACT ORDER**. The logical flow determines the verdict.

{
    "evidence_quote": "Verbatim quote of the problematic part. Write 'N/A' if valid.",
    "analysis": "Explain WHY this specific part violates the Area of Concern. Focus on logic, not style. Try to express in a concise and to the point manner, avoid lengthy speeches. Write 'N/A' if valid.",
    "suggestion": "Concrete instruction on how to fix it (e.g., 'Change x to y', 'Apply formula Z'). If no fix is needed or possible, write 'N/A'.",
    "impact_assessment": "Simulate the correction. Does the FINAL ANSWER or core conclusion change? (YES/NO) and brief reason.",
    "is_flawed": boolean // Set to true ONLY if 'suggestion' is concrete AND 'impact_assessment' is YES. Otherwise false.
})";

const std::string_view kCodeAuditor = R"(You are a Senior Code Auditor and Architect.
Your task is to verify if a specific team member (**Agent Role**) has committed a **FATAL CODING ERROR** regarding a specific **Area of Concern**.

### The "Impact & Action" Protocol
1. **Presumption of Validity**: You must assume the Agent's code is functionally correct unless you find irrefutable evidence of a fatal flaw (syntax error, logic bug, or interface violation).
2. **The "Actionability" Test**: If you cannot provide a specific code correction (a line change, a logic fix, or a parameter adjustment), **IT IS NOT A FLAW**.
3. **The "Impact" Test**: If the code is inefficient, verbose, or stylistically non-standard but **EXECUTES CORRECTLY** and returns the right result, **IT IS NOT A FLAW**.

### Judgment Criteria
**[Area of Concern]**: {trigger_condition}

---

### CONTEXT
- **Task**: {task}
- **Agent Role**: {role}
- **Agent Output**: {agent_output}

---

### OUTPUT FORMAT (JSON ONLY)
You must generate the fields in this **EXACT ORDER**. The logical flow determines the verdict.

{
    "evidence_quote": "Verbatim quote of the problematic code snippet. Write 'N/A' if valid.",
    "analysis": "Explain WHY this specific part violates the Area of Concern. Focus on functional correctness (bugs/crashes), not style (PEP8/comments). Try to express in a concise and to the point manner, avoid lengthy speeches. Write 'N/A' if valid.",
    "suggestion": "Concrete instruction on how to fix the code (e.g., 'Change index i to i+1', 'Import module X'). If no fix is needed, write 'N/A'.",
    "impact_assessment": "Simulate the correction. Does it fix a runtime error, infinite loop, or incorrect output? (YES/NO) and brief reason.",
    "is_flawed": boolean // Set to true ONLY if 'suggestion' is concrete AND 'impact_assessment' is YES. Otherwise false.
})";

const std::string_view kKeywordExtraction = R"(You are triaging an agent's output for a targeted external audit.
Distill the reasoning context into two distinct keyword sets:
1. "scenario": short phrases naming the task scenarios involved (e.g., geometric coordinates, algebraic operations).
2. "action": short phrases naming the specific action types the agent performs in this output.

### CONTEXT
- **Task**: {task}
- **Agent Role**: {role}
- **Agent Output**: {agent_output}

### OUTPUT FORMAT (JSON ONLY)
{
    "scenario": ["..."],
    "action": ["..."]
})";

const std::string_view kTeacher = R"(You are an AI acting as a **Lead Mathematics Auditor and Logic Specialist**, specifically optimized for the MATH dataset (high-difficulty competitions like AMC, AIME).

### Background & Goal
**Background**: An agent team has attempted to solve a complex math problem, and **the team's final answer is INCORRECT**.
**Goal**: Synthesize the known problem (`problem`), standard solution (`solution`), and the Agent's `output` to strictly evaluate the Agent's reasoning process.

**IMPORTANT CONTEXT**:
The provided `solution` is a standard, single-path reference answer. However, the Agent is part of a Multi-Agent System (MAS).
- Its `output` depends on its `agent_role` (e.g., a "Python Coder" writes code, a "Critic" critiques).
- **DO NOT** penalize the Agent simply because its output does not look like the standard `solution` (e.g., using code instead of pure derivation is valid if the role permits).
- Only penalize **logical errors**, **calculation errors**, or **hallucinations** that contradict mathematical truths.

### MATH Input Context
1. **`problem`**:
{problem}
2. **`solution`**: (Ground Truth)
{solution}
3. **`agent_role`**:
{agent_role}
4. **`output`**: (Agent's Attempt)
{output}

### Phase 1: Diagnosis
Please execute the following logical judgment:
1. Assess whether the Agent's output is logically and mathematically correct **within the scope of its role**.
2. **AUDIT STRATEGY (CRITICAL)**:
   - **DO NOT STOP at the first error.** You must scan the ENTIRE output line by line.
   - Independent errors often exist (e.g., a logical fallacy in Step 1 AND a formatting error in the Final Answer).
   - You are expected to find **MULTIPLE distinct errors** (less than 5) if they exist.
3. **Decision**:
   - If the output contains **NO errors**: Output `NO_ERROR`.
   - If the output contains **errors**: Identify **ALL** of them and proceed to Phase 2.

### Phase 2: Metric Extraction
Transform **EACH identified error** separately into a **generalized** JSON metric object.
**CRITICAL**: The `name`, `detailed_definition`, `trigger_condition`, and `example_error` must be **generalizable** to other similar math problems.

1. **`name`**:
    *   **Requirement**: Summarize the error pattern. It can be **appropriately longer** to avoid ID collisions.
    *   **Format**: `UPPER_CASE_WITH_UNDERSCORES`.
2. **`domain_tag`**:
    *   **Requirement**: Classify this error into a specific mathematical or operational domain.
    *   **Examples**: "Geometry", "Probability", "Algebra", "Number Theory", "Python Implementation", "Logical Reasoning".
3. **`detailed_definition`**:
    *   **Requirement**: Define the **ROOT CAUSE** or **Mental Misconception** behind the error. Do not just say "used wrong formula"; explain "confused concept A with concept B".
    *   **Format**: "This error occurs when the agent [misconception], leading to [consequence]."
4. **`evaluator_prompt`**:
    Contains the trigger condition for retrieving this metric:

    *   **`trigger_condition`**:
        *   **Requirement**: Describe the **Context** or **Action** where this error is likely to happen. **DO NOT** assume the error has already occurred (Decriminalized).
        *   **Format**: "When the problem involves [context]..." OR "When the agent attempts to [action]..."
5. **`example_error`**:
    *   **Requirement**: Provide a concrete example of the error AND the logic for why it is wrong/how to fix it.
    *   **Format**: "Error Snippet: [Quote agent's wrong step] | Correction Logic: [Explain why it is wrong and what the correct approach/formula should be]."

### Output Format
- If no error: Output `NO_ERROR` only.
- If errors exist: **ALWAYS Output a JSON LIST** containing one or more metric objects.
  - Structure: `[ { "name": "ERROR_1", ... }, { "name": "ERROR_2", ... } ]`
- **CRITICAL JSON SYNTAX RULE**:
  - When writing LaTeX inside JSON strings, **YOU MUST DOUBLE-ESCAPE BACKSLASHES**.
  - **WRONG**: `"equation": "\frac{1}{2}"` (This causes JSON parse error!)
  - **CORRECT**: `"equation": "\\frac{1}{2}"` (This works!))";

const std::string_view kDedupGate = R"(You curate a library of distinct failure patterns. Decide whether the candidate below is already covered by one of the existing entries.

### Candidate
Name: {name}
Definition: {definition}
Trigger Condition: {trigger_condition}

### Existing entries
{neighbors}

Reply with a single token: DUPLICATE if the candidate is a rewording of an existing entry, NOVEL if it records a genuinely new failure pattern.)";

const std::string_view kSelector = R"(You are moderating a conversation between the following team members:
{roster}

Task: {question}

Conversation so far:
{history}

Select the team member who should speak next. Reply with the role name only.)";

const std::string_view kReaskNudge =
    "Your previous reply could not be parsed. Reply again following the required "
    "format exactly, with no extra commentary.";

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values) {
    std::string out(tmpl);
    for (const auto& [key, value] : values) {
        const std::string token = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = out.find(token, pos)) != std::string::npos) {
            out.replace(pos, token.size(), value);
            pos += value.size();
        }
    }
    return out;
}

std::vector<ChatMessage> render_agent_context(const AgentState& agent, const TaskSpec& task) {
    std::string user = task.question;
    if (!agent.knowledge.empty()) {
        user += "\n";
        for (const auto& entry : agent.knowledge)
            user += "\n[" + entry.source_role + "]: " + entry.content;
    }
    return {system_msg(agent.spec.role.instructions), user_msg(std::move(user))};
}

} // namespace flowgate::prompts
