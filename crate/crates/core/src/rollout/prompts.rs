//! Prompt templates served to policies. Scripted policies ignore them; remote
//! models need them to know the action format and the task language.

use crate::env::{Access, Verification, World};

pub const CTL_REFERENCE: &str = "\
Code is written in CTL, a small language:
- statements: `x = expr`, `if cond { ... } else { ... }`, `for x in expr { ... }`, `return expr`, or a bare expression
- values: numbers, \"strings\", true, false, null, [lists], {\"maps\": 1}
- operators: + - * / == != < <= > >= and or not; `a.b` is the same as `a[\"b\"]`; negative list indices count from the end
- builtins take positional arguments: len(x), contains(c, x), str(x), abs(x), round(x, n), min(list), max(list)
- tools take keyword arguments only: get_order_details(order_id=\"#W1234567\")
- a program's value is its `return` value, else the variable `result`; `#` starts a comment
- conditions must be booleans; there is no truthiness";

pub const ACTION_FORMAT: &str = "\
At each step, reply in exactly this format:
THOUGHT:
<your reasoning>
END THOUGHT
ACTION:
<CTL code calling the tools>
END ACTION

When you are done, reply with your final answer instead of an action:
THOUGHT:
<your reasoning>
END THOUGHT
ANSWER:
<final answer>
END ANSWER

Only output one action or answer, not both.";

const STATE_ANSWER_FORMAT: &str = "\
Your final answer must contain these parts:
ANSWER:
<instruction>the request, written as the user, with every id the task needs</instruction>
<evaluation_function>
CTL code returning true only when the final state satisfies the request
</evaluation_function>
<solution>CTL code that fulfils the request</solution>
<failure_case>CTL code of a plausible wrong attempt</failure_case>
<failure_case>...</failure_case>
<failure_case>...</failure_case>
END ANSWER";

const ANSWER_ANSWER_FORMAT: &str = "\
Your final answer must contain these parts:
ANSWER:
<instruction>the question, with every input the task needs and the expected answer format</instruction>
<evaluation_function>
return check_answer(answer=answer, expected=\"...\", mode=\"numeric\")
</evaluation_function>
<solution>CTL code that stores the answer in `result`</solution>
<failure_case>CTL code of a plausible wrong attempt</failure_case>
<failure_case>...</failure_case>
<failure_case>...</failure_case>
END ANSWER
The verifier reads the submitted answer from the variable `answer`; use mode \"exact_string\" for text answers.";

/// System prompt of a challenger episode.
pub fn challenger_prompt(world: &dyn World, target_hint: Option<&str>) -> String {
    let answer_format = match world.verification() {
        Verification::State => STATE_ANSWER_FORMAT,
        Verification::Answer => ANSWER_ANSWER_FORMAT,
    };
    let target = target_hint
        .map(|h| format!("\nBuild your task around {h}. Look up their details first.\n"))
        .unwrap_or_default();
    format!(
        "You write tasks for another agent. Explore the environment with the tools, then write a task \
with an instruction, a verification function, an example solution, and at least 3 failure cases that \
must not pass the verification function. Do not make up ids; only use values you have seen in tool \
results. The verification function may only call read-only tools.\n\n{}\n\nTools:\n{}\n\n{CTL_REFERENCE}\n\n{ACTION_FORMAT}\n\n{answer_format}\n{target}",
        world.description(),
        world.registry().describe(Access::Full),
    )
}

/// System prompt of an executor episode.
pub fn executor_prompt(initial_observation: &str) -> String {
    format!("{initial_observation}\n\n{CTL_REFERENCE}\n\n{ACTION_FORMAT}")
}
