//! Fixed prompt text. Payload golden tests depend on these bytes.

pub const INSTRUCTION_HEADER: &str = "You are a DevOps assistant that writes deployment configurations for distributed systems. \
Respond with only the configuration, as YAML, no prose. \
Do not add explanations, reasoning, or examples outside the configuration. \
Emit exactly one YAML document.";

pub const VERIFIER_HEADER: &str = "You review a generated deployment configuration. \
Decide whether it satisfies the user intent and the task.";

pub const COT_PHRASE: &str = "Let's think step by step.";

pub const VERDICT_INSTRUCTION: &str =
    "Finish with one final line that is exactly `VERDICT: ALIGNED` or `VERDICT: MISALIGNED: <reason>`.";

pub const CONTEXT_HEADING: &str = "### CONTEXT";
pub const EXAMPLES_HEADING: &str = "### EXAMPLES";
pub const INTENT_HEADING: &str = "### USER INTENT";
pub const TASK_HEADING: &str = "### TASK";
pub const REASONING_HEADING: &str = "### REASONING";
pub const CONFIGURATION_HEADING: &str = "### CONFIGURATION";
pub const FEEDBACK_HEADING: &str = "### PREVIOUS ATTEMPT FAILED";

pub const NO_CONTEXT: &str = "(no relevant context retrieved)";
