use std::sync::OnceLock;

use serde::Deserialize;

const PROMPTS_TOML: &str = include_str!("../../resources/prompts.toml");

#[derive(Debug, Clone, Deserialize)]
pub struct FeedbackTexts {
    pub stdout_header: String,
    pub stderr_header: String,
    pub moved: String,
    pub clamped: String,
    pub clicked: String,
    pub screenshot: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ErrorTexts {
    pub no_think_block: String,
    pub no_action_cell: String,
    pub empty_cell: String,
    pub unknown_method: String,
    pub malformed_arguments: String,
    pub multiple_actions: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DistillTexts {
    pub hint: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PromptTexts {
    pub version: String,
    pub system_preamble: String,
    pub task_intro: String,
    pub guidance: String,
    pub initial_observation: String,
    pub reasoning_instruction: String,
    pub action_instruction: String,
    pub feedback: FeedbackTexts,
    pub errors: ErrorTexts,
    pub distill: DistillTexts,
}

/// The bundled prompt resource, parsed once.
pub fn texts() -> &'static PromptTexts {
    static TEXTS: OnceLock<PromptTexts> = OnceLock::new();
    TEXTS.get_or_init(|| toml::from_str(PROMPTS_TOML).expect("bundled prompts.toml is valid"))
}

/// Substitutes `{name}` placeholders.
pub(crate) fn fill(template: &str, vars: &[(&str, String)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resource_loads() {
        let t = texts();
        assert_eq!(t.version, "1");
        assert!(t
            .guidance
            .ends_with("Cursor description: black arrow angled up-and-left with a thin white outline."));
        assert!(t.guidance.starts_with("(i) Describe the location of the target element.\n"));
    }

    #[test]
    fn error_texts_are_distinct() {
        let e = &texts().errors;
        let all = [
            &e.no_think_block,
            &e.no_action_cell,
            &e.empty_cell,
            &e.unknown_method,
            &e.malformed_arguments,
            &e.multiple_actions,
        ];
        let set: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), all.len());
    }
}
