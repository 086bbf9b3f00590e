//! Prompt templates for remote judges.
//!
//! A template is a (system text, user text) pair. The user text must contain
//! each of the four placeholders `<prompt>`, `<rubric>`, `<essay1>`,
//! `<essay2>` exactly once; rendering substitutes all four simultaneously, so
//! essay text that happens to contain a placeholder string is never
//! re-expanded.

use std::path::Path;

use crate::data::Essay;
use crate::error::{Error, Result};

/// The four substitution points every user template must contain.
pub const PLACEHOLDERS: [&str; 4] = ["<prompt>", "<rubric>", "<essay1>", "<essay2>"];

const ASAP_SYSTEM: &str = include_str!("../../templates/asap_system.txt");
const ASAP_USER: &str = include_str!("../../templates/asap_user.txt");
const TOEFL11_SYSTEM: &str = include_str!("../../templates/toefl11_system.txt");
const TOEFL11_USER: &str = include_str!("../../templates/toefl11_user.txt");

/// A validated judge prompt template.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub system_text: String,
    pub user_text: String,
    /// Where the template came from (file path or builtin name), for errors.
    source: String,
}

impl PromptTemplate {
    /// Validates that every placeholder occurs exactly once in `user_text`.
    pub fn new(
        system_text: impl Into<String>,
        user_text: impl Into<String>,
        source: impl Into<String>,
    ) -> Result<Self> {
        let template = PromptTemplate {
            system_text: system_text.into(),
            user_text: user_text.into(),
            source: source.into(),
        };
        for placeholder in PLACEHOLDERS {
            let found = template.user_text.matches(placeholder).count();
            if found != 1 {
                return Err(Error::TemplatePlaceholder {
                    path: template.source.clone(),
                    placeholder,
                    found,
                });
            }
        }
        Ok(template)
    }

    /// Loads a template from one system-text file and one user-text file.
    pub fn from_files(system_path: &Path, user_path: &Path) -> Result<Self> {
        let system_text = std::fs::read_to_string(system_path)
            .map_err(|e| Error::io(system_path.display().to_string(), e))?;
        let user_text = std::fs::read_to_string(user_path)
            .map_err(|e| Error::io(user_path.display().to_string(), e))?;
        PromptTemplate::new(system_text, user_text, user_path.display().to_string())
    }

    /// One of the templates shipped with the crate: `"asap"` (integer-rubric
    /// school essays) or `"toefl11"` (second-language learner essays).
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "asap" => PromptTemplate::new(ASAP_SYSTEM, ASAP_USER, "builtin:asap"),
            "toefl11" => PromptTemplate::new(TOEFL11_SYSTEM, TOEFL11_USER, "builtin:toefl11"),
            other => Err(Error::config(format!(
                "unknown builtin template {other:?} (expected asap or toefl11)"
            ))),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// Fills the template for one query: `first` goes into the essay-1 slot,
/// `second` into the essay-2 slot. Returns `(system, user)` message texts.
pub fn render_prompt(
    template: &PromptTemplate,
    prompt_text: &str,
    rubric_text: &str,
    first: &Essay,
    second: &Essay,
) -> (String, String) {
    let substitutions = [
        prompt_text,
        rubric_text,
        first.text.as_str(),
        second.text.as_str(),
    ];

    // Single simultaneous pass: locate all four placeholders (validated to
    // occur exactly once), then stitch the segments together in text order.
    let user = &template.user_text;
    let mut sites: Vec<(usize, usize)> = PLACEHOLDERS
        .iter()
        .enumerate()
        .map(|(k, placeholder)| {
            let at = user.find(placeholder).expect("validated at construction");
            (at, k)
        })
        .collect();
    sites.sort_unstable();

    let mut rendered =
        String::with_capacity(user.len() + substitutions.iter().map(|s| s.len()).sum::<usize>());
    let mut cursor = 0;
    for (at, k) in sites {
        rendered.push_str(&user[cursor..at]);
        rendered.push_str(substitutions[k]);
        cursor = at + PLACEHOLDERS[k].len();
    }
    rendered.push_str(&user[cursor..]);

    (template.system_text.clone(), rendered)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn essay(id: &str, text: &str) -> Essay {
        Essay::new(id, "p", text)
    }

    #[test]
    fn render_substitutes_all_placeholders_in_order() {
        let template =
            PromptTemplate::new("sys", "P=<prompt> R=<rubric> A=<essay1> B=<essay2>", "test")
                .unwrap();
        let (system, user) = render_prompt(
            &template,
            "the prompt",
            "the rubric",
            &essay("a", "alpha text"),
            &essay("b", "beta text"),
        );
        assert_eq!(system, "sys");
        assert_eq!(user, "P=the prompt R=the rubric A=alpha text B=beta text");
        let alpha = user.find("alpha").unwrap();
        let beta = user.find("beta").unwrap();
        assert!(alpha < beta);
    }

    #[test]
    fn render_swapped_call_exchanges_essay_slots_only() {
        let template =
            PromptTemplate::new("sys", "<prompt>|<rubric>|<essay1>|<essay2>", "test").unwrap();
        let a = essay("a", "A");
        let b = essay("b", "B");
        let (_, forward) = render_prompt(&template, "p", "r", &a, &b);
        let (_, reversed) = render_prompt(&template, "p", "r", &b, &a);
        assert_eq!(forward, "p|r|A|B");
        assert_eq!(reversed, "p|r|B|A");
    }

    #[test]
    fn essay_text_containing_a_placeholder_is_not_reexpanded() {
        let template =
            PromptTemplate::new("sys", "<prompt>|<rubric>|<essay1>|<essay2>", "test").unwrap();
        let sneaky = essay("a", "contains <essay2> literally");
        let plain = essay("b", "B");
        let (_, user) = render_prompt(&template, "p", "r", &sneaky, &plain);
        assert_eq!(user, "p|r|contains <essay2> literally|B");
    }

    #[test]
    fn missing_or_repeated_placeholder_is_a_load_error() {
        let missing = PromptTemplate::new("sys", "<prompt><rubric><essay1>", "test");
        match missing {
            Err(Error::TemplatePlaceholder {
                placeholder, found, ..
            }) => {
                assert_eq!(placeholder, "<essay2>");
                assert_eq!(found, 0);
            }
            other => panic!("expected placeholder error, got {other:?}"),
        }
        let repeated =
            PromptTemplate::new("sys", "<prompt><rubric><essay1><essay2><essay2>", "test");
        assert!(repeated.is_err());
    }

    #[test]
    fn builtin_templates_validate_and_mention_the_json_contract() {
        for name in ["asap", "toefl11"] {
            let template = PromptTemplate::builtin(name).unwrap();
            assert!(
                template.user_text.contains("\"preference\""),
                "{name} user text should ask for the structured decision"
            );
            assert!(!template.system_text.is_empty());
        }
        assert!(PromptTemplate::builtin("nope").is_err());
    }
}
