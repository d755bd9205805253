//! Prompt templates.
//!
//! Rendering is a pure function of the record and the template: the same
//! inputs always produce byte-identical text. Three placeholders are
//! understood:
//!
//! * `{instruction}` — the question. For an example this is the instruction
//!   with the input appended on the following line when present; for a task
//!   it is the task text.
//! * `{input}` — the raw input field (empty when absent), for templates
//!   that want to place it themselves.
//! * `{output}` — the answer text.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;

use super::{InstructionExample, PredefinedTask};

/// Where the one-shot demonstration goes relative to the task text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DemoPosition {
    /// Demonstration first, then the task (conventional in-context order).
    #[default]
    BeforeTask,
    /// Task first, then the demonstration immediately before the answer.
    AfterTask,
}

/// Template pair for scoring contexts: a task block that ends where the
/// answer begins, and a completed demonstration block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    /// Rendered per task; must reference `{instruction}`.
    #[serde(default = "default_task_block")]
    pub task_block: String,
    /// Rendered per demonstration; must reference `{instruction}` and
    /// `{output}`.
    #[serde(default = "default_demo_block")]
    pub demo_block: String,
    #[serde(default)]
    pub demo_position: DemoPosition,
}

fn default_task_block() -> String {
    "Question:\n{instruction}\nAnswer:\n".into()
}

fn default_demo_block() -> String {
    "Question:\n{instruction}\nAnswer:\n{output}\n\n".into()
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            task_block: default_task_block(),
            demo_block: default_demo_block(),
            demo_position: DemoPosition::BeforeTask,
        }
    }
}

impl PromptTemplate {
    /// A pass-through template: the context is the bare task text, the
    /// demonstration is question and answer concatenated. Useful with tiny
    /// backends whose alphabet is restricted.
    pub fn raw() -> Self {
        PromptTemplate {
            task_block: "{instruction}".into(),
            demo_block: "{instruction}{output}".into(),
            demo_position: DemoPosition::BeforeTask,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.task_block.contains("{instruction}") {
            return Err(Error::Template(
                "task_block must contain the {instruction} placeholder".into(),
            ));
        }
        if !self.demo_block.contains("{instruction}") {
            return Err(Error::Template(
                "demo_block must contain the {instruction} placeholder".into(),
            ));
        }
        if !self.demo_block.contains("{output}") {
            return Err(Error::Template(
                "demo_block must contain the {output} placeholder".into(),
            ));
        }
        // Surface malformed placeholder syntax eagerly rather than at first
        // scoring call.
        render(&self.task_block, "", "", "")?;
        render(&self.demo_block, "", "", "")?;
        Ok(())
    }

    /// Context for scoring a task's answer with no demonstration.
    pub fn zero_shot_context(&self, task: &PredefinedTask) -> Result<String> {
        render(&self.task_block, &task.task_text, "", &task.answer_text)
    }

    /// Context for scoring a task's answer with `demo` as the one-shot
    /// demonstration.
    pub fn one_shot_context(
        &self,
        demo: &InstructionExample,
        task: &PredefinedTask,
    ) -> Result<String> {
        let demo_text = self.demonstration(demo)?;
        let task_text = self.zero_shot_context(task)?;
        Ok(match self.demo_position {
            DemoPosition::BeforeTask => format!("{demo_text}{task_text}"),
            DemoPosition::AfterTask => format!("{task_text}{demo_text}"),
        })
    }

    /// A completed demonstration rendered from an example.
    pub fn demonstration(&self, example: &InstructionExample) -> Result<String> {
        render(
            &self.demo_block,
            &example.question(),
            example.input.as_deref().unwrap_or(""),
            &example.output,
        )
    }

    pub fn fingerprint(&self) -> String {
        let position = match self.demo_position {
            DemoPosition::BeforeTask => "before_task",
            DemoPosition::AfterTask => "after_task",
        };
        sha256_hex(&[
            self.task_block.as_bytes(),
            self.demo_block.as_bytes(),
            position.as_bytes(),
        ])
    }
}

/// Substitute placeholders in `template`. Unknown placeholders and unclosed
/// braces are template errors.
pub fn render(template: &str, instruction: &str, input: &str, output: &str) -> Result<String> {
    let mut out = String::with_capacity(template.len() + instruction.len() + output.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or_else(|| {
            Error::Template(format!("unclosed '{{' in template {template:?}"))
        })?;
        let name = &after[..close];
        match name {
            "instruction" => out.push_str(instruction),
            "input" => out.push_str(input),
            "output" => out.push_str(output),
            other => {
                return Err(Error::Template(format!(
                    "unresolved placeholder {{{other}}} in template {template:?}"
                )))
            }
        }
        rest = &after[close + 1..];
    }
    if rest.contains('}') {
        return Err(Error::Template(format!(
            "stray '}}' in template {template:?}"
        )));
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{ExampleId, TaskProvenance};

    fn example(instruction: &str, input: Option<&str>, output: &str) -> InstructionExample {
        InstructionExample {
            id: ExampleId(0),
            instruction: instruction.into(),
            input: input.map(String::from),
            output: output.into(),
        }
    }

    #[test]
    fn default_template_renders_documented_string() {
        let ex = example("Add 2+2", None, "4");
        let tpl = PromptTemplate::default();
        assert_eq!(
            tpl.demonstration(&ex).unwrap(),
            "Question:\nAdd 2+2\nAnswer:\n4\n\n"
        );
    }

    #[test]
    fn rendering_is_idempotent() {
        let ex = example("Sort", Some("3 1 2"), "1 2 3");
        let tpl = PromptTemplate::default();
        let a = tpl.demonstration(&ex).unwrap();
        let b = tpl.demonstration(&ex).unwrap();
        assert_eq!(a.as_bytes(), b.as_bytes());
    }

    #[test]
    fn missing_output_placeholder_is_a_template_error() {
        let tpl = PromptTemplate {
            task_block: "{instruction}".into(),
            demo_block: "{instruction}".into(),
            demo_position: DemoPosition::BeforeTask,
        };
        assert!(matches!(tpl.validate(), Err(Error::Template(_))));
    }

    #[test]
    fn unknown_placeholder_is_a_template_error() {
        let err = render("{nope}", "i", "", "o").unwrap_err();
        assert!(matches!(err, Error::Template(_)));
    }

    #[test]
    fn unclosed_brace_is_a_template_error() {
        assert!(matches!(render("{instr", "i", "", "o"), Err(Error::Template(_))));
        assert!(matches!(render("a } b", "i", "", "o"), Err(Error::Template(_))));
    }

    #[test]
    fn one_shot_context_orders_blocks() {
        let demo = example("d", None, "D");
        let task = PredefinedTask {
            task_id: 0,
            task_text: "t".into(),
            answer_text: "T".into(),
            provenance: TaskProvenance::Random,
            source_example_id: None,
            answer_token_count: None,
            zero_shot_score: None,
        };
        let mut tpl = PromptTemplate::raw();
        assert_eq!(tpl.one_shot_context(&demo, &task).unwrap(), "dDt");
        tpl.demo_position = DemoPosition::AfterTask;
        assert_eq!(tpl.one_shot_context(&demo, &task).unwrap(), "tdD");
    }

    #[test]
    fn fingerprint_changes_with_any_field() {
        let base = PromptTemplate::default();
        let mut other = base.clone();
        other.demo_position = DemoPosition::AfterTask;
        assert_ne!(base.fingerprint(), other.fingerprint());
        let mut third = base.clone();
        third.task_block.push(' ');
        assert_ne!(base.fingerprint(), third.fingerprint());
    }
}
