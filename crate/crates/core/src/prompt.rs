//! Few-shot prompt rendering.
//!
//! Templates are plain text with `{field}` and `{label}` slots (`{{` and `}}`
//! are literal braces). A rendered prompt is laid out as
//!
//! ```text
//! <instruction>\n\n<demo 1>\n<demo 2>...\n\n<query>
//! ```
//!
//! where the query block is cut off at its `{label}` slot. Sections that are
//! empty (no instruction, zero demonstrations) are omitted with their
//! separator.

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Example};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Field(usize),
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Template {
    segments: Vec<Segment>,
}

impl Template {
    fn parse(raw: &str, fields: &[String]) -> Result<Self> {
        let mut segments = Vec::new();
        let mut text = String::new();
        let mut chars = raw.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    text.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    text.push('}');
                }
                '{' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(ch) => name.push(ch),
                            None => return Err(Error::InvalidTemplate(format!("unclosed slot in {raw:?}"))),
                        }
                    }
                    if !text.is_empty() {
                        segments.push(Segment::Text(std::mem::take(&mut text)));
                    }
                    if name == "label" {
                        segments.push(Segment::Label);
                    } else {
                        let idx = fields
                            .iter()
                            .position(|f| *f == name)
                            .ok_or(Error::UnknownField(name))?;
                        segments.push(Segment::Field(idx));
                    }
                }
                '}' => return Err(Error::InvalidTemplate(format!("unmatched `}}` in {raw:?}"))),
                c => text.push(c),
            }
        }
        if !text.is_empty() {
            segments.push(Segment::Text(text));
        }
        Ok(Template { segments })
    }

    fn render(&self, example: &Example, label: Option<&str>, out: &mut String) -> Result<()> {
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Field(i) => out.push_str(example.fields.get(*i).ok_or_else(|| {
                    Error::InvalidTemplate(format!(
                        "example {} has {} fields, template needs field #{}",
                        example.id,
                        example.fields.len(),
                        i + 1
                    ))
                })?),
                Segment::Label => match label {
                    Some(l) => out.push_str(l),
                    None => break,
                },
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    instruction: String,
    demo: Template,
    query: Template,
}

impl PromptTemplate {
    /// `query_format` defaults to `demo_format`; either way it must end at a
    /// `{label}` slot, which is left open when rendering the test input.
    pub fn new(instruction: &str, demo_format: &str, query_format: Option<&str>, fields: &[String]) -> Result<Self> {
        let demo = Template::parse(demo_format, fields)?;
        if !demo.segments.contains(&Segment::Label) {
            return Err(Error::InvalidTemplate("demo_format has no {label} slot".into()));
        }
        let mut query = match query_format {
            Some(q) => Template::parse(q, fields)?,
            None => demo.clone(),
        };
        let label_at = query
            .segments
            .iter()
            .position(|s| *s == Segment::Label)
            .ok_or_else(|| Error::InvalidTemplate("query_format has no {label} slot".into()))?;
        if query_format.is_some() && label_at + 1 != query.segments.len() {
            return Err(Error::InvalidTemplate(
                "query_format must end at its {label} slot".into(),
            ));
        }
        query.segments.truncate(label_at + 1);
        Ok(PromptTemplate {
            instruction: instruction.to_string(),
            demo,
            query,
        })
    }

    pub fn for_dataset(dataset: &Dataset) -> Result<Self> {
        Self::new(
            &dataset.instruction,
            &dataset.demo_format,
            dataset.query_format.as_deref(),
            &dataset.field_names,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoOrder {
    /// Highest selection score first.
    #[default]
    Selection,
    /// Most relevant demonstration closest to the test input.
    Reversed,
}

impl std::str::FromStr for DemoOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "selection" => Ok(DemoOrder::Selection),
            "reversed" => Ok(DemoOrder::Reversed),
            other => Err(Error::InvalidConfig(format!("unknown demo order {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    /// Demonstration ids in the order they appear in `text`.
    pub demo_ids: Vec<usize>,
    pub k_effective: usize,
}

/// Renders the instruction, each demonstration with its verbalized label,
/// then the test input with the label left open. Demonstrations are given
/// in selection order; `order` decides how they are laid out.
pub fn build_prompt(
    template: &PromptTemplate,
    dataset: &Dataset,
    demos: &[&Example],
    test: &Example,
    order: DemoOrder,
) -> Result<Prompt> {
    let mut ordered: Vec<&Example> = demos.to_vec();
    if order == DemoOrder::Reversed {
        ordered.reverse();
    }
    let mut text = String::new();
    if !template.instruction.is_empty() {
        text.push_str(&template.instruction);
        text.push_str("\n\n");
    }
    for (i, demo) in ordered.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        let word = dataset
            .verbalize(&demo.label)
            .ok_or_else(|| Error::InvalidDataset(format!("demonstration {} has unknown label", demo.id)))?;
        template.demo.render(demo, Some(word), &mut text)?;
    }
    if !ordered.is_empty() {
        text.push_str("\n\n");
    }
    template.query.render(test, None, &mut text)?;
    Ok(Prompt {
        text,
        demo_ids: ordered.iter().map(|e| e.id).collect(),
        k_effective: ordered.len(),
    })
}
