//! Prompt templates for the two generative roles and the line format the
//! classifier is asked to produce.

use std::fmt::Write;

use super::GatewayError;
use crate::corpus::{Label12, Paragraph};

/// Placeholder that replaces the masked reason in the blank-filler input.
pub const MASK_TOKEN: &str = "<BLANK>";

const CLASSIFIER_HEADER: &str = "You label paragraphs of website privacy policies.\nCategories:\n";

const CLASSIFIER_INSTRUCTIONS: &str = "\
For every category that applies to the paragraph, write one line:
Label: <category> | Reason: \"<excerpt>\"
The excerpt must be copied word for word from the paragraph. Inside the quotes write \\\" for a double quote, \\\\ for a backslash and \\n for a line break.
Write nothing else.
";

/// Prompt for the explained classifier. The paragraph text is embedded
/// verbatim between `<<<` and `>>>` lines.
pub fn build_classifier_prompt(paragraph: &Paragraph) -> String {
    let mut p = String::with_capacity(paragraph.text.len() + 1024);
    p.push_str(CLASSIFIER_HEADER);
    for label in Label12::ALL {
        let _ = writeln!(p, "- {}", label.name());
    }
    p.push('\n');
    p.push_str(CLASSIFIER_INSTRUCTIONS);
    p.push_str("\nParagraph:\n<<<\n");
    p.push_str(&paragraph.text);
    p.push_str("\n>>>\n");
    p
}

/// Prompt for the blank filler. `masked_text` must contain exactly one
/// [`MASK_TOKEN`].
pub fn build_filler_prompt(masked_text: &str, label: Label12) -> Result<String, GatewayError> {
    match masked_text.matches(MASK_TOKEN).count() {
        0 => return Err(GatewayError::NoMaskToken),
        1 => {}
        n => return Err(GatewayError::MultipleMaskTokens(n)),
    }
    let mut p = String::with_capacity(masked_text.len() + 512);
    let _ = write!(
        p,
        "One passage of the privacy policy paragraph below was replaced by {MASK_TOKEN}.\n\
         The passage is the reason the paragraph belongs to the category: {}\n\
         Write the text that best fills {MASK_TOKEN}, on a single line, and nothing else.\n\
         \nParagraph:\n<<<\n{masked_text}\n>>>\n",
        label.name()
    );
    Ok(p)
}

pub(crate) fn escape_reason(reason: &str) -> String {
    let mut out = String::with_capacity(reason.len() + 2);
    for c in reason.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

/// One output line in the classifier's format.
pub fn render_classifier_line(label: Label12, reason: &str) -> String {
    format!("Label: {} | Reason: \"{}\"", label.name(), escape_reason(reason))
}

/// Full classifier output for a list of pairs, one line each.
pub fn render_classifier_output(pairs: &[(Label12, String)]) -> String {
    pairs
        .iter()
        .map(|(l, r)| render_classifier_line(*l, r))
        .collect::<Vec<_>>()
        .join("\n")
}
