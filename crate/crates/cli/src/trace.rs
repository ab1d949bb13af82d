//! Step-by-step rendering of a decode: accepted drafts in green, the
//! rejected draft in red with strike-through, and tokens sampled from the
//! target in blue.

use specdec::engine::StepTrace;
use specdec::models::Tokenizer;

const GREEN: &str = "\x1b[32m";
const RED_STRUCK: &str = "\x1b[31;9m";
const BLUE: &str = "\x1b[34m";
const RESET: &str = "\x1b[0m";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Accepted,
    Rejected,
    Target,
}

fn paint(text: &str, role: Role, color: bool) -> String {
    match (role, color) {
        (Role::Accepted, true) => format!("{GREEN}{text}{RESET}"),
        (Role::Rejected, true) => format!("{RED_STRUCK}{text}{RESET}"),
        (Role::Target, true) => format!("{BLUE}{text}{RESET}"),
        (Role::Accepted, false) => text.to_string(),
        (Role::Rejected, false) => format!("[-{text}-]"),
        (Role::Target, false) => format!("{{+{text}+}}"),
    }
}

/// Renders the tokens one step kept. Without color, a rejected draft shows
/// as `[-tok-]` and a target token as `{+tok+}`.
pub fn render_step(trace: &StepTrace, tokenizer: &Tokenizer, color: bool) -> String {
    let mut parts = Vec::new();
    let shown_accepted = trace.accepted_n.min(trace.kept);
    for record in &trace.drafted[..shown_accepted] {
        parts.push(paint(&tokenizer.token_text(record.token), Role::Accepted, color));
    }
    if trace.kept > trace.accepted_n {
        if let Some(rejected) = trace.drafted.get(trace.accepted_n) {
            parts.push(paint(&tokenizer.token_text(rejected.token), Role::Rejected, color));
        }
        parts.push(paint(&tokenizer.token_text(trace.correction.token), Role::Target, color));
    }
    parts.join(tokenizer.joiner())
}
