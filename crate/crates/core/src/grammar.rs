//! Output grammars shared by gold answers and model responses.
//!
//! Event-type step: `Type; trigger <seg> Type; trigger`, or `None`.
//! Argument step: `text1; text2 <seg> region1; region2`, `None` on an empty side.
//!
//! The two ablation modes use line-oriented extensions of the argument grammar:
//!
//! ```text
//! Target: Taleban insurgents <seg> None        (one role per line, joint-meae)
//!
//! [Conflict.Attack; fight]                     (event header, joint-all)
//! Target: Taleban insurgents <seg> None
//! Instrument: None <seg> machine gun
//! ```
//!
//! Formatters assume sanitized items (see [`sanitize_item`]). Parsers are
//! total: anything they cannot use becomes a [`Diagnostic`].

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Serialize, Serializer};

use crate::schema::{ArgumentRoleDef, EventSchema, EventTypeId};

pub const SEG: &str = "<seg>";
pub const NONE: &str = "None";

/// Non-fatal findings of parsing and extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    UnknownEventType { segment: String },
    MissingTriggerSeparator { segment: String },
    EmptyTrigger { segment: String },
    DuplicateMention { event_type: EventTypeId, trigger: String },
    MissingArgumentSeparator,
    ExtraArgumentSeparator,
    UnknownRole { role: String },
    DuplicateRole { role: String },
    MalformedLine { line: String },
    UnanchoredTrigger { event_type: EventTypeId, trigger: String },
    AmbiguousTrigger { trigger: String },
    UnanchoredArgument { role: String, surface: String },
    NoRegion { role: String, description: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownEventType { segment } => write!(f, "unknown event type in {segment:?}"),
            Self::MissingTriggerSeparator { segment } => {
                write!(f, "no ';' between type and trigger in {segment:?}")
            }
            Self::EmptyTrigger { segment } => write!(f, "empty trigger in {segment:?}"),
            Self::DuplicateMention { event_type, trigger } => {
                write!(f, "duplicate mention ({event_type}, {trigger:?}) dropped")
            }
            Self::MissingArgumentSeparator => {
                write!(f, "no {SEG} in argument response; treated as text side")
            }
            Self::ExtraArgumentSeparator => {
                write!(f, "extra {SEG} in argument response kept on image side")
            }
            Self::UnknownRole { role } => write!(f, "unknown role {role:?}"),
            Self::DuplicateRole { role } => write!(f, "role {role:?} answered more than once"),
            Self::MalformedLine { line } => write!(f, "malformed line {line:?}"),
            Self::UnanchoredTrigger { event_type, trigger } => {
                write!(f, "trigger {trigger:?} of {event_type} not found in sentence")
            }
            Self::AmbiguousTrigger { trigger } => {
                write!(f, "trigger {trigger:?} occurs more than once; first occurrence used")
            }
            Self::UnanchoredArgument { role, surface } => {
                write!(
                    f,
                    "{role} argument {surface:?} not found in sentence; kept as surface only"
                )
            }
            Self::NoRegion { role, description } => {
                write!(f, "{role} region {description:?} could not be grounded")
            }
        }
    }
}

impl Serialize for Diagnostic {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Makes a string safe to embed in any answer grammar: `;` becomes `,`,
/// `<seg>` is removed, line breaks become spaces, and the result is trimmed.
pub fn sanitize_item(item: &str) -> String {
    let mut s: String = item
        .chars()
        .map(|c| match c {
            ';' => ',',
            '\n' | '\r' => ' ',
            c => c,
        })
        .collect();
    while s.contains(SEG) {
        s = s.replace(SEG, "");
    }
    s.trim().to_string()
}

/// True for `None`, case-insensitive, with an optional trailing period.
pub fn is_none_marker(s: &str) -> bool {
    let s = s.trim();
    let s = s.strip_suffix('.').unwrap_or(s).trim_end();
    s.eq_ignore_ascii_case(NONE)
}

/// `Type; trigger` segments joined by ` <seg> `, or `None`.
pub fn format_etsgp_gold(mentions: &[(EventTypeId, String)]) -> String {
    if mentions.is_empty() {
        return NONE.to_string();
    }
    let mut out = String::new();
    for (i, (ty, trigger)) in mentions.iter().enumerate() {
        debug_assert!(!trigger.trim().is_empty());
        if i > 0 {
            out.push(' ');
            out.push_str(SEG);
            out.push(' ');
        }
        out.push_str(ty.as_str());
        out.push_str("; ");
        out.push_str(trigger);
    }
    out
}

fn format_side(items: &[String]) -> String {
    if items.is_empty() {
        NONE.to_string()
    } else {
        items.join("; ")
    }
}

/// `t1; t2 <seg> d1; d2`, with `None` for an empty side.
pub fn format_arsgp_gold(text_args: &[String], image_descs: &[String]) -> String {
    debug_assert!(text_args
        .iter()
        .chain(image_descs)
        .all(|s| !s.contains(';') && !s.contains(SEG)));
    let mut out = format_side(text_args);
    out.push(' ');
    out.push_str(SEG);
    out.push(' ');
    out.push_str(&format_side(image_descs));
    out
}

/// Arguments of one role in the joint grammars.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoleAnswer {
    pub role: String,
    pub text_args: Vec<String>,
    pub image_descs: Vec<String>,
}

/// One `Role: ...` line per answer, in the given order.
pub fn format_joint_meae_gold(answers: &[RoleAnswer]) -> String {
    let mut out = String::new();
    for (i, a) in answers.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&a.role);
        out.push_str(": ");
        out.push_str(&format_arsgp_gold(&a.text_args, &a.image_descs));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointEvent {
    pub event_type: EventTypeId,
    pub trigger: String,
    /// One entry per role of the type, in schema order.
    pub roles: Vec<RoleAnswer>,
}

/// `[Type; trigger]` header followed by role lines, per event; `None` if no event.
pub fn format_joint_all_gold(events: &[JointEvent]) -> String {
    if events.is_empty() {
        return NONE.to_string();
    }
    let mut out = String::new();
    for (i, e) in events.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push('[');
        out.push_str(e.event_type.as_str());
        out.push_str("; ");
        out.push_str(&e.trigger);
        out.push(']');
        for a in &e.roles {
            out.push('\n');
            out.push_str(&format_joint_meae_gold(core::slice::from_ref(a)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EtsgpParse {
    pub mentions: Vec<(EventTypeId, String)>,
    pub diagnostics: Vec<Diagnostic>,
}

enum Segment {
    Skip,
    Mention(EventTypeId, String),
    Bad(Diagnostic),
}

fn parse_mention_segment(segment: &str, schema: &EventSchema) -> Segment {
    let segment = segment.trim();
    if segment.is_empty() || is_none_marker(segment) {
        return Segment::Skip;
    }
    let Some((ty, trigger)) = segment.split_once(';') else {
        return Segment::Bad(Diagnostic::MissingTriggerSeparator {
            segment: segment.to_string(),
        });
    };
    let Some(id) = schema.resolve(ty) else {
        return Segment::Bad(Diagnostic::UnknownEventType {
            segment: segment.to_string(),
        });
    };
    let trigger = trigger.trim();
    if trigger.is_empty() {
        return Segment::Bad(Diagnostic::EmptyTrigger {
            segment: segment.to_string(),
        });
    }
    Segment::Mention(id.clone(), trigger.to_string())
}

/// Parses an event-type step response. Never fails.
pub fn parse_etsgp(response: &str, schema: &EventSchema) -> EtsgpParse {
    let mut out = EtsgpParse::default();
    if is_none_marker(response) {
        return out;
    }
    for segment in response.split(SEG) {
        match parse_mention_segment(segment, schema) {
            Segment::Skip => {}
            Segment::Bad(d) => out.diagnostics.push(d),
            Segment::Mention(ty, trigger) => {
                if out.mentions.iter().any(|(t, s)| *t == ty && *s == trigger) {
                    out.diagnostics.push(Diagnostic::DuplicateMention {
                        event_type: ty,
                        trigger,
                    });
                } else {
                    out.mentions.push((ty, trigger));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArsgpParse {
    pub text_args: Vec<String>,
    pub image_descs: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
}

fn parse_side(side: &str) -> Vec<String> {
    if is_none_marker(side) {
        return Vec::new();
    }
    side.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty() && !is_none_marker(s))
        .map(ToString::to_string)
        .collect()
}

/// Parses an argument step response. Only the first `<seg>` splits. Never fails.
pub fn parse_arsgp(response: &str) -> ArsgpParse {
    let mut diagnostics = Vec::new();
    let (text, image) = match response.split_once(SEG) {
        Some((text, image)) => {
            if image.contains(SEG) {
                diagnostics.push(Diagnostic::ExtraArgumentSeparator);
            }
            (text, image)
        }
        None => {
            diagnostics.push(Diagnostic::MissingArgumentSeparator);
            (response, "")
        }
    };
    ArsgpParse {
        text_args: parse_side(text),
        image_descs: parse_side(image),
        diagnostics,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct JointMeaeParse {
    /// One entry per role, in schema order; unanswered roles are empty.
    pub roles: Vec<RoleAnswer>,
    pub diagnostics: Vec<Diagnostic>,
}

fn empty_answers(roles: &[ArgumentRoleDef]) -> Vec<RoleAnswer> {
    roles
        .iter()
        .map(|r| RoleAnswer {
            role: r.name.clone(),
            ..RoleAnswer::default()
        })
        .collect()
}

/// Applies one `Role: ...` line to `answers`.
fn apply_role_line(
    line: &str,
    roles: &[ArgumentRoleDef],
    answers: &mut [RoleAnswer],
    seen: &mut Vec<usize>,
    diagnostics: &mut Vec<Diagnostic>,
) {
    let Some((name, rest)) = line.split_once(':') else {
        diagnostics.push(Diagnostic::MalformedLine { line: line.to_string() });
        return;
    };
    let name = name.trim();
    let idx = roles
        .iter()
        .position(|r| r.name == name)
        .or_else(|| roles.iter().position(|r| crate::schema::eq_ignore_case(&r.name, name)));
    let Some(idx) = idx else {
        diagnostics.push(Diagnostic::UnknownRole { role: name.to_string() });
        return;
    };
    if seen.contains(&idx) {
        diagnostics.push(Diagnostic::DuplicateRole {
            role: roles[idx].name.clone(),
        });
    }
    seen.push(idx);
    let parsed = parse_arsgp(rest);
    diagnostics.extend(parsed.diagnostics);
    answers[idx].text_args.extend(parsed.text_args);
    answers[idx].image_descs.extend(parsed.image_descs);
}

/// Parses a joint argument response for a type with the given roles.
pub fn parse_joint_meae(response: &str, roles: &[ArgumentRoleDef]) -> JointMeaeParse {
    let mut out = JointMeaeParse {
        roles: empty_answers(roles),
        diagnostics: Vec::new(),
    };
    if is_none_marker(response) {
        return out;
    }
    let mut seen = Vec::new();
    for line in response.lines().map(str::trim).filter(|l| !l.is_empty()) {
        apply_role_line(line, roles, &mut out.roles, &mut seen, &mut out.diagnostics);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct JointAllParse {
    pub events: Vec<JointEvent>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parses a one-shot detection-plus-arguments response. Never fails.
pub fn parse_joint_all(response: &str, schema: &EventSchema) -> JointAllParse {
    let mut out = JointAllParse::default();
    if is_none_marker(response) {
        return out;
    }
    // Index into out.events of the block being filled, if its header was usable.
    let mut current: Option<usize> = None;
    let mut seen = Vec::new();
    for line in response.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(inner) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = None;
            seen.clear();
            match parse_mention_segment(inner, schema) {
                Segment::Skip => {}
                Segment::Bad(d) => out.diagnostics.push(d),
                Segment::Mention(ty, trigger) => {
                    if out.events.iter().any(|e| e.event_type == ty && e.trigger == trigger) {
                        out.diagnostics.push(Diagnostic::DuplicateMention {
                            event_type: ty,
                            trigger,
                        });
                        continue;
                    }
                    let roles = schema.roles_of(&ty).unwrap_or_default();
                    out.events.push(JointEvent {
                        roles: empty_answers(roles),
                        event_type: ty,
                        trigger,
                    });
                    current = Some(out.events.len() - 1);
                }
            }
            continue;
        }
        let Some(idx) = current else {
            out.diagnostics
                .push(Diagnostic::MalformedLine { line: line.to_string() });
            continue;
        };
        let event = &mut out.events[idx];
        let roles = schema.roles_of(&event.event_type).unwrap_or_default();
        apply_role_line(line, roles, &mut event.roles, &mut seen, &mut out.diagnostics);
    }
    out
}
