//! Prompt construction from `{{placeholder}}` templates.
//!
//! The built-in templates are compiled in from `templates/*.v1.txt`; a
//! replacement set can be supplied as strings (the CLI reads them from a
//! directory). Every template is validated once, so building a prompt
//! cannot fail for a stepwise run.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::grammar::SEG;
use crate::schema::{ArgumentRoleDef, EventSchema, EventTypeDef, EventTypeId};

pub const TEMPLATE_VERSION: &str = "v1";

/// Which prompting framework variant a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PromptMode {
    /// Event-type step, then one argument step per role.
    #[default]
    #[serde(rename = "stepwise")]
    Stepwise,
    /// Detection and all arguments in a single response.
    #[serde(rename = "jall")]
    JointAll,
    /// Event-type step, then all roles of a mention in a single response.
    #[serde(rename = "jmeae")]
    JointMeae,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stepwise => "stepwise",
            Self::JointAll => "jall",
            Self::JointMeae => "jmeae",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stepwise" => Some(Self::Stepwise),
            "jall" | "joint-all" => Some(Self::JointAll),
            "jmeae" | "joint-meae" => Some(Self::JointMeae),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TemplateKind {
    Etsgp,
    Arsgp,
    JointAll,
    JointMeae,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 4] = [Self::Etsgp, Self::Arsgp, Self::JointAll, Self::JointMeae];

    pub fn file_name(self) -> &'static str {
        match self {
            Self::Etsgp => "etsgp.v1.txt",
            Self::Arsgp => "arsgp.v1.txt",
            Self::JointAll => "joint_all.v1.txt",
            Self::JointMeae => "joint_meae.v1.txt",
        }
    }

    fn placeholders(self) -> &'static [&'static str] {
        match self {
            Self::Etsgp => &["event_types", "sentence"],
            Self::Arsgp => &[
                "event_type",
                "event_definition",
                "trigger",
                "role",
                "role_definition",
                "sentence",
            ],
            Self::JointAll => &["schema", "sentence"],
            Self::JointMeae => &["event_type", "event_definition", "trigger", "roles", "sentence"],
        }
    }

    /// Placeholders a template must use; the rest of [`Self::placeholders`] are optional.
    fn required(self) -> &'static [&'static str] {
        match self {
            Self::Etsgp => &["event_types", "sentence"],
            Self::Arsgp => &["event_type", "trigger", "role", "role_definition", "sentence"],
            Self::JointAll => &["schema", "sentence"],
            Self::JointMeae => &["event_type", "trigger", "roles", "sentence"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template {file}: unterminated placeholder")]
    Unterminated { file: &'static str },
    #[error("template {file}: unknown placeholder {{{{{name}}}}}")]
    UnknownPlaceholder { file: &'static str, name: String },
    #[error("template {file}: missing placeholder {{{{{name}}}}}")]
    MissingPlaceholder { file: &'static str, name: &'static str },
    #[error("template {file}: {{{{sentence}}}} must appear exactly once")]
    SentenceCount { file: &'static str },
    #[error("template {file}: must document the {SEG} separator")]
    MissingSeparator { file: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("stepwise mode has no joint prompt")]
    NotJoint,
    #[error("joint-meae prompts need an (event type, trigger) context")]
    MissingContext,
    #[error("joint-all prompts take no event context")]
    UnexpectedContext,
    #[error("unknown event type {0}")]
    UnknownType(EventTypeId),
}

enum Piece {
    Literal(String),
    Slot(String),
}

/// A parsed template. Substitution is single-pass: values are never re-scanned.
pub struct Template {
    kind: TemplateKind,
    pieces: Vec<Piece>,
}

impl Template {
    pub fn parse(kind: TemplateKind, source: &str) -> Result<Self, TemplateError> {
        let file = kind.file_name();
        let mut pieces = Vec::new();
        let mut rest = source;
        while let Some(open) = rest.find("{{") {
            let after = &rest[open + 2..];
            let close = after.find("}}").ok_or(TemplateError::Unterminated { file })?;
            let name = after[..close].trim();
            if !kind.placeholders().contains(&name) {
                return Err(TemplateError::UnknownPlaceholder {
                    file,
                    name: name.to_string(),
                });
            }
            pieces.push(Piece::Literal(rest[..open].to_string()));
            pieces.push(Piece::Slot(name.to_string()));
            rest = &after[close + 2..];
        }
        pieces.push(Piece::Literal(rest.to_string()));

        let uses = |n: &str| pieces.iter().filter(|p| matches!(p, Piece::Slot(s) if s == n)).count();
        for &name in kind.required() {
            if uses(name) == 0 {
                return Err(TemplateError::MissingPlaceholder { file, name });
            }
        }
        if uses("sentence") != 1 {
            return Err(TemplateError::SentenceCount { file });
        }
        if !source.contains(SEG) {
            return Err(TemplateError::MissingSeparator { file });
        }
        Ok(Self { kind, pieces })
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    fn render(&self, vars: &[(&str, &str)]) -> String {
        let mut out = String::new();
        for piece in &self.pieces {
            match piece {
                Piece::Literal(s) => out.push_str(s),
                Piece::Slot(name) => {
                    if let Some((_, v)) = vars.iter().find(|(k, _)| k == name) {
                        out.push_str(v);
                    }
                }
            }
        }
        out
    }
}

/// A fully rendered textual instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
}

pub struct PromptTemplates {
    etsgp: Template,
    arsgp: Template,
    joint_all: Template,
    joint_meae: Template,
}

impl PromptTemplates {
    /// The compiled-in template set.
    pub fn builtin() -> Self {
        Self::from_sources(|kind| Some(builtin_source(kind).to_string())).expect("built-in templates are valid")
    }

    /// Loads templates from `source(kind)`, falling back to the built-in text on `None`.
    pub fn from_sources(mut source: impl FnMut(TemplateKind) -> Option<String>) -> Result<Self, TemplateError> {
        let mut load = |kind| {
            let text = source(kind).unwrap_or_else(|| builtin_source(kind).to_string());
            Template::parse(kind, &text)
        };
        Ok(Self {
            etsgp: load(TemplateKind::Etsgp)?,
            arsgp: load(TemplateKind::Arsgp)?,
            joint_all: load(TemplateKind::JointAll)?,
            joint_meae: load(TemplateKind::JointMeae)?,
        })
    }

    /// Event-type step prompt listing every type with its definition.
    pub fn build_etsgp_prompt(&self, schema: &EventSchema, sentence: &str) -> Prompt {
        let mut types = String::new();
        for (i, def) in schema.types().iter().enumerate() {
            if i > 0 {
                types.push('\n');
            }
            let _ = write!(types, "- {}: {}", def.id, def.definition);
        }
        Prompt {
            text: self.etsgp.render(&[("event_types", &types), ("sentence", sentence)]),
        }
    }

    /// Argument step prompt targeting a single role of a detected mention.
    pub fn build_arsgp_prompt(
        &self,
        event: &EventTypeDef,
        trigger: &str,
        role: &ArgumentRoleDef,
        sentence: &str,
    ) -> Prompt {
        Prompt {
            text: self.arsgp.render(&[
                ("event_type", event.id.as_str()),
                ("event_definition", &event.definition),
                ("trigger", trigger),
                ("role", &role.name),
                ("role_definition", &role.definition),
                ("sentence", sentence),
            ]),
        }
    }

    /// Prompt for the ablation modes.
    pub fn build_joint_prompt(
        &self,
        mode: PromptMode,
        schema: &EventSchema,
        sentence: &str,
        context: Option<(&EventTypeId, &str)>,
    ) -> Result<Prompt, PromptError> {
        match (mode, context) {
            (PromptMode::Stepwise, _) => Err(PromptError::NotJoint),
            (PromptMode::JointAll, Some(_)) => Err(PromptError::UnexpectedContext),
            (PromptMode::JointMeae, None) => Err(PromptError::MissingContext),
            (PromptMode::JointAll, None) => {
                let mut text = String::new();
                for (i, def) in schema.types().iter().enumerate() {
                    if i > 0 {
                        text.push('\n');
                    }
                    let _ = write!(
                        text,
                        "- {}: {}\n  Roles:\n{}",
                        def.id,
                        def.definition,
                        role_list(&def.roles, "  ")
                    );
                }
                Ok(Prompt {
                    text: self.joint_all.render(&[("schema", &text), ("sentence", sentence)]),
                })
            }
            (PromptMode::JointMeae, Some((ty, trigger))) => {
                let def = schema.get(ty).ok_or_else(|| PromptError::UnknownType(ty.clone()))?;
                Ok(Prompt {
                    text: self.joint_meae.render(&[
                        ("event_type", def.id.as_str()),
                        ("event_definition", &def.definition),
                        ("trigger", trigger),
                        ("roles", &role_list(&def.roles, "")),
                        ("sentence", sentence),
                    ]),
                })
            }
        }
    }
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self::builtin()
    }
}

fn role_list(roles: &[ArgumentRoleDef], indent: &str) -> String {
    let mut out = String::new();
    for (i, r) in roles.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "{indent}- {}: {}", r.name, r.definition);
    }
    out
}

pub fn builtin_source(kind: TemplateKind) -> &'static str {
    match kind {
        TemplateKind::Etsgp => include_str!("../templates/etsgp.v1.txt"),
        TemplateKind::Arsgp => include_str!("../templates/arsgp.v1.txt"),
        TemplateKind::JointAll => include_str!("../templates/joint_all.v1.txt"),
        TemplateKind::JointMeae => include_str!("../templates/joint_meae.v1.txt"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::{attack_schema, id, singleton_schema};
    use proptest::prelude::*;

    const S: &str = "Afghan soldiers fight Taleban insurgents in Helmand province.";

    #[test]
    fn etsgp_lists_every_type_and_embeds_sentence() {
        let schema = attack_schema();
        let p = PromptTemplates::builtin().build_etsgp_prompt(&schema, S);
        for def in schema.types() {
            assert!(p.text.contains(def.id.as_str()));
            assert!(p.text.contains(&def.definition));
        }
        assert_eq!(p.text.matches(S).count(), 1);
        assert!(p.text.contains("<seg>") && p.text.contains("None"));
    }

    #[test]
    fn etsgp_singleton_has_one_type_block() {
        let p = PromptTemplates::builtin().build_etsgp_prompt(&singleton_schema(), S);
        assert_eq!(p.text.matches("\n- ").count(), 1);
        assert!(p.text.contains("- Contact.Meet: "));
    }

    #[test]
    fn arsgp_names_trigger_and_role_definition() {
        let schema = attack_schema();
        let def = schema.get(&id("Conflict.Attack")).unwrap();
        let role = def.role("Instrument").unwrap();
        let t = PromptTemplates::builtin();
        let p = t.build_arsgp_prompt(def, "fight", role, S);
        assert!(p.text.contains("\"fight\""));
        assert!(p.text.contains(&role.definition));
        assert!(p.text.contains("Conflict.Attack"));
        assert!(p.text.contains("<seg>"));
        assert_eq!(p, t.build_arsgp_prompt(def, "fight", role, S));
    }

    #[test]
    fn joint_all_lists_every_role() {
        let schema = attack_schema();
        let p = PromptTemplates::builtin()
            .build_joint_prompt(PromptMode::JointAll, &schema, S, None)
            .unwrap();
        for def in schema.types() {
            for r in &def.roles {
                assert!(p.text.contains(&alloc::format!("- {}: {}", r.name, r.definition)));
            }
        }
    }

    #[test]
    fn joint_meae_lists_roles_of_given_type() {
        let schema = attack_schema();
        let attack = id("Conflict.Attack");
        let t = PromptTemplates::builtin();
        let p = t
            .build_joint_prompt(PromptMode::JointMeae, &schema, S, Some((&attack, "fight")))
            .unwrap();
        for r in schema.roles_of(&attack).unwrap() {
            assert!(p.text.contains(&r.name));
        }
        assert!(!p.text.contains("Victim"));
        assert_eq!(
            t.build_joint_prompt(PromptMode::JointMeae, &schema, S, None),
            Err(PromptError::MissingContext)
        );
        assert_eq!(
            t.build_joint_prompt(PromptMode::Stepwise, &schema, S, None),
            Err(PromptError::NotJoint)
        );
    }

    #[test]
    fn sentence_is_not_reexpanded() {
        let s = "A {{sentence}} and {{event_types}} here";
        let p = PromptTemplates::builtin().build_etsgp_prompt(&singleton_schema(), s);
        assert_eq!(p.text.matches(s).count(), 1);
    }

    #[test]
    fn template_validation() {
        let parse = |src: &str| Template::parse(TemplateKind::Etsgp, src).err();
        assert_eq!(parse("{{event_types}} {{sentence}} <seg>"), None);
        assert!(matches!(
            parse("{{event_types}} {{sentence}}"),
            Some(TemplateError::MissingSeparator { .. })
        ));
        assert!(matches!(
            parse("{{event_types}} <seg>"),
            Some(TemplateError::MissingPlaceholder { .. })
        ));
        assert!(matches!(
            parse("{{event_types}} {{sentence}} {{sentence}} <seg>"),
            Some(TemplateError::SentenceCount { .. })
        ));
        assert!(matches!(
            parse("{{bogus}} {{event_types}} {{sentence}} <seg>"),
            Some(TemplateError::UnknownPlaceholder { .. })
        ));
        assert!(matches!(
            parse("{{event_types}} {{sentence <seg>"),
            Some(TemplateError::Unterminated { .. })
        ));
    }

    #[test]
    fn custom_template_override() {
        let t = PromptTemplates::from_sources(|k| {
            (k == TemplateKind::Etsgp).then(|| "Types:\n{{ event_types }}\nUse <seg>.\n{{sentence}}".into())
        })
        .unwrap();
        let p = t.build_etsgp_prompt(&singleton_schema(), "Leaders meet.");
        assert!(p.text.starts_with("Types:\n- Contact.Meet"));
        assert!(p.text.ends_with("Leaders meet."));
    }

    proptest! {
        #[test]
        fn prompts_are_deterministic_and_embed_sentence_once(body in "[a-z ,.]{1,60}") {
            let sentence = alloc::format!("SENTENCE-{body}");
            let schema = attack_schema();
            let t = PromptTemplates::builtin();
            let a = t.build_etsgp_prompt(&schema, &sentence);
            prop_assert_eq!(&a, &t.build_etsgp_prompt(&schema, &sentence));
            prop_assert_eq!(a.text.matches(&sentence).count(), 1);
            let def = &schema.types()[0];
            let b = t.build_arsgp_prompt(def, "fight", &def.roles[0], &sentence);
            prop_assert_eq!(b.text.matches(&sentence).count(), 1);
            let c = t.build_joint_prompt(PromptMode::JointAll, &schema, &sentence, None).unwrap();
            prop_assert_eq!(c.text.matches(&sentence).count(), 1);
        }
    }
}
