//! Per-document extraction state machine.
//!
//! Stepwise mode: one event-type call, then for every anchored mention one
//! argument call per role of its type (schema order), then one grounding
//! call per image-region description. The ablation modes replace the
//! argument loop with one call per mention (`jmeae`) or the whole pipeline
//! with one call per document (`jall`).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bbox::BoundingBox;
use crate::gateway::{BackendError, ChatVision, ChatVisionRequest, DecodeParams, Grounder, ImageRef};
use crate::grammar::{self, Diagnostic, RoleAnswer};
use crate::prompt::{PromptMode, PromptTemplates};
use crate::schema::{EventSchema, EventTypeDef, EventTypeId};
use crate::text::{normalize_trigger, TextSpan};

/// A gold `(type, trigger)` pair attached to a document for teacher forcing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldMention {
    #[serde(rename = "type")]
    pub event_type: EventTypeId,
    pub trigger: TextSpan,
}

/// One line of a corpus file: `{ "id", "sentence", "image", "gold_events"? }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub sentence: String,
    pub image: ImageRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_events: Option<Vec<GoldMention>>,
}

/// Where the role schema of argument steps comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleSource {
    #[default]
    Predicted,
    /// Teacher forcing: argument steps run over the gold mentions.
    Gold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub mode: PromptMode,
    pub role_source: RoleSource,
    pub grounding: bool,
    pub decode: DecodeParams,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            mode: PromptMode::Stepwise,
            role_source: RoleSource::Predicted,
            grounding: true,
            decode: DecodeParams::default(),
        }
    }
}

/// A text argument. Offsets are absent when the model's string is not in the sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgText {
    pub start: Option<usize>,
    pub end: Option<usize>,
    pub surface: String,
}

impl From<TextSpan> for ArgText {
    fn from(s: TextSpan) -> Self {
        Self {
            start: Some(s.start),
            end: Some(s.end),
            surface: s.surface,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundingStatus {
    #[default]
    Grounded,
    /// The grounding service found nothing; excluded from visual scoring.
    NoRegion,
    /// Grounding was switched off for the run.
    NotAttempted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    #[serde(default)]
    pub desc: String,
    #[serde(rename = "box")]
    pub bbox: Option<BoundingBox>,
    #[serde(default)]
    pub status: GroundingStatus,
}

/// A role-labelled argument with a text side, an image side, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argument {
    pub role: String,
    #[serde(default)]
    pub text: Option<ArgText>,
    #[serde(default)]
    pub region: Option<Region>,
}

impl Argument {
    pub fn is_well_formed(&self) -> bool {
        self.text.is_some()
            || self
                .region
                .as_ref()
                .is_some_and(|r| !r.desc.is_empty() || r.bbox.is_some())
    }
}

/// Raw model output of one step, kept for auditing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResponse {
    pub step: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMention {
    #[serde(rename = "type")]
    pub event_type: EventTypeId,
    pub trigger: TextSpan,
    #[serde(default)]
    pub args: Vec<Argument>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<StepResponse>,
}

/// One line of an extraction (or gold) file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
    #[serde(default)]
    pub events: Vec<EventMention>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

/// Result of running one document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentExtraction {
    pub doc_id: String,
    pub image: ImageRef,
    pub events: Vec<EventMention>,
    pub diagnostics: Vec<Diagnostic>,
    pub chat_calls: usize,
    pub ground_calls: usize,
}

impl DocumentExtraction {
    pub fn to_record(&self) -> DocumentRecord {
        DocumentRecord {
            doc_id: self.doc_id.clone(),
            image: Some(self.image.clone()),
            events: self.events.clone(),
            diagnostics: self.diagnostics.iter().map(ToString::to_string).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("document {doc_id}: {step}: {source}")]
    Backend {
        doc_id: String,
        step: String,
        #[source]
        source: BackendError,
    },
    #[error("document {doc_id}: teacher forcing needs gold events")]
    MissingGold { doc_id: String },
    #[error("document {doc_id}: gold event type {event_type} is not in the schema")]
    UnknownGoldType { doc_id: String, event_type: EventTypeId },
    #[error("teacher forcing is not available in joint-all mode")]
    TeacherForcingJointAll,
    #[error("document {doc_id}: {reason}")]
    InvalidDocument { doc_id: String, reason: &'static str },
}

/// Detected, trigger-anchored mentions of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub mentions: Vec<(EventTypeId, TextSpan)>,
    pub response: String,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArgumentExtraction {
    pub args: Vec<Argument>,
    pub provenance: Vec<StepResponse>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Default)]
struct Tally {
    chat: usize,
    ground: usize,
}

/// Runs documents against a chat-vision backend and an optional grounder.
pub struct Extractor<'a> {
    schema: &'a EventSchema,
    templates: &'a PromptTemplates,
    chat: &'a dyn ChatVision,
    grounder: Option<&'a dyn Grounder>,
    config: ExtractionConfig,
}

impl<'a> Extractor<'a> {
    pub fn new(
        schema: &'a EventSchema,
        templates: &'a PromptTemplates,
        chat: &'a dyn ChatVision,
        grounder: Option<&'a dyn Grounder>,
        config: ExtractionConfig,
    ) -> Self {
        Self {
            schema,
            templates,
            chat,
            grounder,
            config,
        }
    }

    pub fn config(&self) -> &ExtractionConfig {
        &self.config
    }

    fn call(&self, doc: &Document, key: String, prompt: String, tally: &mut Tally) -> Result<String, ExtractError> {
        tally.chat += 1;
        let request = ChatVisionRequest {
            key,
            prompt,
            image: doc.image.clone(),
            decode: self.config.decode,
        };
        self.chat.chat_vision(&request).map_err(|source| ExtractError::Backend {
            doc_id: doc.id.clone(),
            step: request.key,
            source,
        })
    }

    fn check_doc(doc: &Document) -> Result<(), ExtractError> {
        if doc.sentence.trim().is_empty() {
            return Err(ExtractError::InvalidDocument {
                doc_id: doc.id.clone(),
                reason: "empty sentence",
            });
        }
        Ok(())
    }

    /// Event-type step: detect `(type, trigger)` pairs and anchor each trigger.
    pub fn detect_events(&self, doc: &Document) -> Result<Detection, ExtractError> {
        Self::check_doc(doc)?;
        self.detect(doc, &mut Tally::default())
    }

    fn detect(&self, doc: &Document, tally: &mut Tally) -> Result<Detection, ExtractError> {
        let prompt = self.templates.build_etsgp_prompt(self.schema, &doc.sentence);
        let response = self.call(doc, format!("{}|etsgp", doc.id), prompt.text, tally)?;
        let parsed = grammar::parse_etsgp(&response, self.schema);
        let mut diagnostics = parsed.diagnostics;
        let mentions = anchor_mentions(parsed.mentions, &doc.sentence, &mut diagnostics);
        Ok(Detection {
            mentions,
            response,
            diagnostics,
        })
    }

    /// Argument steps for one mention.
    pub fn extract_arguments(
        &self,
        doc: &Document,
        event_type: &EventTypeId,
        trigger: &TextSpan,
    ) -> Result<ArgumentExtraction, ExtractError> {
        Self::check_doc(doc)?;
        self.arguments(doc, event_type, trigger, &mut Tally::default())
    }

    fn type_def(&self, doc: &Document, ty: &EventTypeId) -> Result<&'a EventTypeDef, ExtractError> {
        self.schema.get(ty).ok_or_else(|| ExtractError::UnknownGoldType {
            doc_id: doc.id.clone(),
            event_type: ty.clone(),
        })
    }

    fn arguments(
        &self,
        doc: &Document,
        ty: &EventTypeId,
        trigger: &TextSpan,
        tally: &mut Tally,
    ) -> Result<ArgumentExtraction, ExtractError> {
        let def = self.type_def(doc, ty)?;
        let mut out = ArgumentExtraction::default();
        match self.config.mode {
            PromptMode::Stepwise | PromptMode::JointAll => {
                for role in &def.roles {
                    let prompt = self
                        .templates
                        .build_arsgp_prompt(def, &trigger.surface, role, &doc.sentence);
                    let key = format!("{}|arsgp|{}|{}|{}", doc.id, ty, trigger.surface, role.name);
                    let response = self.call(doc, key, prompt.text, tally)?;
                    let parsed = grammar::parse_arsgp(&response);
                    out.diagnostics.extend(parsed.diagnostics);
                    out.provenance.push(StepResponse {
                        step: format!("arsgp:{}", role.name),
                        response,
                    });
                    let answer = RoleAnswer {
                        role: role.name.clone(),
                        text_args: parsed.text_args,
                        image_descs: parsed.image_descs,
                    };
                    self.build_role_args(doc, &answer, tally, &mut out)?;
                }
            }
            PromptMode::JointMeae => {
                let prompt = self
                    .templates
                    .build_joint_prompt(
                        PromptMode::JointMeae,
                        self.schema,
                        &doc.sentence,
                        Some((ty, &trigger.surface)),
                    )
                    .expect("type checked above");
                let key = format!("{}|jmeae|{}|{}", doc.id, ty, trigger.surface);
                let response = self.call(doc, key, prompt.text, tally)?;
                let parsed = grammar::parse_joint_meae(&response, &def.roles);
                out.diagnostics.extend(parsed.diagnostics);
                out.provenance.push(StepResponse {
                    step: "jmeae".into(),
                    response,
                });
                for answer in &parsed.roles {
                    self.build_role_args(doc, answer, tally, &mut out)?;
                }
            }
        }
        Ok(out)
    }

    /// Anchors text arguments and grounds region descriptions of one role.
    fn build_role_args(
        &self,
        doc: &Document,
        answer: &RoleAnswer,
        tally: &mut Tally,
        out: &mut ArgumentExtraction,
    ) -> Result<(), ExtractError> {
        for surface in &answer.text_args {
            let text = match normalize_trigger(surface, &doc.sentence) {
                Some(span) => ArgText::from(span),
                None => {
                    out.diagnostics.push(Diagnostic::UnanchoredArgument {
                        role: answer.role.clone(),
                        surface: surface.clone(),
                    });
                    ArgText {
                        start: None,
                        end: None,
                        surface: surface.clone(),
                    }
                }
            };
            out.args.push(Argument {
                role: answer.role.clone(),
                text: Some(text),
                region: None,
            });
        }
        for desc in &answer.image_descs {
            let region = match self.grounder.filter(|_| self.config.grounding) {
                None => Region {
                    desc: desc.clone(),
                    bbox: None,
                    status: GroundingStatus::NotAttempted,
                },
                Some(grounder) => {
                    tally.ground += 1;
                    match grounder.ground(&doc.image, desc) {
                        Ok(b) => Region {
                            desc: desc.clone(),
                            bbox: Some(b),
                            status: GroundingStatus::Grounded,
                        },
                        Err(BackendError::NoRegion(_)) => {
                            out.diagnostics.push(Diagnostic::NoRegion {
                                role: answer.role.clone(),
                                description: desc.clone(),
                            });
                            Region {
                                desc: desc.clone(),
                                bbox: None,
                                status: GroundingStatus::NoRegion,
                            }
                        }
                        Err(source) => {
                            return Err(ExtractError::Backend {
                                doc_id: doc.id.clone(),
                                step: format!("ground|{}|{}", doc.image, desc),
                                source,
                            })
                        }
                    }
                }
            };
            out.args.push(Argument {
                role: answer.role.clone(),
                text: None,
                region: Some(region),
            });
        }
        Ok(())
    }

    /// Runs the full pipeline for one document.
    pub fn extract_document(&self, doc: &Document) -> Result<DocumentExtraction, ExtractError> {
        Self::check_doc(doc)?;
        let mut tally = Tally::default();
        let mut diagnostics = Vec::new();
        let mut events = Vec::new();

        if self.config.mode == PromptMode::JointAll {
            if self.config.role_source == RoleSource::Gold {
                return Err(ExtractError::TeacherForcingJointAll);
            }
            self.joint_all(doc, &mut tally, &mut events, &mut diagnostics)?;
        } else {
            let gold = match self.config.role_source {
                RoleSource::Predicted => None,
                RoleSource::Gold => Some(self.gold_mentions(doc)?),
            };
            let detection = self.detect(doc, &mut tally)?;
            diagnostics.extend(detection.diagnostics);
            let etsgp = StepResponse {
                step: "etsgp".into(),
                response: detection.response,
            };
            let mentions = gold.unwrap_or(detection.mentions);
            for (ty, trigger) in mentions {
                let extraction = self.arguments(doc, &ty, &trigger, &mut tally)?;
                diagnostics.extend(extraction.diagnostics);
                let mut provenance = Vec::with_capacity(extraction.provenance.len() + 1);
                provenance.push(etsgp.clone());
                provenance.extend(extraction.provenance);
                events.push(EventMention {
                    event_type: ty,
                    trigger,
                    args: extraction.args,
                    provenance,
                });
            }
        }

        Ok(DocumentExtraction {
            doc_id: doc.id.clone(),
            image: doc.image.clone(),
            events,
            diagnostics,
            chat_calls: tally.chat,
            ground_calls: tally.ground,
        })
    }

    fn gold_mentions(&self, doc: &Document) -> Result<Vec<(EventTypeId, TextSpan)>, ExtractError> {
        let gold = doc
            .gold_events
            .as_ref()
            .ok_or_else(|| ExtractError::MissingGold { doc_id: doc.id.clone() })?;
        gold.iter()
            .map(|g| {
                self.type_def(doc, &g.event_type)?;
                if !g.trigger.is_valid_in(&doc.sentence) {
                    return Err(ExtractError::InvalidDocument {
                        doc_id: doc.id.clone(),
                        reason: "gold trigger span does not match the sentence",
                    });
                }
                Ok((g.event_type.clone(), g.trigger.clone()))
            })
            .collect()
    }

    fn joint_all(
        &self,
        doc: &Document,
        tally: &mut Tally,
        events: &mut Vec<EventMention>,
        diagnostics: &mut Vec<Diagnostic>,
    ) -> Result<(), ExtractError> {
        let prompt = self
            .templates
            .build_joint_prompt(PromptMode::JointAll, self.schema, &doc.sentence, None)
            .expect("joint-all prompt takes no context");
        let response = self.call(doc, format!("{}|jall", doc.id), prompt.text, tally)?;
        let parsed = grammar::parse_joint_all(&response, self.schema);
        diagnostics.extend(parsed.diagnostics);
        let step = StepResponse {
            step: "jall".into(),
            response,
        };
        let mut seen: Vec<(EventTypeId, TextSpan)> = Vec::new();
        for event in parsed.events {
            let Some(span) = anchor(&event.event_type, &event.trigger, &doc.sentence, diagnostics) else {
                continue;
            };
            if seen.iter().any(|(t, s)| *t == event.event_type && *s == span) {
                diagnostics.push(Diagnostic::DuplicateMention {
                    event_type: event.event_type,
                    trigger: span.surface,
                });
                continue;
            }
            seen.push((event.event_type.clone(), span.clone()));
            let mut out = ArgumentExtraction::default();
            for answer in &event.roles {
                self.build_role_args(doc, answer, tally, &mut out)?;
            }
            diagnostics.extend(out.diagnostics);
            events.push(EventMention {
                event_type: event.event_type,
                trigger: span,
                args: out.args,
                provenance: alloc::vec![step.clone()],
            });
        }
        Ok(())
    }
}

fn anchor(ty: &EventTypeId, trigger: &str, sentence: &str, diagnostics: &mut Vec<Diagnostic>) -> Option<TextSpan> {
    match normalize_trigger(trigger, sentence) {
        Some(span) => {
            if occurs_again(&span, trigger, sentence) {
                diagnostics.push(Diagnostic::AmbiguousTrigger {
                    trigger: trigger.to_string(),
                });
            }
            Some(span)
        }
        None => {
            diagnostics.push(Diagnostic::UnanchoredTrigger {
                event_type: ty.clone(),
                trigger: trigger.to_string(),
            });
            None
        }
    }
}

fn occurs_again(span: &TextSpan, trigger: &str, sentence: &str) -> bool {
    let rest: String = sentence.chars().skip(span.end).collect();
    normalize_trigger(trigger, &rest).is_some()
}

/// Anchors parsed mentions, dropping unanchorable ones and duplicate spans.
fn anchor_mentions(
    mentions: Vec<(EventTypeId, String)>,
    sentence: &str,
    diagnostics: &mut Vec<Diagnostic>,
) -> Vec<(EventTypeId, TextSpan)> {
    let mut out: Vec<(EventTypeId, TextSpan)> = Vec::new();
    for (ty, trigger) in mentions {
        let Some(span) = anchor(&ty, &trigger, sentence, diagnostics) else {
            continue;
        };
        if out.iter().any(|(t, s)| *t == ty && *s == span) {
            diagnostics.push(Diagnostic::DuplicateMention {
                event_type: ty,
                trigger: span.surface,
            });
            continue;
        }
        out.push((ty, span));
    }
    out
}
