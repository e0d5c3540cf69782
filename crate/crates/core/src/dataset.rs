//! Weakly-aligned multimodal training data from unimodal annotations.
//!
//! Each annotated sentence whose event type maps into the schema is paired
//! with the same-type annotated image that an embedding retriever scores
//! highest. Every pair then yields one event-type instruction record and one
//! argument instruction record per role of its type.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bbox::BoundingBox;
use crate::gateway::{check_crop, BackendError, Captioner, EmbedInput, Embedder, EmbeddingVector, ImageRef};
use crate::grammar::{self, sanitize_item};
use crate::prompt::PromptTemplates;
use crate::schema::{EventSchema, EventTypeId, RoleMapping, SchemaMapping};
use crate::text::TextSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offsets {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceArg {
    pub role: String,
    pub start: usize,
    pub end: usize,
}

/// `{ id, text, event_type, trigger:{start,end}, args:[{role,start,end}] }`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub id: String,
    pub text: String,
    /// Label in the source corpus's own schema.
    pub event_type: String,
    pub trigger: Offsets,
    #[serde(default)]
    pub args: Vec<SentenceArg>,
}

impl AnnotatedSentence {
    pub fn trigger_span(&self) -> Option<TextSpan> {
        TextSpan::from_offsets(&self.text, self.trigger.start, self.trigger.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageArg {
    pub role: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

/// `{ id, path, event_label, args:[{role,box:[x1,y1,x2,y2]}] }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedImage {
    pub id: String,
    pub path: ImageRef,
    pub event_label: String,
    #[serde(default)]
    pub args: Vec<ImageArg>,
}

/// A sentence paired with its retrieved image. Both map to `event_type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeaklyAlignedSample {
    pub event_type: EventTypeId,
    pub sentence: AnnotatedSentence,
    pub image: AnnotatedImage,
    /// Cosine similarity in `[-1, 1]`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("sentence {0}: no candidate images")]
    NoCandidates(String),
    #[error("sentence {sentence_id}: {source}")]
    Backend {
        sentence_id: String,
        #[source]
        source: BackendError,
    },
    #[error("sample {sample_id}: {task} gold answer does not parse back to its source")]
    GoldRoundTrip { sample_id: String, task: &'static str },
    #[error("sample {sample_id}: {reason}")]
    InvalidSample { sample_id: String, reason: String },
}

/// Dataset tags used for mapping lookups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTags {
    pub sentences: String,
    pub images: String,
}

impl Default for SourceTags {
    fn default() -> Self {
        Self {
            sentences: "ace".into(),
            images: "swig".into(),
        }
    }
}

/// Index of the highest score; the lowest index wins ties.
fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

fn embed_sentence(sentence: &AnnotatedSentence, embedder: &dyn Embedder) -> Result<EmbeddingVector, DatasetError> {
    embedder
        .embed(EmbedInput::Text(&sentence.text))
        .map_err(|source| DatasetError::Backend {
            sentence_id: sentence.id.clone(),
            source,
        })
}

/// Picks the candidate image most similar to `sentence`.
///
/// Candidates are assumed to share the sentence's mapped type `event_type`.
pub fn select_matching_image(
    sentence: &AnnotatedSentence,
    event_type: &EventTypeId,
    candidates: &[AnnotatedImage],
    embedder: &dyn Embedder,
) -> Result<WeaklyAlignedSample, DatasetError> {
    if candidates.is_empty() {
        return Err(DatasetError::NoCandidates(sentence.id.clone()));
    }
    let text = embed_sentence(sentence, embedder)?;
    let mut scores = Vec::with_capacity(candidates.len());
    for c in candidates {
        let v = embedder
            .embed(EmbedInput::Image(&c.path))
            .and_then(|v| text.cosine(&v))
            .map_err(|source| DatasetError::Backend {
                sentence_id: sentence.id.clone(),
                source,
            })?;
        scores.push(v);
    }
    let best = argmax(&scores).expect("non-empty");
    Ok(WeaklyAlignedSample {
        event_type: event_type.clone(),
        sentence: sentence.clone(),
        image: candidates[best].clone(),
        score: scores[best],
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub sentence_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub in_schema: usize,
    pub aligned: usize,
    pub skipped: Vec<SkipEntry>,
    /// Image id → number of sentences it was matched to (only images used at least once).
    pub image_reuse: BTreeMap<String, usize>,
    /// Reuse count → number of images used that many times.
    pub reuse_histogram: BTreeMap<usize, usize>,
}

/// Pairs every in-schema sentence with its best same-type image.
///
/// Output is ordered by sentence id. Unmapped sentences, sentences whose
/// trigger offsets are invalid, and sentences without candidates are skipped
/// and reported. Each image is embedded once.
pub fn build_weak_alignments(
    sentences: &[AnnotatedSentence],
    images: &[AnnotatedImage],
    mapping: &SchemaMapping,
    tags: &SourceTags,
    embedder: &dyn Embedder,
) -> Result<(Vec<WeaklyAlignedSample>, AlignmentReport), DatasetError> {
    let mut report = AlignmentReport::default();
    let mut by_type: BTreeMap<&EventTypeId, Vec<&AnnotatedImage>> = BTreeMap::new();
    for img in images {
        if let Some(ty) = mapping.map_external_type(&tags.images, &img.event_label) {
            by_type.entry(ty).or_default().push(img);
        }
    }

    let mut order: Vec<&AnnotatedSentence> = sentences.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));

    let mut image_vectors: BTreeMap<&str, EmbeddingVector> = BTreeMap::new();
    let mut samples = Vec::new();
    let mut last_id: Option<&str> = None;
    for s in order {
        let skip = |reason: &str| SkipEntry {
            sentence_id: s.id.clone(),
            reason: reason.to_string(),
        };
        if last_id == Some(s.id.as_str()) {
            report.skipped.push(skip("duplicate sentence id"));
            continue;
        }
        last_id = Some(&s.id);
        let Some(ty) = mapping.map_external_type(&tags.sentences, &s.event_type) else {
            report.skipped.push(skip(&format!(
                "event type {:?} is not mapped into the schema",
                s.event_type
            )));
            continue;
        };
        report.in_schema += 1;
        if s.trigger_span().is_none() {
            report.skipped.push(skip("trigger offsets are outside the sentence"));
            continue;
        }
        let Some(candidates) = by_type.get(ty).filter(|c| !c.is_empty()) else {
            report.skipped.push(skip(&format!("no candidate image of type {ty}")));
            continue;
        };
        let text = embed_sentence(s, embedder)?;
        let mut scores = Vec::with_capacity(candidates.len());
        for c in candidates {
            if !image_vectors.contains_key(c.id.as_str()) {
                let v = embedder
                    .embed(EmbedInput::Image(&c.path))
                    .map_err(|source| DatasetError::Backend {
                        sentence_id: s.id.clone(),
                        source,
                    })?;
                image_vectors.insert(&c.id, v);
            }
            let score = text
                .cosine(&image_vectors[c.id.as_str()])
                .map_err(|source| DatasetError::Backend {
                    sentence_id: s.id.clone(),
                    source,
                })?;
            scores.push(score);
        }
        let best = argmax(&scores).expect("non-empty");
        *report.image_reuse.entry(candidates[best].id.clone()).or_default() += 1;
        samples.push(WeaklyAlignedSample {
            event_type: ty.clone(),
            sentence: s.clone(),
            image: candidates[best].clone(),
            score: scores[best],
        });
    }
    report.aligned = samples.len();
    for n in report.image_reuse.values() {
        *report.reuse_histogram.entry(*n).or_default() += 1;
    }
    Ok((samples, report))
}

/// Caption of the cropped argument region, used as its gold description.
pub fn generate_gold_region_description(
    image: &ImageRef,
    region: &BoundingBox,
    captioner: &dyn Captioner,
) -> Result<String, BackendError> {
    check_crop(region)?;
    captioner.caption_region(image, region)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Etsgp,
    Arsgp,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Etsgp => "etsgp",
            Self::Arsgp => "arsgp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub event_type: EventTypeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
}

/// `{ id, task, image, prompt, gold, meta:{event_type, role?} }`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub id: String,
    pub task: Task,
    pub image: ImageRef,
    pub prompt: String,
    pub gold: String,
    pub meta: RecordMeta,
}

impl InstructionRecord {
    /// Checks the record against its task's grammar and tagging rules.
    pub fn validate(&self, schema: &EventSchema) -> Result<(), String> {
        if self.id.is_empty() || self.prompt.is_empty() {
            return Err("empty id or prompt".into());
        }
        let roles = schema.roles_of(&self.meta.event_type).map_err(|e| e.to_string())?;
        match self.task {
            Task::Etsgp => {
                if self.meta.role.is_some() {
                    return Err("etsgp record carries a role".into());
                }
                let parsed = grammar::parse_etsgp(&self.gold, schema);
                if !parsed.diagnostics.is_empty() {
                    return Err("gold answer has parse diagnostics".into());
                }
            }
            Task::Arsgp => {
                let role = self.meta.role.as_deref().ok_or("arsgp record without role")?;
                if !roles.iter().any(|r| r.name == role) {
                    return Err(format!("role {role} is not a role of {}", self.meta.event_type));
                }
                let parsed = grammar::parse_arsgp(&self.gold);
                if !parsed.diagnostics.is_empty() {
                    return Err("gold answer has parse diagnostics".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EmissionWarning {
    pub sample_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InstructionSet {
    pub etsgp: Vec<InstructionRecord>,
    pub arsgp: Vec<InstructionRecord>,
    pub warnings: Vec<EmissionWarning>,
}

/// Everything needed to turn aligned samples into instruction records.
pub struct InstructionBuilder<'a> {
    pub schema: &'a EventSchema,
    pub roles: &'a RoleMapping,
    pub tags: &'a SourceTags,
    pub templates: &'a PromptTemplates,
    pub captioner: &'a dyn Captioner,
}

impl InstructionBuilder<'_> {
    /// Records ordered by sentence id, then by role order. Every gold answer is
    /// re-parsed and compared with the structure it encodes.
    pub fn build(&self, samples: &[WeaklyAlignedSample]) -> Result<InstructionSet, DatasetError> {
        let mut order: Vec<&WeaklyAlignedSample> = samples.iter().collect();
        order.sort_by(|a, b| a.sentence.id.cmp(&b.sentence.id));
        let mut out = InstructionSet::default();
        for sample in order {
            self.build_sample(sample, &mut out)?;
        }
        Ok(out)
    }

    fn build_sample(&self, sample: &WeaklyAlignedSample, out: &mut InstructionSet) -> Result<(), DatasetError> {
        let sid = &sample.sentence.id;
        let invalid = |reason: String| DatasetError::InvalidSample {
            sample_id: sid.clone(),
            reason,
        };
        let ty = &sample.event_type;
        let def = self
            .schema
            .get(ty)
            .ok_or_else(|| invalid(format!("event type {ty} is not in the schema")))?;
        let sentence = &sample.sentence.text;
        let trigger = sample
            .sentence
            .trigger_span()
            .ok_or_else(|| invalid("trigger offsets are outside the sentence".into()))?;

        let mention = [(ty.clone(), sanitize_item(&trigger.surface))];
        let gold = grammar::format_etsgp_gold(&mention);
        if grammar::parse_etsgp(&gold, self.schema).mentions != mention {
            return Err(DatasetError::GoldRoundTrip {
                sample_id: sid.clone(),
                task: "etsgp",
            });
        }
        out.etsgp.push(InstructionRecord {
            id: format!("{sid}:etsgp"),
            task: Task::Etsgp,
            image: sample.image.path.clone(),
            prompt: self.templates.build_etsgp_prompt(self.schema, sentence).text,
            gold,
            meta: RecordMeta {
                event_type: ty.clone(),
                role: None,
            },
        });

        let mut text_by_role: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for arg in &sample.sentence.args {
            let Some(role) = self.roles.resolve(self.schema, &self.tags.sentences, ty, &arg.role) else {
                out.warnings.push(EmissionWarning {
                    sample_id: sid.clone(),
                    message: format!("text role {:?} has no schema counterpart", arg.role),
                });
                continue;
            };
            match TextSpan::from_offsets(sentence, arg.start, arg.end) {
                Some(span) => push_item(text_by_role.entry(role).or_default(), &span.surface),
                None => out.warnings.push(EmissionWarning {
                    sample_id: sid.clone(),
                    message: format!("{role} argument offsets are outside the sentence"),
                }),
            }
        }

        let mut image_by_role: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for arg in &sample.image.args {
            let Some(role) = self.roles.resolve(self.schema, &self.tags.images, ty, &arg.role) else {
                out.warnings.push(EmissionWarning {
                    sample_id: sid.clone(),
                    message: format!("image role {:?} has no schema counterpart", arg.role),
                });
                continue;
            };
            match generate_gold_region_description(&sample.image.path, &arg.bbox, self.captioner) {
                Ok(caption) => push_item(image_by_role.entry(role).or_default(), &caption),
                Err(BackendError::DegenerateCrop { width, height }) => out.warnings.push(EmissionWarning {
                    sample_id: sid.clone(),
                    message: format!("{role} region of {width}x{height} px is too small to caption"),
                }),
                Err(source) => {
                    return Err(DatasetError::Backend {
                        sentence_id: sid.clone(),
                        source,
                    })
                }
            }
        }

        for role in &def.roles {
            let text = text_by_role.remove(role.name.as_str()).unwrap_or_default();
            let image = image_by_role.remove(role.name.as_str()).unwrap_or_default();
            let gold = grammar::format_arsgp_gold(&text, &image);
            let parsed = grammar::parse_arsgp(&gold);
            if parsed.text_args != text || parsed.image_descs != image {
                return Err(DatasetError::GoldRoundTrip {
                    sample_id: sid.clone(),
                    task: "arsgp",
                });
            }
            out.arsgp.push(InstructionRecord {
                id: format!("{sid}:arsgp:{}", role.name),
                task: Task::Arsgp,
                image: sample.image.path.clone(),
                prompt: self
                    .templates
                    .build_arsgp_prompt(def, &trigger.surface, role, sentence)
                    .text,
                gold,
                meta: RecordMeta {
                    event_type: ty.clone(),
                    role: Some(role.name.clone()),
                },
            });
        }
        Ok(())
    }
}

/// Adds a sanitized item unless sanitizing leaves nothing usable.
fn push_item(items: &mut Vec<String>, raw: &str) {
    let item = sanitize_item(raw);
    if !item.is_empty() && !grammar::is_none_marker(&item) {
        items.push(item);
    }
}
