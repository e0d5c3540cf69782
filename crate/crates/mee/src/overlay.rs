//! Machine-readable box overlays for external rendering.

use std::collections::BTreeMap;

use mee_core::bbox::is_localized;
use mee_core::eval::trigger_matches;
use mee_core::extract::{DocumentRecord, EventMention};
use mee_core::gateway::ImageRef;
use mee_core::{iou, BoundingBox, EventTypeId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxSource {
    Pred,
    Gold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayBox {
    pub source: BoxSource,
    pub event_type: EventTypeId,
    pub trigger: String,
    pub role: String,
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    /// Best IoU against same-role gold boxes of the matching gold event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localized: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub doc_id: String,
    pub image: Option<ImageRef>,
    pub boxes: Vec<OverlayBox>,
}

fn boxes_of(source: BoxSource, event: &EventMention) -> impl Iterator<Item = OverlayBox> + '_ {
    event.args.iter().filter_map(move |a| {
        let region = a.region.as_ref()?;
        Some(OverlayBox {
            source,
            event_type: event.event_type.clone(),
            trigger: event.trigger.surface.clone(),
            role: a.role.clone(),
            label: region.desc.clone(),
            bbox: region.bbox?,
            iou: None,
            localized: None,
        })
    })
}

/// One overlay per predicted document, in input order. With gold, each
/// predicted box carries its IoU and gold boxes are listed after predictions.
pub fn build_overlays(preds: &[DocumentRecord], gold: Option<&[DocumentRecord]>) -> Vec<Overlay> {
    let gold_by_id: BTreeMap<&str, &DocumentRecord> = gold
        .unwrap_or_default()
        .iter()
        .map(|d| (d.doc_id.as_str(), d))
        .collect();
    preds
        .iter()
        .map(|doc| {
            let gold_doc = gold_by_id.get(doc.doc_id.as_str());
            let mut boxes = Vec::new();
            for event in &doc.events {
                let gold_event = gold_doc.and_then(|g| {
                    g.events
                        .iter()
                        .find(|ge| ge.event_type == event.event_type && trigger_matches(&event.trigger, &ge.trigger))
                });
                for mut b in boxes_of(BoxSource::Pred, event) {
                    if gold.is_some() {
                        let best = gold_event
                            .into_iter()
                            .flat_map(|ge| boxes_of(BoxSource::Gold, ge))
                            .filter(|g| g.role == b.role)
                            .map(|g| (iou(&b.bbox, &g.bbox), is_localized(&b.bbox, &g.bbox)))
                            .fold((0.0, false), |acc, x| if x.0 > acc.0 { x } else { acc });
                        b.iou = Some(best.0);
                        b.localized = Some(best.1);
                    }
                    boxes.push(b);
                }
            }
            if let Some(g) = gold_doc {
                for event in &g.events {
                    boxes.extend(boxes_of(BoxSource::Gold, event));
                }
            }
            Overlay {
                doc_id: doc.doc_id.clone(),
                image: doc.image.clone().or_else(|| gold_doc.and_then(|g| g.image.clone())),
                boxes,
            }
        })
        .collect()
}

/// File-name-safe form of a document id.
pub fn file_stem(doc_id: &str) -> String {
    let stem: String = doc_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if stem.is_empty() || stem.starts_with('.') {
        format!("doc{stem}")
    } else {
        stem
    }
}
