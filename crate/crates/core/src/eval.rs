//! Micro-averaged P/R/F1 for event detection and argument extraction.
//!
//! Detection: a predicted mention matches a gold one when the types are equal
//! and the triggers have the same offsets and the same case-insensitive
//! surface. Arguments are scored only inside matched event pairs; arguments
//! of unmatched predicted events are false positives and arguments of missed
//! gold events are false negatives. A text argument matches on role plus
//! normalized surface; an image argument matches on role plus IoU strictly
//! above 0.5. Matching is greedy and one-to-one in prediction order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bbox::{iou, BoundingBox, IOU_MATCH_THRESHOLD};
use crate::extract::{DocumentRecord, EventMention};
use crate::schema::EventTypeId;
use crate::text::{normalize_surface, TextSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Precision, recall, F1 and the counts they derive from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Prf {
    /// `P = tp/(tp+fp)`, `R = tp/(tp+fn)`.
    ///
    /// No predictions gives `P = 0`, no gold gives `R = 0`; when both sides are
    /// empty all three metrics are reported as 1.
    pub fn from_counts(c: Counts) -> Self {
        let preds = c.tp + c.fp;
        let golds = c.tp + c.fn_;
        let (p, r) = if preds == 0 && golds == 0 {
            (1.0, 1.0)
        } else {
            let p = if preds == 0 { 0.0 } else { c.tp as f64 / preds as f64 };
            let r = if golds == 0 { 0.0 } else { c.tp as f64 / golds as f64 };
            (p, r)
        };
        Self {
            p,
            r,
            f1: f1(p, r),
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
        }
    }

    pub fn counts(&self) -> Counts {
        Counts {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
        }
    }
}

/// Harmonic mean; 0 when `p + r == 0`. Works on fractions or percentages.
pub fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchBasis {
    /// Event detection: type and trigger.
    TypeTrigger,
    /// Text argument: role and surface.
    RoleText,
    /// Image argument: role and IoU.
    RoleIou,
}

/// Reference to a predicted or gold item inside a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRef {
    pub event: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arg: Option<usize>,
    pub label: String,
}

/// One ledger line: a true positive pairs `pred` and `gold`; a false
/// positive has only `pred`; a false negative has only `gold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub doc_id: String,
    pub basis: MatchBasis,
    pub event_type: EventTypeId,
    pub pred: Option<ItemRef>,
    pub gold: Option<ItemRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchLedger {
    pub records: Vec<MatchRecord>,
}

impl MatchLedger {
    /// Every predicted and every gold item appears in at most one record per basis.
    pub fn is_one_to_one(&self) -> bool {
        let mut preds = BTreeSet::new();
        let mut golds = BTreeSet::new();
        for r in &self.records {
            if let Some(p) = &r.pred {
                if !preds.insert((r.doc_id.as_str(), r.basis, p.event, p.arg)) {
                    return false;
                }
            }
            if let Some(g) = &r.gold {
                if !golds.insert((r.doc_id.as_str(), r.basis, g.event, g.arg)) {
                    return false;
                }
            }
        }
        true
    }

    pub fn counts(&self, basis: &[MatchBasis]) -> Counts {
        let mut c = Counts::default();
        for r in self.records.iter().filter(|r| basis.contains(&r.basis)) {
            match (&r.pred, &r.gold) {
                (Some(_), Some(_)) => c.tp += 1,
                (Some(_), None) => c.fp += 1,
                (None, Some(_)) => c.fn_ += 1,
                (None, None) => {}
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeBreakdown {
    pub med: Prf,
    pub meae: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub med: Prf,
    pub meae: Prf,
    pub per_type: BTreeMap<EventTypeId, TypeBreakdown>,
    pub documents: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("duplicate document id {doc_id} in {side} file")]
    DuplicateDocId { doc_id: String, side: &'static str },
}

/// Trigger rule: equal offsets and equal normalized surfaces.
pub fn trigger_matches(pred: &TextSpan, gold: &TextSpan) -> bool {
    pred.start == gold.start
        && pred.end == gold.end
        && normalize_surface(&pred.surface) == normalize_surface(&gold.surface)
}

/// Greedy one-to-one matching in prediction order.
fn greedy<P, G>(preds: &[P], golds: &[G], mut matches: impl FnMut(&P, &G) -> bool) -> Vec<Option<usize>> {
    let mut taken = alloc::vec![false; golds.len()];
    preds
        .iter()
        .map(|p| {
            let j = golds.iter().enumerate().position(|(j, g)| !taken[j] && matches(p, g))?;
            taken[j] = true;
            Some(j)
        })
        .collect()
}

fn med_label(ty: &EventTypeId, trigger: &TextSpan) -> String {
    alloc::format!("{ty}; {} [{}, {})", trigger.surface, trigger.start, trigger.end)
}

/// Scores event detection for one document.
pub fn score_med(
    doc_id: &str,
    preds: &[(EventTypeId, TextSpan)],
    golds: &[(EventTypeId, TextSpan)],
) -> (Prf, MatchLedger) {
    let assignment = greedy(preds, golds, |(pt, ps), (gt, gs)| pt == gt && trigger_matches(ps, gs));
    let mut ledger = MatchLedger::default();
    let mut matched = alloc::vec![false; golds.len()];
    for (i, ((ty, trig), m)) in preds.iter().zip(&assignment).enumerate() {
        let pred = Some(ItemRef {
            event: i,
            arg: None,
            label: med_label(ty, trig),
        });
        let gold = m.map(|j| {
            matched[j] = true;
            ItemRef {
                event: j,
                arg: None,
                label: med_label(&golds[j].0, &golds[j].1),
            }
        });
        ledger.records.push(MatchRecord {
            doc_id: doc_id.to_string(),
            basis: MatchBasis::TypeTrigger,
            event_type: ty.clone(),
            pred,
            gold,
            iou: None,
        });
    }
    for (j, (ty, trig)) in golds.iter().enumerate().filter(|(j, _)| !matched[*j]) {
        ledger.records.push(MatchRecord {
            doc_id: doc_id.to_string(),
            basis: MatchBasis::TypeTrigger,
            event_type: ty.clone(),
            pred: None,
            gold: Some(ItemRef {
                event: j,
                arg: None,
                label: med_label(ty, trig),
            }),
            iou: None,
        });
    }
    (Prf::from_counts(ledger.counts(&[MatchBasis::TypeTrigger])), ledger)
}

/// A scorable argument item: a text surface or a grounded box.
#[derive(Debug, Clone, PartialEq)]
pub enum ArgItem {
    Text { role: String, surface: String },
    Visual { role: String, bbox: BoundingBox },
}

impl ArgItem {
    fn role(&self) -> &str {
        match self {
            Self::Text { role, .. } | Self::Visual { role, .. } => role,
        }
    }

    fn label(&self) -> String {
        match self {
            Self::Text { role, surface } => alloc::format!("{role}: {surface}"),
            Self::Visual { role, bbox } => {
                let [a, b, c, d] = bbox.to_array();
                alloc::format!("{role}: [{a}, {b}, {c}, {d}]")
            }
        }
    }
}

/// Splits arguments into items: one per text side, one per boxed region.
/// Regions without a box (ungrounded) are not scored.
pub fn arg_items(event: &EventMention) -> Vec<(usize, ArgItem)> {
    let mut out = Vec::new();
    for (i, a) in event.args.iter().enumerate() {
        if let Some(t) = &a.text {
            out.push((
                i,
                ArgItem::Text {
                    role: a.role.clone(),
                    surface: t.surface.clone(),
                },
            ));
        }
        if let Some(bbox) = a.region.as_ref().and_then(|r| r.bbox) {
            out.push((
                i,
                ArgItem::Visual {
                    role: a.role.clone(),
                    bbox,
                },
            ));
        }
    }
    out
}

fn item_iou(p: &ArgItem, g: &ArgItem) -> Option<f64> {
    match (p, g) {
        (ArgItem::Visual { bbox: a, .. }, ArgItem::Visual { bbox: b, .. }) => Some(iou(a, b)),
        _ => None,
    }
}

fn item_matches(p: &ArgItem, g: &ArgItem) -> bool {
    if p.role() != g.role() {
        return false;
    }
    match (p, g) {
        (ArgItem::Text { surface: a, .. }, ArgItem::Text { surface: b, .. }) => {
            normalize_surface(a) == normalize_surface(b)
        }
        (ArgItem::Visual { bbox: a, .. }, ArgItem::Visual { bbox: b, .. }) => iou(a, b) > IOU_MATCH_THRESHOLD,
        _ => false,
    }
}

fn basis_of(item: &ArgItem) -> MatchBasis {
    match item {
        ArgItem::Text { .. } => MatchBasis::RoleText,
        ArgItem::Visual { .. } => MatchBasis::RoleIou,
    }
}

/// Scores the arguments of one matched event pair (`pred_event`, `gold_event`
/// index the events within their documents; either side may be absent).
pub fn score_meae(
    doc_id: &str,
    event_type: &EventTypeId,
    pred: Option<(usize, &EventMention)>,
    gold: Option<(usize, &EventMention)>,
) -> (Prf, MatchLedger) {
    let pred_items = pred.map(|(_, e)| arg_items(e)).unwrap_or_default();
    let gold_items = gold.map(|(_, e)| arg_items(e)).unwrap_or_default();
    let assignment = greedy(&pred_items, &gold_items, |(_, p), (_, g)| item_matches(p, g));
    let mut ledger = MatchLedger::default();
    let mut matched = alloc::vec![false; gold_items.len()];
    let pe = pred.map_or(0, |(i, _)| i);
    let ge = gold.map_or(0, |(i, _)| i);
    for ((ai, item), m) in pred_items.iter().zip(&assignment) {
        let gold_ref = m.map(|j| {
            matched[j] = true;
            let (gi, g) = &gold_items[j];
            ItemRef {
                event: ge,
                arg: Some(*gi),
                label: g.label(),
            }
        });
        ledger.records.push(MatchRecord {
            doc_id: doc_id.to_string(),
            basis: basis_of(item),
            event_type: event_type.clone(),
            pred: Some(ItemRef {
                event: pe,
                arg: Some(*ai),
                label: item.label(),
            }),
            iou: m.and_then(|j| item_iou(item, &gold_items[j].1)),
            gold: gold_ref,
        });
    }
    let missed = gold_items.iter().zip(&matched).filter(|(_, m)| !**m);
    for ((gi, item), _) in missed {
        ledger.records.push(MatchRecord {
            doc_id: doc_id.to_string(),
            basis: basis_of(item),
            event_type: event_type.clone(),
            pred: None,
            gold: Some(ItemRef {
                event: ge,
                arg: Some(*gi),
                label: item.label(),
            }),
            iou: None,
        });
    }
    let prf = Prf::from_counts(ledger.counts(&[MatchBasis::RoleText, MatchBasis::RoleIou]));
    (prf, ledger)
}

fn mentions(doc: Option<&DocumentRecord>) -> Vec<(EventTypeId, TextSpan)> {
    doc.map(|d| {
        d.events
            .iter()
            .map(|e| (e.event_type.clone(), e.trigger.clone()))
            .collect()
    })
    .unwrap_or_default()
}

/// Scores one document and appends its ledger records.
pub fn score_document(
    doc_id: &str,
    pred: Option<&DocumentRecord>,
    gold: Option<&DocumentRecord>,
    ledger: &mut MatchLedger,
) {
    let pm = mentions(pred);
    let gm = mentions(gold);
    let (_, med) = score_med(doc_id, &pm, &gm);
    let pred_events = pred.map_or(&[][..], |d| &d.events);
    let gold_events = gold.map_or(&[][..], |d| &d.events);
    let mut gold_done = alloc::vec![false; gold_events.len()];
    let mut meae = Vec::new();
    for r in &med.records {
        let p = r.pred.as_ref().map(|p| (p.event, &pred_events[p.event]));
        let g = r.gold.as_ref().map(|g| (g.event, &gold_events[g.event]));
        if let Some((j, _)) = g {
            gold_done[j] = true;
        }
        meae.push(score_meae(doc_id, &r.event_type, p, g).1);
    }
    debug_assert!(gold_done.iter().all(|d| *d));
    ledger.records.extend(med.records);
    for l in meae {
        ledger.records.extend(l.records);
    }
}

/// Builds the corpus report from a ledger.
pub fn report_from_ledger(ledger: &MatchLedger, documents: usize) -> EvalReport {
    const MEAE: [MatchBasis; 2] = [MatchBasis::RoleText, MatchBasis::RoleIou];
    let mut per_type: BTreeMap<EventTypeId, (Counts, Counts)> = BTreeMap::new();
    for r in &ledger.records {
        let one = MatchLedger {
            records: alloc::vec![r.clone()],
        };
        let entry = per_type.entry(r.event_type.clone()).or_default();
        entry.0.add(one.counts(&[MatchBasis::TypeTrigger]));
        entry.1.add(one.counts(&MEAE));
    }
    EvalReport {
        med: Prf::from_counts(ledger.counts(&[MatchBasis::TypeTrigger])),
        meae: Prf::from_counts(ledger.counts(&MEAE)),
        per_type: per_type
            .into_iter()
            .map(|(ty, (med, meae))| {
                (
                    ty,
                    TypeBreakdown {
                        med: Prf::from_counts(med),
                        meae: Prf::from_counts(meae),
                    },
                )
            })
            .collect(),
        documents,
    }
}

/// Indexes records by doc id, rejecting duplicates.
pub fn index_documents<'d>(
    docs: &'d [DocumentRecord],
    side: &'static str,
) -> Result<BTreeMap<&'d str, &'d DocumentRecord>, EvalError> {
    let mut map = BTreeMap::new();
    for d in docs {
        if map.insert(d.doc_id.as_str(), d).is_some() {
            return Err(EvalError::DuplicateDocId {
                doc_id: d.doc_id.clone(),
                side,
            });
        }
    }
    Ok(map)
}

/// Micro-averaged scores over all documents present on either side.
/// A document missing from the predictions counts as an empty prediction.
pub fn evaluate_corpus(
    preds: &[DocumentRecord],
    golds: &[DocumentRecord],
) -> Result<(EvalReport, MatchLedger), EvalError> {
    let pred = index_documents(preds, "prediction")?;
    let gold = index_documents(golds, "gold")?;
    let ids: BTreeSet<&str> = pred.keys().chain(gold.keys()).copied().collect();
    let mut ledger = MatchLedger::default();
    for id in &ids {
        score_document(id, pred.get(id).copied(), gold.get(id).copied(), &mut ledger);
    }
    Ok((report_from_ledger(&ledger, ids.len()), ledger))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{ArgText, Argument, GroundingStatus, Region};
    use crate::schema::fixtures::id;
    use alloc::vec;

    fn span(start: usize, surface: &str) -> TextSpan {
        TextSpan {
            start,
            end: start + surface.chars().count(),
            surface: surface.into(),
        }
    }

    fn text_arg(role: &str, s: &str) -> Argument {
        Argument {
            role: role.into(),
            text: Some(ArgText {
                start: None,
                end: None,
                surface: s.into(),
            }),
            region: None,
        }
    }

    fn box_arg(role: &str, b: [f64; 4]) -> Argument {
        Argument {
            role: role.into(),
            text: None,
            region: Some(Region {
                desc: "x".into(),
                bbox: Some(BoundingBox::try_from(b).unwrap()),
                status: GroundingStatus::Grounded,
            }),
        }
    }

    fn event(ty: &str, trig: TextSpan, args: Vec<Argument>) -> EventMention {
        EventMention {
            event_type: id(ty),
            trigger: trig,
            args,
            provenance: vec![],
        }
    }

    #[test]
    fn med_perfect() {
        let g = vec![(id("Conflict.Attack"), span(16, "fight"))];
        let (prf, ledger) = score_med("d", &g, &g);
        assert_eq!((prf.p, prf.r, prf.f1), (1.0, 1.0, 1.0));
        assert!(ledger.is_one_to_one());
    }

    #[test]
    fn med_partial() {
        // Counted by hand: tp = 1, fp = 1, fn = 2.
        let golds = vec![
            (id("Conflict.Attack"), span(0, "fight")),
            (id("Life.Die"), span(10, "killed")),
            (id("Movement.Transport"), span(20, "moved")),
        ];
        let preds = vec![
            (id("Conflict.Attack"), span(0, "Fight")),
            (id("Life.Die"), span(30, "died")),
        ];
        let (prf, ledger) = score_med("d", &preds, &golds);
        assert_eq!((prf.tp, prf.fp, prf.fn_), (1, 1, 2));
        assert_eq!(prf.p, 0.5);
        assert!((prf.r - 1.0 / 3.0).abs() < 1e-12);
        assert!((prf.f1 - 0.4).abs() < 1e-12);
        assert!(ledger.is_one_to_one());
    }

    #[test]
    fn med_no_predictions() {
        let golds = vec![(id("Conflict.Attack"), span(0, "a")); 3];
        let (prf, _) = score_med("d", &[], &golds);
        assert_eq!((prf.p, prf.r, prf.f1), (0.0, 0.0, 0.0));
        let (prf, _) = score_med("d", &golds[..1], &[]);
        assert_eq!((prf.p, prf.r, prf.f1), (0.0, 0.0, 0.0));
        let (prf, _) = score_med("d", &[], &[]);
        assert_eq!((prf.p, prf.r, prf.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn med_offsets_must_agree() {
        let golds = vec![(id("Conflict.Attack"), span(30, "fight"))];
        let preds = vec![(id("Conflict.Attack"), span(5, "fight"))];
        assert_eq!(score_med("d", &preds, &golds).0.tp, 0);
    }

    #[test]
    fn meae_text_and_visual_rules() {
        let ty = id("Conflict.Attack");
        let gold = event(
            "Conflict.Attack",
            span(0, "fight"),
            vec![
                text_arg("Target", "Taleban insurgents"),
                box_arg("Instrument", [0.0, 0.0, 10.0, 20.0]),
            ],
        );
        let pred = event(
            "Conflict.Attack",
            span(0, "fight"),
            vec![
                text_arg("Target", " taleban  Insurgents"),
                // IoU exactly 0.5: not localized
                box_arg("Instrument", [0.0, 0.0, 10.0, 10.0]),
            ],
        );
        let (prf, ledger) = score_meae("d", &ty, Some((0, &pred)), Some((0, &gold)));
        assert_eq!((prf.tp, prf.fp, prf.fn_), (1, 1, 1));
        assert!(ledger.is_one_to_one());

        // IoU 0.8 but the wrong role
        let pred = event(
            "Conflict.Attack",
            span(0, "fight"),
            vec![box_arg("Target", [0.0, 0.0, 10.0, 16.0])],
        );
        let (prf, _) = score_meae("d", &ty, Some((0, &pred)), Some((0, &gold)));
        assert_eq!(prf.tp, 0);

        let pred = event(
            "Conflict.Attack",
            span(0, "fight"),
            vec![box_arg("Instrument", [0.0, 0.0, 10.0, 16.0])],
        );
        let (prf, ledger) = score_meae("d", &ty, Some((0, &pred)), Some((0, &gold)));
        assert_eq!(prf.tp, 1);
        let rec = ledger
            .records
            .iter()
            .find(|r| r.basis == MatchBasis::RoleIou && r.gold.is_some() && r.pred.is_some())
            .unwrap();
        assert!((rec.iou.unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ungrounded_predictions_are_not_scored() {
        let ty = id("Conflict.Attack");
        let mut arg = box_arg("Instrument", [0.0, 0.0, 10.0, 10.0]);
        arg.region.as_mut().unwrap().bbox = None;
        arg.region.as_mut().unwrap().status = GroundingStatus::NoRegion;
        let pred = event("Conflict.Attack", span(0, "fight"), vec![arg]);
        let (prf, ledger) = score_meae("d", &ty, Some((0, &pred)), None);
        assert_eq!(prf.counts(), Counts::default());
        assert!(ledger.records.is_empty());
    }

    fn record(id_: &str, events: Vec<EventMention>) -> DocumentRecord {
        DocumentRecord {
            doc_id: id_.into(),
            image: None,
            events,
            diagnostics: vec![],
        }
    }

    #[test]
    fn arguments_of_missed_events_are_false_negatives() {
        let gold = record(
            "d1",
            vec![event(
                "Conflict.Attack",
                span(0, "fight"),
                vec![text_arg("Target", "x"), text_arg("Attacker", "y")],
            )],
        );
        let pred = record(
            "d1",
            vec![event("Life.Die", span(0, "fight"), vec![text_arg("Victim", "x")])],
        );
        let (report, ledger) = evaluate_corpus(&[pred], &[gold]).unwrap();
        assert_eq!(report.med.counts(), Counts { tp: 0, fp: 1, fn_: 1 });
        assert_eq!(report.meae.counts(), Counts { tp: 0, fp: 1, fn_: 2 });
        assert!(ledger.is_one_to_one());
        assert_eq!(report.per_type[&id("Life.Die")].meae.fp, 1);
        assert_eq!(report.per_type[&id("Conflict.Attack")].meae.fn_, 2);
    }

    #[test]
    fn corpus_identity_and_empty_predictions() {
        let gold = vec![
            record(
                "d1",
                vec![event(
                    "Conflict.Attack",
                    span(16, "fight"),
                    vec![
                        text_arg("Target", "Taleban insurgents"),
                        box_arg("Instrument", [120.0, 80.0, 360.0, 240.0]),
                    ],
                )],
            ),
            record(
                "d2",
                vec![event("Life.Die", span(0, "died"), vec![text_arg("Victim", "he")])],
            ),
        ];
        let (report, _) = evaluate_corpus(&gold, &gold).unwrap();
        assert_eq!((report.med.f1, report.meae.f1), (1.0, 1.0));
        assert_eq!(report.documents, 2);

        let (report, _) = evaluate_corpus(&[], &gold).unwrap();
        assert_eq!((report.med.p, report.med.r, report.med.f1), (0.0, 0.0, 0.0));
        assert_eq!(report.med.tp + report.med.fn_, 2);
        assert_eq!(report.meae.tp + report.meae.fn_, 3);
    }

    #[test]
    fn duplicate_doc_ids_are_rejected() {
        let d = record("d1", vec![]);
        assert!(matches!(
            evaluate_corpus(&[d.clone(), d.clone()], &[]),
            Err(EvalError::DuplicateDocId { side: "prediction", .. })
        ));
        assert!(evaluate_corpus(&[], &[d.clone(), d]).is_err());
    }

    #[test]
    fn f1_formula() {
        assert!((f1(60.4, 72.1) - 65.7).abs() < 0.05);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn monotonicity() {
        let golds = vec![(id("Conflict.Attack"), span(0, "a")), (id("Life.Die"), span(2, "b"))];
        let mut preds = vec![(id("Conflict.Attack"), span(0, "a"))];
        let before = score_med("d", &preds, &golds).0;
        preds.push((id("Life.Die"), span(2, "b")));
        let after = score_med("d", &preds, &golds).0;
        assert!(after.r >= before.r);
        preds.push((id("Life.Die"), span(4, "c")));
        let worse = score_med("d", &preds, &golds).0;
        assert!(worse.p <= after.p);
    }
}
