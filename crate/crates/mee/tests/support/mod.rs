//! Shared generators and independent oracles for integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mee_core::extract::{ArgText, Argument, DocumentRecord, EventMention, GroundingStatus, Region};
use mee_core::gateway::ImageRef;
use mee_core::{BoundingBox, EventTypeId, TextSpan};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn mee<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_mee"))
        .args(args)
        .output()
        .expect("spawn mee")
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn id(s: &str) -> EventTypeId {
    EventTypeId::new(s).unwrap()
}

// ---------------------------------------------------------------- IoU oracle

/// IoU of integer boxes by counting unit cells on a grid.
pub fn pixel_iou(a: [i64; 4], b: [i64; 4], grid: i64) -> f64 {
    let inside = |r: [i64; 4], x: i64, y: i64| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
    let (mut inter, mut union) = (0u64, 0u64);
    for y in 0..grid {
        for x in 0..grid {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn random_grid_box(rng: &mut StdRng, grid: i64) -> [i64; 4] {
    let x1 = rng.gen_range(0..grid);
    let x2 = rng.gen_range(x1 + 1..=grid);
    let y1 = rng.gen_range(0..grid);
    let y2 = rng.gen_range(y1 + 1..=grid);
    [x1, y1, x2, y2]
}

pub fn to_box(b: [i64; 4]) -> BoundingBox {
    BoundingBox::new(b[0] as f64, b[1] as f64, b[2] as f64, b[3] as f64).unwrap()
}

// ------------------------------------------------------- scoring corpora + oracle

const WORDS: [&str; 5] = ["alpha", "beta", "gamma", "delta", "omega"];
const TYPES: [&str; 3] = ["Conflict.Attack", "Life.Die", "Movement.Transport"];
const ROLES: [&str; 4] = ["Attacker", "Target", "Instrument", "Place"];
const SURFACES: [&str; 5] = ["the army", "The Army", "the  army", "rebels", "a truck"];
/// Well-separated bases; jittered copies of one base overlap with IoU > 0.5,
/// copies of different bases do not overlap.
const BASES: [[i64; 4]; 3] = [[2, 2, 27, 32], [40, 5, 70, 35], [10, 50, 45, 90]];

pub fn sentence() -> String {
    WORDS.join(" ")
}

fn word_span(i: usize, upper: bool) -> TextSpan {
    let start: usize = WORDS[..i].iter().map(|w| w.chars().count() + 1).sum();
    let w = WORDS[i];
    TextSpan {
        start,
        end: start + w.chars().count(),
        surface: if upper { w.to_uppercase() } else { w.to_string() },
    }
}

fn jitter(rng: &mut StdRng, base: [i64; 4]) -> [i64; 4] {
    let mut b = base;
    for v in &mut b {
        *v += rng.gen_range(-1..=1);
    }
    b
}

fn random_arg(rng: &mut StdRng) -> Argument {
    let role = ROLES.choose(rng).unwrap().to_string();
    let mut text = None;
    let mut region = None;
    let shape = rng.gen_range(0..3);
    if shape != 1 {
        text = Some(ArgText {
            start: None,
            end: None,
            surface: SURFACES.choose(rng).unwrap().to_string(),
        });
    }
    if shape != 0 {
        let grounded = rng.gen_bool(0.8);
        region = Some(Region {
            desc: "thing".into(),
            bbox: if grounded {
                let base = *BASES.choose(rng).unwrap();
                Some(to_box(jitter(rng, base)))
            } else {
                None
            },
            status: if grounded {
                GroundingStatus::Grounded
            } else {
                GroundingStatus::NoRegion
            },
        });
    }
    Argument { role, text, region }
}

fn random_events(rng: &mut StdRng) -> Vec<EventMention> {
    let n = rng.gen_range(0..=4);
    let mut keys: Vec<(usize, usize)> = (0..TYPES.len())
        .flat_map(|t| (0..WORDS.len()).map(move |w| (t, w)))
        .collect();
    keys.shuffle(rng);
    keys.truncate(n);
    keys.into_iter()
        .map(|(t, w)| EventMention {
            event_type: id(TYPES[t]),
            trigger: word_span(w, rng.gen_bool(0.2)),
            args: (0..rng.gen_range(0..=6)).map(|_| random_arg(rng)).collect(),
            provenance: Vec::new(),
        })
        .collect()
}

/// Random prediction and gold corpora: ≤10 docs, ≤4 events, ≤6 args. Within a
/// side, `(type, trigger offsets)` is unique per document.
pub fn random_corpora(rng: &mut StdRng) -> (Vec<DocumentRecord>, Vec<DocumentRecord>) {
    let mut preds = Vec::new();
    let mut golds = Vec::new();
    for d in 0..rng.gen_range(0..=10) {
        let doc = |events| DocumentRecord {
            doc_id: format!("d{d}"),
            image: Some(ImageRef::new(format!("d{d}.jpg"))),
            events,
            diagnostics: Vec::new(),
        };
        if rng.gen_bool(0.85) {
            preds.push(doc(random_events(rng)));
        }
        if rng.gen_bool(0.85) {
            golds.push(doc(random_events(rng)));
        }
    }
    preds.shuffle(rng);
    (preds, golds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

fn norm(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn event_key(e: &EventMention) -> (String, usize, usize, String) {
    (
        e.event_type.as_str().to_string(),
        e.trigger.start,
        e.trigger.end,
        norm(&e.trigger.surface),
    )
}

fn texts(e: &EventMention) -> Vec<(String, String)> {
    e.args
        .iter()
        .filter_map(|a| Some((a.role.clone(), norm(&a.text.as_ref()?.surface))))
        .collect()
}

fn visuals(e: &EventMention) -> Vec<(String, [i64; 4])> {
    e.args
        .iter()
        .filter_map(|a| {
            let b = a.region.as_ref()?.bbox?;
            Some((a.role.clone(), b.to_array().map(|v| v as i64)))
        })
        .collect()
}

fn items(e: &EventMention) -> usize {
    texts(e).len() + visuals(e).len()
}

fn multiset_overlap<K: Ord + Clone>(a: &[K], b: &[K]) -> usize {
    let mut count: BTreeMap<K, (usize, usize)> = BTreeMap::new();
    for k in a {
        count.entry(k.clone()).or_default().0 += 1;
    }
    for k in b {
        count.entry(k.clone()).or_default().1 += 1;
    }
    count.values().map(|(x, y)| x.min(y)).sum()
}

/// Maximum matching by exhaustive search.
fn max_matching<P, G>(preds: &[P], golds: &[G], ok: &dyn Fn(&P, &G) -> bool) -> usize {
    fn go<P, G>(i: usize, used: &mut Vec<bool>, preds: &[P], golds: &[G], ok: &dyn Fn(&P, &G) -> bool) -> usize {
        if i == preds.len() {
            return 0;
        }
        let mut best = go(i + 1, used, preds, golds, ok);
        for j in 0..golds.len() {
            if !used[j] && ok(&preds[i], &golds[j]) {
                used[j] = true;
                best = best.max(1 + go(i + 1, used, preds, golds, ok));
                used[j] = false;
            }
        }
        best
    }
    go(0, &mut vec![false; golds.len()], preds, golds, ok)
}

/// Brute-force event detection and argument counts over a corpus.
pub fn oracle_counts(preds: &[DocumentRecord], golds: &[DocumentRecord]) -> (Tally, Tally) {
    let mut ids: Vec<&str> = preds.iter().chain(golds).map(|d| d.doc_id.as_str()).collect();
    ids.sort();
    ids.dedup();
    let (mut med, mut meae) = (Tally::default(), Tally::default());
    let empty = Vec::new();
    for doc in ids {
        let p = preds.iter().find(|d| d.doc_id == doc).map_or(&empty, |d| &d.events);
        let g = golds.iter().find(|d| d.doc_id == doc).map_or(&empty, |d| &d.events);
        let pk: Vec<_> = p.iter().map(event_key).collect();
        let gk: Vec<_> = g.iter().map(event_key).collect();
        let tp = multiset_overlap(&pk, &gk);
        med.tp += tp;
        med.fp += p.len() - tp;
        med.fn_ += g.len() - tp;
        for pe in p {
            match g.iter().find(|ge| event_key(ge) == event_key(pe)) {
                None => meae.fp += items(pe),
                Some(ge) => {
                    let text_tp = multiset_overlap(&texts(pe), &texts(ge));
                    let vis_tp = max_matching(
                        &visuals(pe),
                        &visuals(ge),
                        &|a: &(String, [i64; 4]), b: &(String, [i64; 4])| a.0 == b.0 && pixel_iou(a.1, b.1, 100) > 0.5,
                    );
                    let tp = text_tp + vis_tp;
                    meae.tp += tp;
                    meae.fp += items(pe) - tp;
                    meae.fn_ += items(ge) - tp;
                }
            }
        }
        for ge in g {
            if !p.iter().any(|pe| event_key(pe) == event_key(ge)) {
                meae.fn_ += items(ge);
            }
        }
    }
    (med, meae)
}

/// (P, R, F1) under the both-empty-is-perfect convention.
pub fn oracle_prf(t: Tally) -> (f64, f64, f64) {
    let (pred, gold) = (t.tp + t.fp, t.tp + t.fn_);
    if pred == 0 && gold == 0 {
        return (1.0, 1.0, 1.0);
    }
    let p = if pred == 0 { 0.0 } else { t.tp as f64 / pred as f64 };
    let r = if gold == 0 { 0.0 } else { t.tp as f64 / gold as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

// ----------------------------------------------------------- grammar generators

const ITEM_WORDS: [&str; 12] = [
    "machine",
    "gun",
    "Taleban",
    "insurgents",
    "a-b",
    "x.y",
    "(c)",
    "Ünïcode",
    "数据",
    "O'Neil",
    "$5",
    "tank",
];

pub fn random_item(rng: &mut StdRng) -> String {
    (0..rng.gen_range(1..=3))
        .map(|_| *ITEM_WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

const FUZZ_TOKENS: [&str; 24] = [
    "<seg>",
    "<seg",
    "seg>",
    ";",
    ";;",
    "None",
    "none.",
    " ",
    "  ",
    "\n",
    "\t",
    "Attack",
    "Conflict.Attack",
    "Life.Die",
    ":",
    "[",
    "]",
    "Target:",
    "fight",
    "é",
    "数据",
    "<",
    ">",
    ".",
];

pub fn random_fuzz(rng: &mut StdRng) -> String {
    if rng.gen_bool(0.2) {
        return (0..rng.gen_range(0..40)).map(|_| rng.gen::<char>()).collect();
    }
    (0..rng.gen_range(0..30))
        .map(|_| *FUZZ_TOKENS.choose(rng).unwrap())
        .collect()
}

// ------------------------------------------------------------ dataset fixture

/// Trigger word and (sentence role, image role) pairs per schema type.
const DATASET_TYPES: [(&str, &str, &str, &str, &str, &str); 8] = [
    ("Transport", "carrying", "moved", "Agent", "Artifact", "vehicle"),
    ("Attack", "shooting", "attacked", "Attacker", "Target", "tool"),
    ("Demonstrate", "protesting", "protested", "Entity", "Place", "tool"),
    ("Arrest-Jail", "arresting", "arrested", "Agent", "Person", "suspect"),
    ("Phone-Write", "telephoning", "called", "Entity", "Place", "tool"),
    ("Meet", "meeting", "met", "Participant", "Place", "agent"),
    ("Die", "dying", "died", "Victim", "Place", "victim"),
    ("Transfer-Money", "paying", "paid", "Giver", "Recipient", "money"),
];

const NOUNS: [&str; 6] = ["officials", "the crowd", "two men", "the convoy", "Kabul", "a bank"];

pub struct DatasetFixture {
    pub sentences: PathBuf,
    pub images: PathBuf,
    pub script: PathBuf,
    /// Sentence id → image path with the highest cosine score.
    pub expected_match: BTreeMap<String, String>,
    pub in_schema: usize,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Writes 20 annotated sentences (two with unmapped labels), 60 annotated
/// images and a script answering every embedding and caption request.
pub fn write_dataset_fixture(dir: &Path, rng: &mut StdRng) -> DatasetFixture {
    use serde_json::{json, Value};
    let mut script: BTreeMap<String, Value> = BTreeMap::new();
    let mut images = Vec::new();
    let mut image_vecs: BTreeMap<&str, Vec<(String, Vec<f64>)>> = BTreeMap::new();
    let vector = |rng: &mut StdRng| -> Vec<f64> { (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    for i in 0..60 {
        let (_, label, _, _, _, img_role) = DATASET_TYPES[i % 8];
        let path = format!("img{i:02}.jpg");
        let v = vector(rng);
        script.insert(format!("embed|image|{path}"), json!(v));
        image_vecs.entry(label).or_default().push((path.clone(), v));
        let mut args = Vec::new();
        for (k, role) in [img_role, img_role, "bystander"].into_iter().enumerate() {
            let x = rng.gen_range(0..200) as f64;
            let y = rng.gen_range(0..200) as f64;
            // every fifth image carries a crop too small to caption
            let size = if k == 1 && i % 5 == 0 {
                8.0
            } else {
                rng.gen_range(16..120) as f64
            };
            let b = [x, y, x + size, y + size];
            if size >= 16.0 {
                script.insert(
                    format!("caption|{path}|{},{},{},{}", b[0], b[1], b[2], b[3]),
                    json!(format!("{} of image {i}", ["a rifle", "a flag", "a car"][k])),
                );
            }
            args.push(json!({"role": role, "box": b}));
        }
        images.push(json!({"id": format!("i{i:02}"), "path": path, "event_label": label, "args": args}));
    }

    let mut sentences = Vec::new();
    let mut expected_match = BTreeMap::new();
    let mut in_schema = 0;
    for s in 0..20 {
        let unmapped = s >= 18;
        let (ace, swig, trigger, r1, r2, _) = DATASET_TYPES[s % 8];
        let (a, b) = (NOUNS[s % NOUNS.len()], NOUNS[(s + 2) % NOUNS.len()]);
        let text = format!("On day {s} {a} {trigger} near {b}.");
        let span = |needle: &str| {
            let start = text[..text.find(needle).unwrap()].chars().count();
            json!({"start": start, "end": start + needle.chars().count()})
        };
        let t = span(trigger);
        let (sa, sb) = (span(a), span(b));
        let sid = format!("s{s:02}");
        let v = vector(rng);
        script.insert(format!("embed|text|{text}"), json!(v));
        sentences.push(json!({
            "id": sid,
            "text": text,
            "event_type": if unmapped { "Sue" } else { ace },
            "trigger": t,
            "args": [
                {"role": r1, "start": sa["start"], "end": sa["end"]},
                {"role": r2.to_lowercase(), "start": sb["start"], "end": sb["end"]},
            ],
        }));
        if !unmapped {
            in_schema += 1;
            let cands = &image_vecs[swig];
            let mut best = 0;
            for (j, (_, iv)) in cands.iter().enumerate() {
                if cosine(&v, iv) > cosine(&v, &cands[best].1) {
                    best = j;
                }
            }
            expected_match.insert(sid, cands[best].0.clone());
        }
    }
    sentences.reverse();

    let write_lines = |name: &str, rows: &[Value]| {
        let p = dir.join(name);
        let body: String = rows.iter().map(|r| format!("{r}\n")).collect();
        std::fs::write(&p, body).unwrap();
        p
    };
    let sentences = write_lines("sentences.jsonl", &sentences);
    let images = write_lines("images.jsonl", &images);
    let script_path = dir.join("script.json");
    std::fs::write(&script_path, serde_json::to_string_pretty(&script).unwrap()).unwrap();
    DatasetFixture {
        sentences,
        images,
        script: script_path,
        expected_match,
        in_schema,
    }
}

// ---------------------------------------------------------- ablation corpus

pub const TRIGGERS: [(&str, &str); 8] = [
    ("Movement.Transport", "moved"),
    ("Conflict.Attack", "attacked"),
    ("Conflict.Demonstrate", "protested"),
    ("Justice.ArrestJail", "arrested"),
    ("Contact.PhoneWrite", "called"),
    ("Contact.Meet", "met"),
    ("Life.Die", "died"),
    ("Transaction.TransferMoney", "paid"),
];

pub struct AblationDoc {
    pub id: String,
    pub sentence: String,
    /// Indices into [`TRIGGERS`].
    pub mentions: Vec<usize>,
}

/// Five documents with 0, 1, 2, 3 and 1 mentions.
pub fn ablation_docs() -> Vec<AblationDoc> {
    [vec![], vec![1], vec![0, 6], vec![2, 3, 7], vec![5]]
        .into_iter()
        .enumerate()
        .map(|(i, mentions)| {
            let words: Vec<&str> = mentions.iter().map(|&m| TRIGGERS[m].1).collect();
            let sentence = if words.is_empty() {
                format!("Document {i} reports a quiet day.")
            } else {
                format!("In document {i} people {} today.", words.join(" and "))
            };
            AblationDoc {
                id: format!("doc{i}"),
                sentence,
                mentions,
            }
        })
        .collect()
}
