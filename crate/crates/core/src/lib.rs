//! Schema-guided stepwise multimedia event extraction.
//!
//! A news sentence and its image are processed in steps: an event-type step
//! asks a vision-language model for `(event type, trigger)` pairs, then one
//! argument step per role of each detected type asks for the role's text
//! arguments and image region descriptions. Region descriptions are turned
//! into boxes by a grounding service. This crate holds everything that does
//! not touch the operating system:
//!
//! - [`schema`]: event types, roles and cross-dataset label mappings.
//! - [`prompt`]: template rendering for every step kind and ablation mode.
//! - [`grammar`]: gold-answer formatting and total parsers for model output.
//! - [`text`]: anchoring of surface strings into sentences.
//! - [`bbox`]: boxes and intersection-over-union.
//! - [`gateway`]: service traits and a scripted backend for tests.
//! - [`extract`]: the per-document extraction state machine.
//! - [`eval`]: micro P/R/F1 scoring with audit ledgers.
//! - [`dataset`]: weak cross-modal alignment and instruction record emission.
//!
//! File formats, HTTP clients and the command line live in the `mee` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bbox;
pub mod dataset;
pub mod eval;
pub mod extract;
pub mod gateway;
pub mod grammar;
pub mod prompt;
pub mod schema;
pub mod text;

pub use bbox::{iou, BoundingBox, BoxError};
pub use schema::{ArgumentRoleDef, EventSchema, EventTypeDef, EventTypeId, SchemaError, SchemaMapping};
pub use text::TextSpan;
