//! Traffic monitoring pipeline: a deterministic scene simulator and fixed
//! cameras produce frames, instance masks and static regions are highlighted
//! on them, a multimodal model (remote or scripted) answers in generic
//! location aliases, aliases are grounded to real road names, and answers are
//! scored against ground truth.

pub mod camera;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod gateway;
pub mod geometry;
pub mod grounding;
pub mod perception;
pub mod pipeline;
pub mod raster;
pub mod scene;
pub mod service;
