//! Level-controlled sketch refinement for sketch-guided photo editing.
//!
//! Rough, hand-drawn sketches are treated as *drawable regions*: dilated bands
//! that cover where the real lines should go. A generator learns to map such
//! regions back to fine edge maps, with a refinement level `ℓ ∈ [0, 1]` that
//! sets the dilation radius `r = ℓR` and, through a style code, modulates
//! every hidden layer. A frozen edge-to-photo renderer turns the refined
//! sketch into the final photo.
//!
//! Modules, bottom-up:
//!
//! - [`raster`]: sketch, mask and photo types, PNG I/O
//! - [`morphology`]: deformation, line discarding, dilation, random masks
//! - [`data`]: photo/edge ingestion and a fallback edge operator
//! - [`nn`]: generator, discriminator, renderer, checkpoints
//! - [`losses`]: reconstruction, perceptual and hinge adversarial losses
//! - [`train`]: renderer pre-training and the multi-scale schedule
//! - [`inference`] and [`service`]: refinement/editing sessions and the HTTP API

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod inference;
pub mod losses;
pub mod morphology;
pub mod nn;
pub mod prepare;
pub mod raster;
pub mod rng;
pub mod service;
pub mod train;

pub use error::{Error, Result};
pub use raster::{Mask, Photo, RefinementLevel, SketchMap};
