//! Restoration of a single sharp image from a sequence of frames degraded
//! by atmospheric turbulence.
//!
//! The pipeline runs four stages in a fixed order: sharpness-based frame
//! selection ([`select`]), optical-flow registration to a temporal-mean
//! reference ([`register`]), region-based fusion in the dual-tree complex
//! wavelet domain ([`fuse`], [`dtcwt`]) and a final artifact-removal pass
//! ([`deartifact`]). [`simulate`] generates synthetic turbulent sequences
//! with ground truth, and [`metrics`] scores results against it.

pub mod deartifact;
pub mod dtcwt;
pub mod error;
pub mod filter;
pub mod fuse;
pub mod image;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod register;
pub mod registry;
pub mod select;
pub mod simulate;

pub use error::{Error, Result, Stage};
pub use image::{Frame, FrameSequence, Plane};
