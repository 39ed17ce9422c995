//! Tensor-product scene-graph-triplet representations for caption generation.
//!
//! Subject, predicate and object feature vectors are bound to orthonormal
//! Hadamard role vectors ([`rolespace`]), attended over by a two-unit
//! recurrent decoder ([`decoder`]) in either the image-driven (TDBU) or the
//! semantic-gated (sTDBU) arrangement, trained with teacher forcing
//! ([`training`]) and scored with corpus BLEU and ROUGE-L ([`metrics`]).
//!
//! The crate is `no_std` with `alloc`; file formats and the command line live
//! in the companion `tpsgtr` crate.

#![no_std]

extern crate alloc;

pub mod decoder;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod rolespace;
pub mod scenegraph;
pub mod training;
pub mod vocab;

pub use error::{Error, Result};
