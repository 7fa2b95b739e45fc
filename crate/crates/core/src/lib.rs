//! Annotation-free instance correspondence for multi-sweep LiDAR and the
//! numerical core of BEV point-to-instance contrastive pretraining.
//!
//! The crate is `no_std` with `alloc`. File formats, configuration loading and
//! the command-line front end live in the `cohere` companion crate.
//!
//! Pipeline overview:
//!
//! * [`geom`] merges the sweeps between two camera timestamps into a [`geom::Frame`].
//! * [`ground`] removes ground points with a polar-grid line fit.
//! * [`cluster`] runs HDBSCAN on the remaining points and keeps clusters that are
//!   observed in both the first and the last sweep of the frame.
//! * [`assoc`] links clusters across frames with ego-motion compensation and the
//!   Hungarian method, producing long-term tracks.
//! * [`bev`] and [`learn`] implement BEV sampling, lift-splat, depth merging,
//!   memory-bank averaging, the EMA target and the contrastive loss.
//! * [`pipeline`] chains ground removal, clustering and association over a sequence.
//! * [`rng`] derives independent named random streams from one seed.
//! * [`synth`] generates scenes with ground truth and scores recovered tracks.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod assoc;
pub mod bev;
pub mod cluster;
pub mod geom;
pub mod ground;
pub mod learn;
pub mod math;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use geom::{Frame, Point3, Pose, Sweep};
