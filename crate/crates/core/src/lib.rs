//! Joint multi-person pose estimation and tracking.
//!
//! Body-joint detections from every frame of a video become the nodes of a
//! spatio-temporal graph. A binary program selects nodes and edges at minimum
//! total cost, and the connected groups of the selection are the people.
//!
//! ```
//! use jointtrack::potentials::{CorrespondenceIndex, LogisticModel};
//! use jointtrack::tracker::{track, Models, TrackerConfig};
//!
//! let models = Models { temporal: LogisticModel::zeros(10), spatial: None };
//! let out = track(&[], &CorrespondenceIndex::default(), &models, &TrackerConfig::default()).unwrap();
//! assert!(out.tracks.is_empty());
//! ```
//!
//! The guide in `book/` walks through every stage.

pub mod error;
pub mod graph;
pub mod ilp;
pub mod metrics;
pub mod model;
pub mod potentials;
pub mod solver;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
pub use graph::{build_graph, SpatioTemporalGraph};
pub use ilp::IlpInstance;
pub use model::{Detection, GroundTruthPose, JointType, Point, PoseTracks};
pub use solver::{solve, SolverConfig};
pub use tracker::{track, TrackerConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/graph.md")]
    mod graph {}
    #[doc = include_str!("../../../book/src/potentials.md")]
    mod potentials {}
    #[doc = include_str!("../../../book/src/ilp.md")]
    mod ilp {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/tracking.md")]
    mod tracking {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/synth.md")]
    mod synth {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
