//! Generalized stochastic Petri nets and absorbing-chain analysis for web
//! navigation models, with clickstream mining and sequence clustering.

pub mod cluster;
pub mod ctmc;
pub mod error;
pub mod fixture;
pub mod gspn;
pub mod logs;
pub mod reach;
pub mod report;
pub mod synth;

pub use ctmc::{transient_measures, MeasureRow, Sojourn, TransientMeasures};
pub use error::{Error, Result};
pub use gspn::{GspnModel, Marking, ParameterSet, Place, Rate, Transition, TransitionKind};
pub use reach::{build_reachability_graph, tangible_graph, ReachabilityGraph, StateKind, TangibleGraph};
