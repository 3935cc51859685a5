//! Synthetic reference/target time-series pairs with structured
//! ground-truth explanations of how they differ, plus explainers and an
//! alignment-based evaluator.

pub mod baseline;
pub mod cli;
pub mod error;
pub mod evaluator;
pub mod explain;
pub mod funclib;
pub mod io;
pub mod pairgen;
pub mod rng;
pub mod schema;
pub mod series;
pub mod stats;

pub use error::{Error, Result};
pub use funclib::{Catalog, Category, FuncId, Interval, Param, ParamVector};
pub use pairgen::{GenConfig, Generator, Pair, PairSample};
pub use schema::{DiffType, DifferenceRecord, ExplanationList, Magnitude, Presence};
pub use series::TimeSeries;
