//! Grid-world robot localization with a two-dimensional Grover search.
//!
//! * [`gridmap`]: maps, obstacle-influence costmaps and robot perception.
//! * [`statevec`]: a dense state-vector simulator with Pauli and readout noise.
//! * [`grover2d`]: planning, oracle synthesis, execution and budgets.
//! * [`classical`]: substring search and Monte Carlo Localization baselines.
//! * [`errmodel`]: closed-form failure estimates and device presets.

pub mod classical;
pub mod errmodel;
pub mod gridmap;
pub mod grover2d;
pub mod statevec;

pub use classical::{mcl_localize, query_comparison, substring_search, MclConfig, MclResult};
pub use errmodel::{Budget, DevicePresets, ErrorEstimate, Exponent};
pub use gridmap::{
    compute_costmap, perceive, perceive_at, Cell, Costmap, GridMap, MapError, Perception,
};
pub use grover2d::{
    budget, classical_matches, plan, run_localization, run_plan, GroverError, GroverPlan,
    LocalizationReport, Mode, RunOptions, SearchProblem,
};
pub use statevec::{Circuit, GateOp, Histogram, NoiseModel, SimError, StateVector};
