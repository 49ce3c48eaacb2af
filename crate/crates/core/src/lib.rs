//! Nonparametric bootstrap test of instrument validity under partial
//! monotonicity, for an ordered discrete treatment and a multi-dimensional
//! discrete instrument with rectangular support.
//!
//! The test checks, for every pair of instrument cells adjacent along one
//! coordinate, that the joint law of outcome and boundary treatment arms and
//! the treatment CDF move in the direction implied by monotonicity. The
//! statistic is a variance-weighted sup over intervals and thresholds,
//! integrated over a trimming measure, with critical values from a bootstrap
//! restricted to an estimated contact set.
//!
//! ```no_run
//! use ivmono::{validate_dataset, run_test, Dataset, InstrumentGrid, TestConfig};
//!
//! # fn main() -> ivmono::Result<()> {
//! let data = Dataset::new(vec![1.0, 2.0], vec![0.0, 1.0], vec![vec![0, 0], vec![1, 1]])?;
//! let grid = InstrumentGrid::observed(&data);
//! let config = TestConfig::default();
//! let result = run_test(&validate_dataset(data, &grid, &config)?, &config)?;
//! println!("TS = {}, p = {}", result.ts, result.p_value);
//! # Ok(())
//! # }
//! ```

pub mod bootstrap;
pub mod cli;
pub mod error;
pub mod model;
pub mod moments;
pub mod simulation;
pub mod statistic;

pub use bootstrap::{
    bootstrap_draw, bootstrap_statistic, contact_set, critical_value, p_value, run_test, run_test_sweep,
    ContactSet, TestResult,
};
pub use error::{Error, Result};
pub use model::{
    enumerate_adjacent_pairs, validate_dataset, CellPair, Dataset, Direction, EmptyCellPolicy, InstrumentGrid,
    TestConfig, TreatmentClass, ValidatedData, XiMeasure, STANDARD_XI_GRID,
};
pub use moments::{build_moment_table, Candidate, CandidateKind, MomentTable};
pub use statistic::{ts_statistic, weighted_sup, SupProfile};
