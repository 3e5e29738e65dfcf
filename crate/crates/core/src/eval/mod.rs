//! Completion metrics, the occupancy-JSD diversity check and incompleteness
//! sweeps.

pub mod diversity;
pub mod metrics;
pub mod sweep;

pub use diversity::{jsd, mode_collapse_reference, NearestCentroid, OccupancyDistribution, DEFAULT_GRID};
pub use metrics::{accuracy, completeness, f1, MetricsReport, ShapeMetrics, DEFAULT_EPSILON};
pub use sweep::{incompleteness_sweep, sweep_csv, SweepRow, STANDARD_R_GRID};
