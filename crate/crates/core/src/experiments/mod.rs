//! Experiment harness: MATLAB-style ranges, grid campaigns with CSV
//! persistence and resume, least-squares fits, threshold-time searches and
//! control-landscape slices.

mod fit;
mod grid;
mod landscape;
mod range;
mod threshold;

pub use fit::{fit, fit_inverted_exponential, fit_linear, fit_quadratic, FitModel, FitResult};
pub use grid::{
    cell_seed, read_csv, run_grid, write_csv, Cell, ExperimentRecord, GridOptions, GridOutcome, GridSpec, CSV_HEADER,
};
pub use landscape::{landscape_slice, strict_local_maxima, LandscapeSlice, LocalMaximum};
pub use range::{parse_depth_range, parse_range};
pub use threshold::{
    min_tf_for_fidelity, oscillation_score, suppressed_time, tf_sweep, DepthRule, ThresholdSearch,
    SUPPRESSED_THRESHOLD, TRANSFER_THRESHOLD,
};
