//! Numerical checks of smoothness, stability and box-counting dimension.

mod boxcount;
mod dimension;
mod smoothness;
mod stability;

pub use boxcount::{
    box_count, box_count_values, column_boxes, estimate_dimension, estimate_from_samples,
    fit_records, least_squares, mesh_level, write_records_csv, BoxCountRecord, EmpiricalDimension,
    LinearFit, MIN_COLUMN_SAMPLES, MIN_SCALES,
};
pub use dimension::{
    dimension_bounds, hypothesis_check, omega_bounds, power_iteration, sc_matrix, DimensionCase,
    DimensionReport, HypothesisCheck, OmegaBounds,
};
pub use smoothness::{
    empirical_holder, empirical_holder_values, holder_case, smoothness_constants, HolderEstimate,
    OmegaSummary, SmoothnessCase, SmoothnessConstants, ALPHA, SUP_NORM_INFLATION,
};
pub use stability::{
    measure_sup_diff, ordinate_factor, perturbed_system, stability_bound, stability_experiment,
    stability_trials, DataPerturbation, ExperimentSettings, Magnitudes, Perturbed, StabilityReport,
    SATISFIED_SLACK,
};
