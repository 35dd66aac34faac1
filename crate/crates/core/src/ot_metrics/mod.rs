//! Exact, sliced and adaptively sliced Wasserstein distances.
//!
//! [`wasserstein_1d`] is the workhorse: every sliced distance reduces to it
//! after projecting both measures through a [`DefiningFunction`].
//! [`wasserstein_oracle`] solves the full coupling problem by enumeration or
//! a transportation simplex and is only used to check the fast path.

mod defining;
mod measure;
mod oracle;
mod pseudo_metric;
mod sliced;
mod wasserstein;

pub use defining::{
    monomial_count, monomial_exponents, DefiningFunction, SliceParameterSet, DEFAULT_DEGREE,
    UNIT_NORM_TOLERANCE,
};
pub use measure::{DiscreteMeasure, OneDMeasure, Order, MASS_TOLERANCE, MERGE_TOLERANCE};
pub use oracle::{
    transport_cost, transport_plan, wasserstein_oracle, ORACLE_MAX_ATOMS, PERMUTATION_MAX_ATOMS,
};
pub use pseudo_metric::{check_pseudo_metric, MeasureTriple, PseudoMetricReport, RandomTripleSampler};
pub use sliced::{agswd, gswd, project, sliced_costs, swd};
pub use wasserstein::{monotone_coupling, wasserstein_1d};

/// Default number of slices when none is configured.
pub const DEFAULT_SLICE_COUNT: usize = 50;
