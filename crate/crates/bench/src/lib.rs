//! Fixtures shared by the benchmarks.

use mflq_core::model::{presets, ModelParams};
use mflq_core::riccati::{feedback_law, solve_riccati, FeedbackLaw, RangePolicy, TimeGrid};

/// The two-dimensional benchmark model and its feedback law on `steps` nodes.
pub fn benchmark_law(steps: usize) -> (ModelParams, FeedbackLaw) {
    let params = presets::paper_sec4();
    let grid = TimeGrid::new(10.0, steps).expect("valid grid");
    let sol = solve_riccati(&params, &grid, RangePolicy::Strict).expect("preset solves");
    let law = feedback_law(&sol, &params).expect("preset has a law");
    (params, law)
}
