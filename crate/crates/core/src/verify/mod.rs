//! Empirical checks of the equilibrium: the stationarity identity along
//! simulated paths, a probe of the convexity condition, and paired
//! unilateral-deviation experiments with the `eps(N)` rate fit.
//!
//! The deviation suite is finite, so a passing report certifies the suite
//! and not every admissible control.

mod convexity;
mod fit;
mod nash;
mod residual;

pub use convexity::{convexity_probe, ProbeConfig, ProbeReport};
pub use fit::{epsilon_rate_fit, half_rate_constant, RateFit};
pub use nash::{
    deviated_control, deviation_experiment, epsilon_sweep, nash_report, ratio_variances,
    standard_suite, DeltaJ, Deviation, DeviationKind, NashReport, RatioVariance, SweepPoint,
};
pub use residual::{adjoint_point, stationarity_residual, AdjointPoint, ResidualStat};
