use nalgebra::{DMatrix, DVector};

use super::grid::TimeGrid;
use super::solve::RiccatiSolution;
use crate::error::{Error, Result};
use crate::linalg::{self, PINV_RTOL};
use crate::model::ModelParams;

/// Decentralized law `u_i = L_self (x_i - xbar) + L_mf xbar + c`.
///
/// Finite-horizon laws carry one entry per grid node; stationary laws carry
/// a single entry used at every time.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackLaw {
    grid: Option<TimeGrid>,
    pub self_gain: Vec<DMatrix<f64>>,
    pub mf_gain: Vec<DMatrix<f64>>,
    pub offset: Vec<DVector<f64>>,
}

impl FeedbackLaw {
    pub fn constant(self_gain: DMatrix<f64>, mf_gain: DMatrix<f64>, offset: DVector<f64>) -> Self {
        FeedbackLaw {
            grid: None,
            self_gain: vec![self_gain],
            mf_gain: vec![mf_gain],
            offset: vec![offset],
        }
    }

    pub fn on_grid(
        grid: TimeGrid,
        self_gain: Vec<DMatrix<f64>>,
        mf_gain: Vec<DMatrix<f64>>,
        offset: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let len = grid.len();
        if self_gain.len() != len || mf_gain.len() != len || offset.len() != len {
            return Err(Error::GridMismatch(format!(
                "feedback law needs {len} entries per gain"
            )));
        }
        Ok(FeedbackLaw {
            grid: Some(grid),
            self_gain,
            mf_gain,
            offset,
        })
    }

    /// Zero law for `r` controls and `n` states.
    pub fn zero(r: usize, n: usize) -> Self {
        Self::constant(DMatrix::zeros(r, n), DMatrix::zeros(r, n), DVector::zeros(r))
    }

    pub fn is_constant(&self) -> bool {
        self.grid.is_none()
    }

    pub fn grid(&self) -> Option<&TimeGrid> {
        self.grid.as_ref()
    }

    pub fn control_dim(&self) -> usize {
        self.offset[0].len()
    }

    pub fn state_dim(&self) -> usize {
        self.self_gain[0].ncols()
    }

    fn index(&self, node: usize) -> usize {
        if self.grid.is_none() {
            0
        } else {
            node
        }
    }

    pub fn gains(&self, node: usize) -> (&DMatrix<f64>, &DMatrix<f64>, &DVector<f64>) {
        let i = self.index(node);
        (&self.self_gain[i], &self.mf_gain[i], &self.offset[i])
    }

    pub fn control(&self, node: usize, x: &DVector<f64>, x_bar: &DVector<f64>) -> DVector<f64> {
        let (ls, lm, c) = self.gains(node);
        ls * (x - x_bar) + lm * x_bar + c
    }

    /// Mean-field control `L_mf xbar + c`.
    pub fn mean_control(&self, node: usize, x_bar: &DVector<f64>) -> DVector<f64> {
        let (_, lm, c) = self.gains(node);
        lm * x_bar + c
    }

    /// Copy with every self-gain replaced by `f(L_self)`.
    pub fn map_self_gain(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        let mut out = self.clone();
        out.self_gain = self.self_gain.iter().map(f).collect();
        out
    }
}

/// Gains `L_self = -Upsilon^+ Phi`, `L_mf = -Upsilon-bar^+ (Phi + Psi)` and
/// `c = -Upsilon-bar^+ Theta` at every node.
pub fn feedback_law(solution: &RiccatiSolution, params: &ModelParams) -> Result<FeedbackLaw> {
    if let Some(k) = solution.range_ok.iter().position(|ok| !ok) {
        return Err(Error::RangeCondition {
            weight: "Upsilon / Upsilon-bar",
            time: solution.grid.node(k),
            detail: "positivity or range inclusion fails (A5)".into(),
        });
    }
    let len = solution.grid.len();
    let mut self_gain = Vec::with_capacity(len);
    let mut mf_gain = Vec::with_capacity(len);
    let mut offset = Vec::with_capacity(len);
    for node in 0..len {
        let b = solution.bundle_at(params, node);
        let ups_pinv = linalg::pinv(&b.upsilon, PINV_RTOL);
        let upsb_pinv = linalg::pinv(&b.upsilon_bar, PINV_RTOL);
        self_gain.push(-(ups_pinv * &b.phi));
        mf_gain.push(-(&upsb_pinv * (&b.phi + &b.psi)));
        offset.push(-(upsb_pinv * &b.theta));
    }
    FeedbackLaw::on_grid(solution.grid, self_gain, mf_gain, offset)
}
