use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Stopping rule on the relative operator norm and relative velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    pub tol_op: f64,
    pub tol_vec: f64,
    pub k_max: usize,
}

impl StopCriteria {
    pub fn new(tol_op: f64, tol_vec: f64, k_max: usize) -> Result<Self> {
        if !(tol_op > 0.0 && tol_vec > 0.0) {
            return Err(Error::Config(format!(
                "stop tolerances must be positive, got tol_op = {tol_op}, tol_vec = {tol_vec}"
            )));
        }
        if k_max == 0 {
            return Err(Error::Config("k_max must be positive".into()));
        }
        Ok(Self {
            tol_op,
            tol_vec,
            k_max,
        })
    }
}

impl Default for StopCriteria {
    /// `Tol_op = 1e-6`, `Tol_vec = 1e-5`, `k_max = 10⁵`.
    fn default() -> Self {
        Self {
            tol_op: 1e-6,
            tol_vec: 1e-5,
            k_max: 100_000,
        }
    }
}

/// `‖V(z_k)‖/‖V(z_0)‖ ≤ tol_op` and `‖z_k − z_{k−1}‖/(‖z_k‖ + 1) ≤ tol_vec`.
///
/// A zero initial residual means the start is already a solution. Without
/// a previous iterate (`velocity = None`) only that case can stop.
pub fn check_stop(
    stop: &StopCriteria,
    residual: f64,
    initial_residual: f64,
    velocity: Option<f64>,
    z_norm: f64,
) -> bool {
    if initial_residual == 0.0 {
        return true;
    }
    let Some(vel) = velocity else {
        return false;
    };
    residual / initial_residual <= stop.tol_op && vel / (z_norm + 1.0) <= stop.tol_vec
}

/// Shared run configuration. Methods that need fewer starting points ignore
/// `z1` and `zbar0`; both default to `z0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    pub step: f64,
    pub k_max: usize,
    pub z0: Vector,
    pub z1: Option<Vector>,
    pub zbar0: Option<Vector>,
    /// When set, the run halts at the first index satisfying the rule.
    pub stop: Option<StopCriteria>,
    /// Snapshot thinning; scalar records are always kept for every k.
    pub record_every: usize,
    pub keep_snapshots: bool,
    /// A solution used for the gap surrogate column.
    pub reference: Option<Vector>,
}

impl SolverConfig {
    pub fn new(z0: Vector, step: f64) -> Self {
        Self {
            alpha: 3.0,
            step,
            k_max: 100_000,
            z0,
            z1: None,
            zbar0: None,
            stop: None,
            record_every: 1,
            keep_snapshots: false,
            reference: None,
        }
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn stop(mut self, stop: StopCriteria) -> Self {
        self.stop = Some(stop);
        self
    }

    pub fn z1(mut self, z1: Vector) -> Self {
        self.z1 = Some(z1);
        self
    }

    pub fn zbar0(mut self, zbar0: Vector) -> Self {
        self.zbar0 = Some(zbar0);
        self
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn snapshots(mut self, keep: bool) -> Self {
        self.keep_snapshots = keep;
        self
    }

    pub fn reference(mut self, z_star: Vector) -> Self {
        self.reference = Some(z_star);
        self
    }

    pub fn start1(&self) -> &Vector {
        self.z1.as_ref().unwrap_or(&self.z0)
    }

    pub fn start_bar(&self) -> &Vector {
        self.zbar0.as_ref().unwrap_or(&self.z0)
    }

    /// Effective iteration cap: the smaller of `k_max` and the stop rule's.
    pub fn cap(&self) -> usize {
        match &self.stop {
            Some(st) => self.k_max.min(st.k_max),
            None => self.k_max,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!(
                "step must be positive and finite, got {}",
                self.step
            )));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be positive".into()));
        }
        let named = [
            ("z0", Some(&self.z0)),
            ("z1", self.z1.as_ref()),
            ("zbar0", self.zbar0.as_ref()),
            ("reference", self.reference.as_ref()),
        ];
        for (name, v) in named {
            if let Some(v) = v {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "{name} has length {} but the operator has dimension {dim}",
                        v.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn require_alpha(&self) -> Result<()> {
        if !(self.alpha > 2.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha must exceed 2, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Horizon of the numerical growth check.
pub const GROWTH_CHECK_HORIZON: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaKind {
    Constant,
    Polynomial,
}

/// Time scaling `β_k = β₀·k^ρ` for `k ≥ 1`, with `β_0 := β₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSchedule {
    pub kind: BetaKind,
    pub beta0: f64,
    pub rho: f64,
}

/// Outcome of the growth check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    /// `sup_{1≤k≤K} k(β_k − β_{k−1})/β_k`
    pub sup_ratio: f64,
    /// `(α − 2) − sup_ratio`, the slack ε.
    pub growth_margin: f64,
}

impl BetaSchedule {
    pub fn constant(beta0: f64) -> Result<Self> {
        Self::build(BetaKind::Constant, beta0, 0.0)
    }

    pub fn polynomial(beta0: f64, rho: f64) -> Result<Self> {
        Self::build(BetaKind::Polynomial, beta0, rho)
    }

    fn build(kind: BetaKind, beta0: f64, rho: f64) -> Result<Self> {
        if !(beta0 > 0.0 && beta0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta0 must be positive, got {beta0}"
            )));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rho must be nonnegative, got {rho}"
            )));
        }
        Ok(Self { kind, beta0, rho })
    }

    pub fn at(&self, k: usize) -> f64 {
        match self.kind {
            BetaKind::Constant => self.beta0,
            BetaKind::Polynomial if k == 0 => self.beta0,
            BetaKind::Polynomial => self.beta0 * (k as f64).powf(self.rho),
        }
    }

    fn ratio(&self, k: usize) -> f64 {
        let (b, bp) = (self.at(k), self.at(k - 1));
        k as f64 * (b - bp) / b
    }

    /// Growth condition `sup_k k(β_k − β_{k−1})/β_k < α − 2`, scanned over
    /// `1 ≤ k ≤ horizon`, plus `ρ < α − 2` for the polynomial family.
    pub fn check_growth_over(&self, alpha: f64, horizon: usize) -> Result<GrowthReport> {
        let mut sup = 0.0_f64;
        if self.kind == BetaKind::Polynomial {
            for k in 1..=horizon {
                let r = self.ratio(k);
                if r < -1e-15 {
                    return Err(Error::Config(format!(
                        "beta schedule decreases at k = {k}"
                    )));
                }
                sup = sup.max(r);
            }
        }
        let margin = (alpha - 2.0) - sup;
        let analytic = self.kind == BetaKind::Constant || self.rho < alpha - 2.0;
        if !(margin > 0.0 && analytic) {
            return Err(Error::Config(format!(
                "growth condition fails for alpha = {alpha}: sup ratio {sup:.6}, rho {}",
                self.rho
            )));
        }
        Ok(GrowthReport {
            sup_ratio: sup,
            growth_margin: margin,
        })
    }

    pub fn check_growth(&self, alpha: f64) -> Result<GrowthReport> {
        self.check_growth_over(alpha, GROWTH_CHECK_HORIZON)
    }
}
