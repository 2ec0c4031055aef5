//! Adaptive low-rank estimation under bounded per-column noise.
//!
//! Columns are processed left to right. Each column is sampled on a row set
//! `Ω` of size `d` and its restricted residual against the current basis is
//! compared with a noise-aware threshold. Columns that exceed the threshold
//! are observed in full and extend the basis; the others are completed from
//! their samples by a restricted least-squares fit.
//!
//! Alongside the basis the estimator tracks `θ̃`, an upper bound on the
//! angle between the span of the observed noisy columns and the clean
//! column space. `θ̃` drives both the threshold and the sample budget
//! `d = ⌈72·μ·r·ln²(1/δ) + 8·m·θ̃²·ln(r/δ)⌉`. All logarithms are natural.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{
    coherence, orthonormalize, vector_subspace_angle, Angle, DenseMatrix, IndexSet,
    OrthonormalBasis, RestrictedFit, DEFAULT_RANK_TOL,
};
use crate::sampling::{sample_uniform_subset, streams, RngState};
use crate::synthetic::{check_epsilon, ObservationOracle};

/// Leading constant of the base budget term.
pub const BASE_BUDGET_CONSTANT: f64 = 72.0;
/// Leading constant of the angle-dependent budget term.
pub const ANGLE_BUDGET_CONSTANT: f64 = 8.0;
/// Default absolute slack added to the threshold in [`column_test`].
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-10;

/// Absolute round-off allowance when comparing a column error with its
/// certificate, which is exactly zero in the noiseless case.
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// When the row sample `Ω` is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OmegaRedraw {
    /// Only after the basis grows.
    #[default]
    OnUpdate,
    /// Before every column (ablation).
    PerColumn,
}

impl fmt::Display for OmegaRedraw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OmegaRedraw::OnUpdate => write!(f, "on-update"),
            OmegaRedraw::PerColumn => write!(f, "per-column"),
        }
    }
}

impl FromStr for OmegaRedraw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "on-update" => Ok(OmegaRedraw::OnUpdate),
            "per-column" => Ok(OmegaRedraw::PerColumn),
            other => Err(Error::invalid(format!(
                "omega redraw policy must be `on-update` or `per-column`, got `{other}`"
            ))),
        }
    }
}

/// Parameters of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct LrebnConfig {
    /// Per-column noise bound ε.
    pub epsilon: f64,
    /// Failure parameter δ.
    pub delta: f64,
    /// Target rank.
    pub r: usize,
    /// Upper bound on the coherence of the clean column space.
    pub mu_upper: f64,
    /// Replace `mu_upper` by `max(1, 2·μ(Û)·k/r)` once a basis exists.
    /// Heuristic; `mu_upper` is used until the first column is accepted.
    pub estimate_mu: bool,
    pub budget_cap_to_m: bool,
    pub angle_cap_enabled: bool,
    pub omega_redraw: OmegaRedraw,
    pub seed: u64,
    /// Slack added to the threshold so round-off residuals of in-span
    /// columns never count as new directions.
    pub residual_tol: f64,
    pub rank_tol: f64,
}

impl LrebnConfig {
    pub fn new(epsilon: f64, delta: f64, r: usize, mu_upper: f64) -> Self {
        LrebnConfig {
            epsilon,
            delta,
            r,
            mu_upper,
            estimate_mu: false,
            budget_cap_to_m: true,
            angle_cap_enabled: true,
            omega_redraw: OmegaRedraw::OnUpdate,
            seed: 0,
            residual_tol: DEFAULT_RESIDUAL_TOL,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        if !(self.delta > 0.0 && self.delta < 0.1) {
            return Err(Error::invalid("delta must satisfy 0 < delta < 0.1"));
        }
        if self.r == 0 {
            return Err(Error::invalid("r must be at least 1"));
        }
        if self.r >= 2 && self.delta > (self.r as f64).powf(-0.125) {
            return Err(Error::invalid("delta must be <= r^(-1/8)"));
        }
        if !(self.mu_upper >= 1.0) || !self.mu_upper.is_finite() {
            return Err(Error::invalid("mu_upper must be a finite value >= 1"));
        }
        if !(self.residual_tol >= 0.0) || !(self.rank_tol > 0.0) {
            return Err(Error::invalid("tolerances must be non-negative"));
        }
        Ok(())
    }
}

/// `72·μ·r·ln²(1/δ) + 8·m·θ²·ln(r/δ)` before rounding.
pub fn budget_formula(mu: f64, r: usize, delta: f64, m: usize, theta: f64) -> f64 {
    let log_inv = (1.0 / delta).ln();
    BASE_BUDGET_CONSTANT * mu * r as f64 * log_inv * log_inv
        + ANGLE_BUDGET_CONSTANT * m as f64 * theta * theta * (r as f64 / delta).ln()
}

/// Rounds a raw budget up and clamps it to `[1, m]` (or `[1, ∞)` uncapped).
pub fn clamp_budget(raw: f64, m: usize, cap_to_m: bool) -> usize {
    let d = raw.ceil().max(1.0);
    if cap_to_m {
        d.min(m as f64) as usize
    } else {
        d.min(usize::MAX as f64) as usize
    }
}

pub fn initial_budget(cfg: &LrebnConfig, m: usize) -> usize {
    updated_budget(cfg, m, Angle::ZERO)
}

pub fn updated_budget(cfg: &LrebnConfig, m: usize, theta_tilde: Angle) -> usize {
    budget_with_mu(cfg, cfg.mu_upper, m, theta_tilde)
}

fn budget_with_mu(cfg: &LrebnConfig, mu: f64, m: usize, theta_tilde: Angle) -> usize {
    let raw = budget_formula(mu, cfg.r, cfg.delta, m, theta_tilde.radians());
    clamp_budget(raw, m, cfg.budget_cap_to_m)
}

/// `(1+ε)·(√(3d/2m)·θ̃ + √(3dkε/2m))`.
pub fn residual_threshold(d: usize, m: usize, k: usize, epsilon: f64, theta_tilde: Angle) -> f64 {
    let ratio = 3.0 * d as f64 / (2.0 * m as f64);
    (1.0 + epsilon) * (ratio.sqrt() * theta_tilde.radians() + (ratio * k as f64 * epsilon).sqrt())
}

/// True when the sampled residual marks the column as carrying a new
/// direction.
pub fn column_test(
    residual: f64,
    d: usize,
    m: usize,
    k: usize,
    cfg: &LrebnConfig,
    theta_tilde: Angle,
) -> bool {
    residual > residual_threshold(d, m, k, cfg.epsilon, theta_tilde) + cfg.residual_tol
}

/// Bound on the angle between a noisy column and its clean counterpart:
/// `arcsin(min(1, ε/(1−ε)))`.
pub fn noise_angle_bound(epsilon: f64) -> f64 {
    (epsilon / (1.0 - epsilon)).min(1.0).asin()
}

/// `(3π/2)·√(kε)`.
pub fn angle_cap(k: usize, epsilon: f64) -> f64 {
    1.5 * PI * (k as f64 * epsilon).sqrt()
}

/// One step of the angle-bound recursion after the basis grows to
/// dimension `k`.
///
/// `theta_new_col` is the angle between the accepted column and the basis
/// before it was added. The denominator is floored at `√(kε)`.
pub fn angle_increment(
    theta_tilde_prev: Angle,
    theta_new_col: Angle,
    cfg: &LrebnConfig,
    k: usize,
) -> Result<Angle> {
    if k == 0 {
        return Err(Error::invalid("k counts the dimension after the update and must be >= 1"));
    }
    let numerator = noise_angle_bound(cfg.epsilon);
    if numerator == 0.0 {
        return Ok(theta_tilde_prev);
    }
    if theta_new_col.radians() == 0.0 {
        return Err(Error::InternalInconsistency(
            "accepted column lies in the previous span".into(),
        ));
    }
    let prev = theta_tilde_prev.radians();
    let floor = (k as f64 * cfg.epsilon).sqrt();
    let denominator = (theta_new_col.radians() - prev).max(floor);
    let mut next = prev + FRAC_PI_2 * numerator / denominator;
    if cfg.angle_cap_enabled {
        next = next.min(angle_cap(k, cfg.epsilon));
    }
    Ok(Angle::clamped(next.min(FRAC_PI_2)))
}

/// Per-column error certificate
/// `(m/d)·ε + (m/d + 1)·(√24·θ̃ + √(8kε))·(1+ε)`.
pub fn theorem_error_bound(m: usize, d: usize, k: usize, epsilon: f64, theta_tilde: Angle) -> f64 {
    let ratio = m as f64 / d as f64;
    ratio * epsilon
        + (ratio + 1.0)
            * (24.0_f64.sqrt() * theta_tilde.radians() + (8.0 * k as f64 * epsilon).sqrt())
            * (1.0 + epsilon)
}

/// How a column of the output was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnMode {
    Reconstructed,
    FullyObserved,
}

impl fmt::Display for ColumnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnMode::Reconstructed => write!(f, "reconstructed"),
            ColumnMode::FullyObserved => write!(f, "fully_observed"),
        }
    }
}

/// State used to decide one column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRecord {
    pub col_index: usize,
    pub mode: ColumnMode,
    pub k_at_time: usize,
    /// Size of the row sample the decision was made on.
    pub d_at_time: usize,
    pub theta_tilde: Angle,
    pub residual: f64,
    pub threshold: f64,
    /// The restricted basis lost rank on this column's sample.
    pub degenerate: bool,
    /// Rows read before the decision.
    pub omega: IndexSet,
}

/// A change of `θ̃` after the basis grew.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEvent {
    pub col_index: usize,
    pub k: usize,
    pub theta_new_col: Angle,
    pub theta_tilde: Angle,
}

/// A recomputation of the sample budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetEvent {
    /// Column whose acceptance triggered the update; `None` for the initial
    /// budget.
    pub col_index: Option<usize>,
    pub k: usize,
    pub theta_tilde: Angle,
    pub mu: f64,
    /// Formula value before rounding and clamping.
    pub raw: f64,
    /// Budget after rounding and the configured clamping.
    pub d: usize,
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub m_tilde: DenseMatrix,
    pub columns: Vec<ColumnRecord>,
    pub observations: u64,
    pub theta_trace: Vec<ThetaEvent>,
    pub budget_trace: Vec<BudgetEvent>,
    pub basis: OrthonormalBasis,
    pub k_final: usize,
    pub theta_tilde_final: Angle,
    /// Columns that passed the test but added no dimension numerically.
    pub rank_stalls: usize,
    /// `k_final > r`.
    pub dimension_exceeded: bool,
}

impl RecoveryResult {
    pub fn column_mode(&self, j: usize) -> ColumnMode {
        self.columns[j].mode
    }

    pub fn fully_observed(&self) -> usize {
        self.columns
            .iter()
            .filter(|c| c.mode == ColumnMode::FullyObserved)
            .count()
    }
}

/// Runs the estimator against `oracle`.
pub fn run_lrebn(oracle: &ObservationOracle<'_>, cfg: &LrebnConfig) -> Result<RecoveryResult> {
    cfg.validate()?;
    let m = oracle.nrows();
    let n = oracle.ncols();
    let mut rng = RngState::new(cfg.seed, streams::ALGORITHM).rng();

    let mut m_tilde = DenseMatrix::zeros(m, n)?;
    let mut raw_columns: Vec<DVector<f64>> = Vec::new();
    let mut basis = OrthonormalBasis::empty(m);
    let mut theta = Angle::ZERO;
    let mut mu = cfg.mu_upper;

    let raw = budget_formula(mu, cfg.r, cfg.delta, m, 0.0);
    let mut d = clamp_budget(raw, m, cfg.budget_cap_to_m);
    let mut budget_trace = vec![BudgetEvent {
        col_index: None,
        k: 0,
        theta_tilde: theta,
        mu,
        raw,
        d,
    }];
    let mut theta_trace = Vec::new();
    let mut columns = Vec::with_capacity(n);
    let mut rank_stalls = 0;

    let mut omega = sample_uniform_subset(m, d.min(m), &mut rng)?;
    let mut fit = RestrictedFit::new(&basis, &omega)?;

    for i in 0..n {
        if cfg.omega_redraw == OmegaRedraw::PerColumn && i > 0 {
            omega = sample_uniform_subset(m, d.min(m), &mut rng)?;
            fit = RestrictedFit::new(&basis, &omega)?;
        }
        let k = basis.dim();
        let y_omega = oracle.entries(&omega, i)?;
        let residual = fit.residual_norm(&y_omega)?;
        let sample_size = omega.len();
        let threshold = residual_threshold(sample_size, m, k, cfg.epsilon, theta);
        let fires = column_test(residual, sample_size, m, k, cfg, theta);

        columns.push(ColumnRecord {
            col_index: i,
            mode: if fires {
                ColumnMode::FullyObserved
            } else {
                ColumnMode::Reconstructed
            },
            k_at_time: k,
            d_at_time: sample_size,
            theta_tilde: theta,
            residual,
            threshold,
            degenerate: fit.is_degenerate(),
            omega: omega.clone(),
        });

        if !fires {
            if !basis.is_empty() {
                m_tilde.set_column(i, &fit.reconstruct(&y_omega)?)?;
            }
            // an empty basis completes the column to zero
            continue;
        }

        let column = oracle.column(i)?;
        m_tilde.set_column(i, &column)?;
        raw_columns.push(column.clone());
        let grown = orthonormalize(&raw_columns, cfg.rank_tol)?;
        if grown.dim() > basis.dim() {
            let theta_new_col = vector_subspace_angle(&column, &basis)?;
            basis = grown;
            let k_new = basis.dim();
            theta = angle_increment(theta, theta_new_col, cfg, k_new)?;
            theta_trace.push(ThetaEvent {
                col_index: i,
                k: k_new,
                theta_new_col,
                theta_tilde: theta,
            });
            if cfg.estimate_mu {
                mu = (2.0 * coherence(&basis)? * k_new as f64 / cfg.r as f64).max(1.0);
            }
            let raw = budget_formula(mu, cfg.r, cfg.delta, m, theta.radians());
            d = clamp_budget(raw, m, cfg.budget_cap_to_m);
            budget_trace.push(BudgetEvent {
                col_index: Some(i),
                k: k_new,
                theta_tilde: theta,
                mu,
                raw,
                d,
            });
        } else {
            raw_columns.pop();
            rank_stalls += 1;
        }
        if cfg.omega_redraw == OmegaRedraw::OnUpdate {
            omega = sample_uniform_subset(m, d.min(m), &mut rng)?;
        }
        fit = RestrictedFit::new(&basis, &omega)?;
    }

    let k_final = basis.dim();
    Ok(RecoveryResult {
        m_tilde,
        columns,
        observations: oracle.entry_count(),
        theta_trace,
        budget_trace,
        basis,
        k_final,
        theta_tilde_final: theta,
        rank_stalls,
        dimension_exceeded: k_final > cfg.r,
    })
}

/// Errors of a run measured against the clean matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub column_errors: Vec<f64>,
    pub max_col_error: f64,
    pub mean_col_error: f64,
    /// Reconstructed columns whose error exceeds [`theorem_error_bound`] by
    /// more than [`CERTIFICATE_TOL`].
    pub certificate_violations: usize,
    pub dimension_exceeded: bool,
}

impl RunSummary {
    pub fn evaluate(result: &RecoveryResult, l: &DenseMatrix, epsilon: f64) -> Result<Self> {
        if l.nrows() != result.m_tilde.nrows() || l.ncols() != result.m_tilde.ncols() {
            return Err(Error::DimensionMismatch {
                expected: result.m_tilde.ncols(),
                found: l.ncols(),
            });
        }
        let m = l.nrows();
        let column_errors: Vec<f64> = (0..l.ncols())
            .map(|j| (result.m_tilde.column(j) - l.column(j)).norm())
            .collect();
        let certificate_violations = result
            .columns
            .iter()
            .filter(|c| c.mode == ColumnMode::Reconstructed)
            .filter(|c| {
                column_errors[c.col_index]
                    > theorem_error_bound(m, c.d_at_time, c.k_at_time, epsilon, c.theta_tilde)
                        + CERTIFICATE_TOL
            })
            .count();
        let max_col_error = column_errors.iter().cloned().fold(0.0, f64::max);
        let mean_col_error = if column_errors.is_empty() {
            0.0
        } else {
            column_errors.iter().sum::<f64>() / column_errors.len() as f64
        };
        Ok(RunSummary {
            column_errors,
            max_col_error,
            mean_col_error,
            certificate_violations,
            dimension_exceeded: result.dimension_exceeded,
        })
    }

    /// Certificate violations plus one if the dimension bound failed.
    pub fn bound_violations(&self) -> usize {
        self.certificate_violations + usize::from(self.dimension_exceeded)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{CoherenceMode, InstanceParams, NoiseMode, ProblemInstance};
    use approx::assert_abs_diff_eq;

    fn cfg(epsilon: f64, delta: f64, r: usize, mu: f64) -> LrebnConfig {
        LrebnConfig::new(epsilon, delta, r, mu)
    }

    #[test]
    fn initial_budget_examples() {
        // 72·ln(10)² = 381.74
        assert_eq!(initial_budget(&cfg(0.0, 0.09999999, 1, 1.0), 10_000), 382);
        assert_eq!(initial_budget(&cfg(0.0, 0.09999999, 1, 1.0), 100), 100);
    }

    #[test]
    fn initial_budget_formula_at_delta_tenth() {
        let raw = budget_formula(1.0, 1, 0.1, 10_000, 0.0);
        assert_abs_diff_eq!(raw, 381.74, epsilon = 5e-3);
        assert_eq!(clamp_budget(raw, 10_000, true), 382);
    }

    #[test]
    fn updated_budget_examples() {
        let c = cfg(0.0, 0.05, 4, 1.0);
        assert_eq!(updated_budget(&c, 500, Angle::ZERO), initial_budget(&c, 500));
        // 2584.6 + 701.1 → 3286, capped at m
        let raw = budget_formula(1.0, 4, 0.05, 500, 0.2);
        assert_abs_diff_eq!(raw, 2584.6 + 701.1, epsilon = 0.1);
        assert_eq!(clamp_budget(raw, 500, false), 3286);
        assert_eq!(updated_budget(&c, 500, Angle::new(0.2).unwrap()), 500);

        let c = cfg(0.0, 0.05, 2, 1.0);
        assert_eq!(updated_budget(&c, 1_000_000, Angle::new(0.01).unwrap()), 4244);
    }

    #[test]
    fn threshold_example() {
        let c = cfg(0.01, 0.05, 3, 1.0);
        let theta = Angle::new(0.05).unwrap();
        let t = residual_threshold(200, 1000, 3, 0.01, theta);
        assert_abs_diff_eq!(t, 0.12348, epsilon = 1e-5);
        assert!(column_test(0.2, 200, 1000, 3, &c, theta));
        assert!(!column_test(0.1, 200, 1000, 3, &c, theta));
    }

    #[test]
    fn threshold_vanishes_without_noise() {
        let c = cfg(0.0, 0.05, 3, 1.0);
        assert_eq!(residual_threshold(50, 100, 2, 0.0, Angle::ZERO), 0.0);
        assert!(!column_test(0.0, 50, 100, 0, &c, Angle::ZERO));
        assert!(!column_test(0.0, 50, 100, 2, &c, Angle::ZERO));
        assert!(column_test(1e-3, 50, 100, 0, &c, Angle::ZERO));
    }

    #[test]
    fn angle_increment_examples() {
        let c = cfg(0.0, 0.05, 3, 1.0);
        let prev = Angle::ZERO;
        assert_eq!(angle_increment(prev, Angle::new(0.4).unwrap(), &c, 1).unwrap(), prev);

        let c = cfg(0.01, 0.05, 3, 1.0);
        let next = angle_increment(Angle::ZERO, Angle::new(0.5).unwrap(), &c, 1).unwrap();
        assert_abs_diff_eq!(next.radians(), 0.031734, epsilon = 1e-6);

        let next =
            angle_increment(Angle::new(0.46).unwrap(), Angle::new(0.47).unwrap(), &c, 2).unwrap();
        assert_abs_diff_eq!(next.radians(), 0.5722, epsilon = 1e-4);
    }

    #[test]
    fn angle_increment_respects_cap() {
        let mut c = cfg(0.01, 0.05, 3, 1.0);
        let big = angle_increment(Angle::new(0.4).unwrap(), Angle::new(0.41).unwrap(), &c, 1).unwrap();
        assert_abs_diff_eq!(big.radians(), angle_cap(1, 0.01), epsilon = 1e-15);
        c.angle_cap_enabled = false;
        let uncapped =
            angle_increment(Angle::new(0.4).unwrap(), Angle::new(0.41).unwrap(), &c, 1).unwrap();
        assert!(uncapped.radians() > big.radians());
        assert!(uncapped.radians() <= FRAC_PI_2);
    }

    #[test]
    fn angle_increment_rejects_in_span_column() {
        let c = cfg(0.01, 0.05, 3, 1.0);
        let err = angle_increment(Angle::ZERO, Angle::ZERO, &c, 1).unwrap_err();
        assert!(matches!(err, Error::InternalInconsistency(_)));
    }

    #[test]
    fn theorem_bound_examples() {
        assert_eq!(theorem_error_bound(100, 50, 3, 0.0, Angle::ZERO), 0.0);
        let b = theorem_error_bound(400, 400, 2, 0.01, Angle::new(0.05).unwrap());
        assert_abs_diff_eq!(b, 1.3128, epsilon = 1e-4);
    }

    #[test]
    fn theorem_bound_is_monotone() {
        let base = |eps: f64, k: usize, th: f64, d: usize| {
            theorem_error_bound(500, d, k, eps, Angle::new(th).unwrap())
        };
        for &eps in &[0.0, 0.01, 0.1] {
            for &k in &[1, 2, 5] {
                for &th in &[0.0, 0.1, 0.5] {
                    for &d in &[50, 100, 400] {
                        let b = base(eps, k, th, d);
                        assert!(base(eps + 0.01, k, th, d) >= b);
                        assert!(base(eps, k + 1, th, d) >= b);
                        assert!(base(eps, k, th + 0.1, d) >= b);
                        assert!(base(eps, k, th, d + 10) <= b);
                    }
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.0, 0.05, 2, 1.0).validate().is_ok());
        assert!(cfg(0.3, 0.05, 2, 1.0).validate().is_err());
        assert!(cfg(0.0, 0.2, 2, 1.0).validate().is_err());
        assert!(cfg(0.0, 0.1, 2, 1.0).validate().is_err());
        assert!(cfg(0.0, 0.05, 2, 0.5).validate().is_err());
        assert!(cfg(0.0, 0.05, 0, 1.0).validate().is_err());
    }

    fn instance(m: usize, n: usize, r: usize, eps: f64, seed: u64) -> ProblemInstance {
        ProblemInstance::generate(
            &InstanceParams {
                m,
                n,
                r,
                epsilon: eps,
                coherence: CoherenceMode::Incoherent,
                noise: NoiseMode::Sphere,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn noiseless_run_is_exact() {
        let inst = instance(60, 80, 4, 0.0, 3);
        let mu = coherence(&inst.true_basis).unwrap();
        let oracle = ObservationOracle::new(&inst.m);
        let c = cfg(0.0, 0.05, 4, mu).with_seed(3);
        let res = run_lrebn(&oracle, &c).unwrap();
        assert_eq!(res.k_final, 4);
        assert_eq!(res.fully_observed(), 4);
        let summary = RunSummary::evaluate(&res, &inst.l, 0.0).unwrap();
        assert!(summary.max_col_error <= 1e-8, "{}", summary.max_col_error);
        let d0 = initial_budget(&c, 60) as u64;
        assert!(res.observations <= 4 * 60 + 80 * d0);
        assert_eq!(res.observations, oracle.entry_count());
    }

    #[test]
    fn noiseless_run_with_sub_m_budget_is_exact() {
        // large m so the budget stays below m: sampled columns are completed
        let inst = instance(3000, 20, 2, 0.0, 5);
        let oracle = ObservationOracle::new(&inst.m);
        let c = cfg(0.0, 0.09, 2, 1.0).with_seed(5);
        let res = run_lrebn(&oracle, &c).unwrap();
        let d = initial_budget(&c, 3000);
        assert!(d < 3000, "budget {d}");
        assert_eq!(res.k_final, 2);
        let summary = RunSummary::evaluate(&res, &inst.l, 0.0).unwrap();
        assert!(summary.max_col_error <= 1e-8, "{}", summary.max_col_error);
        assert_eq!(res.observations, (2 * 3000 + 18 * d) as u64);
    }

    #[test]
    fn empty_matrix_costs_nothing() {
        let m = DenseMatrix::zeros(7, 0).unwrap();
        let oracle = ObservationOracle::new(&m);
        let res = run_lrebn(&oracle, &cfg(0.0, 0.05, 1, 1.0)).unwrap();
        assert_eq!(res.m_tilde.ncols(), 0);
        assert_eq!(res.observations, 0);
        assert_eq!(res.k_final, 0);
    }

    #[test]
    fn identical_columns_are_observed_once() {
        let m = 40;
        let n = 10;
        let u = DVector::from_fn(m, |i, _| ((i + 1) as f64).sin());
        let u = &u / u.norm();
        let cols: Vec<DVector<f64>> = (0..n).map(|_| u.clone()).collect();
        let mat = DenseMatrix::from_columns(m, &cols).unwrap();
        let oracle = ObservationOracle::new(&mat);
        let c = cfg(0.0, 0.05, 1, 1.0);
        let res = run_lrebn(&oracle, &c).unwrap();
        assert_eq!(res.column_mode(0), ColumnMode::FullyObserved);
        assert!((1..n).all(|j| res.column_mode(j) == ColumnMode::Reconstructed));
        let d = initial_budget(&c, m);
        // the initial sample of column 0 is a subset of its full read
        assert_eq!(res.observations, (m + (n - 1) * d) as u64);
        for j in 0..n {
            assert!((res.m_tilde.column(j) - &u).norm() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_result() {
        let inst = instance(80, 60, 3, 0.02, 8);
        let c = cfg(0.02, 0.05, 3, 2.0).with_seed(11);
        let a = run_lrebn(&ObservationOracle::new(&inst.m), &c).unwrap();
        let b = run_lrebn(&ObservationOracle::new(&inst.m), &c).unwrap();
        assert_eq!(a.m_tilde, b.m_tilde);
        assert_eq!(a.columns, b.columns);
        assert_eq!(a.observations, b.observations);
    }

    #[test]
    fn per_column_redraw_reads_fresh_rows() {
        let inst = instance(3000, 12, 2, 0.0, 2);
        let mut c = cfg(0.0, 0.09, 2, 1.0);
        c.omega_redraw = OmegaRedraw::PerColumn;
        let res = run_lrebn(&ObservationOracle::new(&inst.m), &c).unwrap();
        let tail: Vec<&IndexSet> = res.columns[3..].iter().map(|c| &c.omega).collect();
        assert!(tail.windows(2).any(|w| w[0] != w[1]));
        let summary = RunSummary::evaluate(&res, &inst.l, 0.0).unwrap();
        assert!(summary.max_col_error <= 1e-8);
    }

    #[test]
    fn estimate_mu_mode_tracks_basis_coherence() {
        let inst = instance(100, 40, 3, 0.01, 1);
        let mut c = cfg(0.01, 0.05, 3, 1.0);
        c.estimate_mu = true;
        let res = run_lrebn(&ObservationOracle::new(&inst.m), &c).unwrap();
        assert_eq!(res.budget_trace[0].mu, 1.0);
        for ev in &res.budget_trace[1..] {
            assert!(ev.mu >= 1.0);
        }
    }
}
