//! Executable checks of the inequalities behind the estimator.
//!
//! Deterministic statements (`kcoh`, `noisycoh`, `ind`, `ededler`, `blum`)
//! must hold on every trial up to a numerical tolerance. Probabilistic ones
//! (`conc`, `ks14`, `matcher`) are compared against their failure
//! probability plus three binomial standard errors.
//!
//! Trials run in parallel; trial `t` draws from `RngState::trial(seed, t)`,
//! so every report is reproducible from `(name, params, seed)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formats::{fmt_f64, CsvTable};
use crate::linalg::{
    coherence, orthonormalize, restricted_residual_norm, subspace_subspace_angle, vector_angle,
    vector_subspace_angle, OrthonormalBasis, DEFAULT_RANK_TOL,
};
use crate::lrebn::{budget_formula, clamp_budget, residual_threshold};
use crate::sampling::{gaussian_vector, sample_uniform_subset, unit_vector, RngState};

/// Slack allowed on deterministic inequalities.
pub const DETERMINISTIC_TOL: f64 = 1e-9;

/// Slack allowed on the exact recursion of `ind`.
pub const RECURSION_TOL: f64 = 1e-12;

/// Standard errors of slack on probabilistic checks.
pub const SIGMA_SLACK: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Deterministic,
    Probabilistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// No trial satisfied the statement's preconditions.
    NotApplicable,
    /// The closed-form failure bound is at least one.
    Vacuous,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "N/A",
            Verdict::Vacuous => "VACUOUS",
        };
        f.write_str(s)
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub kind: CheckKind,
    /// Trials on which the statement was evaluated.
    pub trials: u64,
    /// Trials drawn but not evaluated (preconditions unmet, degenerate draws,
    /// or a conditioning event that did not occur).
    pub skipped: u64,
    pub violations: u64,
    /// Smallest slack seen; negative when the statement failed.
    pub worst_margin: f64,
    /// Allowed violation rate: 0 for deterministic checks.
    pub theoretical_bound: f64,
    pub params: Vec<(String, String)>,
    /// Auxiliary counters and values.
    pub extras: Vec<(String, f64)>,
    pub seed: u64,
    pub verdict: Verdict,
}

impl CheckReport {
    pub fn violation_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.violations as f64 / self.trials as f64
        }
    }

    /// Binomial standard error at the theoretical bound.
    pub fn standard_error(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.theoretical_bound.clamp(0.0, 1.0);
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// `{"k":v;...}`: JSON members separated by `;` so the field stays
    /// comma-free inside CSV.
    pub fn params_json(&self) -> String {
        let members: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("\"{k}\":{v}"))
            .collect();
        format!("{{{}}}", members.join(";"))
    }

    fn finish(mut self) -> Self {
        self.verdict = match self.kind {
            CheckKind::Deterministic => {
                if self.trials == 0 {
                    Verdict::NotApplicable
                } else if self.violations == 0 {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
            CheckKind::Probabilistic => {
                if self.trials == 0 {
                    Verdict::NotApplicable
                } else if self.theoretical_bound >= 1.0 {
                    Verdict::Vacuous
                } else if self.violation_rate()
                    <= self.theoretical_bound + SIGMA_SLACK * self.standard_error()
                {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
        };
        self
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "name",
    "trials",
    "violations",
    "violation_rate",
    "theoretical_bound",
    "worst_margin",
    "params_json",
    "seed",
    "verdict",
];

pub fn reports_to_csv(reports: &[CheckReport]) -> Result<CsvTable> {
    let mut table = CsvTable::new(&CSV_HEADER);
    for r in reports {
        table.push(vec![
            r.name.clone(),
            r.trials.to_string(),
            r.violations.to_string(),
            fmt_f64(r.violation_rate()),
            fmt_f64(r.theoretical_bound),
            fmt_f64(r.worst_margin),
            r.params_json(),
            r.seed.to_string(),
            r.verdict.to_string(),
        ])?;
    }
    Ok(table)
}

/// Result of a single trial.
#[derive(Debug, Clone, Default)]
struct Trial {
    skipped: bool,
    margin: f64,
    violated: bool,
    counters: Vec<(&'static str, f64)>,
}

impl Trial {
    fn skip() -> Self {
        Trial {
            skipped: true,
            ..Trial::default()
        }
    }

    fn checked(margin: f64, tol: f64) -> Self {
        Trial {
            skipped: false,
            margin,
            violated: margin < -tol,
            counters: Vec::new(),
        }
    }

    fn count(mut self, key: &'static str, value: f64) -> Self {
        self.counters.push((key, value));
        self
    }
}

struct Builder {
    name: &'static str,
    kind: CheckKind,
    bound: f64,
    seed: u64,
    params: Vec<(String, String)>,
    extras: Vec<(String, f64)>,
}

impl Builder {
    fn new(name: &'static str, kind: CheckKind, seed: u64) -> Self {
        Builder {
            name,
            kind,
            bound: 0.0,
            seed,
            params: Vec::new(),
            extras: Vec::new(),
        }
    }

    fn param(mut self, key: &str, value: impl ParamValue) -> Self {
        self.params.push((key.to_string(), value.render()));
        self
    }

    /// Adds a value already rendered as JSON.
    fn raw_param(mut self, key: &str, json: String) -> Self {
        self.params.push((key.to_string(), json));
        self
    }

    fn bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    fn extra(mut self, key: &str, value: f64) -> Self {
        self.extras.push((key.to_string(), value));
        self
    }

    fn run<F>(self, trials: u64, trial: F) -> CheckReport
    where
        F: Fn(u64, &mut ChaCha8Rng) -> Trial + Sync,
    {
        let seed = self.seed;
        let outcomes: Vec<Trial> = (0..trials)
            .into_par_iter()
            .map(|t| trial(t, &mut RngState::trial(seed, t).rng()))
            .collect();
        self.collect(outcomes)
    }

    fn collect(self, outcomes: Vec<Trial>) -> CheckReport {
        let mut report = CheckReport {
            name: self.name.to_string(),
            kind: self.kind,
            trials: 0,
            skipped: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            theoretical_bound: self.bound,
            params: self.params,
            extras: self.extras,
            seed: self.seed,
            verdict: Verdict::Pass,
        };
        for o in outcomes {
            if o.skipped {
                report.skipped += 1;
            } else {
                report.trials += 1;
                report.violations += u64::from(o.violated);
                report.worst_margin = report.worst_margin.min(o.margin);
            }
            for (k, v) in o.counters {
                match report.extras.iter_mut().find(|(name, _)| name == k) {
                    Some((_, total)) => *total += v,
                    None => report.extras.push((k.to_string(), v)),
                }
            }
        }
        if !report.worst_margin.is_finite() {
            report.worst_margin = 0.0;
        }
        report.finish()
    }
}

trait ParamValue {
    fn render(&self) -> String;
}

impl ParamValue for usize {
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ParamValue for f64 {
    fn render(&self) -> String {
        fmt_f64(*self)
    }
}

impl ParamValue for bool {
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ParamValue for &str {
    fn render(&self) -> String {
        format!("\"{self}\"")
    }
}

fn random_basis(m: usize, k: usize, rng: &mut ChaCha8Rng) -> OrthonormalBasis {
    loop {
        let vectors: Vec<DVector<f64>> = (0..k).map(|_| gaussian_vector(m, rng)).collect();
        let b = orthonormalize(&vectors, DEFAULT_RANK_TOL).expect("nonempty input");
        if b.dim() == k {
            return b;
        }
    }
}

/// Random unit vector orthogonal to `basis`.
fn orthogonal_unit(basis: &OrthonormalBasis, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let g = gaussian_vector(basis.ambient_dim(), rng);
        let w = if basis.is_empty() {
            g
        } else {
            &g - basis.matrix() * basis.matrix().tr_mul(&g)
        };
        let n = w.norm();
        if n > 1e-8 {
            return w / n;
        }
    }
}

/// `k·μ(Uᵏ) ≤ r·μ(U)` for `Uᵏ ⊆ U`. With `spiked` set, `U` contains a
/// standard basis vector and has maximal coherence.
pub fn check_kcoh(m: usize, r: usize, k: usize, spiked: bool, trials: u64, seed: u64) -> Result<CheckReport> {
    if !(1 <= k && k <= r && r <= m) {
        return Err(Error::invalid("kcoh needs 1 <= k <= r <= m"));
    }
    let builder = Builder::new("kcoh", CheckKind::Deterministic, seed)
        .param("m", m)
        .param("r", r)
        .param("k", k)
        .param("spiked", spiked);
    Ok(builder.run(trials, |_, rng| {
        let u = if spiked {
            let j = rng.random_range(0..m);
            let mut vectors = vec![DVector::from_fn(m, |i, _| if i == j { 1.0 } else { 0.0 })];
            vectors.extend((1..r).map(|_| gaussian_vector(m, rng)));
            orthonormalize(&vectors, DEFAULT_RANK_TOL).expect("nonempty input")
        } else {
            random_basis(m, r, rng)
        };
        if u.dim() < r {
            return Trial::skip();
        }
        let mixing = DMatrix::from_fn(r, k, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let combos = u.matrix() * mixing;
        let vectors: Vec<DVector<f64>> = (0..k).map(|j| combos.column(j).into_owned()).collect();
        let uk = orthonormalize(&vectors, DEFAULT_RANK_TOL).expect("nonempty input");
        if uk.dim() < k {
            return Trial::skip();
        }
        let lhs = k as f64 * coherence(&uk).expect("nonempty basis");
        let rhs = r as f64 * coherence(&u).expect("nonempty basis");
        Trial::checked(rhs - lhs, DETERMINISTIC_TOL)
    }))
}

/// `μ(Ũᵏ) ≤ 2μ(Uᵏ) + 2(m/k)·θ(Ũᵏ, Uᵏ)²`, evaluated at the realized angle.
pub fn check_noisycoh(m: usize, k: usize, theta_max: f64, trials: u64, seed: u64) -> Result<CheckReport> {
    if !(1 <= k && k < m) {
        return Err(Error::invalid("noisycoh needs 1 <= k < m"));
    }
    if !(theta_max > 0.0 && theta_max < FRAC_PI_2) {
        return Err(Error::invalid("theta_max must lie in (0, pi/2)"));
    }
    let builder = Builder::new("noisycoh", CheckKind::Deterministic, seed)
        .param("m", m)
        .param("k", k)
        .param("theta_max", theta_max);
    Ok(builder.run(trials, |_, rng| {
        let u = random_basis(m, k, rng);
        let mut scale = theta_max * rng.random::<f64>();
        for _ in 0..60 {
            let vectors: Vec<DVector<f64>> = (0..k)
                .map(|i| {
                    let t = scale * rng.random::<f64>();
                    u.column(i) * t.cos() + orthogonal_unit(&u, rng) * t.sin()
                })
                .collect();
            let perturbed = orthonormalize(&vectors, DEFAULT_RANK_TOL).expect("nonempty input");
            if perturbed.dim() < k {
                scale *= 0.5;
                continue;
            }
            let theta = subspace_subspace_angle(&perturbed, &u).expect("same ambient").radians();
            if theta > theta_max {
                scale *= 0.5;
                continue;
            }
            let lhs = coherence(&perturbed).expect("nonempty basis");
            let rhs = 2.0 * coherence(&u).expect("nonempty basis")
                + 2.0 * (m as f64 / k as f64) * theta * theta;
            return Trial::checked(rhs - lhs, DETERMINISTIC_TOL);
        }
        Trial::skip()
    }))
}

/// `a_k ≤ (3π/2)·√(kε)` for `a₀ = 0`, `a_k = a_{k−1} + c_k·(π/2)·√(ε/k)`.
///
/// Trial 0 is the extremal sequence `c_k = 1`; the rest draw `c_k ∈ [0, 1]`.
pub fn check_ind(k_max: usize, epsilon: f64, trials: u64, seed: u64) -> Result<CheckReport> {
    if k_max == 0 || !(epsilon > 0.0) {
        return Err(Error::invalid("ind needs k_max >= 1 and epsilon > 0"));
    }
    let builder = Builder::new("ind", CheckKind::Deterministic, seed)
        .param("k_max", k_max)
        .param("epsilon", epsilon);
    Ok(builder.run(trials, |t, rng| {
        let coeff = |rng: &mut ChaCha8Rng| if t == 0 { 1.0 } else { rng.random::<f64>() };
        Trial::checked(ind_sequence_margin(k_max, epsilon, || coeff(rng)), RECURSION_TOL)
    }))
}

/// Smallest slack `(3π/2)√(kε) − a_k` over `k ≤ k_max`.
pub fn ind_sequence_margin(k_max: usize, epsilon: f64, mut coeff: impl FnMut() -> f64) -> f64 {
    let mut a = 0.0_f64;
    let mut worst = f64::INFINITY;
    for k in 1..=k_max {
        let kf = k as f64;
        a += coeff() * FRAC_PI_2 * (epsilon / kf).sqrt();
        worst = worst.min(1.5 * PI * (kf * epsilon).sqrt() - a);
    }
    worst
}

/// Conditional on the sampled residual exceeding the threshold built from
/// the true angle `θ(Ũ^{k−1}, U^{k−1})`, the accepted noisy column satisfies
/// `θ(M_{:t}, Ũ^{k−1}) ≥ θ + √(kε)`.
pub fn check_conc(
    m: usize,
    k: usize,
    d: usize,
    epsilon: f64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<CheckReport> {
    if !(1 <= k && k <= m && 1 <= d && d <= m) {
        return Err(Error::invalid("conc needs 1 <= k <= m and 1 <= d <= m"));
    }
    crate::synthetic::check_epsilon(epsilon)?;
    let builder = Builder::new("conc", CheckKind::Probabilistic, seed)
        .param("m", m)
        .param("k", k)
        .param("d", d)
        .param("epsilon", epsilon)
        .param("delta", delta)
        .bound(2.0 * delta);
    Ok(builder.run(trials, |_, rng| {
        let clean = random_basis(m, k - 1, rng);
        let (noisy, theta) = if k == 1 {
            (OrthonormalBasis::empty(m), 0.0)
        } else {
            let vectors: Vec<DVector<f64>> = (0..k - 1)
                .map(|i| clean.column(i) + unit_vector(m, rng) * epsilon)
                .collect();
            let noisy = orthonormalize(&vectors, DEFAULT_RANK_TOL).expect("nonempty input");
            if noisy.dim() < k - 1 {
                return Trial::skip();
            }
            let theta = subspace_subspace_angle(&noisy, &clean).expect("same ambient").radians();
            (noisy, theta)
        };
        let phi = FRAC_PI_2 * rng.random::<f64>();
        let across = orthogonal_unit(&noisy, rng);
        let l = if noisy.is_empty() {
            across
        } else {
            let g = noisy.matrix() * gaussian_vector(k - 1, rng);
            let along = &g / g.norm();
            along * phi.cos() + across * phi.sin()
        };
        let column = &l + unit_vector(m, rng) * epsilon;
        let omega = sample_uniform_subset(m, d, rng).expect("d validated");
        let y_omega = omega.gather(&column).expect("same ambient");
        let residual = restricted_residual_norm(&noisy, &omega, &y_omega)
            .expect("valid inputs")
            .norm;
        let threshold = residual_threshold(
            d,
            m,
            k,
            epsilon,
            crate::linalg::Angle::clamped(theta),
        );
        if residual <= threshold {
            return Trial::skip().count("not_fired", 1.0);
        }
        let angle = vector_subspace_angle(&column, &noisy).expect("nonzero").radians();
        let margin = angle - (theta + (k as f64 * epsilon).sqrt());
        Trial::checked(margin, DETERMINISTIC_TOL)
    }))
}

/// Parameters derived per draw for the row-sampling norm bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ks14Terms {
    pub mu_basis: f64,
    pub mu_residual: f64,
    pub d_min: f64,
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
}

/// `α`, `β`, `ζ̄` and the minimal admissible `d` for a basis of dimension
/// `k` with coherence `mu_basis` and a residual of coherence `mu_residual`.
pub fn ks14_terms(k: usize, d: f64, delta: f64, mu_basis: f64, mu_residual: f64) -> Ks14Terms {
    let log_inv = (1.0 / delta).ln();
    let kf = k as f64;
    let d_min = (8.0 / 3.0 * kf * mu_basis * (2.0 * kf / delta).ln()).max(4.0 * mu_residual * log_inv);
    let alpha = (2.0 * mu_residual / d * log_inv).sqrt() + 2.0 * mu_residual / (3.0 * d) * log_inv;
    let beta = (1.0 + 2.0 * log_inv).powi(2);
    let zeta = (8.0 * kf * mu_basis / (3.0 * d) * (2.0 * kf / delta).ln()).sqrt();
    Ks14Terms {
        mu_basis,
        mu_residual,
        d_min,
        alpha,
        beta,
        zeta,
    }
}

/// Row-sampling bound on squared residual norms:
/// `(d/m)(1−α)‖r‖² − (kμβ/(1−ζ̄))‖r‖²/m ≤ ‖r_Ω‖² ≤ (1+α)(d/m)‖r‖²`, with
/// `r = y − P y` and `r_Ω` the residual of `y_Ω` against `Ũ_Ω`.
///
/// Violations counted are of the upper bound. The lower bound and both
/// bounds in unsquared form are tallied in `extras`. With `d = None` each
/// draw uses its own precondition minimum. Draws whose `d` misses the
/// precondition, or whose `α ≥ 1/2` or `ζ̄ ≥ 1/3`, are skipped; if every
/// draw is skipped the verdict is N/A.
pub fn check_ks14(m: usize, k: usize, d: Option<usize>, delta: f64, trials: u64, seed: u64) -> Result<CheckReport> {
    if !(1 <= k && k < m) {
        return Err(Error::invalid("ks14 needs 1 <= k < m"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta must lie in (0, 1)"));
    }
    let builder = Builder::new("ks14", CheckKind::Probabilistic, seed)
        .param("m", m)
        .param("k", k)
        .raw_param("d", d.map_or_else(|| "\"precondition-min\"".to_string(), |d| d.to_string()))
        .param("delta", delta)
        .param("form", "squared")
        .bound(2.0 * delta)
        .extra("lower_violations", 0.0)
        .extra("printed_upper_violations", 0.0)
        .extra("printed_lower_violations", 0.0);
    Ok(builder.run(trials, |_, rng| {
        let basis = random_basis(m, k, rng);
        let y = gaussian_vector(m, rng);
        let r = &y - basis.matrix() * basis.matrix().tr_mul(&y);
        let r_sq = r.norm_squared();
        if r_sq == 0.0 {
            return Trial::skip();
        }
        let mu_basis = coherence(&basis).expect("nonempty basis");
        let mu_residual = m as f64 * r.iter().map(|x| x * x).fold(0.0, f64::max) / r_sq;
        let probe = ks14_terms(k, 1.0, delta, mu_basis, mu_residual);
        let d_used = match d {
            Some(d) => d,
            None => probe.d_min.ceil() as usize,
        };
        if d_used == 0 || d_used > m || (d_used as f64) < probe.d_min {
            return Trial::skip().count("precondition_unmet", 1.0);
        }
        let terms = ks14_terms(k, d_used as f64, delta, mu_basis, mu_residual);
        if terms.alpha >= 0.5 || terms.zeta >= 1.0 / 3.0 {
            return Trial::skip().count("not_applicable", 1.0);
        }
        let omega = sample_uniform_subset(m, d_used, rng).expect("d validated");
        let y_omega = omega.gather(&y).expect("same ambient");
        let r_omega = restricted_residual_norm(&basis, &omega, &y_omega)
            .expect("valid inputs")
            .norm;
        let ratio = d_used as f64 / m as f64;
        let penalty = k as f64 * mu_basis * terms.beta / (1.0 - terms.zeta) / m as f64;

        let upper = (1.0 + terms.alpha) * ratio * r_sq;
        let lower = ratio * (1.0 - terms.alpha) * r_sq - penalty * r_sq;
        let r_omega_sq = r_omega * r_omega;
        let s = r_sq.sqrt();
        let printed_upper = (1.0 + terms.alpha) * ratio * s;
        let printed_lower = (ratio * (1.0 - terms.alpha) - penalty) * s;

        Trial::checked((upper - r_omega_sq) / r_sq, DETERMINISTIC_TOL)
            .count("lower_violations", f64::from(u8::from(r_omega_sq < lower - DETERMINISTIC_TOL * r_sq)))
            .count("printed_upper_violations", f64::from(u8::from(r_omega > printed_upper + DETERMINISTIC_TOL * s)))
            .count("printed_lower_violations", f64::from(u8::from(r_omega < printed_lower - DETERMINISTIC_TOL * s)))
    }))
}

/// `r·(e^{−ε}/(1−ε)^{1−ε})^{μ_r/L}`.
pub fn chernoff_lower_tail(r: usize, epsilon: f64, mu_r: f64, l_bound: f64) -> f64 {
    let base = (-epsilon).exp() / (1.0 - epsilon).powf(1.0 - epsilon);
    r as f64 * base.powf(mu_r / l_bound)
}

/// Matrix Chernoff lower tail for `Y = Σ_{s<d} u_{i_s} u_{i_s}ᵀ`, where the
/// `u_i` are rows of a fixed incoherent `n_dim × r` orthonormal basis and
/// the `i_s` are i.i.d. uniform. `E[Y] = (d/n_dim)·I`, so
/// `μ_r = d/n_dim`; `L` defaults to the largest squared row norm.
pub fn check_matcher(
    n_dim: usize,
    r: usize,
    d: usize,
    l_bound: Option<f64>,
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> Result<CheckReport> {
    if !(1 <= r && r <= n_dim && d >= 1) {
        return Err(Error::invalid("matcher needs 1 <= r <= n_dim and d >= 1"));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::invalid("epsilon must lie in [0, 1)"));
    }
    let basis = random_basis(n_dim, r, &mut RngState::new(seed, 0).rng());
    let max_row = (0..n_dim).map(|i| basis.row_norm_sq(i)).fold(0.0, f64::max);
    let l = l_bound.unwrap_or(max_row);
    if l < max_row {
        return Err(Error::invalid(format!(
            "L = {l} is below the largest summand eigenvalue {max_row}"
        )));
    }
    let mu_r = d as f64 / n_dim as f64;
    let rows: Vec<DVector<f64>> = (0..n_dim)
        .map(|i| basis.matrix().row(i).transpose())
        .collect();
    let builder = Builder::new("matcher", CheckKind::Probabilistic, seed)
        .param("n_dim", n_dim)
        .param("r", r)
        .param("d", d)
        .param("L", l)
        .param("epsilon", epsilon);
    let report = matcher_experiment(builder, r, epsilon, mu_r, l, trials, |rng| {
        let mut y = DMatrix::zeros(r, r);
        for _ in 0..d {
            let u = &rows[rng.random_range(0..n_dim)];
            y.ger(1.0, u, u, 1.0);
        }
        y
    });
    Ok(report)
}

fn matcher_experiment<F>(
    builder: Builder,
    r: usize,
    epsilon: f64,
    mu_r: f64,
    l: f64,
    trials: u64,
    draw: F,
) -> CheckReport
where
    F: Fn(&mut ChaCha8Rng) -> DMatrix<f64> + Sync,
{
    let tail = chernoff_lower_tail(r, epsilon, mu_r, l);
    let exp_form = r as f64 * (-mu_r * epsilon * epsilon / (2.0 * l)).exp();
    let builder = builder
        .bound(tail.min(1.0))
        .extra("closed_form_tail", tail)
        .extra("exp_form_tail", exp_form)
        .extra("mu_r", mu_r);
    builder.run(trials, |_, rng| {
        let y = draw(rng);
        let eig = SymmetricEigen::new(y);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
        let lambda_r = ev[r - 1];
        // failure is λ_r < (1−ε)μ_r; margin normalized by μ_r
        let margin = (lambda_r - (1.0 - epsilon) * mu_r) / mu_r;
        Trial {
            skipped: false,
            margin,
            violated: margin < 0.0,
            counters: Vec::new(),
        }
    })
}

/// Grid for [`check_ededler`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdedlerGrid {
    pub m_values: Vec<usize>,
    pub r_values: Vec<usize>,
    pub delta_values: Vec<f64>,
    /// Also probe `δ = exp(−(m−1)/9)` for each `m`, where the side condition
    /// `9·ln(1/δ) < m` is tight.
    pub include_boundary: bool,
}

impl Default for EdedlerGrid {
    fn default() -> Self {
        EdedlerGrid {
            m_values: vec![50, 100, 200, 500, 1000],
            r_values: vec![1, 2, 4, 8],
            delta_values: vec![0.01, 0.02, 0.05, 0.08],
            include_boundary: true,
        }
    }
}

/// `d/(4m) > (18r/m)·μ·ln²(1/δ) + 18·θ̃²·ln²(1/δ)` with `d` the uncapped
/// budget at `(μ, r, δ, m, θ̃)`.
///
/// Evaluated at `θ̃ ∈ {0, π/2}` plus `thetas_per_point` uniform draws, for
/// `μ ∈ {1, m/r}` at each grid point meeting `9·ln(1/δ) < m` and `δ < 0.1`.
/// The intermediate step `2m·ln(r/δ) > 18·ln²(1/δ)` is tallied separately
/// as `reduced_step_violations`.
pub fn check_ededler(grid: &EdedlerGrid, thetas_per_point: usize, seed: u64) -> Result<CheckReport> {
    let mut points = Vec::new();
    for &m in &grid.m_values {
        let mut deltas = grid.delta_values.clone();
        if grid.include_boundary {
            deltas.push((-((m as f64) - 1.0) / 9.0).exp());
        }
        for &r in &grid.r_values {
            if r == 0 || r > m {
                continue;
            }
            for &delta in &deltas {
                if !(delta > 0.0 && delta < 0.1) || 9.0 * (1.0 / delta).ln() >= m as f64 {
                    continue;
                }
                for mu in [1.0, m as f64 / r as f64] {
                    points.push((m, r, delta, mu));
                }
            }
        }
    }
    if points.is_empty() {
        return Err(Error::invalid("ededler grid has no admissible point"));
    }
    let per_point = thetas_per_point.max(2) as u64;
    let reduced_violations = points
        .iter()
        .filter(|&&(m, r, delta, _)| {
            let log_inv = (1.0 / delta).ln();
            2.0 * m as f64 * (r as f64 / delta).ln() <= 18.0 * log_inv * log_inv
        })
        .count();
    let builder = Builder::new("ededler", CheckKind::Deterministic, seed)
        .param("grid_points", points.len())
        .param("thetas_per_point", per_point as usize)
        .extra("reduced_step_violations", reduced_violations as f64);
    let total = points.len() as u64 * per_point;
    Ok(builder.run(total, |t, rng| {
        let (m, r, delta, mu) = points[(t / per_point) as usize];
        let theta = match t % per_point {
            0 => 0.0,
            1 => FRAC_PI_2,
            _ => FRAC_PI_2 * rng.random::<f64>(),
        };
        let d = clamp_budget(budget_formula(mu, r, delta, m, theta), m, false) as f64;
        let log_sq = (1.0 / delta).ln().powi(2);
        let lhs = d / (4.0 * m as f64);
        let rhs = 18.0 * r as f64 / m as f64 * mu * log_sq + 18.0 * theta * theta * log_sq;
        Trial::checked(lhs - rhs, DETERMINISTIC_TOL)
    }))
}

/// `θ(V, Ṽ) ≤ (π/2)·θ(b̃, b)/θ(b̃, U)` for `U = span{a_1..a_{k−1}}`,
/// `V = U + span{b}`, `Ṽ = U + span{b̃}`.
pub fn check_blum(m: usize, k: usize, trials: u64, seed: u64) -> Result<CheckReport> {
    if !(2 <= k && k <= m) {
        return Err(Error::invalid("blum needs 2 <= k <= m"));
    }
    let builder = Builder::new("blum", CheckKind::Deterministic, seed)
        .param("m", m)
        .param("k", k);
    Ok(builder.run(trials, |_, rng| {
        let a: Vec<DVector<f64>> = (0..k - 1).map(|_| gaussian_vector(m, rng)).collect();
        let b = gaussian_vector(m, rng);
        // perturbation scale log-uniform over [1e-3, 1]
        let scale = 10f64.powf(-3.0 * rng.random::<f64>());
        let b_tilde = &b + gaussian_vector(m, rng) * (scale * b.norm() / (m as f64).sqrt());
        blum_trial(&a, &b, &b_tilde)
    }))
}

fn blum_trial(a: &[DVector<f64>], b: &DVector<f64>, b_tilde: &DVector<f64>) -> Trial {
    let k = a.len() + 1;
    let u = orthonormalize(a, DEFAULT_RANK_TOL).expect("nonempty input");
    let mut with_b = a.to_vec();
    with_b.push(b.clone());
    let mut with_b_tilde = a.to_vec();
    with_b_tilde.push(b_tilde.clone());
    let v = orthonormalize(&with_b, DEFAULT_RANK_TOL).expect("nonempty input");
    let v_tilde = orthonormalize(&with_b_tilde, DEFAULT_RANK_TOL).expect("nonempty input");
    if u.dim() != k - 1 || v.dim() != k || v_tilde.dim() != k {
        return Trial::skip().count("degenerate", 1.0);
    }
    let to_u = vector_subspace_angle(b_tilde, &u).expect("nonzero").radians();
    if to_u < 1e-12 {
        return Trial::skip().count("degenerate", 1.0);
    }
    let perturbation = vector_angle(b_tilde, b).expect("nonzero").radians();
    let lhs = subspace_subspace_angle(&v, &v_tilde).expect("same ambient").radians();
    Trial::checked(FRAC_PI_2 * perturbation / to_u - lhs, DETERMINISTIC_TOL)
}

/// Names accepted by [`run_named`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckName {
    Kcoh,
    Noisycoh,
    Ind,
    Conc,
    Ks14,
    Matcher,
    Ededler,
    Blum,
}

impl CheckName {
    pub const ALL: [CheckName; 8] = [
        CheckName::Kcoh,
        CheckName::Noisycoh,
        CheckName::Ind,
        CheckName::Conc,
        CheckName::Ks14,
        CheckName::Matcher,
        CheckName::Ededler,
        CheckName::Blum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Kcoh => "kcoh",
            CheckName::Noisycoh => "noisycoh",
            CheckName::Ind => "ind",
            CheckName::Conc => "conc",
            CheckName::Ks14 => "ks14",
            CheckName::Matcher => "matcher",
            CheckName::Ededler => "ededler",
            CheckName::Blum => "blum",
        }
    }

    /// Parses a comma-separated list; `all` expands to every check.
    pub fn parse_list(names: &[String]) -> Result<Vec<CheckName>> {
        let mut out = Vec::new();
        for name in names {
            if name == "all" {
                for c in CheckName::ALL {
                    if !out.contains(&c) {
                        out.push(c);
                    }
                }
                continue;
            }
            let c: CheckName = name.parse()?;
            if !out.contains(&c) {
                out.push(c);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownCheck(s.to_string()))
    }
}

/// Runs a check with its default parameters.
pub fn run_named(name: CheckName, trials: u64, seed: u64) -> Result<CheckReport> {
    match name {
        CheckName::Kcoh => check_kcoh(20, 5, 2, false, trials, seed),
        CheckName::Noisycoh => check_noisycoh(30, 3, 0.3, trials, seed),
        CheckName::Ind => check_ind(10_000, 0.01, trials, seed),
        CheckName::Conc => {
            let (m, k, eps, delta) = (200, 3, 0.01, 0.05);
            let d = clamp_budget(budget_formula(1.0, k, delta, m, 0.0), m, true);
            check_conc(m, k, d, eps, delta, trials, seed)
        }
        CheckName::Ks14 => check_ks14(2000, 2, Some(1800), 0.05, trials, seed),
        CheckName::Matcher => check_matcher(50, 5, 30, None, 0.5, trials, seed),
        CheckName::Ededler => {
            let grid = EdedlerGrid::default();
            let points = ededler_point_count(&grid);
            let per_point = (trials as usize).div_ceil(points.max(1)).max(2);
            check_ededler(&grid, per_point, seed)
        }
        CheckName::Blum => check_blum(20, 3, trials, seed),
    }
}

fn ededler_point_count(grid: &EdedlerGrid) -> usize {
    check_ededler(grid, 2, 0).map_or(0, |r| (r.trials + r.skipped) as usize / 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kcoh_equality_when_k_equals_r() {
        let rep = check_kcoh(12, 3, 3, false, 50, 1).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.worst_margin.abs() < 1e-9, "{}", rep.worst_margin);
    }

    #[test]
    fn kcoh_holds_on_random_and_spiked_spaces() {
        let rep = check_kcoh(20, 5, 2, false, 2000, 2).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.verdict, Verdict::Pass);
        let rep = check_kcoh(20, 5, 2, true, 2000, 2).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.worst_margin >= 0.0);
    }

    #[test]
    fn noisycoh_rank_one_hand_example() {
        // e1 rotated by 0.2 toward e2 in R^10
        let m = 10;
        let mut x = DVector::zeros(m);
        x[0] = 0.2_f64.cos();
        x[1] = 0.2_f64.sin();
        let tilde = orthonormalize(&[x], DEFAULT_RANK_TOL).unwrap();
        let mut e1 = DVector::zeros(m);
        e1[0] = 1.0;
        let clean = orthonormalize(&[e1], DEFAULT_RANK_TOL).unwrap();
        let theta = subspace_subspace_angle(&tilde, &clean).unwrap().radians();
        assert_abs_diff_eq!(theta, 0.2, epsilon = 1e-14);
        let lhs = coherence(&tilde).unwrap();
        assert_abs_diff_eq!(lhs, 10.0 * 0.2_f64.cos().powi(2), epsilon = 1e-12);
        let rhs = 2.0 * coherence(&clean).unwrap() + 2.0 * 10.0 * theta * theta;
        assert_abs_diff_eq!(rhs, 20.8, epsilon = 1e-12);
        assert!(lhs <= rhs);
    }

    #[test]
    fn noisycoh_holds() {
        let rep = check_noisycoh(30, 3, 0.3, 2000, 4).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.trials > 1900);
    }

    #[test]
    fn ind_sequences() {
        let eps: f64 = 0.01;
        // k = 1 with c = 1: a_1 = (π/2)√ε against (3π/2)√ε
        assert_abs_diff_eq!(ind_sequence_margin(1, eps, || 1.0), PI * eps.sqrt(), epsilon = 1e-15);
        assert!(ind_sequence_margin(10, eps, || 0.0) > 0.0);
        let rep = check_ind(10_000, eps, 4, 3).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn conc_rarely_fails() {
        let rep = check_conc(200, 3, 200, 0.01, 0.05, 500, 5).unwrap();
        assert!(rep.trials > 100);
        assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
    }

    #[test]
    fn conc_with_partial_sampling() {
        let rep = check_conc(400, 2, 200, 0.01, 0.05, 500, 6).unwrap();
        assert!(rep.trials > 100);
        assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
    }

    #[test]
    fn ks14_full_sampling_is_tight() {
        let rep = check_ks14(300, 2, Some(300), 0.05, 50, 7).unwrap();
        // with d = m the restricted and full residuals coincide
        assert_eq!(rep.violations, 0);
        if rep.trials > 0 {
            assert!(rep.worst_margin >= 0.0);
        }
    }

    #[test]
    fn ks14_precondition_minimum_is_not_applicable() {
        // α at d = 4μ ln(1/δ) equals √(1/2) + 1/6 > 1/2
        let rep = check_ks14(500, 4, None, 0.05, 200, 8).unwrap();
        assert_eq!(rep.trials, 0);
        assert_eq!(rep.verdict, Verdict::NotApplicable);
    }

    #[test]
    fn ks14_terms_formulae() {
        let t = ks14_terms(2, 100.0, 0.05, 2.0, 3.0);
        let l = 20.0_f64.ln();
        assert_abs_diff_eq!(t.alpha, (6.0 * l / 100.0).sqrt() + 6.0 * l / 300.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.beta, (1.0 + 2.0 * l).powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(t.zeta, (32.0 / 300.0 * 80.0_f64.ln()).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(t.d_min, (16.0 / 3.0 * 2.0 * 80.0_f64.ln()).max(12.0 * l), epsilon = 1e-12);
    }

    #[test]
    fn matcher_deterministic_summands_never_fail() {
        let builder = Builder::new("matcher", CheckKind::Probabilistic, 0);
        let rep = matcher_experiment(builder, 3, 0.2, 2.0, 1.0, 100, |_| DMatrix::identity(3, 3) * 2.0);
        assert_eq!(rep.violations, 0);
        assert_abs_diff_eq!(rep.worst_margin, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn matcher_zero_epsilon_is_vacuous() {
        assert_eq!(chernoff_lower_tail(4, 0.0, 3.0, 1.0), 4.0);
        let rep = check_matcher(50, 5, 30, None, 0.0, 100, 1).unwrap();
        assert_eq!(rep.verdict, Verdict::Vacuous);
    }

    #[test]
    fn matcher_tail_within_bound() {
        let rep = check_matcher(200, 2, 150, None, 0.5, 2000, 9).unwrap();
        assert!(rep.theoretical_bound < 1.0, "{rep:?}");
        assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
    }

    #[test]
    fn matcher_rejects_small_l() {
        assert!(check_matcher(50, 5, 30, Some(1e-6), 0.5, 10, 1).is_err());
    }

    #[test]
    fn ededler_reduced_step_holds_on_grid() {
        let rep = check_ededler(&EdedlerGrid::default(), 4, 1).unwrap();
        assert_eq!(rep.extra("reduced_step_violations"), Some(0.0));
    }

    #[test]
    fn ededler_holds_at_zero_angle() {
        // θ̃ = 0 makes the two sides differ only by the ceiling
        let grid = EdedlerGrid::default();
        let m = 100;
        let (r, delta, mu) = (4, 0.05, 1.0);
        let d = clamp_budget(budget_formula(mu, r, delta, m, 0.0), m, false) as f64;
        let log_sq = (1.0_f64 / delta).ln().powi(2);
        assert!(d / (4.0 * m as f64) >= 18.0 * r as f64 / m as f64 * mu * log_sq);
        assert!(!grid.m_values.is_empty());
    }

    #[test]
    fn ededler_fails_for_positive_angles_as_stated() {
        // d/(4m) = 7.25 while the right side is 21.0 at m=100, r=4, δ=0.05, θ̃=0.3
        let (m, r, delta, theta) = (100usize, 4usize, 0.05, 0.3);
        let d = clamp_budget(budget_formula(1.0, r, delta, m, theta), m, false) as f64;
        let log_sq = (1.0_f64 / delta).ln().powi(2);
        let lhs = d / (4.0 * m as f64);
        let rhs = 18.0 * r as f64 / m as f64 * log_sq + 18.0 * theta * theta * log_sq;
        assert_abs_diff_eq!(lhs, 7.2525, epsilon = 1e-4);
        assert!(lhs < rhs);
    }

    #[test]
    fn blum_hand_construction() {
        let mut e1 = DVector::zeros(3);
        e1[0] = 1.0;
        let mut b = DVector::zeros(3);
        b[1] = 1.0;
        let mut bt = DVector::zeros(3);
        bt[1] = 0.1_f64.cos();
        bt[2] = 0.1_f64.sin();
        let t = blum_trial(&[e1.clone()], &b, &bt);
        assert!(!t.skipped);
        // bound = (π/2)·0.1/(π/2) = 0.1, realized angle 0.1
        assert_abs_diff_eq!(t.margin, 0.0, epsilon = 1e-12);
        let same = blum_trial(&[e1], &b, &b);
        assert!(same.margin >= 0.0);
    }

    #[test]
    fn blum_holds() {
        let rep = check_blum(20, 3, 2000, 10).unwrap();
        assert_eq!(rep.violations, 0, "{rep:?}");
    }

    #[test]
    fn reports_are_reproducible() {
        let a = run_named(CheckName::Noisycoh, 200, 42).unwrap();
        let b = run_named(CheckName::Noisycoh, 200, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn names_parse() {
        let all = CheckName::parse_list(&["all".to_string()]).unwrap();
        assert_eq!(all.len(), 8);
        assert!(matches!("bogus".parse::<CheckName>(), Err(Error::UnknownCheck(_))));
    }

    #[test]
    fn csv_has_no_embedded_commas() {
        let rep = run_named(CheckName::Kcoh, 10, 1).unwrap();
        let csv = reports_to_csv(&[rep]).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1].split(',').count(), CSV_HEADER.len());
    }
}
