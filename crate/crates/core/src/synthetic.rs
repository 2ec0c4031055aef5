//! Synthetic problem instances `M = L + ζ` and the observation oracle.
//!
//! `L` has rank `r` and unit-norm columns; every noise column satisfies
//! `‖ζ_{:i}‖₂ ≤ ε`. The estimator never touches `M` directly: it reads
//! entries through an [`ObservationOracle`], which counts each distinct
//! entry once.

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, DenseMatrix, IndexSet, OrthonormalBasis, DEFAULT_RANK_TOL};
use crate::sampling::{gaussian_vector, streams, unit_vector, RngState};

/// Noise levels at or above this are outside the model.
pub const EPSILON_LIMIT: f64 = 0.25;

/// Minimum singular value required of the leading `r × r` coefficient block.
pub const LEADING_BLOCK_MIN_SIGMA: f64 = 0.1;

/// How the column space of `L` is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoherenceMode {
    /// Orthonormalized Gaussian directions.
    Incoherent,
    /// First direction blended toward `e_index` with the given weight in
    /// `[0, 1]`, which raises the coherence of the column space.
    Spiked { index: usize, weight: f64 },
}

impl fmt::Display for CoherenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoherenceMode::Incoherent => write!(f, "incoherent"),
            CoherenceMode::Spiked { index, weight } => write!(f, "spiked:{index}:{weight}"),
        }
    }
}

impl FromStr for CoherenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "incoherent" {
            return Ok(CoherenceMode::Incoherent);
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 && parts[0] == "spiked" {
            let index = parts[1]
                .parse()
                .map_err(|_| Error::invalid(format!("bad spike index in `{s}`")))?;
            let weight = parts[2]
                .parse()
                .map_err(|_| Error::invalid(format!("bad spike weight in `{s}`")))?;
            return Ok(CoherenceMode::Spiked { index, weight });
        }
        Err(Error::invalid(format!(
            "coherence mode must be `incoherent` or `spiked:<index>:<weight>`, got `{s}`"
        )))
    }
}

/// Distribution of each noise column. Neither is prescribed by the model,
/// which only bounds the norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Uniform on the radius-ε sphere: every column at the bound.
    Sphere,
    /// Uniform direction with radius uniform in `[0, ε]`.
    ScaledGaussian,
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseMode::Sphere => write!(f, "sphere"),
            NoiseMode::ScaledGaussian => write!(f, "scaled-gaussian"),
        }
    }
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(NoiseMode::Sphere),
            "scaled-gaussian" => Ok(NoiseMode::ScaledGaussian),
            other => Err(Error::invalid(format!(
                "noise mode must be `sphere` or `scaled-gaussian`, got `{other}`"
            ))),
        }
    }
}

/// A rank-`r` matrix with unit-norm columns and an orthonormal basis of its
/// column space.
#[derive(Debug, Clone)]
pub struct LowRank {
    pub l: DenseMatrix,
    pub basis: OrthonormalBasis,
}

/// Ground truth plus the noisy matrix handed to the oracle.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub l: DenseMatrix,
    pub zeta: DenseMatrix,
    pub m: DenseMatrix,
    pub true_basis: OrthonormalBasis,
    pub epsilon: f64,
    pub r: usize,
}

/// Parameters for [`ProblemInstance::generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceParams {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub epsilon: f64,
    pub coherence: CoherenceMode,
    pub noise: NoiseMode,
}

impl InstanceParams {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if self.r == 0 || self.r > self.m.min(self.n) {
            return Err(Error::invalid(format!(
                "r must satisfy 1 <= r <= min(m, n) = {}",
                self.m.min(self.n)
            )));
        }
        check_epsilon(self.epsilon)?;
        if let CoherenceMode::Spiked { index, weight } = self.coherence {
            if index >= self.m {
                return Err(Error::invalid("spike index must be < m"));
            }
            if !(0.0..=1.0).contains(&weight) {
                return Err(Error::invalid("spike weight must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

pub fn check_epsilon(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::invalid("epsilon must be >= 0"));
    }
    if epsilon >= EPSILON_LIMIT {
        return Err(Error::invalid(
            "epsilon must be < 0.25 (the bounded-noise model requires epsilon < 1/4)",
        ));
    }
    Ok(())
}

impl ProblemInstance {
    /// Draws `L` from stream [`streams::GENERATE`] and `ζ` from
    /// [`streams::NOISE`] of `seed`.
    pub fn generate(params: &InstanceParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut gen_rng = RngState::new(seed, streams::GENERATE).rng();
        let low_rank = generate_low_rank(params.m, params.n, params.r, params.coherence, &mut gen_rng)?;
        let mut noise_rng = RngState::new(seed, streams::NOISE).rng();
        add_bounded_noise(low_rank, params.epsilon, params.noise, &mut noise_rng)
    }

    pub fn nrows(&self) -> usize {
        self.m.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.m.ncols()
    }
}

/// Draws `L = B·C` with `B` an `m × r` orthonormal basis and the columns of
/// `C` scaled so every column of `L` has unit norm.
///
/// The leading `r × r` block of `C` is redrawn until its smallest singular
/// value is at least [`LEADING_BLOCK_MIN_SIGMA`], so the first `r` columns
/// already span the column space.
pub fn generate_low_rank<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    r: usize,
    mode: CoherenceMode,
    rng: &mut R,
) -> Result<LowRank> {
    if r == 0 || r > m.min(n) {
        return Err(Error::invalid(format!(
            "r must satisfy 1 <= r <= min(m, n) = {}",
            m.min(n)
        )));
    }
    let basis = draw_basis(m, r, mode, rng)?;

    let mut coeffs = DMatrix::zeros(r, n);
    loop {
        let block = DMatrix::from_fn(r, r, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let sigma_min = block
            .singular_values()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if sigma_min >= LEADING_BLOCK_MIN_SIGMA {
            coeffs.view_mut((0, 0), (r, r)).copy_from(&block);
            break;
        }
    }
    for j in r..n {
        loop {
            let c = gaussian_vector(r, rng);
            if c.norm() > 1e-12 {
                coeffs.set_column(j, &c);
                break;
            }
        }
    }

    let mut l = basis.matrix() * &coeffs;
    for j in 0..n {
        let norm = l.column(j).norm();
        if norm == 0.0 {
            return Err(Error::InternalInconsistency(format!(
                "generated column {j} is zero"
            )));
        }
        l.column_mut(j).unscale_mut(norm);
    }
    Ok(LowRank {
        l: DenseMatrix::new(l)?,
        basis,
    })
}

fn draw_basis<R: Rng + ?Sized>(
    m: usize,
    r: usize,
    mode: CoherenceMode,
    rng: &mut R,
) -> Result<OrthonormalBasis> {
    loop {
        let mut vectors: Vec<DVector<f64>> = (0..r).map(|_| gaussian_vector(m, rng)).collect();
        if let CoherenceMode::Spiked { index, weight } = mode {
            if index >= m {
                return Err(Error::invalid("spike index must be < m"));
            }
            let mut spike = unit_vector(m, rng) * (1.0 - weight);
            spike[index] += weight;
            vectors[0] = spike;
        }
        let basis = orthonormalize(&vectors, DEFAULT_RANK_TOL)?;
        if basis.dim() == r {
            return Ok(basis);
        }
    }
}

/// Adds per-column noise of norm at most `epsilon` to `L`.
pub fn add_bounded_noise<R: Rng + ?Sized>(
    low_rank: LowRank,
    epsilon: f64,
    mode: NoiseMode,
    rng: &mut R,
) -> Result<ProblemInstance> {
    check_epsilon(epsilon)?;
    let (m, n) = (low_rank.l.nrows(), low_rank.l.ncols());
    let mut zeta = DMatrix::zeros(m, n);
    if epsilon > 0.0 {
        for j in 0..n {
            let radius = match mode {
                NoiseMode::Sphere => epsilon,
                NoiseMode::ScaledGaussian => rng.random_range(0.0..=epsilon),
            };
            zeta.set_column(j, &(unit_vector(m, rng) * radius));
        }
    }
    let noisy = low_rank.l.as_matrix() + &zeta;
    Ok(ProblemInstance {
        r: low_rank.basis.dim(),
        l: low_rank.l,
        zeta: DenseMatrix::new(zeta)?,
        m: DenseMatrix::new(noisy)?,
        true_basis: low_rank.basis,
        epsilon,
    })
}

#[derive(Debug)]
struct RevealState {
    revealed: Vec<bool>,
    revealed_per_column: Vec<usize>,
    entry_count: u64,
}

/// Gatekeeper over a hidden matrix that counts every distinct entry revealed.
///
/// Methods take `&self`; counter updates are serialized behind a mutex so
/// concurrent readers never lose counts.
#[derive(Debug)]
pub struct ObservationOracle<'a> {
    hidden: &'a DenseMatrix,
    state: Mutex<RevealState>,
}

impl<'a> ObservationOracle<'a> {
    pub fn new(hidden: &'a DenseMatrix) -> Self {
        let (m, n) = (hidden.nrows(), hidden.ncols());
        ObservationOracle {
            hidden,
            state: Mutex::new(RevealState {
                revealed: vec![false; m * n],
                revealed_per_column: vec![0; n],
                entry_count: 0,
            }),
        }
    }

    pub fn nrows(&self) -> usize {
        self.hidden.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.hidden.ncols()
    }

    /// Number of distinct entries revealed so far.
    pub fn entry_count(&self) -> u64 {
        self.lock().entry_count
    }

    pub fn is_revealed(&self, i: usize, j: usize) -> bool {
        i < self.nrows() && j < self.ncols() && self.lock().revealed[j * self.nrows() + i]
    }

    /// True once every entry of column `j` has been revealed.
    pub fn is_column_full(&self, j: usize) -> bool {
        j < self.ncols() && self.lock().revealed_per_column[j] == self.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> Result<f64> {
        self.check_col(j)?;
        if i >= self.nrows() {
            return Err(Error::IndexOutOfRange {
                index: i,
                bound: self.nrows(),
            });
        }
        self.mark(j, std::iter::once(i));
        Ok(self.hidden.get(i, j))
    }

    /// Reveals the whole column `j`.
    pub fn column(&self, j: usize) -> Result<DVector<f64>> {
        self.check_col(j)?;
        self.mark(j, 0..self.nrows());
        Ok(self.hidden.column(j))
    }

    /// Reveals `M[Ω, j]`.
    pub fn entries(&self, omega: &IndexSet, j: usize) -> Result<DVector<f64>> {
        self.check_col(j)?;
        if omega.ambient() != self.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.nrows(),
                found: omega.ambient(),
            });
        }
        self.mark(j, omega.indices().iter().copied());
        Ok(DVector::from_iterator(
            omega.len(),
            omega.indices().iter().map(|&i| self.hidden.get(i, j)),
        ))
    }

    fn mark(&self, j: usize, rows: impl Iterator<Item = usize>) {
        let m = self.nrows();
        let mut state = self.lock();
        for i in rows {
            let slot = j * m + i;
            if !state.revealed[slot] {
                state.revealed[slot] = true;
                state.revealed_per_column[j] += 1;
                state.entry_count += 1;
            }
        }
    }

    fn check_col(&self, j: usize) -> Result<()> {
        if j >= self.ncols() {
            return Err(Error::IndexOutOfRange {
                index: j,
                bound: self.ncols(),
            });
        }
        Ok(())
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, RevealState> {
        // a poisoned lock only means another reader panicked mid-update of
        // plain counters; the data is still usable
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}
