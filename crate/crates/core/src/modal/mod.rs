//! Modal analysis: mode metrics, participation factors, generator selection,
//! data-driven eigenvalue estimation and spectrum pairing.

pub mod dmd;
pub mod pairing;

pub use dmd::{dmd_analyze, dmd_estimate, dmd_estimate_resolvable, DmdResult, SnapshotWindow};
pub use pairing::{pair_spectra, SpectrumPairing, OSCILLATORY_TOL};

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::num::{cabs, Scalar};

/// One eigenvalue of a system matrix with its eigenvectors and derived metrics.
#[derive(Clone, Debug)]
pub struct Mode<S: Scalar> {
    pub lambda: Complex<S>,
    /// Unit-norm right eigenvector `φ`.
    pub right: DVector<Complex<S>>,
    /// Left eigenvector `ψ` with `ψᵀ φ = 1`.
    pub left: DVector<Complex<S>>,
    /// Natural frequency `|λ|` in rad/s.
    pub frequency: S,
    pub damping_ratio: S,
    /// State participation factors; non-negative, summing to one.
    pub participation: DVector<S>,
}

impl<S: Scalar> Mode<S> {
    /// True for the `Im(λ) > 0` representative of a conjugate pair.
    pub fn is_oscillatory(&self) -> bool {
        self.lambda.im > S::lit(OSCILLATORY_TOL)
    }

    /// Oscillation frequency `Im(λ)/2π` in Hz.
    pub fn oscillation_hz(&self) -> S {
        self.lambda.im / S::two_pi()
    }

    /// Per-generator participation `π(θ_i) + π(ω_i)`.
    pub fn generator_participation(&self, n_g: usize) -> Vec<S> {
        generator_participation(&self.participation, n_g)
    }
}

/// Natural frequency `f = |λ|` and damping ratio `ζ = −Re(λ)/f`; `(0, 0)` at `λ = 0`.
pub fn mode_metrics<S: Scalar>(lambda: Complex<S>) -> (S, S) {
    let f = cabs(lambda);
    if f > S::zero() {
        (f, -lambda.re / f)
    } else {
        (S::zero(), S::zero())
    }
}

/// Normalized participation `|ψ_i φ_i| / Σ_j |ψ_j φ_j|` of one mode.
pub fn participation_vector<S: Scalar>(right: &DVector<Complex<S>>, left: &DVector<Complex<S>>) -> DVector<S> {
    let raw = DVector::from_fn(right.len(), |i, _| cabs(left[i] * right[i]));
    let total = raw.sum();
    if total > S::zero() {
        raw / total
    } else {
        raw
    }
}

/// Aggregates state participations into one value per generator.
///
/// States are laid out `(θ_1..θ_ng, ω_1..ω_ng, x_rem)`; `x_rem` entries are
/// not attributed to any generator.
pub fn generator_participation<S: Scalar>(participation: &DVector<S>, n_g: usize) -> Vec<S> {
    (0..n_g)
        .map(|i| participation[i] + participation[n_g + i])
        .collect()
}

/// Eigen-decomposes `A` and returns every mode in canonical spectrum order.
pub fn participation_factors<S: Scalar>(a: &DMatrix<S>) -> Result<Vec<Mode<S>>> {
    let d = linalg::eigen_decomposition(a)?;
    Ok(d.values
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let right = d.right.column(k).into_owned();
            let left = d.left.row(k).transpose();
            let participation = participation_vector(&right, &left);
            let (frequency, damping_ratio) = mode_metrics(lambda);
            Mode {
                lambda,
                right,
                left,
                frequency,
                damping_ratio,
                participation,
            }
        })
        .collect())
}

/// The `count` generators participating most in `modes[target]`, in
/// ascending index order. Ties go to the lower generator index.
pub fn select_controlled_generators<S: Scalar>(
    modes: &[Mode<S>],
    target: usize,
    count: usize,
    n_g: usize,
) -> Result<Vec<usize>> {
    let mode = modes
        .get(target)
        .ok_or_else(|| Error::InvalidParameter(format!("target mode {target} out of range")))?;
    if count == 0 || count > n_g {
        return Err(Error::InvalidParameter(format!(
            "controlled generator count {count} outside 1..={n_g}"
        )));
    }
    let gp = mode.generator_participation(n_g);
    let mut order: Vec<usize> = (0..n_g).collect();
    order.sort_by(|&i, &j| {
        gp[j].partial_cmp(&gp[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut chosen = order[..count].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Index of the inter-area mode: the oscillatory mode with the lowest
/// oscillation frequency.
pub fn inter_area_mode<S: Scalar>(modes: &[Mode<S>]) -> Option<usize> {
    modes
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_oscillatory())
        .min_by(|a, b| a.1.lambda.im.partial_cmp(&b.1.lambda.im).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(k, _)| k)
}
