//! Exact dynamic mode decomposition of a snapshot window.
//!
//! With `X = [x_0 … x_{W−1}]`, `Y = [x_1 … x_W]` and the truncated SVD
//! `X = U Σ Vᵀ`, the reduced propagator is `F = Uᵀ Y V Σ⁻¹`. Its eigenvalues
//! `μ` are mapped to continuous time by `λ = ln(μ)/Δt`.

use nalgebra::{Complex, DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::linalg;
use crate::num::{cabs, Scalar};

/// Singular values below this fraction of the largest are discarded.
pub const SVD_TRUNCATION: f64 = 1e-10;
/// Discrete eigenvalues with smaller modulus have no finite logarithm worth keeping.
pub const MIN_DISCRETE_MODULUS: f64 = 1e-12;

/// `W + 1` time-ordered snapshots, one per column.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotWindow<S: Scalar> {
    data: DMatrix<S>,
    dt: S,
}

impl<S: Scalar> SnapshotWindow<S> {
    pub fn new(data: DMatrix<S>, dt: S) -> Result<Self> {
        if data.ncols() < 3 {
            return Err(Error::InsufficientData(format!(
                "window of {} snapshots; at least 3 (W ≥ 2) required",
                data.ncols()
            )));
        }
        if !(dt > S::zero()) {
            return Err(Error::InvalidParameter("snapshot spacing must be > 0".into()));
        }
        linalg::ensure_finite(&data, "snapshot window")?;
        Ok(SnapshotWindow { data, dt })
    }

    pub fn from_columns(columns: &[DVector<S>], dt: S) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InsufficientData("empty snapshot list".into()));
        }
        let rows = columns[0].len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::dims("snapshots of unequal length".to_string()));
        }
        Self::new(DMatrix::from_columns(columns), dt)
    }

    /// Window length `W` (number of snapshot transitions).
    pub fn w(&self) -> usize {
        self.data.ncols() - 1
    }

    pub fn dt(&self) -> S {
        self.dt
    }

    pub fn data(&self) -> &DMatrix<S> {
        &self.data
    }
}

/// Full output of a decomposition, for diagnostics.
#[derive(Clone, Debug)]
pub struct DmdResult<S: Scalar> {
    /// Continuous-time eigenvalues in canonical order.
    pub eigenvalues: Vec<Complex<S>>,
    /// Discrete eigenvalues `μ` matching `eigenvalues` entry by entry.
    pub discrete: Vec<Complex<S>>,
    /// All singular values of `X`, descending.
    pub singular_values: Vec<S>,
    pub rank: usize,
}

pub fn dmd_analyze<S: Scalar>(window: &SnapshotWindow<S>) -> Result<DmdResult<S>> {
    analyze(window, true)
}

fn analyze<S: Scalar>(window: &SnapshotWindow<S>, strict: bool) -> Result<DmdResult<S>> {
    let w = window.w();
    let x = window.data.columns(0, w).into_owned();
    let y = window.data.columns(1, w).into_owned();
    let svd = SVD::new(x, true, true);
    let sv: Vec<S> = svd.singular_values.iter().copied().collect();
    let smax = sv.iter().copied().fold(S::zero(), S::max);
    let cutoff = smax * S::lit(SVD_TRUNCATION);
    // nalgebra returns singular values unsorted in general; keep the order
    // consistent with U and V by selecting indices.
    let mut keep: Vec<usize> = (0..sv.len()).filter(|&i| smax > S::zero() && sv[i] > cutoff).collect();
    keep.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(std::cmp::Ordering::Equal));
    let rank = keep.len();
    if rank == 0 {
        return Err(Error::InsufficientData("snapshot matrix has rank 0".into()));
    }
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let ur = u.select_columns(&keep);
    let vr = v_t.select_rows(&keep).transpose();
    let sinv = DMatrix::from_diagonal(&DVector::from_iterator(rank, keep.iter().map(|&i| S::one() / sv[i])));
    let f = ur.transpose() * y * vr * sinv;
    let mut mus = linalg::eigenvalues(&f)?;
    mus.retain(|mu| cabs(*mu) >= S::lit(MIN_DISCRETE_MODULUS));

    let dt = window.dt;
    let mut pairs = Vec::with_capacity(mus.len());
    for mu in mus {
        if mu.im == S::zero() && mu.re < S::zero() {
            if !strict {
                continue;
            }
            return Err(Error::Aliasing(format!(
                "discrete eigenvalue {} on the negative real axis; the oscillation is at or above Nyquist for Δt = {}",
                mu.re, dt
            )));
        }
        let lambda = Complex::new(cabs(mu).ln(), mu.im.atan2(mu.re)) / dt;
        pairs.push((lambda, mu));
    }
    pairs.sort_by(|a, b| linalg::spectrum_order(&a.0, &b.0));
    let mut sorted_sv = sv;
    sorted_sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(DmdResult {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        discrete: pairs.iter().map(|p| p.1).collect(),
        singular_values: sorted_sv,
        rank,
    })
}

/// Continuous-time eigenvalues estimated from the window, canonical order.
pub fn dmd_estimate<S: Scalar>(window: &SnapshotWindow<S>) -> Result<Vec<Complex<S>>> {
    Ok(dmd_analyze(window)?.eigenvalues)
}

/// Like [`dmd_estimate`], but discrete eigenvalues on the negative real axis
/// are dropped instead of reported as aliasing.
///
/// On short noisy windows the least-squares fit can place a spurious, very
/// fast real mode there. It has no continuous-time counterpart and carries no
/// oscillation, so closed-loop reward computation skips it.
pub fn dmd_estimate_resolvable<S: Scalar>(window: &SnapshotWindow<S>) -> Result<Vec<Complex<S>>> {
    Ok(analyze(window, false)?.eigenvalues)
}
