//! Dense eigen-analysis and matrix-exponential helpers.

use std::cmp::Ordering;

use nalgebra::{Complex, DMatrix, SVD};

use crate::error::{Error, Result};
use crate::num::{cabs, Scalar};

pub type CMatrix<S> = DMatrix<Complex<S>>;

/// Canonical spectrum order: descending real part, ties by descending imaginary part.
pub fn spectrum_order<S: Scalar>(a: &Complex<S>, b: &Complex<S>) -> Ordering {
    b.re.partial_cmp(&a.re)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal))
}

pub fn sort_spectrum<S: Scalar>(values: &mut [Complex<S>]) {
    values.sort_by(spectrum_order);
}

/// Rejects matrices containing NaN or infinities.
pub fn ensure_finite<S: Scalar>(m: &DMatrix<S>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite_value()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} contains non-finite entries")))
    }
}

/// Eigenvalues of a real square matrix in canonical order.
///
/// Complex eigenvalues come out of the real Schur form as exact conjugate
/// pairs, so the `+im` member always precedes its conjugate.
pub fn eigenvalues<S: Scalar>(a: &DMatrix<S>) -> Result<Vec<Complex<S>>> {
    if !a.is_square() {
        return Err(Error::dims(format!(
            "eigenvalues of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    ensure_finite(a, "matrix")?;
    let schur = nalgebra::Schur::try_new(a.clone(), S::default_epsilon(), 2000 * a.nrows())
        .ok_or(Error::EigenNoConvergence)?;
    let mut values: Vec<Complex<S>> = schur.complex_eigenvalues().iter().copied().collect();
    sort_spectrum(&mut values);
    Ok(values)
}

/// Full eigen decomposition `A = Φ Λ Φ⁻¹` of a real matrix.
#[derive(Clone, Debug)]
pub struct EigenDecomposition<S: Scalar> {
    pub values: Vec<Complex<S>>,
    /// Column `k` is the unit-norm right eigenvector of `values[k]`.
    pub right: CMatrix<S>,
    /// Row `k` is the left eigenvector of `values[k]`, scaled so `ψₖᵀ φₖ = 1`.
    pub left: CMatrix<S>,
    /// 2-norm condition number of the right eigenvector matrix.
    pub condition: S,
}

/// Eigenvector condition number above which a matrix is treated as defective.
pub const DEFECTIVE_CONDITION: f64 = 1e12;

pub fn eigen_decomposition<S: Scalar>(a: &DMatrix<S>) -> Result<EigenDecomposition<S>> {
    let values = eigenvalues(a)?;
    let n = values.len();
    let scale = a.norm().max(S::one());
    let cluster_tol = S::lit(1e-7) * scale;
    let null_tol = S::lit(1e-6) * scale;
    let ac: CMatrix<S> = a.map(|x| Complex::new(x, S::zero()));

    let mut right = CMatrix::<S>::zeros(n, n);
    let mut done = vec![false; n];
    for k in 0..n {
        if done[k] {
            continue;
        }
        let lambda = values[k];
        // Conjugate of an already computed eigenvector.
        if lambda.im < S::zero() {
            if let Some(j) = (0..k).find(|&j| done[j] && values[j] == lambda.conj()) {
                let v = right.column(j).map(|z| z.conj());
                right.set_column(k, &v);
                done[k] = true;
                continue;
            }
        }
        let members: Vec<usize> = (k..n)
            .filter(|&j| !done[j] && cabs(values[j] - lambda) <= cluster_tol)
            .collect();
        let shifted = &ac - CMatrix::<S>::identity(n, n) * lambda;
        let svd = SVD::new(shifted, false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let sv = &svd.singular_values;
        for (slot, &j) in members.iter().enumerate() {
            let row = n - 1 - slot;
            if sv[row] > null_tol {
                return Err(Error::NonDiagonalizable(f64::INFINITY));
            }
            let v = normalize_phase(v_t.row(row).transpose().map(|z| z.conj()));
            right.set_column(j, &v);
            done[j] = true;
        }
    }

    let sv = SVD::new(right.clone(), false, false).singular_values;
    let smax = sv.iter().copied().fold(S::zero(), S::max);
    let smin = sv.iter().copied().fold(smax, S::min);
    let condition = if smin > S::zero() { smax / smin } else { S::lit(f64::INFINITY) };
    if !(condition.as_f64() <= DEFECTIVE_CONDITION) {
        return Err(Error::NonDiagonalizable(condition.as_f64()));
    }
    let left = right
        .clone()
        .try_inverse()
        .ok_or(Error::NonDiagonalizable(f64::INFINITY))?;
    Ok(EigenDecomposition {
        values,
        right,
        left,
        condition,
    })
}

/// Unit 2-norm with the largest-magnitude entry rotated onto the positive real axis.
fn normalize_phase<S: Scalar>(mut v: nalgebra::DVector<Complex<S>>) -> nalgebra::DVector<Complex<S>> {
    let norm = v.norm();
    if norm > S::zero() {
        v /= Complex::new(norm, S::zero());
    }
    let mut best = 0;
    for i in 1..v.len() {
        if cabs(v[i]) > cabs(v[best]) * (S::one() + S::lit(1e-9)) {
            best = i;
        }
    }
    if let Some(pivot) = v.get(best).copied() {
        let mag = cabs(pivot);
        if mag > S::zero() {
            let rot = pivot.conj() / Complex::new(mag, S::zero());
            v *= rot;
        }
    }
    v
}

/// Matrix exponential.
pub fn expm<S: Scalar>(a: &DMatrix<S>) -> DMatrix<S> {
    a.exp()
}

/// Exact zero-order-hold discretization of `ẋ = A x + B u` at step `dt`.
///
/// Returns `(e^{A dt}, ∫₀^dt e^{A s} ds · B)` from a single exponential of the
/// augmented block matrix.
pub fn zoh_discretize<S: Scalar>(a: &DMatrix<S>, b: &DMatrix<S>, dt: S) -> (DMatrix<S>, DMatrix<S>) {
    let n = a.nrows();
    let p = b.ncols();
    let mut aug = DMatrix::<S>::zeros(n + p, n + p);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, p)).copy_from(&(b * dt));
    let e = expm(&aug);
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, p)).into_owned(),
    )
}
