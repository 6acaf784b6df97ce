//! Correspondence between closed-loop and open-loop oscillatory modes.

use nalgebra::Complex;

use crate::num::{cabs, Scalar};

/// Imaginary part above which an eigenvalue counts as the representative of
/// an oscillatory conjugate pair.
pub const OSCILLATORY_TOL: f64 = 1e-9;

/// Matched `(closed, open)` index pairs plus the leftovers on each side.
///
/// Indices refer to positions in the spectra passed to [`pair_spectra`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpectrumPairing {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_closed: Vec<usize>,
    pub unmatched_open: Vec<usize>,
}

impl SpectrumPairing {
    /// Sum of `|λ − λ̂|` over matched pairs.
    pub fn matched_distance<S: Scalar>(&self, closed: &[Complex<S>], open: &[Complex<S>]) -> S {
        self.pairs
            .iter()
            .fold(S::zero(), |acc, &(c, o)| acc + cabs(closed[c] - open[o]))
    }
}

fn representatives<S: Scalar>(spectrum: &[Complex<S>]) -> Vec<usize> {
    let tol = S::lit(OSCILLATORY_TOL);
    (0..spectrum.len()).filter(|&k| spectrum[k].im > tol).collect()
}

/// Greedy nearest-neighbour pairing of oscillatory modes.
///
/// Closed-loop representatives are visited in the given order and each takes
/// the nearest still-unmatched open-loop representative (lower index on ties).
pub fn pair_spectra<S: Scalar>(closed: &[Complex<S>], open: &[Complex<S>]) -> SpectrumPairing {
    let closed_reps = representatives(closed);
    let mut free_open = representatives(open);
    let mut out = SpectrumPairing::default();
    for c in closed_reps {
        let best = free_open
            .iter()
            .enumerate()
            .map(|(slot, &o)| (slot, cabs(closed[c] - open[o])))
            .fold(None::<(usize, S)>, |best, cand| match best {
                Some(b) if !(cand.1 < b.1) => Some(b),
                _ => Some(cand),
            });
        match best {
            Some((slot, _)) => {
                let o = free_open.remove(slot);
                out.pairs.push((c, o));
            }
            None => out.unmatched_closed.push(c),
        }
    }
    out.unmatched_open = free_open;
    out
}
