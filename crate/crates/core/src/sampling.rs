//! Seeded random inputs for property checks: Hermitian matrices with a
//! prescribed spectrum, sections, index sets, partitions and Borel sets.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::direct_integral::{CVector, FiberLayout, Section};
use crate::forms::CMatrix;
use crate::measure::{AtomicMeasureSpace, IndexSet, Partition};
use crate::spectral::{BorelSet, Interval};

pub use rand::SeedableRng;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CVector {
    CVector::from_fn(d, |_, _| complex_normal(rng))
}

/// Haar-distributed unitary from the QR factorization of a complex Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| complex_normal(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// `U diag(spectrum) U*`, symmetrized so that it is exactly Hermitian.
pub fn hermitian_with_spectrum<R: Rng + ?Sized>(rng: &mut R, spectrum: &[f64]) -> CMatrix {
    let d = spectrum.len();
    let u = random_unitary(rng, d);
    let lambda = CMatrix::from_diagonal(&DVector::from_iterator(
        d,
        spectrum.iter().map(|x| Complex64::new(*x, 0.0)),
    ));
    let h = &u * lambda * u.adjoint();
    (&h + h.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Section with a complex Gaussian fiber on each atom, kept with probability `density`.
pub fn random_section<R: Rng + ?Sized>(
    rng: &mut R,
    layout: &Arc<FiberLayout>,
    density: f64,
) -> Section {
    let mut s = Section::zero(layout);
    for (i, &atom) in layout.space().atoms().iter().enumerate() {
        if rng.random::<f64>() < density {
            let v = random_vector(rng, layout.dims()[i]);
            s.set_fiber(atom, v).expect("dimension taken from layout");
        }
    }
    s
}

/// Each atom kept independently with probability `p`.
pub fn random_index_set<R: Rng + ?Sized>(rng: &mut R, space: &AtomicMeasureSpace, p: f64) -> IndexSet {
    space
        .atoms()
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < p)
        .collect()
}

/// Random partition of `parent` into at most `max_parts` nonempty parts.
pub fn random_partition<R: Rng + ?Sized>(rng: &mut R, parent: &IndexSet, max_parts: usize) -> Partition {
    let k = rng.random_range(1..=max_parts.max(1));
    let mut parts = vec![Vec::new(); k];
    for a in parent.iter() {
        parts[rng.random_range(0..k)].push(a);
    }
    Partition::new(
        parent.clone(),
        parts
            .into_iter()
            .filter(|p| !p.is_empty())
            .map(IndexSet::new)
            .collect(),
    )
}

/// One to three intervals with endpoints in `[lo, hi]`, random closedness.
pub fn random_borel_set<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> BorelSet {
    let n = rng.random_range(1..=3);
    BorelSet::new((0..n).map(|_| {
        let a = rng.random_range(lo..hi);
        let b = rng.random_range(lo..hi);
        Interval::new(a.min(b), a.max(b), rng.random(), rng.random())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::max_abs_entry;

    #[test]
    fn unitary_is_unitary() {
        let mut r = rng(3);
        for d in 1..7 {
            let u = random_unitary(&mut r, d);
            let err = max_abs_entry(&(u.adjoint() * &u - CMatrix::identity(d, d)));
            assert!(err < 1e-13, "d={d}: {err}");
        }
    }

    #[test]
    fn prescribed_spectrum_is_recovered() {
        let mut r = rng(5);
        let spec = [-4.0, -1.0, 0.5, 7.0];
        let h = hermitian_with_spectrum(&mut r, &spec);
        let mut eig: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        for (a, b) in eig.iter().zip(spec) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn partitions_are_valid() {
        let mut r = rng(9);
        let parent: IndexSet = (0..20).collect();
        for _ in 0..50 {
            assert!(random_partition(&mut r, &parent, 5).is_valid());
        }
        assert!(random_partition(&mut r, &IndexSet::empty(), 3).is_valid());
    }
}
