//! The direct-integral Hilbert space over an atomic measure space.
//!
//! A section carries one finite-dimensional complex vector per atom. The
//! global inner product weights each fiber pairing by the atom's measure,
//! while fiber pairings themselves are unweighted (or carry a quadrature
//! step for discretized function spaces, see [`FiberMetric`]). Sections are
//! sparse: atoms without a stored vector hold the zero vector.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measure::{Atom, AtomicMeasureSpace, IndexSet};

pub type CVector = DVector<Complex64>;

/// Scalar metric of a fiber inner product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FiberMetric {
    /// `<u, v> = sum conj(u_j) v_j`.
    #[default]
    Standard,
    /// Midpoint quadrature on a uniform grid: `<u, v> = (sum conj(u_j) v_j) / points`.
    Quadrature { points: usize },
}

impl FiberMetric {
    /// Rescales a raw coordinate pairing.
    pub fn scale(&self, raw: Complex64) -> Complex64 {
        match *self {
            FiberMetric::Standard => raw,
            FiberMetric::Quadrature { points } => raw / points as f64,
        }
    }

    pub fn scale_real(&self, raw: f64) -> f64 {
        match *self {
            FiberMetric::Standard => raw,
            FiberMetric::Quadrature { points } => raw / points as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberLayout {
    space: AtomicMeasureSpace,
    dims: Vec<usize>,
    metrics: Vec<FiberMetric>,
}

impl FiberLayout {
    pub fn new(space: AtomicMeasureSpace, dims: Vec<usize>) -> Result<Self> {
        let metrics = vec![FiberMetric::Standard; dims.len()];
        Self::with_metrics(space, dims, metrics)
    }

    pub fn with_metrics(
        space: AtomicMeasureSpace,
        dims: Vec<usize>,
        metrics: Vec<FiberMetric>,
    ) -> Result<Self> {
        if dims.len() != space.len() {
            return Err(Error::LengthMismatch {
                what: "fiber dimensions vs atoms",
                expected: space.len(),
                got: dims.len(),
            });
        }
        if metrics.len() != space.len() {
            return Err(Error::LengthMismatch {
                what: "fiber metrics vs atoms",
                expected: space.len(),
                got: metrics.len(),
            });
        }
        for (i, &d) in dims.iter().enumerate() {
            if d == 0 {
                return Err(Error::DimensionMismatch {
                    atom: space.atoms()[i],
                    expected: 1,
                    got: 0,
                });
            }
        }
        for (i, m) in metrics.iter().enumerate() {
            if let FiberMetric::Quadrature { points: 0 } = m {
                return Err(Error::BadRange(format!(
                    "quadrature metric of atom {} has zero points",
                    space.atoms()[i]
                )));
            }
        }
        Ok(Self {
            space,
            dims,
            metrics,
        })
    }

    pub fn space(&self) -> &AtomicMeasureSpace {
        &self.space
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, atom: Atom) -> Result<usize> {
        Ok(self.dims[self.space.index_of(atom)?])
    }

    pub fn metric_at(&self, index: usize) -> FiberMetric {
        self.metrics[index]
    }

    pub fn weight_at(&self, index: usize) -> f64 {
        self.space.weights()[index]
    }

    pub fn atom_at(&self, index: usize) -> Atom {
        self.space.atoms()[index]
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// Unweighted fiber pairing `<u, v>_α`, conjugate-linear in `u`.
    pub fn fiber_inner(&self, index: usize, u: &CVector, v: &CVector) -> Complex64 {
        self.metrics[index].scale(u.dotc(v))
    }

    pub fn fiber_norm_sqr(&self, index: usize, u: &CVector) -> f64 {
        self.metrics[index].scale_real(u.norm_squared())
    }
}

#[derive(Debug, Clone)]
pub struct Section {
    layout: Arc<FiberLayout>,
    fibers: BTreeMap<usize, CVector>,
}

pub(crate) fn same_layout(a: &Arc<FiberLayout>, b: &Arc<FiberLayout>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl Section {
    pub fn zero(layout: &Arc<FiberLayout>) -> Self {
        Self {
            layout: Arc::clone(layout),
            fibers: BTreeMap::new(),
        }
    }

    /// Builds a section from `(atom, vector)` pairs. Later pairs for the
    /// same atom replace earlier ones.
    pub fn from_fibers(
        layout: &Arc<FiberLayout>,
        fibers: impl IntoIterator<Item = (Atom, CVector)>,
    ) -> Result<Self> {
        let mut s = Self::zero(layout);
        for (atom, v) in fibers {
            s.set_fiber(atom, v)?;
        }
        Ok(s)
    }

    /// Section supported on the single atom `atom`.
    pub fn extend_by_zero(layout: &Arc<FiberLayout>, atom: Atom, v: CVector) -> Result<Self> {
        Self::from_fibers(layout, [(atom, v)])
    }

    pub fn set_fiber(&mut self, atom: Atom, v: CVector) -> Result<()> {
        let idx = self.layout.space.index_of(atom)?;
        let d = self.layout.dims[idx];
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                atom,
                expected: d,
                got: v.len(),
            });
        }
        self.fibers.insert(idx, v);
        Ok(())
    }

    pub fn layout(&self) -> &Arc<FiberLayout> {
        &self.layout
    }

    /// Stored fiber at atom position `index`, `None` meaning zero.
    pub fn fiber_at(&self, index: usize) -> Option<&CVector> {
        self.fibers.get(&index)
    }

    pub fn fiber(&self, atom: Atom) -> Result<CVector> {
        let idx = self.layout.space.index_of(atom)?;
        Ok(self.fiber_or_zero(idx))
    }

    pub(crate) fn fiber_or_zero(&self, index: usize) -> CVector {
        self.fibers
            .get(&index)
            .cloned()
            .unwrap_or_else(|| CVector::zeros(self.layout.dims[index]))
    }

    /// Stored fibers in atom order as `(position, vector)`.
    pub fn stored(&self) -> impl Iterator<Item = (usize, &CVector)> {
        self.fibers.iter().map(|(i, v)| (*i, v))
    }

    /// Atoms whose fiber is not identically zero.
    pub fn support(&self) -> IndexSet {
        self.fibers
            .iter()
            .filter(|(_, v)| v.iter().any(|z| *z != Complex64::new(0.0, 0.0)))
            .map(|(i, _)| self.layout.atom_at(*i))
            .collect()
    }

    pub fn check_same_layout(&self, other: &Section) -> Result<()> {
        if same_layout(&self.layout, &other.layout) {
            Ok(())
        } else {
            Err(Error::LayoutMismatch)
        }
    }

    pub(crate) fn check_layout_of(&self, layout: &Arc<FiberLayout>) -> Result<()> {
        if same_layout(&self.layout, layout) {
            Ok(())
        } else {
            Err(Error::LayoutMismatch)
        }
    }

    /// Weighted inner product `sum_α μ({α}) <Φ(α), Ψ(α)>_α`.
    pub fn inner(&self, other: &Section) -> Result<Complex64> {
        self.check_same_layout(other)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (&i, u) in &self.fibers {
            if let Some(v) = other.fibers.get(&i) {
                acc += self.layout.fiber_inner(i, u, v) * self.layout.weight_at(i);
            }
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.fibers
            .iter()
            .map(|(&i, v)| self.layout.weight_at(i) * self.layout.fiber_norm_sqr(i, v))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `P_Δ Φ`: keeps the fibers over Δ, zero elsewhere.
    pub fn project(&self, delta: &IndexSet) -> Result<Section> {
        self.layout.space.check_set(delta)?;
        let fibers = self
            .fibers
            .iter()
            .filter(|(i, _)| delta.contains(self.layout.atom_at(**i)))
            .map(|(i, v)| (*i, v.clone()))
            .collect();
        Ok(Self {
            layout: Arc::clone(&self.layout),
            fibers,
        })
    }

    pub fn scale(&self, c: Complex64) -> Section {
        Self {
            layout: Arc::clone(&self.layout),
            fibers: self.fibers.iter().map(|(i, v)| (*i, v * c)).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: Complex64, other: &Section) -> Result<Section> {
        self.check_same_layout(other)?;
        let mut fibers = self.fibers.clone();
        for (&i, v) in &other.fibers {
            let scaled = v * c;
            fibers
                .entry(i)
                .and_modify(|u| *u += &scaled)
                .or_insert(scaled);
        }
        Ok(Self {
            layout: Arc::clone(&self.layout),
            fibers,
        })
    }

    pub fn add(&self, other: &Section) -> Result<Section> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Section) -> Result<Section> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// Applies `f` to every stored fiber, in atom order.
    pub fn map_fibers<F>(&self, mut f: F) -> Section
    where
        F: FnMut(usize, &CVector) -> CVector,
    {
        let fibers = self.fibers.iter().map(|(&i, v)| (i, f(i, v))).collect();
        Self {
            layout: Arc::clone(&self.layout),
            fibers,
        }
    }

    /// Largest absolute coordinate difference, over all atoms.
    pub fn max_abs_diff(&self, other: &Section) -> Result<f64> {
        let d = self.sub(other)?;
        Ok(d
            .fibers
            .values()
            .flat_map(|v| v.iter().map(|z| z.norm()))
            .fold(0.0, f64::max))
    }

    /// Coordinate-wise equality, treating absent fibers as zero.
    pub fn coords_eq(&self, other: &Section) -> bool {
        if !same_layout(&self.layout, &other.layout) {
            return false;
        }
        (0..self.layout.len()).all(|i| match (self.fibers.get(&i), other.fibers.get(&i)) {
            (None, None) => true,
            (Some(a), Some(b)) => a == b,
            (Some(a), None) | (None, Some(a)) => a.iter().all(|z| z.norm_sqr() == 0.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn layout(weights: Vec<f64>, dims: Vec<usize>) -> Arc<FiberLayout> {
        let n = weights.len() as i64;
        let space = AtomicMeasureSpace::new((0..n).collect(), weights).unwrap();
        Arc::new(FiberLayout::new(space, dims).unwrap())
    }

    #[test]
    fn inner_examples() {
        let l = layout(vec![1.0], vec![2]);
        let z = Section::zero(&l);
        assert_eq!(z.inner(&z).unwrap(), c(0.0));
        let e1 = Section::extend_by_zero(&l, 0, CVector::from_vec(vec![c(1.0), c(0.0)])).unwrap();
        let e2 = Section::extend_by_zero(&l, 0, CVector::from_vec(vec![c(0.0), c(1.0)])).unwrap();
        assert_eq!(e1.inner(&e2).unwrap(), c(0.0));

        let l = layout(vec![2.0, 3.0], vec![1, 1]);
        let ones = Section::from_fibers(
            &l,
            [(0, CVector::from_element(1, c(1.0))), (1, CVector::from_element(1, c(1.0)))],
        )
        .unwrap();
        assert_eq!(ones.inner(&ones).unwrap(), c(5.0));
    }

    #[test]
    fn inner_is_conjugate_linear_in_first_argument() {
        let l = layout(vec![1.0], vec![1]);
        let i = Complex64::new(0.0, 1.0);
        let phi = Section::extend_by_zero(&l, 0, CVector::from_element(1, c(1.0))).unwrap();
        let lhs = phi.scale(i).inner(&phi).unwrap();
        assert_eq!(lhs, -i);
    }

    #[test]
    fn norm_examples() {
        let l = layout(vec![4.0], vec![1]);
        assert_eq!(Section::zero(&l).norm(), 0.0);
        let phi = Section::extend_by_zero(&l, 0, CVector::from_element(1, c(1.0))).unwrap();
        assert_eq!(phi.norm(), 2.0);

        let l = layout(vec![1.0; 7], vec![3; 7]);
        let mut phi = Section::zero(&l);
        for a in 0..7 {
            let mut v = CVector::zeros(3);
            v[(a as usize) % 3] = c(1.0);
            phi.set_fiber(a, v).unwrap();
        }
        assert_abs_diff_eq!(phi.norm(), 7f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn projection_examples() {
        let l = layout(vec![1.0, 2.0, 0.5], vec![1, 2, 1]);
        let phi = Section::from_fibers(
            &l,
            [
                (0, CVector::from_element(1, c(1.0))),
                (1, CVector::from_vec(vec![c(2.0), Complex64::new(0.0, 1.0)])),
                (2, CVector::from_element(1, c(-3.0))),
            ],
        )
        .unwrap();
        assert!(phi.project(&l.space().full_set()).unwrap().coords_eq(&phi));
        assert!(phi
            .project(&IndexSet::empty())
            .unwrap()
            .coords_eq(&Section::zero(&l)));
        let a = phi.project(&IndexSet::new([0, 2])).unwrap();
        let b = phi.project(&IndexSet::new([1])).unwrap();
        assert_eq!(a.inner(&b).unwrap(), c(0.0));
        assert_eq!(
            phi.project(&IndexSet::new([9])).unwrap_err(),
            Error::ForeignAtom(9)
        );
    }

    #[test]
    fn extend_by_zero_examples() {
        let l = layout(vec![1.0, 3.0], vec![1, 2]);
        let z = Section::extend_by_zero(&l, 1, CVector::zeros(2)).unwrap();
        assert!(z.coords_eq(&Section::zero(&l)));
        let v = Section::extend_by_zero(&l, 1, CVector::from_vec(vec![c(1.0), c(0.0)])).unwrap();
        assert_abs_diff_eq!(v.norm(), 3f64.sqrt(), epsilon = 1e-15);
        assert!(v.project(&IndexSet::singleton(1)).unwrap().coords_eq(&v));
        assert_eq!(
            Section::extend_by_zero(&l, 1, CVector::zeros(3)).unwrap_err(),
            Error::DimensionMismatch {
                atom: 1,
                expected: 2,
                got: 3
            }
        );
    }

    #[test]
    fn layout_mismatch() {
        let a = layout(vec![1.0], vec![1]);
        let b = layout(vec![2.0], vec![1]);
        let err = Section::zero(&a).inner(&Section::zero(&b)).unwrap_err();
        assert_eq!(err, Error::LayoutMismatch);
    }

    #[test]
    fn quadrature_metric_scales_fiber_pairing() {
        let space = AtomicMeasureSpace::counting(vec![0]).unwrap();
        let l = Arc::new(
            FiberLayout::with_metrics(space, vec![4], vec![FiberMetric::Quadrature { points: 4 }])
                .unwrap(),
        );
        let ones = Section::extend_by_zero(&l, 0, CVector::from_element(4, c(1.0))).unwrap();
        assert_eq!(ones.norm_sqr(), 1.0);
    }
}
