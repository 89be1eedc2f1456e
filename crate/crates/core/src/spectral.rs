//! Fiberwise spectral representation of a direct-integral form.
//!
//! Each fiber matrix `H_α` is diagonalized once ([`decompose`]). The
//! resolution of the identity of the integrated operator acts fiber by fiber,
//! `E(σ) = ⊕_α E^α(σ)`, and all derived objects (spectral measures `ν^α_Φ`,
//! `ν_Φ`, the graph norm, D_Fin membership) are read off the eigendata.
//!
//! Eigenvalues closer than `1e-10 * max(1, max|λ|)` are grouped into one
//! cluster and treated as a single spectral point; projections and weights
//! use the whole cluster's eigenspace, so results do not depend on the basis
//! the eigensolver happened to pick inside a degenerate eigenspace.

use std::cmp::Ordering;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::direct_integral::{CVector, Section};
use crate::error::{Error, Result};
use crate::forms::{max_abs_entry, CMatrix, DirectIntegralForm};
use crate::measure::{Atom, IndexSet};

const CLUSTER_TOL: f64 = 1e-10;
const UNITARITY_TOL: f64 = 1e-10;
const RECONSTRUCTION_TOL: f64 = 1e-9;
/// Relative agreement required between the three evaluations of `Q(Φ)`.
pub const REPRESENTATION_TOL: f64 = 1e-10;
const DFIN_TOL: f64 = 1e-12;

/// A run of (numerically) equal eigenvalues `eigenvalues[start..end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub value: f64,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct FiberSpectralData {
    pub atom: Atom,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `i` belongs to `eigenvalues[i]`.
    pub eigenvectors: CMatrix,
    pub clusters: Vec<Cluster>,
    pub reconstruction_residual: f64,
    pub unitarity_residual: f64,
}

impl FiberSpectralData {
    fn from_matrix(atom: Atom, h: &CMatrix) -> Result<Self> {
        let d = h.nrows();
        let (values, vectors) = if is_real_diagonal(h) {
            (
                (0..d).map(|i| h[(i, i)].re).collect::<Vec<_>>(),
                CMatrix::identity(d, d),
            )
        } else {
            let hermitian = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = hermitian
                .try_symmetric_eigen(f64::EPSILON, 10_000)
                .ok_or(Error::EigenFailure(atom))?;
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigenFailure(atom));
        }

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let eigenvectors = CMatrix::from_fn(d, d, |r, c| vectors[(r, order[c])]);

        let unitarity_residual = max_abs_entry(&(eigenvectors.adjoint() * &eigenvectors - CMatrix::identity(d, d)));
        let lambda = CMatrix::from_diagonal(&DVector::from_iterator(
            d,
            eigenvalues.iter().map(|x| Complex64::new(*x, 0.0)),
        ));
        let rebuilt = &eigenvectors * lambda * eigenvectors.adjoint();
        let reconstruction_residual = max_abs_entry(&(rebuilt - h));
        if unitarity_residual > UNITARITY_TOL
            || reconstruction_residual > RECONSTRUCTION_TOL * (1.0 + max_abs_entry(h))
        {
            return Err(Error::EigenFailure(atom));
        }

        let clusters = cluster(&eigenvalues);
        Ok(Self {
            atom,
            eigenvalues,
            eigenvectors,
            clusters,
            reconstruction_residual,
            unitarity_residual,
        })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `E^α(σ) v`.
    fn project(&self, sigma: &BorelSet, v: &CVector) -> CVector {
        let keep: Vec<bool> = self.clusters.iter().map(|c| sigma.contains(c.value)).collect();
        if keep.iter().all(|k| *k) {
            return v.clone();
        }
        if !keep.iter().any(|k| *k) {
            return CVector::zeros(v.len());
        }
        let mut coeff = self.eigenvectors.ad_mul(v);
        for (c, k) in self.clusters.iter().zip(&keep) {
            if !k {
                for i in c.start..c.end {
                    coeff[i] = Complex64::new(0.0, 0.0);
                }
            }
        }
        &self.eigenvectors * coeff
    }
}

fn is_real_diagonal(h: &CMatrix) -> bool {
    (0..h.nrows()).all(|i| {
        (0..h.ncols()).all(|j| {
            let z = h[(i, j)];
            if i == j {
                z.im == 0.0
            } else {
                z.re == 0.0 && z.im == 0.0
            }
        })
    })
}

fn cluster(sorted: &[f64]) -> Vec<Cluster> {
    let scale = sorted.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut out: Vec<Cluster> = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] - sorted[i - 1] > CLUSTER_TOL * scale {
            let members = &sorted[start..i];
            let value = if members.len() == 1 {
                members[0]
            } else {
                members.iter().sum::<f64>() / members.len() as f64
            };
            out.push(Cluster {
                value,
                start,
                end: i,
            });
            start = i;
        }
    }
    out
}

/// Finite union of real intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct BorelSet {
    intervals: Vec<Interval>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        // Infinite endpoints are never members.
        Self {
            lo,
            hi,
            lo_closed: lo_closed && lo.is_finite(),
            hi_closed: hi_closed && hi.is_finite(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }
}

impl BorelSet {
    pub fn new(intervals: impl IntoIterator<Item = Interval>) -> Self {
        let mut ivs: Vec<Interval> = intervals.into_iter().filter(|i| !i.is_empty()).collect();
        ivs.sort_by(|a, b| match a.lo.total_cmp(&b.lo) {
            Ordering::Equal => b.lo_closed.cmp(&a.lo_closed),
            o => o,
        });
        let mut merged: Vec<Interval> = Vec::with_capacity(ivs.len());
        for iv in ivs {
            if let Some(last) = merged.last_mut() {
                let touches = iv.lo < last.hi || (iv.lo == last.hi && (last.hi_closed || iv.lo_closed));
                if touches {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                        last.hi_closed = iv.hi_closed;
                    } else if iv.hi == last.hi {
                        last.hi_closed |= iv.hi_closed;
                    }
                    continue;
                }
            }
            merged.push(iv);
        }
        Self { intervals: merged }
    }

    pub fn empty() -> Self {
        Self { intervals: vec![] }
    }

    pub fn real_line() -> Self {
        Self::new([Interval::new(f64::NEG_INFINITY, f64::INFINITY, false, false)])
    }

    /// `[lo, hi]`.
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::new([Interval::new(lo, hi, true, true)])
    }

    /// `[lo, hi)`.
    pub fn half_open(lo: f64, hi: f64) -> Self {
        Self::new([Interval::new(lo, hi, true, false)])
    }

    /// `(-∞, hi]`.
    pub fn at_most(hi: f64) -> Self {
        Self::new([Interval::new(f64::NEG_INFINITY, hi, false, true)])
    }

    pub fn union(&self, other: &BorelSet) -> BorelSet {
        Self::new(self.intervals.iter().chain(&other.intervals).copied())
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Bounded with every endpoint closed.
    pub fn is_compact(&self) -> bool {
        self.intervals
            .iter()
            .all(|i| i.lo.is_finite() && i.hi.is_finite() && i.lo_closed && i.hi_closed)
    }
}

/// Positive measure with finitely many atoms `(λ, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicSpectralMeasure {
    atoms: Vec<(f64, f64)>,
    total_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `∫ λ dν`.
    pub first: f64,
    /// `∫ |λ| dν`.
    pub first_abs: f64,
    /// `∫ λ² dν`.
    pub second: f64,
}

impl AtomicSpectralMeasure {
    /// Clamps weights in `[-1e-14, 0)` to zero and drops zero atoms.
    pub fn new(atoms: Vec<(f64, f64)>) -> Self {
        let atoms: Vec<(f64, f64)> = atoms
            .into_iter()
            .map(|(l, w)| (l, if (-1e-14..0.0).contains(&w) { 0.0 } else { w }))
            .filter(|(_, w)| *w != 0.0)
            .collect();
        let total_mass = atoms.iter().map(|(_, w)| w).sum();
        Self { atoms, total_mass }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass_on(&self, sigma: &BorelSet) -> f64 {
        self.atoms
            .iter()
            .filter(|(l, _)| sigma.contains(*l))
            .map(|(_, w)| w)
            .sum()
    }

    pub fn moments(&self) -> Moments {
        let mut m = Moments {
            first: 0.0,
            first_abs: 0.0,
            second: 0.0,
        };
        for &(l, w) in &self.atoms {
            m.first += l * w;
            m.first_abs += l.abs() * w;
            m.second += l * l * w;
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct SpectralModel {
    form: DirectIntegralForm,
    fibers: Vec<FiberSpectralData>,
    /// `min_α λ_min(μ({α}) H_α)`.
    pub m_below: f64,
    /// `max_α λ_max(μ({α}) H_α)`.
    pub m_above: f64,
}

/// Diagonalizes every fiber of `form` (in parallel across atoms).
pub fn decompose(form: &DirectIntegralForm) -> Result<SpectralModel> {
    let layout = form.layout();
    let fibers = (0..layout.len())
        .into_par_iter()
        .map(|i| FiberSpectralData::from_matrix(layout.atom_at(i), &form.fiber_forms()[i]))
        .collect::<Result<Vec<_>>>()?;
    let mut m_below = f64::INFINITY;
    let mut m_above = f64::NEG_INFINITY;
    for (i, f) in fibers.iter().enumerate() {
        let w = layout.weight_at(i);
        m_below = m_below.min(w * f.min_eigenvalue());
        m_above = m_above.max(w * f.max_eigenvalue());
    }
    Ok(SpectralModel {
        form: form.clone(),
        fibers,
        m_below,
        m_above,
    })
}

impl SpectralModel {
    pub fn form(&self) -> &DirectIntegralForm {
        &self.form
    }

    pub fn fibers(&self) -> &[FiberSpectralData] {
        &self.fibers
    }

    pub fn fiber(&self, atom: Atom) -> Result<&FiberSpectralData> {
        Ok(&self.fibers[self.form.layout().space().index_of(atom)?])
    }

    /// Smallest eigenvalue of any `H_α`, without the measure weight.
    pub fn min_eigenvalue(&self) -> f64 {
        self.fibers
            .iter()
            .map(FiberSpectralData::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.fibers
            .iter()
            .map(FiberSpectralData::max_eigenvalue)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn fiber_measure_at(&self, index: usize, v: &CVector) -> AtomicSpectralMeasure {
        let data = &self.fibers[index];
        let metric = self.form.layout().metric_at(index);
        let mass = metric.scale_real(v.norm_squared());
        let coeff = data.eigenvectors.ad_mul(v);
        let atoms = data
            .clusters
            .iter()
            .map(|c| {
                let raw: f64 = (c.start..c.end).map(|i| coeff[i].norm_sqr()).sum();
                (c.value, metric.scale_real(raw))
            })
            .filter(|(_, w)| *w > f64::EPSILON * mass)
            .collect();
        AtomicSpectralMeasure::new(atoms)
    }

    /// `ν^α_Φ(·) = ‖E^α(·) Φ(α)‖²_α`.
    pub fn fiber_measure(&self, atom: Atom, phi: &Section) -> Result<AtomicSpectralMeasure> {
        let index = self.form.layout().space().index_of(atom)?;
        phi.check_layout_of(self.form.layout())?;
        Ok(match phi.fiber_at(index) {
            Some(v) => self.fiber_measure_at(index, v),
            None => AtomicSpectralMeasure::new(vec![]),
        })
    }

    /// `ν_Φ = Σ_α μ({α}) ν^α_Φ`; equal eigenvalues from different atoms are
    /// merged only when bitwise equal.
    pub fn global_measure(&self, phi: &Section) -> Result<AtomicSpectralMeasure> {
        let layout = self.form.layout();
        phi.check_layout_of(layout)?;
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for (i, v) in phi.stored() {
            let w = layout.weight_at(i);
            atoms.extend(
                self.fiber_measure_at(i, v)
                    .atoms()
                    .iter()
                    .map(|(l, m)| (*l, w * m)),
            );
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (l, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == l => last.1 += w,
                _ => merged.push((l, w)),
            }
        }
        Ok(AtomicSpectralMeasure::new(merged))
    }

    /// `E(σ) Φ`, fiber by fiber.
    pub fn resolution_apply(&self, sigma: &BorelSet, phi: &Section) -> Result<Section> {
        phi.check_layout_of(self.form.layout())?;
        Ok(phi.map_fibers(|i, v| self.fibers[i].project(sigma, v)))
    }

    /// `‖P_Δ E(σ) Φ - E(σ) P_Δ Φ‖`.
    pub fn commute_check(&self, sigma: &BorelSet, delta: &IndexSet, phi: &Section) -> Result<f64> {
        let a = self.resolution_apply(sigma, phi)?.project(delta)?;
        let b = self.resolution_apply(sigma, &phi.project(delta)?)?;
        Ok(a.sub(&b)?.norm())
    }

    /// `(TΦ)(α) = H_α Φ(α)`.
    pub fn apply_t(&self, phi: &Section) -> Result<Section> {
        phi.check_layout_of(self.form.layout())?;
        let forms = self.form.fiber_forms();
        Ok(phi.map_fibers(|i, v| &forms[i] * v))
    }

    /// Second spectral moment finite. Always true on a finite truncation;
    /// the moment itself is reported so growing truncations can be compared.
    pub fn in_domain_of_t(&self, phi: &Section) -> Result<bool> {
        Ok(self.global_measure(phi)?.moments().second.is_finite())
    }

    /// Whether `Φ = E(σ) P_Δ Φ` with μ(Δ) finite and σ compact.
    pub fn is_in_dfin(&self, phi: &Section, delta: &IndexSet, sigma: &BorelSet) -> Result<bool> {
        let space = self.form.layout().space();
        if !sigma.is_compact() || !space.measure_of(delta)?.is_finite() {
            return Ok(false);
        }
        if !phi.support().is_subset(delta) {
            return Ok(false);
        }
        let cut = self.resolution_apply(sigma, &phi.project(delta)?)?;
        let residual = cut.sub(phi)?.norm();
        Ok(residual <= DFIN_TOL * phi.norm().max(1.0))
    }

    /// The smallest obvious D_Fin witness: the support of Φ and the closed
    /// hull of the eigenvalues over that support.
    pub fn natural_dfin_witness(&self, phi: &Section) -> (IndexSet, BorelSet) {
        let support = phi.support();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for atom in support.iter() {
            if let Ok(f) = self.fiber(atom) {
                lo = lo.min(f.clusters[0].value);
                hi = hi.max(f.clusters[f.clusters.len() - 1].value);
            }
        }
        let sigma = if lo <= hi {
            BorelSet::closed(lo, hi)
        } else {
            BorelSet::empty()
        };
        (support, sigma)
    }

    /// `⟦Φ⟧² = ‖Φ‖² + Σ_α μ({α}) ∫|λ| dν^α_Φ`.
    pub fn graph_norm_sqr(&self, phi: &Section) -> Result<f64> {
        let layout = self.form.layout();
        phi.check_layout_of(layout)?;
        let spectral: f64 = phi
            .stored()
            .map(|(i, v)| layout.weight_at(i) * self.fiber_measure_at(i, v).moments().first_abs)
            .sum();
        Ok(phi.norm_sqr() + spectral)
    }

    pub fn graph_norm(&self, phi: &Section) -> Result<f64> {
        Ok(self.graph_norm_sqr(phi)?.sqrt())
    }

    /// Checks `⟦Φ⟧²_Q ≤ (1+m)⟦Φ⟧²` and `⟦Φ⟧² ≤ (1+2m)⟦Φ⟧²_Q` with
    /// `⟦Φ⟧²_Q = (1+m)‖Φ‖² + Q(Φ)`.
    pub fn norm_equivalence_check(&self, m: f64, samples: &[Section]) -> Result<NormEquivalence> {
        let found = self.min_eigenvalue();
        if found < -m - 1e-12 {
            return Err(Error::NotSemibounded { declared: m, found });
        }
        let mut worst_upper = f64::NEG_INFINITY;
        let mut worst_lower = f64::NEG_INFINITY;
        let mut holds = true;
        for phi in samples {
            let graph = self.graph_norm_sqr(phi)?;
            let q_norm = (1.0 + m) * phi.norm_sqr() + self.form.eval_q(phi)?;
            let upper = q_norm - (1.0 + m) * graph;
            let lower = graph - (1.0 + 2.0 * m) * q_norm;
            worst_upper = worst_upper.max(upper);
            worst_lower = worst_lower.max(lower);
            let slack = 1e-10 * graph.max(q_norm.abs()).max(f64::MIN_POSITIVE);
            if upper > slack || lower > slack {
                holds = false;
            }
        }
        Ok(NormEquivalence {
            holds,
            worst_upper_excess: worst_upper,
            worst_lower_excess: worst_lower,
        })
    }

    /// Evaluates `Q(Φ)` directly, through the fiber measures and through
    /// the global spectral measure, and grades the agreement.
    pub fn verify_representation(
        &self,
        phi: &Section,
        dfin_witness: Option<(&IndexSet, &BorelSet)>,
    ) -> Result<RepresentationReport> {
        let layout = self.form.layout();
        let q_direct = self.form.eval_q(phi)?;
        let q_spectral: f64 = phi
            .stored()
            .map(|(i, v)| layout.weight_at(i) * self.fiber_measure_at(i, v).moments().first)
            .sum();
        let global = self.global_measure(phi)?.moments();
        let q_global_spectral = global.first;

        let abs_error = (q_direct - q_spectral).abs();
        let spread = abs_error
            .max((q_direct - q_global_spectral).abs())
            .max((q_spectral - q_global_spectral).abs());
        let rel_error = spread / q_direct.abs().max(1.0);
        let agree = spread <= REPRESENTATION_TOL * (1.0 + q_direct.abs());
        let in_dfin = match dfin_witness {
            Some((delta, sigma)) => Some(self.is_in_dfin(phi, delta, sigma)?),
            None => None,
        };
        let in_dt = global.second.is_finite();
        let verdict = match (agree && global.first_abs.is_finite(), in_dfin) {
            (true, Some(true)) => Verdict::Strong,
            (true, None) => Verdict::Weak,
            _ => Verdict::Fail,
        };
        Ok(RepresentationReport {
            q_direct,
            q_spectral,
            q_global_spectral,
            abs_error,
            rel_error,
            moments: global,
            norm_sqr: phi.norm_sqr(),
            graph_norm: self.graph_norm(phi)?,
            in_dfin: in_dfin.unwrap_or(false),
            in_dt,
            verdict,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEquivalence {
    pub holds: bool,
    /// Largest `⟦Φ⟧²_Q - (1+m)⟦Φ⟧²`.
    pub worst_upper_excess: f64,
    /// Largest `⟦Φ⟧² - (1+2m)⟦Φ⟧²_Q`.
    pub worst_lower_excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Strong,
    Weak,
    Fail,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Strong => "strong",
            Verdict::Weak => "weak",
            Verdict::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationReport {
    pub q_direct: f64,
    /// `Σ_α μ({α}) ∫ λ dν^α_Φ`.
    pub q_spectral: f64,
    /// `∫ λ dν_Φ`.
    pub q_global_spectral: f64,
    pub abs_error: f64,
    /// Largest pairwise gap among the three values over `max(1, |q_direct|)`.
    pub rel_error: f64,
    pub moments: Moments,
    pub norm_sqr: f64,
    pub graph_norm: f64,
    pub in_dfin: bool,
    pub in_dt: bool,
    pub verdict: Verdict,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direct_integral::FiberLayout;
    use crate::measure::AtomicMeasureSpace;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn one_atom(h: CMatrix) -> SpectralModel {
        let space = AtomicMeasureSpace::counting(vec![0]).unwrap();
        let layout = Arc::new(FiberLayout::new(space, vec![h.nrows()]).unwrap());
        decompose(&DirectIntegralForm::new(layout, vec![h]).unwrap()).unwrap()
    }

    fn swap() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
    }

    fn vec2(a: f64, b: f64) -> CVector {
        CVector::from_vec(vec![c(a), c(b)])
    }

    #[test]
    fn diagonal_fiber_gives_sorted_permutation() {
        let h = CMatrix::from_diagonal(&vec2(3.0, -2.0));
        let model = one_atom(h);
        let f = &model.fibers()[0];
        assert_eq!(f.eigenvalues, vec![-2.0, 3.0]);
        assert_eq!(f.eigenvectors, CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]));
        assert_eq!(f.reconstruction_residual, 0.0);
    }

    #[test]
    fn swap_matrix_eigendata() {
        let model = one_atom(swap());
        let f = &model.fibers()[0];
        assert_abs_diff_eq!(f.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.eigenvalues[1], 1.0, epsilon = 1e-14);
        let s = 0.5f64.sqrt();
        // Columns match (1, ∓1)/√2 up to a unit phase.
        let u0 = f.eigenvectors.column(0);
        let u1 = f.eigenvectors.column(1);
        assert_abs_diff_eq!(u0.dotc(&vec2(s, -s)).norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(u1.dotc(&vec2(s, s)).norm(), 1.0, epsilon = 1e-14);

        let l = model.form().layout().clone();
        let phi = Section::extend_by_zero(&l, 0, vec2(1.0, 0.0)).unwrap();
        let nu = model.fiber_measure(0, &phi).unwrap();
        assert_eq!(nu.atoms().len(), 2);
        assert_abs_diff_eq!(nu.atoms()[0].0, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(nu.atoms()[0].1, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(nu.atoms()[1].0, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(nu.atoms()[1].1, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn eigenvector_section_is_a_point_mass() {
        let h = CMatrix::from_row_slice(2, 2, &[c(2.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0), c(-1.0)]);
        let model = one_atom(h);
        let l = model.form().layout().clone();
        let f = &model.fibers()[0];
        for j in 0..2 {
            let u = f.eigenvectors.column(j).into_owned();
            let phi = Section::extend_by_zero(&l, 0, u).unwrap();
            let nu = model.fiber_measure(0, &phi).unwrap();
            assert_eq!(nu.atoms().len(), 1);
            assert_eq!(nu.atoms()[0].0, f.eigenvalues[j]);
            assert_abs_diff_eq!(nu.atoms()[0].1, 1.0, epsilon = 1e-14);
            let t_phi = model.apply_t(&phi).unwrap();
            let expect = phi.scale(c(f.eigenvalues[j]));
            assert!(t_phi.max_abs_diff(&expect).unwrap() < 1e-14);

            let delta = IndexSet::singleton(0);
            let sigma = BorelSet::closed(f.eigenvalues[j], f.eigenvalues[j]);
            let report = model.verify_representation(&phi, Some((&delta, &sigma))).unwrap();
            assert_eq!(report.verdict, Verdict::Strong);
            assert_abs_diff_eq!(report.q_direct, f.eigenvalues[j], epsilon = 1e-13);
            assert_abs_diff_eq!(report.q_spectral, f.eigenvalues[j], epsilon = 1e-13);
            assert_abs_diff_eq!(report.q_global_spectral, f.eigenvalues[j], epsilon = 1e-13);
        }
    }

    #[test]
    fn degenerate_cluster_uses_whole_eigenspace() {
        let h = CMatrix::identity(3, 3) * c(2.0);
        let mut h = h;
        h[(2, 2)] = c(-1.0);
        h[(0, 1)] = c(1e-13);
        h[(1, 0)] = c(1e-13);
        let model = one_atom(h);
        let f = &model.fibers()[0];
        assert_eq!(f.clusters.len(), 2);
        let l = model.form().layout().clone();
        let phi = Section::extend_by_zero(&l, 0, CVector::from_vec(vec![c(1.0), c(2.0), c(0.0)])).unwrap();
        let nu = model.fiber_measure(0, &phi).unwrap();
        assert_eq!(nu.atoms().len(), 1);
        assert_abs_diff_eq!(nu.atoms()[0].1, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_section_and_empty_measure() {
        let model = one_atom(swap());
        let l = model.form().layout().clone();
        let zero = Section::zero(&l);
        let nu = model.fiber_measure(0, &zero).unwrap();
        assert!(nu.is_empty());
        assert_eq!(nu.total_mass(), 0.0);
        assert_eq!(
            nu.moments(),
            Moments {
                first: 0.0,
                first_abs: 0.0,
                second: 0.0
            }
        );
        let r = model.verify_representation(&zero, None).unwrap();
        assert_eq!((r.q_direct, r.q_spectral, r.q_global_spectral), (0.0, 0.0, 0.0));
        assert_eq!(r.verdict, Verdict::Weak);
        assert!(model.apply_t(&zero).unwrap().coords_eq(&zero));
        assert_eq!(model.graph_norm(&zero).unwrap(), 0.0);
    }

    #[test]
    fn moments_examples() {
        let m = AtomicSpectralMeasure::new(vec![(-1.0, 0.5), (1.0, 0.5)]).moments();
        assert_eq!((m.first, m.first_abs, m.second), (0.0, 1.0, 1.0));
        let m = AtomicSpectralMeasure::new(vec![(-3.0, 0.25)]).moments();
        assert_eq!((m.first, m.first_abs, m.second), (-0.75, 0.75, 2.25));
    }

    #[test]
    fn weights_near_zero_are_clamped() {
        let m = AtomicSpectralMeasure::new(vec![(1.0, -5e-15), (2.0, 1.0)]);
        assert_eq!(m.atoms(), &[(2.0, 1.0)]);
    }

    #[test]
    fn global_measure_weights_by_mu() {
        let space = AtomicMeasureSpace::new(vec![0, 1], vec![2.0, 3.0]).unwrap();
        let layout = Arc::new(FiberLayout::new(space, vec![1, 1]).unwrap());
        let form = DirectIntegralForm::new(
            layout.clone(),
            vec![CMatrix::from_element(1, 1, c(1.5)), CMatrix::from_element(1, 1, c(1.5))],
        )
        .unwrap();
        let model = decompose(&form).unwrap();
        let phi = Section::from_fibers(
            &layout,
            [(0, CVector::from_element(1, c(1.0))), (1, CVector::from_element(1, c(1.0)))],
        )
        .unwrap();
        let nu = model.global_measure(&phi).unwrap();
        assert_eq!(nu.total_mass(), 5.0);
        // Identical eigenvalues from both atoms coalesce.
        assert_eq!(nu.atoms(), &[(1.5, 5.0)]);
    }

    #[test]
    fn resolution_edge_cases() {
        let model = one_atom(swap());
        let l = model.form().layout().clone();
        let phi = Section::extend_by_zero(&l, 0, vec2(0.3, -2.0)).unwrap();
        assert!(model.resolution_apply(&BorelSet::real_line(), &phi).unwrap().coords_eq(&phi));
        let zero = Section::zero(&l);
        assert!(model.resolution_apply(&BorelSet::empty(), &phi).unwrap().coords_eq(&zero));
        let below = BorelSet::at_most(model.min_eigenvalue() - 1.0);
        assert!(model.resolution_apply(&below, &phi).unwrap().coords_eq(&zero));
        assert_eq!(model.commute_check(&below, &IndexSet::empty(), &phi).unwrap(), 0.0);
    }

    #[test]
    fn graph_norm_hand_value() {
        let model = one_atom(CMatrix::from_diagonal(&vec2(-1.0, 2.0)));
        let l = model.form().layout().clone();
        let phi = Section::extend_by_zero(&l, 0, vec2(1.0, 1.0)).unwrap();
        assert_eq!(model.graph_norm_sqr(&phi).unwrap(), 5.0);

        let pos = one_atom(CMatrix::from_diagonal(&vec2(0.5, 2.0)));
        let phi = Section::extend_by_zero(pos.form().layout(), 0, vec2(1.0, -3.0)).unwrap();
        let expect = phi.norm_sqr() + pos.form().eval_q(&phi).unwrap();
        assert_eq!(pos.graph_norm_sqr(&phi).unwrap(), expect);
    }

    #[test]
    fn norm_equivalence_examples() {
        let model = one_atom(CMatrix::from_diagonal(&vec2(-1.0, 1.0)));
        let l = model.form().layout().clone();
        let samples: Vec<Section> = [vec2(1.0, 0.0), vec2(0.0, 1.0), vec2(1.0, 1.0)]
            .into_iter()
            .map(|v| Section::extend_by_zero(&l, 0, v).unwrap())
            .collect();
        assert!(model.norm_equivalence_check(1.0, &samples).unwrap().holds);
        assert!(matches!(
            model.norm_equivalence_check(0.5, &samples),
            Err(Error::NotSemibounded { .. })
        ));

        let pos = one_atom(CMatrix::from_diagonal(&vec2(0.0, 3.0)));
        let phi = Section::extend_by_zero(pos.form().layout(), 0, vec2(2.0, 1.0)).unwrap();
        let v = pos.norm_equivalence_check(0.0, &[phi]).unwrap();
        assert!(v.holds);
        assert_eq!(v.worst_upper_excess, 0.0);
        assert_eq!(v.worst_lower_excess, 0.0);
    }

    #[test]
    fn dfin_membership() {
        let model = one_atom(CMatrix::from_diagonal(&vec2(-1.0, 1.0)));
        let l = model.form().layout().clone();
        let phi = Section::extend_by_zero(&l, 0, vec2(1.0, 0.0)).unwrap();
        let delta = IndexSet::singleton(0);
        assert!(model.is_in_dfin(&phi, &delta, &BorelSet::closed(-1.0, -1.0)).unwrap());
        assert!(!model.is_in_dfin(&phi, &delta, &BorelSet::at_most(0.0)).unwrap());
        assert!(!model.is_in_dfin(&phi, &IndexSet::empty(), &BorelSet::closed(-1.0, 1.0)).unwrap());
        let wrong = model
            .verify_representation(&phi, Some((&delta, &BorelSet::closed(1.0, 1.0))))
            .unwrap();
        assert_eq!(wrong.verdict, Verdict::Fail);
    }

    #[test]
    fn borel_set_normalization() {
        let s = BorelSet::new([
            Interval::new(0.0, 1.0, true, false),
            Interval::new(1.0, 2.0, true, false),
            Interval::new(5.0, 4.0, true, true),
        ]);
        assert_eq!(s.intervals().len(), 1);
        assert!(s.contains(1.0) && s.contains(0.0) && !s.contains(2.0));
        let gap = BorelSet::new([Interval::new(0.0, 1.0, true, false), Interval::new(1.0, 2.0, false, true)]);
        assert_eq!(gap.intervals().len(), 2);
        assert!(!gap.contains(1.0));
        assert!(BorelSet::closed(-1.0, 3.0).is_compact());
        assert!(!BorelSet::half_open(0.0, 1.0).is_compact());
        assert!(BorelSet::empty().is_compact());
        assert!(!BorelSet::real_line().contains(f64::INFINITY));
    }
}
