//! Hermitean quadratic forms on the direct integral.
//!
//! [`DirectIntegralForm`] is the white-box form `Q(Φ) = Σ_α μ({α}) <Φ(α), H_α Φ(α)>_α`
//! built from Hermitian fiber matrices. Everything else in this module works
//! with any [`QuadraticForm`] provider, so that orthogonal additivity,
//! closability and the generalized Cauchy-Schwarz bound can be probed on
//! forms that are only available as a function of the section.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::direct_integral::{same_layout, CVector, FiberLayout, Section};
use crate::error::{Error, Result};
use crate::measure::{Atom, IndexSet, Partition};

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance used by the additivity and polarization checks.
pub const DEFAULT_REL_TOL: f64 = 1e-11;
/// Absolute floor paired with [`DEFAULT_REL_TOL`].
pub const DEFAULT_ABS_FLOOR: f64 = 1e-12;

const HERMITIAN_TOL: f64 = 1e-12;

/// A Hermitean quadratic form, given through its diagonal.
pub trait QuadraticForm {
    fn eval(&self, phi: &Section) -> Result<f64>;

    /// The sesquilinear form, recovered by polarization unless the
    /// implementor has direct access to it.
    fn sesq(&self, phi: &Section, psi: &Section) -> Result<Complex64> {
        polarize(self, phi, psi)
    }
}

impl<F> QuadraticForm for F
where
    F: Fn(&Section) -> Result<f64>,
{
    fn eval(&self, phi: &Section) -> Result<f64> {
        self(phi)
    }
}

/// Largest entry of `|H - H*|`.
pub fn hermitian_deviation(h: &CMatrix) -> f64 {
    let mut dev = 0.0f64;
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            dev = dev.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn max_abs_entry(h: &CMatrix) -> f64 {
    h.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Extremes of the weighted fiber form `μ({α}) H_α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSemibound {
    pub lower: f64,
    pub upper: f64,
}

impl FiberSemibound {
    /// `m_α = -min(0, λ_min(μ H_α))`, the semibound from below.
    pub fn m(&self) -> f64 {
        -self.lower.min(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct DirectIntegralForm {
    layout: Arc<FiberLayout>,
    fiber_forms: Vec<CMatrix>,
    semibounds: Vec<FiberSemibound>,
}

impl DirectIntegralForm {
    /// Validates shapes and Hermiticity, then records per-fiber semibounds.
    pub fn new(layout: Arc<FiberLayout>, fiber_forms: Vec<CMatrix>) -> Result<Self> {
        let form = Self::new_unchecked(layout, fiber_forms)?;
        for (i, h) in form.fiber_forms.iter().enumerate() {
            let dev = hermitian_deviation(h);
            if dev > HERMITIAN_TOL * (1.0 + max_abs_entry(h)) {
                return Err(Error::NonHermitianForm {
                    atom: form.layout.atom_at(i),
                    deviation: dev,
                });
            }
        }
        Ok(form)
    }

    /// Checks shapes only. Evaluation still rejects asymmetric fibers.
    pub fn new_unchecked(layout: Arc<FiberLayout>, fiber_forms: Vec<CMatrix>) -> Result<Self> {
        if fiber_forms.len() != layout.len() {
            return Err(Error::LengthMismatch {
                what: "fiber matrices vs atoms",
                expected: layout.len(),
                got: fiber_forms.len(),
            });
        }
        for (i, h) in fiber_forms.iter().enumerate() {
            let d = layout.dims()[i];
            if h.nrows() != d || h.ncols() != d {
                return Err(Error::DimensionMismatch {
                    atom: layout.atom_at(i),
                    expected: d,
                    got: h.nrows().max(h.ncols()),
                });
            }
        }
        let semibounds = fiber_forms
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let hermitian = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
                let eig = hermitian.symmetric_eigenvalues();
                let w = layout.weight_at(i);
                let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                FiberSemibound {
                    lower: w * lo,
                    upper: w * hi,
                }
            })
            .collect();
        Ok(Self {
            layout,
            fiber_forms,
            semibounds,
        })
    }

    pub fn layout(&self) -> &Arc<FiberLayout> {
        &self.layout
    }

    pub fn fiber_forms(&self) -> &[CMatrix] {
        &self.fiber_forms
    }

    pub fn fiber_form(&self, atom: Atom) -> Result<&CMatrix> {
        Ok(&self.fiber_forms[self.layout.space().index_of(atom)?])
    }

    pub fn semibounds(&self) -> &[FiberSemibound] {
        &self.semibounds
    }

    fn check_layout(&self, phi: &Section) -> Result<()> {
        if same_layout(&self.layout, phi.layout()) {
            Ok(())
        } else {
            Err(Error::LayoutMismatch)
        }
    }

    /// `<u, H_α v>_α` at atom position `index` (unweighted by μ).
    pub fn fiber_pairing(&self, index: usize, u: &CVector, v: &CVector) -> Complex64 {
        let hv = &self.fiber_forms[index] * v;
        self.layout.fiber_inner(index, u, &hv)
    }

    /// `<v, H_α v>_α`, with the imaginary residue checked and dropped.
    fn fiber_value(&self, index: usize, v: &CVector) -> Result<f64> {
        let z = self.fiber_pairing(index, v, v);
        let scale = 1.0 + max_abs_entry(&self.fiber_forms[index]) * self.layout.fiber_norm_sqr(index, v);
        if z.im.abs() > HERMITIAN_TOL * scale {
            return Err(Error::NonHermitianForm {
                atom: self.layout.atom_at(index),
                deviation: z.im.abs(),
            });
        }
        Ok(z.re)
    }

    /// `Q(Φ) = Σ_α μ({α}) <Φ(α), H_α Φ(α)>_α`.
    pub fn eval_q(&self, phi: &Section) -> Result<f64> {
        self.check_layout(phi)?;
        let mut acc = 0.0;
        for (i, v) in phi.stored() {
            acc += self.layout.weight_at(i) * self.fiber_value(i, v)?;
        }
        Ok(acc)
    }

    /// `Q(Φ, Ψ) = Σ_α μ({α}) <Φ(α), H_α Ψ(α)>_α`.
    pub fn eval_sesq(&self, phi: &Section, psi: &Section) -> Result<Complex64> {
        self.check_layout(phi)?;
        self.check_layout(psi)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, u) in phi.stored() {
            if let Some(v) = psi.fiber_at(i) {
                acc += self.fiber_pairing(i, u, v) * self.layout.weight_at(i);
            }
        }
        Ok(acc)
    }

    /// The signed measure `Δ ↦ Q(P_Δ Φ)` on singletons.
    pub fn omega_measure(&self, phi: &Section) -> Result<SignedAtomicMeasure> {
        self.check_layout(phi)?;
        let mut values = vec![0.0; self.layout.len()];
        for (i, v) in phi.stored() {
            values[i] = self.layout.weight_at(i) * self.fiber_value(i, v)?;
        }
        Ok(SignedAtomicMeasure::new(
            self.layout.space().atoms().to_vec(),
            values,
        ))
    }

    /// Radon-Nikodym density `ω_Φ(α) = <Φ(α), H_α Φ(α)>_α` of `Ω_Φ` w.r.t. μ.
    pub fn density(&self, phi: &Section) -> Result<Density> {
        self.check_layout(phi)?;
        let mut values = vec![0.0; self.layout.len()];
        for (i, v) in phi.stored() {
            values[i] = self.fiber_value(i, v)?;
        }
        Ok(Density {
            atoms: self.layout.space().atoms().to_vec(),
            values,
        })
    }
}

impl QuadraticForm for DirectIntegralForm {
    fn eval(&self, phi: &Section) -> Result<f64> {
        self.eval_q(phi)
    }

    fn sesq(&self, phi: &Section, psi: &Section) -> Result<Complex64> {
        self.eval_sesq(phi, psi)
    }
}

/// A real measure on a finite atom set.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedAtomicMeasure {
    atoms: Vec<Atom>,
    values: Vec<f64>,
    total_variation: f64,
}

impl SignedAtomicMeasure {
    pub fn new(atoms: Vec<Atom>, values: Vec<f64>) -> Self {
        let total_variation = values.iter().map(|v| v.abs()).sum();
        Self {
            atoms,
            values,
            total_variation,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `|Ω|(A)`.
    pub fn total_variation(&self) -> f64 {
        self.total_variation
    }

    /// `Ω(A)`.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn value(&self, atom: Atom) -> Option<f64> {
        self.atoms
            .iter()
            .position(|&a| a == atom)
            .map(|i| self.values[i])
    }

    /// `Ω(Δ)`, summed in atom order; atoms unknown to the measure count as zero.
    pub fn measure_of(&self, delta: &IndexSet) -> f64 {
        self.atoms
            .iter()
            .zip(&self.values)
            .filter(|(a, _)| delta.contains(**a))
            .map(|(_, v)| *v)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub atoms: Vec<Atom>,
    pub values: Vec<f64>,
}

impl Density {
    /// `∫_Δ ω dμ`.
    pub fn integrate(&self, layout: &FiberLayout, delta: &IndexSet) -> f64 {
        self.atoms
            .iter()
            .zip(&self.values)
            .enumerate()
            .filter(|(_, (a, _))| delta.contains(**a))
            .map(|(i, (_, w))| w * layout.weight_at(i))
            .sum()
    }
}

/// Recovers `Q(Φ, Ψ)` from the diagonal.
///
/// With conjugate-linearity in the first slot this reads
/// `(1/4)[Q(Φ+Ψ) - Q(Φ-Ψ) - i Q(Φ+iΨ) + i Q(Φ-iΨ)]`.
pub fn polarize<Q: QuadraticForm + ?Sized>(
    q: &Q,
    phi: &Section,
    psi: &Section,
) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let plus = q.eval(&phi.axpy(one, psi)?)?;
    let minus = q.eval(&phi.axpy(-one, psi)?)?;
    let plus_i = q.eval(&phi.axpy(i, psi)?)?;
    let minus_i = q.eval(&phi.axpy(-i, psi)?)?;
    Ok(Complex64::new(plus - minus, minus_i - plus_i) * 0.25)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdditivityCheck {
    pub whole: f64,
    pub parts: Vec<f64>,
    pub residual: f64,
    pub holds: bool,
}

/// Compares `Q(P_Δ Φ)` with `Σ_i Q(P_{Δ_i} Φ)` over a finite partition.
pub fn check_orthogonal_additivity<Q: QuadraticForm + ?Sized>(
    q: &Q,
    phi: &Section,
    partition: &Partition,
    rel_tol: f64,
) -> Result<AdditivityCheck> {
    if let Some(defect) = partition.defect() {
        return Err(Error::InvalidPartition(defect.to_string()));
    }
    let whole = q.eval(&phi.project(&partition.parent)?)?;
    let parts = partition
        .parts
        .iter()
        .map(|d| q.eval(&phi.project(d)?))
        .collect::<Result<Vec<_>>>()?;
    let residual = (whole - parts.iter().sum::<f64>()).abs();
    Ok(AdditivityCheck {
        whole,
        holds: residual <= rel_tol * (1.0 + whole.abs()),
        parts,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    /// `|Q(P_{Δ(n)} Φ)|` for each tail.
    pub magnitudes: Vec<f64>,
    /// First tail whose magnitude is at or below the tolerance.
    pub first_below: Option<usize>,
    /// Whether the last tail is at or below the tolerance.
    pub vanished: bool,
}

/// Evaluates `|Q(P_{Δ(n)} Φ)|` along nested decreasing tails.
pub fn check_tail_vanishing<Q: QuadraticForm + ?Sized>(
    q: &Q,
    phi: &Section,
    tails: &[IndexSet],
    tol: f64,
) -> Result<TailReport> {
    for (n, pair) in tails.windows(2).enumerate() {
        if !pair[1].is_subset(&pair[0]) {
            return Err(Error::NonNestedTails(n + 1, n));
        }
    }
    let magnitudes = tails
        .iter()
        .map(|t| Ok(q.eval(&phi.project(t)?)?.abs()))
        .collect::<Result<Vec<f64>>>()?;
    let first_below = magnitudes.iter().position(|m| *m <= tol);
    let vanished = magnitudes.last().is_none_or(|m| *m <= tol);
    Ok(TailReport {
        magnitudes,
        first_below,
        vanished,
    })
}

/// `Q(P_{Δ1} Φ, P_{Δ2} Ψ)` for disjoint Δ1, Δ2.
pub fn cross_term<Q: QuadraticForm + ?Sized>(
    q: &Q,
    delta1: &IndexSet,
    delta2: &IndexSet,
    phi: &Section,
    psi: &Section,
) -> Result<Complex64> {
    if let Some(a) = delta1.first_overlap(delta2) {
        return Err(Error::OverlappingSets(a));
    }
    q.sesq(&phi.project(delta1)?, &psi.project(delta2)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsbVerdict {
    pub holds: bool,
    /// Largest `|Q(Φ,Ψ)| - M √h(Φ) √h(Ψ)` seen.
    pub worst_excess: f64,
    pub violations: Vec<usize>,
}

/// Slack added to the right-hand side of the Cauchy-Schwarz bound.
pub const CSB_SLACK: f64 = 1e-10;

/// Checks `|Q(Φ,Ψ)| ≤ M √h(Φ) √h(Ψ)` on sample pairs, after confirming the
/// precondition `|Q(Φ)| ≤ M h(Φ)` on every sampled section.
pub fn csb_check<Q, H>(q: &Q, h: &H, m: f64, samples: &[(Section, Section)]) -> Result<CsbVerdict>
where
    Q: QuadraticForm + ?Sized,
    H: Fn(&Section) -> Result<f64>,
{
    let mut hv = Vec::with_capacity(samples.len());
    for (idx, (phi, psi)) in samples.iter().enumerate() {
        let mut pair = [0.0; 2];
        for (slot, s) in [phi, psi].into_iter().enumerate() {
            let hs = h(s)?;
            if hs < 0.0 {
                return Err(Error::PreconditionViolated {
                    index: idx,
                    detail: format!("h is negative ({hs:e})"),
                });
            }
            let qs = q.eval(s)?;
            if qs.abs() > m * hs + CSB_SLACK * (1.0 + m * hs) {
                return Err(Error::PreconditionViolated {
                    index: idx,
                    detail: format!("|Q| = {:e} exceeds M*h = {:e}", qs.abs(), m * hs),
                });
            }
            pair[slot] = hs;
        }
        hv.push(pair);
    }
    let mut worst_excess = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for (idx, ((phi, psi), [hp, hq])) in samples.iter().zip(hv).enumerate() {
        let lhs = q.sesq(phi, psi)?.norm();
        let rhs = m * hp.sqrt() * hq.sqrt();
        let excess = lhs - rhs;
        worst_excess = worst_excess.max(excess);
        if excess > CSB_SLACK {
            violations.push(idx);
        }
    }
    Ok(CsbVerdict {
        holds: violations.is_empty(),
        worst_excess,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeTolerances {
    /// The last norm must be at or below this.
    pub norm: f64,
    /// Bound on `|Q(Φ_n - Φ_m)|` over pairs in the trailing window.
    pub cauchy: f64,
    /// `|Q(Φ_n)|` must stay at or above this on the window for a violation.
    pub value: f64,
    /// Number of trailing sequence members examined.
    pub window: usize,
}

impl Default for ProbeTolerances {
    fn default() -> Self {
        Self {
            norm: 0.5,
            cauchy: 1e-9,
            value: 0.5,
            window: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosabilityStatus {
    Consistent,
    Violation,
}

impl ClosabilityStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClosabilityStatus::Consistent => "consistent",
            ClosabilityStatus::Violation => "violation",
        }
    }
}

/// What the probe observed along the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeEvidence {
    pub norms: Vec<f64>,
    pub values: Vec<f64>,
    /// `|Q(Φ_n - Φ_m)|` for window pairs `(n, m)`, `n < m`.
    pub pair_differences: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosabilityVerdict {
    pub status: ClosabilityStatus,
    pub evidence: ProbeEvidence,
}

impl ClosabilityVerdict {
    /// The evidence, when it certifies a violation.
    pub fn witness(&self) -> Option<&ProbeEvidence> {
        (self.status == ClosabilityStatus::Violation).then_some(&self.evidence)
    }
}

/// Looks for a sequence with `Φ_n → 0`, `Q(Φ_n - Φ_m) → 0` but `Q(Φ_n) ↛ 0`.
///
/// Finite evidence can only falsify closability; a `Consistent` status means
/// the sequence is not a witness, nothing more.
pub fn closability_probe<Q: QuadraticForm + ?Sized>(
    q: &Q,
    sequence: &[Section],
    tol: ProbeTolerances,
) -> Result<ClosabilityVerdict> {
    let norms: Vec<f64> = sequence.iter().map(Section::norm).collect();
    let values = sequence
        .iter()
        .map(|s| q.eval(s))
        .collect::<Result<Vec<f64>>>()?;
    let start = sequence.len().saturating_sub(tol.window.max(1));
    let mut pair_differences = Vec::new();
    for n in start..sequence.len() {
        for m in n + 1..sequence.len() {
            let d = q.eval(&sequence[n].sub(&sequence[m])?)?.abs();
            pair_differences.push((n, m, d));
        }
    }

    let shrinking = norms.windows(2).all(|w| w[1] <= w[0])
        && norms.last().is_some_and(|n| *n <= tol.norm);
    let cauchy = pair_differences.iter().all(|(_, _, d)| *d <= tol.cauchy);
    let persistent = values[start..].iter().all(|v| v.abs() >= tol.value);

    let status = if shrinking && cauchy && persistent {
        ClosabilityStatus::Violation
    } else {
        ClosabilityStatus::Consistent
    };
    Ok(ClosabilityVerdict {
        status,
        evidence: ProbeEvidence {
            norms,
            values,
            pair_differences,
        },
    })
}
