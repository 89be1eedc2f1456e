//! Concrete model instances.
//!
//! * [`PositionModel`]: the position operator `x` on `L²(ℝ)` cut into unit
//!   cells `I_k = [k, k+1)`, one atom per cell (counting measure), each cell
//!   sampled at `n` midpoints. The quadrature step `1/n` sits in the fiber
//!   metric, so indicator functions integrate exactly.
//! * [`SpikeFamily`]: a sequence shrinking in norm on which point evaluation
//!   stays at 1; it witnesses that point evaluation is not closable.
//! * [`geometric_tail_model`]: alternating-sign scalar fibers with
//!   geometrically decaying sections, for tail-vanishing checks.
//! * [`random_model`]: seeded random forms for the property suites.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::direct_integral::{CVector, FiberLayout, FiberMetric, Section};
use crate::error::{Error, Result};
use crate::forms::{closability_probe, CMatrix, ClosabilityVerdict, DirectIntegralForm, ProbeTolerances};
use crate::measure::{Atom, AtomicMeasureSpace, IndexSet};
use crate::sampling::{self, hermitian_with_spectrum};
use crate::spectral::{decompose, BorelSet, SpectralModel, Verdict};

#[derive(Debug, Clone)]
pub struct PositionModel {
    pub k_min: i64,
    pub k_max: i64,
    pub n_per_cell: usize,
    form: DirectIntegralForm,
}

/// Builds the truncated position model on cells `k_min..=k_max`.
pub fn position_model(k_min: i64, k_max: i64, n_per_cell: usize) -> Result<PositionModel> {
    if k_min > k_max {
        return Err(Error::BadRange(format!("k_min {k_min} > k_max {k_max}")));
    }
    if n_per_cell == 0 {
        return Err(Error::BadRange("n_per_cell must be at least 1".into()));
    }
    let atoms: Vec<Atom> = (k_min..=k_max).collect();
    let cells = atoms.len();
    let space = AtomicMeasureSpace::counting(atoms.clone())?.with_truncation_note(format!(
        "integers truncated to [{k_min}, {k_max}], {n_per_cell} midpoints per cell"
    ));
    let layout = Arc::new(FiberLayout::with_metrics(
        space,
        vec![n_per_cell; cells],
        vec![FiberMetric::Quadrature { points: n_per_cell }; cells],
    )?);
    let fiber_forms = atoms
        .iter()
        .map(|&k| {
            CMatrix::from_diagonal(&DVector::from_fn(n_per_cell, |j, _| {
                Complex64::new(grid_point(k, j, n_per_cell), 0.0)
            }))
        })
        .collect();
    Ok(PositionModel {
        k_min,
        k_max,
        n_per_cell,
        form: DirectIntegralForm::new(layout, fiber_forms)?,
    })
}

/// Midpoint `x_{k,j} = k + (j + 1/2)/n`.
pub fn grid_point(k: i64, j: usize, n: usize) -> f64 {
    k as f64 + (j as f64 + 0.5) / n as f64
}

impl PositionModel {
    pub fn form(&self) -> &DirectIntegralForm {
        &self.form
    }

    pub fn layout(&self) -> &Arc<FiberLayout> {
        self.form.layout()
    }

    /// Indicator of `[a, b)` for integers `a ≤ b` inside the truncation.
    pub fn indicator(&self, a: i64, b: i64) -> Result<Section> {
        if a > b || a < self.k_min || b > self.k_max + 1 {
            return Err(Error::BadRange(format!(
                "[{a}, {b}) is not inside [{}, {})",
                self.k_min,
                self.k_max + 1
            )));
        }
        let ones = CVector::from_element(self.n_per_cell, Complex64::new(1.0, 0.0));
        Section::from_fibers(self.layout(), (a..b).map(|k| (k, ones.clone())))
    }

    /// Samples `f` at every grid point.
    pub fn sample<F: Fn(f64) -> Complex64>(&self, f: F) -> Section {
        let n = self.n_per_cell;
        Section::from_fibers(
            self.layout(),
            (self.k_min..=self.k_max).map(|k| (k, CVector::from_fn(n, |j, _| f(grid_point(k, j, n))))),
        )
        .expect("fibers sized from the layout")
    }

    /// Largest `|q_k(Φ^k)| / (max{|k|,|k+1|} ‖Φ^k‖²_k)` over cells with
    /// nonzero fiber; the position bound says this never exceeds 1.
    pub fn fiber_bound_ratio(&self, phi: &Section) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in self.k_min..=self.k_max {
            let part = phi.project(&IndexSet::singleton(k))?;
            let nrm = part.norm_sqr();
            if nrm == 0.0 {
                continue;
            }
            let bound = (k.abs().max((k + 1).abs())) as f64 * nrm;
            let q = self.form.eval_q(&part)?.abs();
            worst = worst.max(if bound == 0.0 { f64::INFINITY } else { q / bound });
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionCheck {
    pub samples: usize,
    pub all_strong: bool,
    pub max_rel_error: f64,
    /// `E(σ)` acted as multiplication by `χ_σ` on every grid point, bitwise.
    pub indicator_action_exact: bool,
    pub fiber_bound_holds: bool,
    pub worst_fiber_bound_ratio: f64,
}

/// Runs the representation pipeline on indicators and random sections and
/// checks that the resolution of the identity is multiplication by `χ_σ`.
pub fn position_spectral_check(model: &PositionModel, seed: u64, n_random: usize) -> Result<PositionCheck> {
    let spectral = decompose(model.form())?;
    let mut rng = sampling::rng(seed);
    let mut samples = Vec::new();
    for (a, b) in [(0, 1), (-1, 0), (-1, 1)] {
        if let Ok(s) = model.indicator(a, b) {
            samples.push(s);
        }
    }
    for _ in 0..n_random {
        samples.push(sampling::random_section(&mut rng, model.layout(), 0.7));
    }

    let mut all_strong = true;
    let mut max_rel_error = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for phi in &samples {
        let (delta, sigma) = spectral.natural_dfin_witness(phi);
        let report = spectral.verify_representation(phi, Some((&delta, &sigma)))?;
        all_strong &= report.verdict == Verdict::Strong;
        max_rel_error = max_rel_error.max(report.rel_error);
        worst_ratio = worst_ratio.max(model.fiber_bound_ratio(phi)?);
    }

    let lo = model.k_min as f64 - 0.5;
    let hi = model.k_max as f64 + 1.5;
    let mut sigmas: Vec<BorelSet> = (model.k_min..=model.k_max)
        .map(|k| BorelSet::half_open(k as f64, k as f64 + 1.0))
        .collect();
    sigmas.extend((0..20).map(|_| sampling::random_borel_set(&mut rng, lo, hi)));
    let mut exact = true;
    for sigma in &sigmas {
        for phi in &samples {
            exact &= indicator_action_is_exact(model, &spectral, sigma, phi)?;
        }
    }

    Ok(PositionCheck {
        samples: samples.len(),
        all_strong,
        max_rel_error,
        indicator_action_exact: exact,
        fiber_bound_holds: worst_ratio <= 1.0,
        worst_fiber_bound_ratio: worst_ratio,
    })
}

/// `E(σ)Φ` keeps grid point `x_{k,j}` iff `x_{k,j} ∈ σ`, coordinate for coordinate.
pub fn indicator_action_is_exact(
    model: &PositionModel,
    spectral: &SpectralModel,
    sigma: &BorelSet,
    phi: &Section,
) -> Result<bool> {
    let n = model.n_per_cell;
    let cut = spectral.resolution_apply(sigma, phi)?;
    for k in model.k_min..=model.k_max {
        let before = phi.fiber(k)?;
        let after = cut.fiber(k)?;
        for j in 0..n {
            let expect = if sigma.contains(grid_point(k, j, n)) {
                before[j]
            } else {
                Complex64::new(0.0, 0.0)
            };
            if after[j] != expect {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Sections `Φ_n = χ_{[0,1/n)}` on the unit cell, `n = 1..=levels`.
#[derive(Debug, Clone)]
pub struct SpikeFamily {
    /// `Φ_n` on its own grid of `n` midpoints (fiber vector `e_1`).
    pub levels: Vec<Section>,
    /// The same functions on the common refinement with `lcm(1..=levels)` points.
    pub common: Vec<Section>,
    pub common_points: usize,
    pub verdict: ClosabilityVerdict,
}

/// Point evaluation at the left-most grid point, `Q(Φ) = |Φ(x_0)|²`.
pub fn spike_form(phi: &Section) -> Result<f64> {
    let atom = phi.layout().atom_at(0);
    Ok(phi.fiber(atom)?[0].norm_sqr())
}

/// One unit cell sampled at `points` midpoints, quadrature metric.
pub fn unit_cell_layout(points: usize) -> Result<Arc<FiberLayout>> {
    let space = AtomicMeasureSpace::counting(vec![0])?;
    Ok(Arc::new(FiberLayout::with_metrics(
        space,
        vec![points],
        vec![FiberMetric::Quadrature { points }],
    )?))
}

/// Largest level count whose common grid stays small.
pub const MAX_SPIKE_LEVELS: usize = 12;

/// Builds the spike family and runs the closability probe on it.
pub fn spike_family(n_levels: usize) -> Result<SpikeFamily> {
    if !(3..=MAX_SPIKE_LEVELS).contains(&n_levels) {
        return Err(Error::BadRange(format!(
            "spike family needs 3..={MAX_SPIKE_LEVELS} levels, got {n_levels}"
        )));
    }
    let common_points = (1..=n_levels).fold(1, lcm);
    let common_layout = unit_cell_layout(common_points)?;
    let mut levels = Vec::with_capacity(n_levels);
    let mut common = Vec::with_capacity(n_levels);
    for n in 1..=n_levels {
        let own = unit_cell_layout(n)?;
        let mut e1 = CVector::zeros(n);
        e1[0] = Complex64::new(1.0, 0.0);
        levels.push(Section::extend_by_zero(&own, 0, e1)?);
        let run = common_points / n;
        let v = CVector::from_fn(common_points, |j, _| {
            Complex64::new(if j < run { 1.0 } else { 0.0 }, 0.0)
        });
        common.push(Section::extend_by_zero(&common_layout, 0, v)?);
    }
    let tol = ProbeTolerances {
        // ‖Φ_n‖ = n^{-1/2} reaches 1/√levels ≤ 1/√3.
        norm: 0.6,
        cauchy: 1e-12,
        value: 0.5,
        window: n_levels,
    };
    let verdict = closability_probe(&spike_form, &common, tol)?;
    Ok(SpikeFamily {
        levels,
        common,
        common_points,
        verdict,
    })
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Scalar fibers over `0..=k_max` with `H_k = (-1)^k` and `Φ(k) = 2^{-k/2}`.
pub fn geometric_tail_model(k_max: i64) -> Result<(DirectIntegralForm, Section)> {
    let atoms: Vec<Atom> = (0..=k_max).collect();
    let space = AtomicMeasureSpace::counting(atoms.clone())?
        .with_truncation_note(format!("natural numbers truncated to [0, {k_max}]"));
    let layout = Arc::new(FiberLayout::new(space, vec![1; atoms.len()])?);
    let forms = atoms
        .iter()
        .map(|k| CMatrix::from_element(1, 1, Complex64::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0)))
        .collect();
    let form = DirectIntegralForm::new(layout.clone(), forms)?;
    let phi = Section::from_fibers(
        &layout,
        atoms
            .iter()
            .map(|&k| (k, CVector::from_element(1, Complex64::new(2f64.powf(-(k as f64) / 2.0), 0.0)))),
    )?;
    Ok((form, phi))
}

/// Seeded random form: weights log-uniform in `[0.1, 10]`, fiber dimensions
/// uniform in `1..=max_dim`, fiber spectra uniform in `eig_range`.
///
/// When the range straddles zero, one negative and one positive eigenvalue
/// are planted so the model is not semibounded on either side.
pub fn random_model(seed: u64, n_atoms: usize, max_dim: usize, eig_range: (f64, f64)) -> Result<DirectIntegralForm> {
    if n_atoms == 0 || max_dim == 0 {
        return Err(Error::BadRange("need at least one atom and fiber dimension one".into()));
    }
    let (lo, hi) = eig_range;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::BadRange(format!("empty eigenvalue range [{lo}, {hi}]")));
    }
    let mut rng = sampling::rng(seed);
    let weights: Vec<f64> = (0..n_atoms)
        .map(|_| rng.random_range(0.1f64.ln()..=10f64.ln()).exp())
        .collect();
    let dims: Vec<usize> = (0..n_atoms).map(|_| rng.random_range(1..=max_dim)).collect();
    let mut spectra: Vec<Vec<f64>> = dims
        .iter()
        .map(|&d| (0..d).map(|_| uniform(&mut rng, lo, hi)).collect())
        .collect();
    if lo < 0.0 && hi > 0.0 {
        spectra[0][0] = rng.random_range(lo..0.0);
        let positive = rng.random_range(f64::MIN_POSITIVE..=hi);
        if n_atoms >= 2 {
            spectra[1][0] = positive;
        } else if dims[0] >= 2 {
            spectra[0][1] = positive;
        }
    }
    let space = AtomicMeasureSpace::new((0..n_atoms as Atom).collect(), weights)?;
    let layout = Arc::new(FiberLayout::new(space, dims)?);
    let forms = spectra
        .iter()
        .map(|s| hermitian_with_spectrum(&mut rng, s))
        .collect();
    DirectIntegralForm::new(layout, forms)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::ClosabilityStatus;
    use approx::assert_abs_diff_eq;

    #[test]
    fn indicator_values() {
        for n in [1, 3, 4, 16, 64] {
            let m = position_model(-2, 2, n).unwrap();
            let q01 = m.form().eval_q(&m.indicator(0, 1).unwrap()).unwrap();
            let qm10 = m.form().eval_q(&m.indicator(-1, 0).unwrap()).unwrap();
            let qm11 = m.form().eval_q(&m.indicator(-1, 1).unwrap()).unwrap();
            assert_abs_diff_eq!(q01, 0.5, epsilon = 1e-13);
            assert_abs_diff_eq!(qm10, -0.5, epsilon = 1e-13);
            assert_abs_diff_eq!(qm11, 0.0, epsilon = 1e-13);
            let omega = m.form().omega_measure(&m.indicator(-1, 1).unwrap()).unwrap();
            assert_abs_diff_eq!(omega.value(-1).unwrap(), -0.5, epsilon = 1e-13);
            assert_abs_diff_eq!(omega.value(0).unwrap(), 0.5, epsilon = 1e-13);
        }
    }

    #[test]
    fn bad_ranges() {
        assert!(matches!(position_model(2, 1, 4), Err(Error::BadRange(_))));
        assert!(matches!(position_model(0, 1, 0), Err(Error::BadRange(_))));
        let m = position_model(0, 1, 2).unwrap();
        assert!(m.indicator(-1, 1).is_err());
    }

    #[test]
    fn spectrum_inside_cells() {
        let m = position_model(-3, 2, 5).unwrap();
        let s = decompose(m.form()).unwrap();
        for f in s.fibers() {
            let k = f.atom as f64;
            assert!(f.eigenvalues.iter().all(|x| *x >= k && *x < k + 1.0));
        }
    }

    #[test]
    fn resolution_is_characteristic_function() {
        let m = position_model(-1, 1, 4).unwrap();
        let s = decompose(m.form()).unwrap();
        let phi = m.indicator(-1, 1).unwrap();
        let cut = s.resolution_apply(&BorelSet::half_open(0.0, 1.0), &phi).unwrap();
        assert!(cut.coords_eq(&m.indicator(0, 1).unwrap()));
    }

    #[test]
    fn fiber_bound_is_approached_at_the_cell_edge() {
        let m = position_model(-3, 3, 64).unwrap();
        // Mass at the last grid point of cell k = 2: x = 2 + 63.5/64.
        let mut v = CVector::zeros(64);
        v[63] = Complex64::new(1.0, 0.0);
        let phi = Section::extend_by_zero(m.layout(), 2, v).unwrap();
        let ratio = m.fiber_bound_ratio(&phi).unwrap();
        assert_abs_diff_eq!(ratio, (2.0 + 63.5 / 64.0) / 3.0, epsilon = 1e-15);
        assert!(ratio < 1.0 && ratio > 0.99);
    }

    #[test]
    fn position_check_passes() {
        let m = position_model(-3, 3, 8).unwrap();
        let c = position_spectral_check(&m, 11, 20).unwrap();
        assert!(c.all_strong);
        assert!(c.max_rel_error <= 1e-12);
        assert!(c.indicator_action_exact);
        assert!(c.fiber_bound_holds);
    }

    #[test]
    fn midpoint_rule_converges_quadratically() {
        // Φ(x) = x + 1 on [-1, 1): ∫ x (x+1)² dx = 4/3.
        let exact = 4.0 / 3.0;
        let mut errors = Vec::new();
        for n in [2, 4, 8, 16, 32] {
            let m = position_model(-1, 0, n).unwrap();
            let phi = m.sample(|x| Complex64::new(x + 1.0, 0.0));
            errors.push((m.form().eval_q(&phi).unwrap() - exact).abs());
        }
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.9..4.1).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn spike_family_four_levels() {
        let f = spike_family(4).unwrap();
        for (i, s) in f.levels.iter().enumerate() {
            assert_eq!(s.norm_sqr(), 1.0 / (i + 1) as f64);
            assert_eq!(spike_form(s).unwrap(), 1.0);
        }
        for (i, s) in f.common.iter().enumerate() {
            assert_eq!(s.norm_sqr(), 1.0 / (i + 1) as f64);
        }
        assert_eq!(f.common_points, 12);
        assert!(f.verdict.evidence.pair_differences.iter().all(|(_, _, d)| *d == 0.0));
        assert_eq!(f.verdict.status, ClosabilityStatus::Violation);
        assert!(spike_family(2).is_err());
    }

    #[test]
    fn geometric_tail_bound() {
        let (form, phi) = geometric_tail_model(60).unwrap();
        for n in 1..=20i64 {
            let tail: IndexSet = (n..=60).collect();
            let q = form.eval_q(&phi.project(&tail).unwrap()).unwrap();
            assert!(q.abs() <= 2f64.powi(1 - n as i32));
        }
    }

    #[test]
    fn random_model_is_deterministic_and_straddles_zero() {
        let a = random_model(17, 6, 4, (-5.0, 5.0)).unwrap();
        let b = random_model(17, 6, 4, (-5.0, 5.0)).unwrap();
        assert_eq!(a.fiber_forms(), b.fiber_forms());
        assert_eq!(a.layout(), b.layout());
        let s = decompose(&a).unwrap();
        assert!(s.m_below < 0.0 && s.m_above > 0.0);
        for w in a.layout().space().weights() {
            assert!((0.1..=10.0).contains(w));
        }
    }

    #[test]
    fn scalar_random_model() {
        let form = random_model(2, 1, 1, (-3.0, 3.0)).unwrap();
        let mu = form.layout().space().weights()[0];
        let lambda = form.fiber_forms()[0][(0, 0)].re;
        let phi = Section::extend_by_zero(form.layout(), 0, CVector::from_element(1, Complex64::new(0.5, 2.0))).unwrap();
        assert_abs_diff_eq!(form.eval_q(&phi).unwrap(), mu * lambda * 4.25, epsilon = 1e-13);
    }
}
