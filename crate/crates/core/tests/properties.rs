use diforms::forms::{check_orthogonal_additivity, polarize};
use diforms::group::{builtin, invariance_check, operator_from_coefficients, random_invariant_coefficients, regular_rep, BUILTIN_NAMES};
use diforms::models::random_model;
use diforms::sampling::{self, random_borel_set, random_index_set, random_partition, random_section};
use diforms::spectral::{Interval, SpectralModel};
use diforms::{decompose, BorelSet, CMatrix, DirectIntegralForm, Section};
use num_complex::Complex64;
use proptest::prelude::*;

struct Case {
    form: DirectIntegralForm,
    spectral: SpectralModel,
    rng: sampling::SeededRng,
}

fn case(seed: u64, atoms: usize, dim: usize) -> Case {
    let form = random_model(seed, atoms, dim, (-10.0, 10.0)).unwrap();
    let spectral = decompose(&form).unwrap();
    Case {
        form,
        spectral,
        rng: sampling::rng(seed.wrapping_mul(31).wrapping_add(7)),
    }
}

impl Case {
    fn section(&mut self) -> Section {
        random_section(&mut self.rng, self.form.layout(), 0.8)
    }
}

/// Assembles `Σ_α μ_α <Φ_α, H_α Φ_α>` by explicit entry loops.
fn dense_oracle(form: &DirectIntegralForm, phi: &Section, psi: &Section) -> Complex64 {
    let layout = form.layout();
    let mut total = Complex64::new(0.0, 0.0);
    for (i, h) in form.fiber_forms().iter().enumerate() {
        let atom = layout.atom_at(i);
        let u = phi.fiber(atom).unwrap();
        let v = psi.fiber(atom).unwrap();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..h.nrows() {
            for c in 0..h.ncols() {
                acc += u[r].conj() * h[(r, c)] * v[c];
            }
        }
        total += layout.metric_at(i).scale(acc) * layout.weight_at(i);
    }
    total
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn form_matches_dense_oracle(seed in any::<u64>(), atoms in 1usize..=12, dim in 1usize..=8) {
        let mut c = case(seed, atoms, dim);
        let (phi, psi) = (c.section(), c.section());
        let oracle = dense_oracle(&c.form, &phi, &psi);
        let s = c.form.eval_sesq(&phi, &psi).unwrap();
        prop_assert!((s - oracle).norm() <= 1e-11 * (1.0 + oracle.norm()));
        let q = c.form.eval_q(&phi).unwrap();
        prop_assert!(rel(q, dense_oracle(&c.form, &phi, &phi).re) <= 1e-11);
    }

    #[test]
    fn sesquilinear_form_is_hermitian(seed in any::<u64>(), atoms in 1usize..=8) {
        let mut c = case(seed, atoms, 5);
        let (phi, psi) = (c.section(), c.section());
        let a = c.form.eval_sesq(&phi, &psi).unwrap();
        let b = c.form.eval_sesq(&psi, &phi).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-11 * (1.0 + a.norm()));
    }

    #[test]
    fn polarization_recovers_the_sesquilinear_form(seed in any::<u64>(), atoms in 1usize..=10) {
        let mut c = case(seed, atoms, 6);
        let (phi, psi) = (c.section(), c.section());
        let form = &c.form;
        let q = |s: &Section| form.eval_q(s);
        let p = polarize(&q, &phi, &psi).unwrap();
        let s = form.eval_sesq(&phi, &psi).unwrap();
        prop_assert!((p - s).norm() <= 1e-11 * s.norm().max(1.0));
    }

    #[test]
    fn orthogonal_additivity_on_random_partitions(seed in any::<u64>(), atoms in 1usize..=12, parts in 1usize..=6) {
        let mut c = case(seed, atoms, 4);
        let phi = c.section();
        let delta = random_index_set(&mut c.rng, c.form.layout().space(), 0.7);
        let partition = random_partition(&mut c.rng, &delta, parts);
        let form = &c.form;
        let q = |s: &Section| form.eval_q(s);
        prop_assert!(check_orthogonal_additivity(&q, &phi, &partition, 1e-11).unwrap().holds);
    }

    #[test]
    fn resolution_is_additive_and_complete(seed in any::<u64>(), atoms in 1usize..=8, cut in -10.0f64..10.0) {
        let mut c = case(seed, atoms, 5);
        let phi = c.section();
        let whole = c.spectral.resolution_apply(&BorelSet::real_line(), &phi).unwrap();
        prop_assert!(whole.max_abs_diff(&phi).unwrap() <= 1e-11 * (1.0 + phi.norm()));
        let below = c.spectral.resolution_apply(&BorelSet::at_most(cut), &phi).unwrap();
        let above = c.spectral.resolution_apply(&BorelSet::new([Interval::new(cut, f64::INFINITY, false, false)]), &phi).unwrap();
        prop_assert!(below.add(&above).unwrap().max_abs_diff(&phi).unwrap() <= 1e-11 * (1.0 + phi.norm()));
    }

    #[test]
    fn restricted_spectral_measure_is_consistent(seed in any::<u64>(), atoms in 1usize..=10) {
        let mut c = case(seed, atoms, 4);
        let phi = c.section();
        let delta = random_index_set(&mut c.rng, c.form.layout().space(), 0.6);
        let sigma = random_borel_set(&mut c.rng, -10.0, 10.0);
        let projected = phi.project(&delta).unwrap();
        let global = c.spectral.global_measure(&projected).unwrap().mass_on(&sigma);
        let space = c.form.layout().space();
        let fiberwise: f64 = delta
            .iter()
            .map(|a| space.weight(a).unwrap() * c.spectral.fiber_measure(a, &phi).unwrap().mass_on(&sigma))
            .sum();
        prop_assert!(rel(global, fiberwise) <= 1e-11);
        let second_full = c.spectral.global_measure(&phi).unwrap().moments().second;
        let second_cut = c.spectral.global_measure(&projected).unwrap().moments().second;
        prop_assert!(second_cut <= second_full * (1.0 + 1e-12));
    }

    #[test]
    fn graph_norm_bounds(seed in any::<u64>(), atoms in 1usize..=10) {
        let mut c = case(seed, atoms, 5);
        let (phi, psi) = (c.section(), c.section());
        let s = &c.spectral;
        let (gp, gs) = (s.graph_norm(&phi).unwrap(), s.graph_norm(&psi).unwrap());
        let (qp, qs) = (c.form.eval_q(&phi).unwrap(), c.form.eval_q(&psi).unwrap());
        prop_assert!(qp.abs() <= gp * gp * (1.0 + 1e-12));
        let rhs = (gp + gs) * s.graph_norm(&phi.sub(&psi).unwrap()).unwrap();
        prop_assert!((qp - qs).abs() <= rhs + 1e-9);
    }

    #[test]
    fn group_forms_are_invariant(index in 0usize..BUILTIN_NAMES.len(), seed in any::<u64>()) {
        let g = builtin(BUILTIN_NAMES[index]).unwrap();
        let rep = regular_rep(&g);
        let mut rng = sampling::rng(seed);
        let coefficients = random_invariant_coefficients(&mut rng, &g, seed % 2 == 0);
        let t: CMatrix = operator_from_coefficients(&rep, &coefficients).unwrap();
        let samples: Vec<_> = (0..4).map(|_| sampling::random_vector(&mut rng, g.order())).collect();
        prop_assert!(invariance_check(&t, &rep, &samples) <= 1e-11);
    }
}
