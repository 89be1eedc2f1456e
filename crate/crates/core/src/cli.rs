//! Commands behind the `diforms` binary. Each returns a JSON report and a
//! pass flag; errors carry the process exit code.

use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::config::{self, build, build_group_context, complexes, BuiltModel, CoefficientFile, GroupContext, ModelConfig};
use crate::direct_integral::Section;
use crate::error::Error;
use crate::forms::{
    check_orthogonal_additivity, check_tail_vanishing, closability_probe, csb_check, cross_term, ProbeTolerances,
    DEFAULT_REL_TOL,
};
use crate::group::{cross_isotypic_vanish, intertwiner_space, invariance_check, PROJECTION_TOL};
use crate::measure::IndexSet;
use crate::models::spike_family;
use crate::report::{self, real, reals};
use crate::sampling;
use crate::spectral::{decompose, SpectralModel, Verdict, REPRESENTATION_TOL};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub timestamp: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            tolerance: None,
            seed: 0,
            timestamp: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            EXIT_OK
        } else {
            EXIT_FAILURE
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotInvariant(_) | Error::NotHermitianCoefficients(_) => EXIT_FAILURE,
            _ => EXIT_USAGE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: String) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Oa,
    Tails,
    Closability,
    Csb,
    Norms,
}

impl Suite {
    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Oa => "oa",
            Suite::Tails => "tails",
            Suite::Closability => "closability",
            Suite::Csb => "csb",
            Suite::Norms => "norms",
        }
    }
}

pub fn load_config(path: &Path) -> Result<ModelConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    ModelConfig::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn header(command: &str, kind: &str, opts: &Options, tolerance: f64) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("kind".into(), json!(kind));
    m.insert("seed".into(), json!(opts.seed));
    m.insert("tolerance".into(), real(tolerance));
    m
}

fn model_summary(model: &BuiltModel, spectral: &SpectralModel) -> Value {
    let layout = model.form.layout();
    let space = layout.space();
    json!({
        "atoms": space.atoms(),
        "weights": reals(space.weights()),
        "dims": layout.dims(),
        "truncation": space.truncation_note(),
        "m_below": real(spectral.m_below),
        "m_above": real(spectral.m_above),
        "spectra": report::spectra(spectral),
    })
}

/// Verdicts for every sample section; a section passes when its verdict is
/// strong or weak and its relative error is within `tolerance`.
fn represent_sections(spectral: &SpectralModel, model: &BuiltModel, tolerance: f64) -> Result<(Value, bool), CliError> {
    let mut all = true;
    let mut out = Vec::new();
    for (label, phi) in &model.sections {
        let (delta, sigma) = spectral.natural_dfin_witness(phi);
        let r = spectral.verify_representation(phi, Some((&delta, &sigma)))?;
        let ok = r.verdict != Verdict::Fail && r.rel_error <= tolerance;
        all &= ok;
        let mut v = report::representation(label, &r);
        v.as_object_mut().unwrap().insert("passed".into(), json!(ok));
        out.push(v);
    }
    Ok((Value::Array(out), all))
}

pub fn cmd_represent(config_path: &Path, opts: &Options) -> Result<Outcome, CliError> {
    let cfg = load_config(config_path)?;
    let model = build(&cfg, base_dir(config_path), opts.seed)?;
    let tolerance = opts.tolerance.or(cfg.tolerance).unwrap_or(REPRESENTATION_TOL);
    represent_model(&model, opts, tolerance, "represent")
}

fn represent_model(model: &BuiltModel, opts: &Options, tolerance: f64, command: &str) -> Result<Outcome, CliError> {
    let spectral = decompose(&model.form)?;
    let mut rep = header(command, model.kind, opts, tolerance);
    rep.insert("model".into(), model_summary(model, &spectral));
    let mut passed = true;
    if let Some(ctx) = &model.group {
        let (block, ok) = group_block(ctx, &spectral, opts.seed)?;
        rep.insert("group".into(), block);
        passed &= ok;
    }
    let (sections, ok) = represent_sections(&spectral, model, tolerance)?;
    passed &= ok;
    rep.insert("sections".into(), sections);
    rep.insert("passed".into(), json!(passed));
    Ok(Outcome {
        report: report::finish(rep, opts.timestamp),
        passed,
    })
}

/// Decomposition certificates, invariance and cross-isotypic terms.
fn group_block(ctx: &GroupContext, spectral: &SpectralModel, seed: u64) -> Result<(Value, bool), CliError> {
    let d = &ctx.decomposition;
    let n = ctx.group.order();
    let mut rng = sampling::rng(seed ^ 0x9e37);
    let vectors: Vec<_> = (0..20).map(|_| sampling::random_vector(&mut rng, n)).collect();
    let pairs: Vec<_> = vectors.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    let t = &ctx.invariant.operator;

    let mut intertwiners = Vec::new();
    let mut cross_max = 0.0f64;
    let mut disjoint = true;
    for a in 0..d.len() {
        for b in a + 1..d.len() {
            let s = intertwiner_space(&d.restrict(a, &ctx.rep.left), &d.restrict(b, &ctx.rep.left))?;
            disjoint &= s.dimension() == 0;
            intertwiners.push(json!([a, b, s.dimension()]));
            let c = cross_isotypic_vanish(
                t,
                d,
                &IndexSet::singleton(a as i64),
                &IndexSet::singleton(b as i64),
                &pairs,
            )?;
            cross_max = cross_max.max(c);
        }
    }
    let invariance = invariance_check(t, &ctx.rep, &vectors);
    let mut eigenvalues: Vec<f64> = spectral
        .fibers()
        .iter()
        .flat_map(|f| f.eigenvalues.iter().copied())
        .collect();
    eigenvalues.sort_by(f64::total_cmp);
    let semibounded = eigenvalues.first().is_some_and(|x| *x >= 0.0) || eigenvalues.last().is_some_and(|x| *x <= 0.0);
    let class_sizes: Vec<usize> = ctx.group.conjugacy_classes().iter().map(Vec::len).collect();
    let res = &d.residuals;
    let ok = res.max() <= PROJECTION_TOL && disjoint && cross_max <= 1e-10 && invariance <= 1e-11;
    let block = json!({
        "order": n,
        "class_sizes": class_sizes,
        "ranks": d.ranks,
        "multiplicities": d.multiplicities,
        "decomposition_attempts": d.attempts,
        "projection_residuals": {
            "idempotent": real(res.idempotent),
            "hermitian": real(res.hermitian),
            "orthogonal": real(res.orthogonal),
            "complete": real(res.complete),
            "central": real(res.central),
        },
        "intertwiner_dimensions": intertwiners,
        "coefficients": ctx.coefficients.iter().map(|c| report::complex(*c)).collect::<Vec<_>>(),
        "commutation_residual": real(ctx.invariant.invariance_residual),
        "invariance_residual": real(invariance),
        "cross_term_max": real(cross_max),
        "eigenvalues": reals(&eigenvalues),
        "semibounded": semibounded,
        "passed": ok,
    });
    Ok((block, ok))
}

/// `cayley` is a built-in group name or a table path; the optional
/// coefficient file holds `coefficients` and `left_coefficients`.
pub fn cmd_group(cayley: &str, coefficients: Option<&Path>, opts: &Options) -> Result<Outcome, CliError> {
    let group = config::load_group(cayley, Path::new("."))?;
    let (right, left) = match coefficients {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            let file: CoefficientFile =
                serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            (
                Some(complexes(&file.coefficients)),
                file.left_coefficients.as_deref().map(complexes),
            )
        }
        None => (None, None),
    };
    let ctx = build_group_context(group, right, left, opts.seed)?;
    let form = ctx.invariant.form.clone();
    let layout = form.layout().clone();
    let mut rng = sampling::rng(opts.seed);
    let sections = (0..config::DEFAULT_RANDOM_SECTIONS)
        .map(|i| {
            let v = sampling::random_vector(&mut rng, ctx.group.order());
            Ok((format!("random[{i}]"), ctx.decomposition.to_section(&layout, &v)?))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let model = BuiltModel {
        kind: "group",
        form,
        sections,
        group: Some(ctx),
    };
    represent_model(&model, opts, opts.tolerance.unwrap_or(REPRESENTATION_TOL), "group")
}

const OA_TRIALS: usize = 100;
const CSB_PAIRS: usize = 200;
const NORM_SAMPLES: usize = 100;
const SPIKE_LEVELS: usize = 8;

pub fn cmd_check(config_path: &Path, suite: Suite, opts: &Options) -> Result<Outcome, CliError> {
    let cfg = load_config(config_path)?;
    let model = build(&cfg, base_dir(config_path), opts.seed)?;
    let spectral = decompose(&model.form)?;
    let mut rng = sampling::rng(opts.seed);
    let layout = model.form.layout().clone();
    let space = layout.space();
    let form = &model.form;
    let q = |s: &Section| form.eval_q(s);

    let tolerance;
    let mut rep;
    let passed;
    match suite {
        Suite::Oa => {
            tolerance = opts.tolerance.or(cfg.tolerance).unwrap_or(DEFAULT_REL_TOL);
            rep = header("check", model.kind, opts, tolerance);
            let mut worst_residual = 0.0f64;
            let mut worst_cross = 0.0f64;
            let mut worst_bound_excess = f64::NEG_INFINITY;
            let mut failures = 0usize;
            for _ in 0..OA_TRIALS {
                let phi = sampling::random_section(&mut rng, &layout, 0.8);
                let delta = sampling::random_index_set(&mut rng, space, 0.7);
                let partition = sampling::random_partition(&mut rng, &delta, 4);
                let check = check_orthogonal_additivity(&q, &phi, &partition, tolerance)?;
                worst_residual = worst_residual.max(check.residual);
                failures += usize::from(!check.holds);
                for (i, a) in partition.parts.iter().enumerate() {
                    for b in &partition.parts[i + 1..] {
                        worst_cross = worst_cross.max(cross_term(form, a, b, &phi, &phi)?.norm());
                    }
                }
                let variation = form.omega_measure(&phi)?.total_variation();
                for _ in 0..10 {
                    let d = sampling::random_index_set(&mut rng, space, 0.5);
                    let value = form.eval_q(&phi.project(&d)?)?.abs();
                    worst_bound_excess = worst_bound_excess.max(value - variation);
                }
            }
            passed = failures == 0 && worst_cross <= 1e-12 && worst_bound_excess <= 1e-10;
            rep.insert(
                "oa".into(),
                json!({
                    "trials": OA_TRIALS,
                    "failures": failures,
                    "max_residual": real(worst_residual),
                    "max_cross_term": real(worst_cross),
                    "max_variation_excess": real(worst_bound_excess),
                }),
            );
        }
        Suite::Tails => {
            tolerance = opts.tolerance.or(cfg.tolerance).unwrap_or(1e-12);
            rep = header("check", model.kind, opts, tolerance);
            let atoms = space.atoms();
            let mut sorted = atoms.to_vec();
            sorted.sort_unstable();
            let tails: Vec<IndexSet> = (0..=sorted.len()).map(|i| sorted[i..].iter().copied().collect()).collect();
            let mut worst = vec![0.0f64; tails.len()];
            let mut vanished = true;
            for (_, phi) in &model.sections {
                let t = check_tail_vanishing(&q, phi, &tails, tolerance)?;
                vanished &= t.vanished;
                for (w, m) in worst.iter_mut().zip(&t.magnitudes) {
                    *w = w.max(*m);
                }
            }
            passed = vanished;
            rep.insert(
                "tails".into(),
                json!({
                    "tail_starts": sorted,
                    "max_magnitudes": reals(&worst),
                    "vanished": vanished,
                }),
            );
        }
        Suite::Closability => {
            tolerance = opts.tolerance.or(cfg.tolerance).unwrap_or(ProbeTolerances::default().cauchy);
            rep = header("check", model.kind, opts, tolerance);
            let spikes = spike_family(SPIKE_LEVELS)?;
            let probe_tol = ProbeTolerances {
                window: SPIKE_LEVELS,
                ..ProbeTolerances::default()
            };
            let mut model_status = Vec::new();
            let mut consistent = true;
            for (label, phi) in &model.sections {
                let seq: Vec<Section> = (1..=SPIKE_LEVELS)
                    .map(|n| phi.scale(Complex64::new(1.0 / n as f64, 0.0)))
                    .collect();
                let v = closability_probe(&q, &seq, probe_tol)?;
                consistent &= v.witness().is_none();
                model_status.push(json!({"section": label, "status": v.status.as_str()}));
            }
            let ev = &spikes.verdict.evidence;
            let spike_ok = spikes.verdict.witness().is_some();
            passed = spike_ok && consistent;
            rep.insert(
                "closability".into(),
                json!({
                    "spike_levels": SPIKE_LEVELS,
                    "spike_status": spikes.verdict.status.as_str(),
                    "spike_expected": "violation",
                    "spike_norms": reals(&ev.norms),
                    "spike_values": reals(&ev.values),
                    "spike_max_pair_difference": real(ev.pair_differences.iter().map(|p| p.2).fold(0.0, f64::max)),
                    "model_sequences": model_status,
                    "model_expected": "consistent",
                }),
            );
        }
        Suite::Csb => {
            tolerance = opts.tolerance.or(cfg.tolerance).unwrap_or(crate::forms::CSB_SLACK);
            rep = header("check", model.kind, opts, tolerance);
            let mut pairs: Vec<(Section, Section)> = (0..CSB_PAIRS)
                .map(|_| {
                    (
                        sampling::random_section(&mut rng, &layout, 0.8),
                        sampling::random_section(&mut rng, &layout, 0.8),
                    )
                })
                .collect();
            pairs.push((Section::zero(&layout), sampling::random_section(&mut rng, &layout, 1.0)));
            let h = |s: &Section| spectral.graph_norm_sqr(s);
            let v = csb_check(form, &h, 1.0, &pairs)?;
            passed = v.holds;
            rep.insert(
                "csb".into(),
                json!({
                    "pairs": pairs.len(),
                    "m": real(1.0),
                    "worst_excess": real(v.worst_excess),
                    "violations": v.violations,
                }),
            );
        }
        Suite::Norms => {
            tolerance = opts.tolerance.or(cfg.tolerance).unwrap_or(1e-10);
            rep = header("check", model.kind, opts, tolerance);
            let m = (-spectral.min_eigenvalue()).max(0.0);
            let samples: Vec<Section> = (0..NORM_SAMPLES)
                .map(|_| sampling::random_section(&mut rng, &layout, 0.8))
                .collect();
            let eq = spectral.norm_equivalence_check(m, &samples)?;
            let mut bound_excess = f64::NEG_INFINITY;
            let mut cauchy_excess = f64::NEG_INFINITY;
            for w in samples.windows(2) {
                let (phi, psi) = (&w[0], &w[1]);
                let (gp, gs) = (spectral.graph_norm(phi)?, spectral.graph_norm(psi)?);
                let (qp, qs) = (form.eval_q(phi)?, form.eval_q(psi)?);
                bound_excess = bound_excess.max(qp.abs() - gp * gp * (1.0 + tolerance));
                let lhs = (qp - qs).abs();
                let rhs = (gp + gs) * spectral.graph_norm(&phi.sub(psi)?)?;
                cauchy_excess = cauchy_excess.max(lhs - rhs - 1e-9);
            }
            passed = eq.holds && bound_excess <= 0.0 && cauchy_excess <= 0.0;
            rep.insert(
                "norms".into(),
                json!({
                    "samples": NORM_SAMPLES,
                    "m": real(m),
                    "worst_upper_excess": real(eq.worst_upper_excess),
                    "worst_lower_excess": real(eq.worst_lower_excess),
                    "graph_bound_excess": real(bound_excess),
                    "cauchy_chain_excess": real(cauchy_excess),
                }),
            );
        }
    }
    rep.insert("suite".into(), json!(suite.as_str()));
    rep.insert("passed".into(), json!(passed));
    Ok(Outcome {
        report: report::finish(rep, opts.timestamp),
        passed,
    })
}

/// Writes the report to `out` or stdout.
pub fn emit(outcome: &Outcome, out: Option<&Path>) -> Result<(), CliError> {
    let text = report::render(&outcome.report);
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
