//! Model configuration documents and their assembly into forms and sections.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;

use crate::direct_integral::{CVector, FiberLayout, Section};
use crate::error::{Error, Result};
use crate::forms::{CMatrix, DirectIntegralForm};
use crate::group::{
    self, build_group, isotypic_decomposition, make_form_from_operator, operator_from_coefficients, parse_cayley,
    random_invariant_coefficients, regular_rep, translation_sum, GroupModel, InvariantForm, IsotypicDecomposition,
    RegularRepresentation,
};
use crate::measure::{Atom, AtomicMeasureSpace};
use crate::models::{position_model, random_model};
use crate::sampling;

pub type Pair = [f64; 2];

#[derive(Debug, Clone, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub model: ModelSpec,
    /// Overrides the command's default tolerance.
    pub tolerance: Option<f64>,
    /// Extra seeded random sections appended to the sample set.
    pub random_sections: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Explicit {
        atoms: Vec<Atom>,
        /// Counting measure when absent.
        weights: Option<Vec<f64>>,
        dims: Vec<usize>,
        /// One matrix per atom, rows of `[re, im]` pairs.
        matrices: Vec<Vec<Vec<Pair>>>,
        #[serde(default)]
        sections: Vec<Vec<FiberEntry>>,
    },
    Position {
        k_min: i64,
        k_max: i64,
        n_per_cell: usize,
    },
    Group {
        /// Built-in group name (`Z2`, `S3`, ...) or path to a Cayley table.
        cayley: String,
        coefficients: Option<Vec<Pair>>,
        left_coefficients: Option<Vec<Pair>>,
    },
    Random {
        seed: u64,
        n_atoms: usize,
        max_dim: usize,
        eig_range: Pair,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct FiberEntry {
    pub atom: Atom,
    pub vector: Vec<Pair>,
}

/// Coefficient file for the `group` command.
#[derive(Debug, Clone, Deserialize)]
pub struct CoefficientFile {
    pub coefficients: Vec<Pair>,
    pub left_coefficients: Option<Vec<Pair>>,
}

pub fn complex(p: &Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

pub fn complexes(ps: &[Pair]) -> Vec<Complex64> {
    ps.iter().map(complex).collect()
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn kind(&self) -> &'static str {
        match self.model {
            ModelSpec::Explicit { .. } => "explicit",
            ModelSpec::Position { .. } => "position",
            ModelSpec::Group { .. } => "group",
            ModelSpec::Random { .. } => "random",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroupContext {
    pub group: GroupModel,
    pub rep: RegularRepresentation,
    pub decomposition: IsotypicDecomposition,
    pub coefficients: Vec<Complex64>,
    pub invariant: InvariantForm,
}

/// A form with its labelled sample sections.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub kind: &'static str,
    pub form: DirectIntegralForm,
    pub sections: Vec<(String, Section)>,
    pub group: Option<GroupContext>,
}

/// Default number of random sections when a config supplies none.
pub const DEFAULT_RANDOM_SECTIONS: usize = 5;

/// Assembles the model. Relative paths resolve against `base_dir`; `seed`
/// drives sampling and decomposition, not the model of a `random` config.
pub fn build(config: &ModelConfig, base_dir: &Path, seed: u64) -> Result<BuiltModel> {
    let mut rng = sampling::rng(seed);
    let mut sections = Vec::new();
    let mut group_ctx = None;
    let form = match &config.model {
        ModelSpec::Explicit {
            atoms,
            weights,
            dims,
            matrices,
            sections: given,
        } => {
            let space = match weights {
                Some(w) => AtomicMeasureSpace::new(atoms.clone(), w.clone())?,
                None => AtomicMeasureSpace::counting(atoms.clone())?,
            };
            let layout = Arc::new(FiberLayout::new(space, dims.clone())?);
            if matrices.len() != atoms.len() {
                return Err(Error::LengthMismatch {
                    what: "matrices",
                    expected: atoms.len(),
                    got: matrices.len(),
                });
            }
            let forms = matrices
                .iter()
                .zip(dims)
                .zip(atoms)
                .map(|((rows, &d), &atom)| parse_matrix(rows, d, atom))
                .collect::<Result<Vec<_>>>()?;
            for (i, entries) in given.iter().enumerate() {
                let fibers = entries
                    .iter()
                    .map(|e| (e.atom, CVector::from_vec(complexes(&e.vector))))
                    .collect::<Vec<_>>();
                sections.push((format!("given[{i}]"), Section::from_fibers(&layout, fibers)?));
            }
            DirectIntegralForm::new(layout, forms)?
        }
        ModelSpec::Position { k_min, k_max, n_per_cell } => {
            let model = position_model(*k_min, *k_max, *n_per_cell)?;
            for (a, b) in [(0, 1), (-1, 0), (-1, 1)] {
                if let Ok(s) = model.indicator(a, b) {
                    sections.push((format!("indicator[{a},{b})"), s));
                }
            }
            model.form().clone()
        }
        ModelSpec::Group {
            cayley,
            coefficients,
            left_coefficients,
        } => {
            let group = load_group(cayley, base_dir)?;
            let ctx = build_group_context(
                group,
                coefficients.as_deref().map(complexes),
                left_coefficients.as_deref().map(complexes),
                seed,
            )?;
            let form = ctx.invariant.form.clone();
            group_ctx = Some(ctx);
            form
        }
        ModelSpec::Random {
            seed: model_seed,
            n_atoms,
            max_dim,
            eig_range,
        } => random_model(*model_seed, *n_atoms, *max_dim, (eig_range[0], eig_range[1]))?,
    };
    let extra = config.random_sections.unwrap_or(if sections.is_empty() {
        DEFAULT_RANDOM_SECTIONS
    } else {
        0
    });
    let layout = form.layout().clone();
    for i in 0..extra {
        let s = match &group_ctx {
            Some(ctx) => {
                let v = sampling::random_vector(&mut rng, ctx.group.order());
                ctx.decomposition.to_section(&layout, &v)?
            }
            None => sampling::random_section(&mut rng, &layout, 0.8),
        };
        sections.push((format!("random[{i}]"), s));
    }
    Ok(BuiltModel {
        kind: config.kind(),
        form,
        sections,
        group: group_ctx,
    })
}

fn parse_matrix(rows: &[Vec<Pair>], d: usize, atom: Atom) -> Result<CMatrix> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            atom,
            expected: d,
            got: rows.iter().map(Vec::len).find(|&l| l != d).unwrap_or(rows.len()),
        });
    }
    Ok(CMatrix::from_fn(d, d, |i, j| complex(&rows[i][j])))
}

/// A built-in name or a Cayley table file.
pub fn load_group(cayley: &str, base_dir: &Path) -> Result<GroupModel> {
    if let Some(g) = group::builtin(cayley) {
        return Ok(g);
    }
    let path = resolve(base_dir, cayley);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    build_group(parse_cayley(&text)?)
}

pub fn resolve(base_dir: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// `T = Σ c_g R(g) + Σ d_g L(g)`; random traceless right coefficients when none are given.
pub fn build_group_context(
    group: GroupModel,
    coefficients: Option<Vec<Complex64>>,
    left_coefficients: Option<Vec<Complex64>>,
    seed: u64,
) -> Result<GroupContext> {
    let rep = regular_rep(&group);
    let decomposition = isotypic_decomposition(&rep, seed)?;
    let coefficients = match coefficients {
        Some(c) => c,
        None => random_invariant_coefficients(&mut sampling::rng(seed ^ 0x5eed), &group, true),
    };
    let mut t = operator_from_coefficients(&rep, &coefficients)?;
    if let Some(d) = &left_coefficients {
        if d.len() != group.order() {
            return Err(Error::LengthMismatch {
                what: "left coefficients",
                expected: group.order(),
                got: d.len(),
            });
        }
        t += translation_sum(&rep.left, d);
    }
    let invariant = make_form_from_operator(&rep, &decomposition, t)?;
    Ok(GroupContext {
        group,
        rep,
        decomposition,
        coefficients,
        invariant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_config() {
        let text = r#"{
            "kind": "explicit",
            "atoms": [0, 1],
            "weights": [2.0, 0.5],
            "dims": [1, 2],
            "matrices": [[[[-1, 0]]], [[[1, 0], [0, 1]], [[0, -1], [3, 0]]]],
            "sections": [[{"atom": 0, "vector": [[1, 0]]}]]
        }"#;
        let cfg = ModelConfig::from_json(text).unwrap();
        let m = build(&cfg, Path::new("."), 0).unwrap();
        assert_eq!(m.sections.len(), 1);
        assert_eq!(m.form.eval_q(&m.sections[0].1).unwrap(), -2.0);
    }

    #[test]
    fn malformed_configs() {
        assert!(ModelConfig::from_json("{\"kind\": \"nope\"}").is_err());
        assert!(ModelConfig::from_json("[").is_err());
        let non_hermitian = r#"{"kind": "explicit", "atoms": [0], "dims": [2],
            "matrices": [[[[0, 0], [1, 0]], [[0, 0], [0, 0]]]]}"#;
        let cfg = ModelConfig::from_json(non_hermitian).unwrap();
        assert!(matches!(build(&cfg, Path::new("."), 0), Err(Error::NonHermitianForm { .. })));
    }

    #[test]
    fn group_config_defaults_to_random_invariant_form() {
        let cfg = ModelConfig::from_json(r#"{"kind": "group", "cayley": "S3"}"#).unwrap();
        let m = build(&cfg, Path::new("."), 1).unwrap();
        assert_eq!(m.sections.len(), DEFAULT_RANDOM_SECTIONS);
        assert_eq!(m.group.unwrap().decomposition.ranks, vec![1, 1, 4]);
    }
}
