//! Finite groups acting on `ℂ[G]` by left translation, their isotypic
//! decomposition, and invariant forms re-expressed on the isotypic layout.
//!
//! Conventions: element `0` is the identity and `table[a][b] = a·b`.
//! `L(g) e_k = e_{gk}` and `R(g) e_k = e_{k g⁻¹}`, so that
//! `(L(g)Φ)(h) = Φ(g⁻¹h)` and `(R(g)Φ)(h) = Φ(hg)`.

use std::cmp::Ordering;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::direct_integral::{CVector, FiberLayout, Section};
use crate::error::{Error, Result};
use crate::forms::{max_abs_entry, CMatrix, DirectIntegralForm};
use crate::measure::{Atom, AtomicMeasureSpace, IndexSet};
use crate::sampling::{self, complex_normal};

pub const MAX_ORDER: usize = 64;
pub const PROJECTION_TOL: f64 = 1e-10;
pub const INVARIANCE_TOL: f64 = 1e-10;
pub const MAX_RESEEDS: usize = 10;
const NULL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupModel {
    table: Vec<Vec<usize>>,
    inverse: Vec<usize>,
}

/// Validates a Cayley table, naming the first violated axiom.
pub fn build_group(table: Vec<Vec<usize>>) -> Result<GroupModel> {
    let n = table.len();
    if n == 0 {
        return Err(Error::NotClosed("empty table".into()));
    }
    if n > MAX_ORDER {
        return Err(Error::GroupTooLarge(n));
    }
    for (a, row) in table.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NotClosed(format!("row {a} has {} entries, expected {n}", row.len())));
        }
        if let Some((b, &c)) = row.iter().enumerate().find(|(_, &c)| c >= n) {
            return Err(Error::NotClosed(format!("{a}·{b} = {c} is not an element")));
        }
    }
    if (0..n).any(|a| table[0][a] != a || table[a][0] != a) {
        return Err(Error::NoIdentity);
    }
    let mut inverse = Vec::with_capacity(n);
    for a in 0..n {
        match (0..n).find(|&b| table[a][b] == 0 && table[b][a] == 0) {
            Some(b) => inverse.push(b),
            None => return Err(Error::NoInverse(a)),
        }
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if table[table[a][b]][c] != table[a][table[b][c]] {
                    return Err(Error::NotAssociative(a, b, c));
                }
            }
        }
    }
    Ok(GroupModel { table, inverse })
}

/// Whitespace-separated integer grid, one row per line; blank lines and
/// lines starting with `#` are skipped.
pub fn parse_cayley(text: &str) -> Result<Vec<Vec<usize>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("line {}: `{t}` is not an element index", i + 1)))
                })
                .collect()
        })
        .collect()
}

pub fn format_cayley(group: &GroupModel) -> String {
    let width = (group.order() - 1).to_string().len();
    let mut out = String::new();
    for row in &group.table {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

impl GroupModel {
    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn is_abelian(&self) -> bool {
        let n = self.order();
        (0..n).all(|a| (0..n).all(|b| self.table[a][b] == self.table[b][a]))
    }

    /// Conjugacy classes, each sorted, ordered by smallest member.
    pub fn conjugacy_classes(&self) -> Vec<Vec<usize>> {
        let n = self.order();
        let mut seen = vec![false; n];
        let mut classes = Vec::new();
        for g in 0..n {
            if seen[g] {
                continue;
            }
            let mut class: Vec<usize> = (0..n).map(|h| self.mul(self.mul(h, g), self.inverse(h))).collect();
            class.sort_unstable();
            class.dedup();
            for &c in &class {
                seen[c] = true;
            }
            classes.push(class);
        }
        classes
    }
}

pub const BUILTIN_NAMES: [&str; 7] = ["Z2", "Z3", "Z4", "Z6", "S3", "D4", "Q8"];

pub fn builtin(name: &str) -> Option<GroupModel> {
    let table = match name {
        "Z2" => cyclic_table(2),
        "Z3" => cyclic_table(3),
        "Z4" => cyclic_table(4),
        "Z6" => cyclic_table(6),
        "S3" => s3_table(),
        "D4" => dihedral_table(4),
        "Q8" => quaternion_table(),
        _ => return None,
    };
    Some(build_group(table).expect("built-in tables are groups"))
}

pub fn cyclic_table(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect()
}

/// Permutations of three points in lexicographic order, composed as `(p·q)(x) = p(q(x))`.
pub fn s3_table() -> Vec<Vec<usize>> {
    let perms: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let index = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap();
    perms
        .iter()
        .map(|p| perms.iter().map(|q| index([p[q[0]], p[q[1]], p[q[2]]])).collect())
        .collect()
}

/// `r^i s^j` stored at `i + m j`, with `s r s = r⁻¹`.
pub fn dihedral_table(m: usize) -> Vec<Vec<usize>> {
    let n = 2 * m;
    let split = |x: usize| (x % m, x / m);
    (0..n)
        .map(|x| {
            let (a, b) = split(x);
            (0..n)
                .map(|y| {
                    let (c, d) = split(y);
                    let rot = if b == 0 { (a + c) % m } else { (a + m - c) % m };
                    rot + m * ((b + d) % 2)
                })
                .collect()
        })
        .collect()
}

/// `1, i, j, k` at `0..4` and their negatives at `4..8`.
pub fn quaternion_table() -> Vec<Vec<usize>> {
    // Products of units: (sign, unit) for unit·unit.
    const UNIT: [[(bool, usize); 4]; 4] = [
        [(false, 0), (false, 1), (false, 2), (false, 3)],
        [(false, 1), (true, 0), (false, 3), (true, 2)],
        [(false, 2), (true, 3), (true, 0), (false, 1)],
        [(false, 3), (false, 2), (true, 1), (true, 0)],
    ];
    (0..8)
        .map(|x| {
            (0..8)
                .map(|y| {
                    let (neg, u) = UNIT[x % 4][y % 4];
                    let neg = neg ^ (x >= 4) ^ (y >= 4);
                    u + if neg { 4 } else { 0 }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RegularRepresentation {
    pub group: GroupModel,
    pub left: Vec<CMatrix>,
    pub right: Vec<CMatrix>,
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

pub fn regular_rep(group: &GroupModel) -> RegularRepresentation {
    let n = group.order();
    let perm = |f: &dyn Fn(usize) -> usize| {
        let mut m = CMatrix::zeros(n, n);
        for k in 0..n {
            m[(f(k), k)] = one();
        }
        m
    };
    let left = (0..n).map(|g| perm(&|k| group.mul(g, k))).collect();
    let right = (0..n)
        .map(|g| perm(&|k| group.mul(k, group.inverse(g))))
        .collect();
    RegularRepresentation {
        group: group.clone(),
        left,
        right,
    }
}

impl RegularRepresentation {
    pub fn order(&self) -> usize {
        self.group.order()
    }

    /// Largest entry of `L(ab) − L(a)L(b)` over all pairs (order ≤ 24) or
    /// 200 seeded random pairs.
    pub fn homomorphism_defect(&self, seed: u64) -> f64 {
        let n = self.order();
        let pairs: Vec<(usize, usize)> = if n <= 24 {
            (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect()
        } else {
            let mut rng = sampling::rng(seed);
            (0..200).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect()
        };
        pairs
            .into_iter()
            .map(|(a, b)| max_abs_entry(&(&self.left[self.group.mul(a, b)] - &self.left[a] * &self.left[b])))
            .fold(0.0, f64::max)
    }
}

/// `Σ_{g ∈ C} R(g)` for each conjugacy class `C`, in class order.
pub fn class_sums(rep: &RegularRepresentation) -> Vec<CMatrix> {
    let n = rep.order();
    rep.group
        .conjugacy_classes()
        .iter()
        .map(|class| class.iter().fold(CMatrix::zeros(n, n), |acc, &g| acc + &rep.right[g]))
        .collect()
}

#[derive(Debug, Clone)]
pub struct IsotypicDecomposition {
    pub projections: Vec<CMatrix>,
    /// Orthonormal basis of each projection range, as columns.
    pub bases: Vec<CMatrix>,
    pub ranks: Vec<usize>,
    pub multiplicities: Vec<usize>,
    pub residuals: ProjectionResiduals,
    /// Number of random central elements tried.
    pub attempts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProjectionResiduals {
    pub idempotent: f64,
    pub hermitian: f64,
    pub orthogonal: f64,
    pub complete: f64,
    pub central: f64,
}

impl ProjectionResiduals {
    pub fn max(&self) -> f64 {
        [self.idempotent, self.hermitian, self.orthogonal, self.complete, self.central]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Eigenspaces of a random Hermitian element of the centre, certified by
/// class count, perfect-square ranks and the projection residuals.
pub fn isotypic_decomposition(rep: &RegularRepresentation, seed: u64) -> Result<IsotypicDecomposition> {
    let sums = class_sums(rep);
    let mut rng = sampling::rng(seed);
    for attempt in 1..=MAX_RESEEDS {
        let z = random_central_element(&mut rng, &sums);
        if let Some(mut d) = try_split(rep, &sums, &z) {
            d.attempts = attempt;
            return Ok(d);
        }
    }
    Err(Error::DecompositionUnstable(MAX_RESEEDS))
}

fn random_central_element<R: Rng + ?Sized>(rng: &mut R, sums: &[CMatrix]) -> CMatrix {
    let n = sums[0].nrows();
    let mut z = CMatrix::zeros(n, n);
    for c in sums {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        let sym = c + c.adjoint();
        let anti = c - c.adjoint();
        z += sym * Complex64::new(a, 0.0) + anti * Complex64::new(0.0, b);
    }
    (&z + z.adjoint()) * Complex64::new(0.5, 0.0)
}

fn try_split(rep: &RegularRepresentation, sums: &[CMatrix], z: &CMatrix) -> Option<IsotypicDecomposition> {
    let n = rep.order();
    let eig = z.clone().try_symmetric_eigen(f64::EPSILON, 10_000)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let gap = 1e-8 * scale;

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(g) if eig.eigenvalues[i] - eig.eigenvalues[*g.last().unwrap()] <= gap => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    if groups.len() != sums.len() {
        return None;
    }
    let mut pieces: Vec<(CMatrix, CMatrix, Vec<f64>)> = groups
        .iter()
        .map(|g| {
            let basis = CMatrix::from_columns(&g.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
            let p = &basis * basis.adjoint();
            let signature = sums.iter().map(|c| (&p * c).trace().re).collect();
            (p, basis, signature)
        })
        .collect();
    if pieces.iter().any(|(_, b, _)| integer_sqrt(b.ncols()).is_none()) {
        return None;
    }
    pieces.sort_by(|a, b| {
        a.1.ncols()
            .cmp(&b.1.ncols())
            .then_with(|| compare_signatures(&a.2, &b.2))
    });

    let projections: Vec<CMatrix> = pieces.iter().map(|p| p.0.clone()).collect();
    let residuals = projection_residuals(rep, &projections);
    if residuals.max() > PROJECTION_TOL {
        return None;
    }
    let ranks: Vec<usize> = pieces.iter().map(|p| p.1.ncols()).collect();
    Some(IsotypicDecomposition {
        multiplicities: ranks.iter().map(|&r| integer_sqrt(r).unwrap()).collect(),
        ranks,
        bases: pieces.into_iter().map(|p| p.1).collect(),
        projections,
        residuals,
        attempts: 0,
    })
}

fn compare_signatures(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let (x, y) = ((x * 1e6).round(), (y * 1e6).round());
        match y.total_cmp(&x) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

pub fn integer_sqrt(r: usize) -> Option<usize> {
    (0..=r).find(|k| k * k == r)
}

pub fn projection_residuals(rep: &RegularRepresentation, projections: &[CMatrix]) -> ProjectionResiduals {
    let n = rep.order();
    let mut res = ProjectionResiduals::default();
    let mut total = CMatrix::zeros(n, n);
    for (a, p) in projections.iter().enumerate() {
        res.idempotent = res.idempotent.max(max_abs_entry(&(p * p - p)));
        res.hermitian = res.hermitian.max(max_abs_entry(&(p - p.adjoint())));
        for q in &projections[a + 1..] {
            res.orthogonal = res.orthogonal.max(max_abs_entry(&(p * q)));
        }
        for m in rep.left.iter().chain(&rep.right) {
            res.central = res.central.max(max_abs_entry(&(p * m - m * p)));
        }
        total += p;
    }
    res.complete = max_abs_entry(&(total - CMatrix::identity(n, n)));
    res
}

impl IsotypicDecomposition {
    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    /// `B_α* V(g) B_α` for every group element.
    pub fn restrict(&self, label: usize, matrices: &[CMatrix]) -> Vec<CMatrix> {
        let b = &self.bases[label];
        matrices.iter().map(|m| b.adjoint() * m * b).collect()
    }

    /// Atoms are the isotypic labels `0..r` under counting measure; the fiber
    /// over `α` is the range of `P_α` in its orthonormal basis.
    pub fn layout(&self) -> Result<Arc<FiberLayout>> {
        let space = AtomicMeasureSpace::counting((0..self.len() as Atom).collect())?;
        Ok(Arc::new(FiberLayout::new(space, self.ranks.clone())?))
    }

    /// Coordinates of a vector of `ℂ[G]` in the isotypic layout.
    pub fn to_section(&self, layout: &Arc<FiberLayout>, v: &CVector) -> Result<Section> {
        Section::from_fibers(
            layout,
            self.bases.iter().enumerate().map(|(a, b)| (a as Atom, b.adjoint() * v)),
        )
    }

    pub fn from_section(&self, phi: &Section) -> Result<CVector> {
        let n = self.bases[0].nrows();
        let mut v = CVector::zeros(n);
        for (a, b) in self.bases.iter().enumerate() {
            v += b * phi.fiber(a as Atom)?;
        }
        Ok(v)
    }

    /// `Σ_{α ∈ Δ} P_α`.
    pub fn projection_onto(&self, delta: &IndexSet) -> CMatrix {
        let n = self.bases[0].nrows();
        delta
            .iter()
            .filter_map(|a| self.projections.get(a as usize))
            .fold(CMatrix::zeros(n, n), |acc, p| acc + p)
    }
}

#[derive(Debug, Clone)]
pub struct IntertwinerSpace {
    pub basis: Vec<CMatrix>,
    /// Largest entry of `M V₁(g) − V₂(g) M` over basis elements and group elements.
    pub residual: f64,
}

impl IntertwinerSpace {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }
}

/// Null space of `M ↦ (M V₁(g) − V₂(g) M)_g` over all group elements.
pub fn intertwiner_space(rep1: &[CMatrix], rep2: &[CMatrix]) -> Result<IntertwinerSpace> {
    if rep1.len() != rep2.len() {
        return Err(Error::LengthMismatch {
            what: "representation matrices",
            expected: rep1.len(),
            got: rep2.len(),
        });
    }
    let d1 = rep1.first().map_or(0, |m| m.nrows());
    let d2 = rep2.first().map_or(0, |m| m.nrows());
    let dim = d1 * d2;
    if dim == 0 {
        return Ok(IntertwinerSpace {
            basis: Vec::new(),
            residual: 0.0,
        });
    }
    // Column-major vec: vec(M V₁) = (V₁ᵀ ⊗ I) vec M, vec(V₂ M) = (I ⊗ V₂) vec M.
    let mut gram = CMatrix::zeros(dim, dim);
    for (v1, v2) in rep1.iter().zip(rep2) {
        let k = v1.transpose().kronecker(&CMatrix::identity(d2, d2)) - CMatrix::identity(d1, d1).kronecker(v2);
        gram += k.adjoint() * k;
    }
    gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = gram
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(Error::EigenFailure(0))?;
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut idx: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] <= NULL_TOL * scale).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let basis: Vec<CMatrix> = idx
        .iter()
        .map(|&i| CMatrix::from_column_slice(d2, d1, eig.eigenvectors.column(i).as_slice()))
        .collect();
    let residual = basis
        .iter()
        .flat_map(|m| rep1.iter().zip(rep2).map(move |(v1, v2)| max_abs_entry(&(m * v1 - v2 * m))))
        .fold(0.0, f64::max);
    Ok(IntertwinerSpace { basis, residual })
}

/// A form `Q(Φ, Ψ) = <Φ, TΨ>` on `ℂ[G]` together with its expression in the
/// isotypic layout.
#[derive(Debug, Clone)]
pub struct InvariantForm {
    pub operator: CMatrix,
    pub form: DirectIntegralForm,
    pub invariance_residual: f64,
}

/// `T = Σ_g c_g R(g)`; Hermitian exactly when `c_{g⁻¹} = conj(c_g)`.
pub fn operator_from_coefficients(rep: &RegularRepresentation, coefficients: &[Complex64]) -> Result<CMatrix> {
    let n = rep.order();
    if coefficients.len() != n {
        return Err(Error::LengthMismatch {
            what: "coefficients",
            expected: n,
            got: coefficients.len(),
        });
    }
    let scale = coefficients.iter().fold(1.0f64, |m, c| m.max(c.norm()));
    for g in 0..n {
        if (coefficients[rep.group.inverse(g)] - coefficients[g].conj()).norm() > 1e-12 * scale {
            return Err(Error::NotHermitianCoefficients(g));
        }
    }
    Ok(translation_sum(&rep.right, coefficients))
}

/// `Σ_g c_g M(g)`.
pub fn translation_sum(matrices: &[CMatrix], coefficients: &[Complex64]) -> CMatrix {
    let n = matrices[0].nrows();
    matrices
        .iter()
        .zip(coefficients)
        .fold(CMatrix::zeros(n, n), |acc, (m, c)| acc + m * *c)
}

pub fn make_invariant_form(
    rep: &RegularRepresentation,
    decomposition: &IsotypicDecomposition,
    coefficients: &[Complex64],
) -> Result<InvariantForm> {
    let t = operator_from_coefficients(rep, coefficients)?;
    make_form_from_operator(rep, decomposition, t)
}

/// Validates an operator on `ℂ[G]` as Hermitian and commuting with every
/// `L(g)`, then compresses it to the isotypic blocks `B_α* T B_α`.
pub fn make_form_from_operator(
    rep: &RegularRepresentation,
    decomposition: &IsotypicDecomposition,
    t: CMatrix,
) -> Result<InvariantForm> {
    let residual = commutation_residual(rep, &t);
    if residual > INVARIANCE_TOL {
        return Err(Error::NotInvariant(residual));
    }
    let fiber_forms = decomposition.bases.iter().map(|b| b.adjoint() * &t * b).collect();
    let form = DirectIntegralForm::new(decomposition.layout()?, fiber_forms)?;
    Ok(InvariantForm {
        operator: t,
        form,
        invariance_residual: residual,
    })
}

/// `max_g max |L(g)T − T L(g)|`.
pub fn commutation_residual(rep: &RegularRepresentation, t: &CMatrix) -> f64 {
    rep.left
        .iter()
        .map(|l| max_abs_entry(&(l * t - t * l)))
        .fold(0.0, f64::max)
}

/// `max |Q(L(g)Φ) − Q(Φ)| / (1 + |Q(Φ)|)` over all `g` and the samples.
pub fn invariance_check(t: &CMatrix, rep: &RegularRepresentation, samples: &[CVector]) -> f64 {
    let q = |v: &CVector| v.dotc(&(t * v)).re;
    let mut worst = 0.0f64;
    for v in samples {
        let base = q(v);
        for l in &rep.left {
            worst = worst.max((q(&(l * v)) - base).abs() / (1.0 + base.abs()));
        }
    }
    worst
}

/// `max |<P_{Δ₁}Φ, T P_{Δ₂}Ψ>|` over the sample pairs, for disjoint sets
/// of isotypic labels.
pub fn cross_isotypic_vanish(
    t: &CMatrix,
    decomposition: &IsotypicDecomposition,
    delta1: &IndexSet,
    delta2: &IndexSet,
    samples: &[(CVector, CVector)],
) -> Result<f64> {
    if let Some(a) = delta1.first_overlap(delta2) {
        return Err(Error::OverlappingSets(a));
    }
    let p1 = decomposition.projection_onto(delta1);
    let p2 = decomposition.projection_onto(delta2);
    let compressed = &p1 * t * &p2;
    Ok(samples
        .iter()
        .map(|(phi, psi)| phi.dotc(&(&compressed * psi)).norm())
        .fold(0.0, f64::max))
}

/// Hermitian coefficients with `c_e = 0`, so `T` is traceless and has
/// eigenvalues of both signs unless it vanishes.
pub fn random_invariant_coefficients<R: Rng + ?Sized>(rng: &mut R, group: &GroupModel, traceless: bool) -> Vec<Complex64> {
    let n = group.order();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    for g in 0..n {
        let inv = group.inverse(g);
        if inv < g {
            continue;
        }
        if inv == g {
            c[g] = Complex64::new(complex_normal(rng).re, 0.0);
        } else {
            let z = complex_normal(rng);
            c[g] = z;
            c[inv] = z.conj();
        }
    }
    if traceless {
        c[0] = Complex64::new(0.0, 0.0);
    }
    c
}

pub fn random_group_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    sampling::random_vector(rng, n)
}
