//! Point-supported measure spaces.
//!
//! Every subset of a point-supported space is measurable and its measure is
//! the sum of the atom weights it contains. Infinite families of atoms (the
//! integers, the dual of an infinite group) are stored as finite truncations
//! with a note describing what was cut off.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

/// Opaque atom label.
pub type Atom = i64;

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasureSpace {
    atoms: Vec<Atom>,
    weights: Vec<f64>,
    position: HashMap<Atom, usize>,
    truncation_note: Option<String>,
}

impl AtomicMeasureSpace {
    pub fn new(atoms: Vec<Atom>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "atom labels vs weights",
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        let mut position = HashMap::with_capacity(atoms.len());
        for (i, (&atom, &weight)) in atoms.iter().zip(&weights).enumerate() {
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(Error::NonpositiveWeight { atom, weight });
            }
            if position.insert(atom, i).is_some() {
                return Err(Error::DuplicateAtom(atom));
            }
        }
        Ok(Self {
            atoms,
            weights,
            position,
            truncation_note: None,
        })
    }

    /// Counting measure on the given labels.
    pub fn counting(atoms: Vec<Atom>) -> Result<Self> {
        let weights = vec![1.0; atoms.len()];
        Self::new(atoms, weights)
    }

    pub fn with_truncation_note(mut self, note: impl Into<String>) -> Self {
        self.truncation_note = Some(note.into());
        self
    }

    pub fn truncation_note(&self) -> Option<&str> {
        self.truncation_note.as_deref()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Position of `atom` in the fixed atom order.
    pub fn index_of(&self, atom: Atom) -> Result<usize> {
        self.position
            .get(&atom)
            .copied()
            .ok_or(Error::ForeignAtom(atom))
    }

    pub fn contains(&self, atom: Atom) -> bool {
        self.position.contains_key(&atom)
    }

    pub fn weight(&self, atom: Atom) -> Result<f64> {
        Ok(self.weights[self.index_of(atom)?])
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// The whole space as an index set.
    pub fn full_set(&self) -> IndexSet {
        IndexSet::new(self.atoms.iter().copied())
    }

    /// μ(Δ), summed in the space's atom order.
    pub fn measure_of(&self, delta: &IndexSet) -> Result<f64> {
        self.check_set(delta)?;
        Ok(self
            .atoms
            .iter()
            .zip(&self.weights)
            .filter(|(a, _)| delta.contains(**a))
            .map(|(_, w)| *w)
            .sum())
    }

    pub fn check_set(&self, delta: &IndexSet) -> Result<()> {
        match delta.iter().find(|a| !self.contains(*a)) {
            Some(a) => Err(Error::ForeignAtom(a)),
            None => Ok(()),
        }
    }
}

/// A subset Δ of the atoms of some space.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct IndexSet {
    members: BTreeSet<Atom>,
}

impl IndexSet {
    pub fn new(members: impl IntoIterator<Item = Atom>) -> Self {
        Self {
            members: members.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn singleton(atom: Atom) -> Self {
        Self::new([atom])
    }

    pub fn contains(&self, atom: Atom) -> bool {
        self.members.contains(&atom)
    }

    pub fn iter(&self) -> impl Iterator<Item = Atom> + '_ {
        self.members.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.members.is_subset(&other.members)
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        Self {
            members: self.members.intersection(&other.members).copied().collect(),
        }
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        Self {
            members: self.members.union(&other.members).copied().collect(),
        }
    }

    /// First common atom, if any.
    pub fn first_overlap(&self, other: &IndexSet) -> Option<Atom> {
        self.members.intersection(&other.members).next().copied()
    }
}

impl FromIterator<Atom> for IndexSet {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        Self::new(iter)
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub parent: IndexSet,
    pub parts: Vec<IndexSet>,
}

/// Why a partition was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionDefect {
    Overlap(Atom),
    Uncovered(Atom),
    Outside(Atom),
}

impl fmt::Display for PartitionDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionDefect::Overlap(a) => write!(f, "parts overlap at atom {a}"),
            PartitionDefect::Uncovered(a) => write!(f, "atom {a} of the parent is not covered"),
            PartitionDefect::Outside(a) => write!(f, "atom {a} lies outside the parent"),
        }
    }
}

impl Partition {
    pub fn new(parent: IndexSet, parts: Vec<IndexSet>) -> Self {
        Self { parent, parts }
    }

    /// Split `parent` into singletons.
    pub fn singletons(parent: &IndexSet) -> Self {
        Self::new(parent.clone(), parent.iter().map(IndexSet::singleton).collect())
    }

    /// Returns the first defect found, scanning parts in order.
    pub fn defect(&self) -> Option<PartitionDefect> {
        let mut seen = BTreeSet::new();
        for part in &self.parts {
            for a in part.iter() {
                if !self.parent.contains(a) {
                    return Some(PartitionDefect::Outside(a));
                }
                if !seen.insert(a) {
                    return Some(PartitionDefect::Overlap(a));
                }
            }
        }
        self.parent
            .iter()
            .find(|a| !seen.contains(a))
            .map(PartitionDefect::Uncovered)
    }

    pub fn is_valid(&self) -> bool {
        self.defect().is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_space() {
        let s = AtomicMeasureSpace::new(vec![0], vec![1.0]).unwrap();
        assert_eq!(s.total_measure(), 1.0);
    }

    #[test]
    fn counting_truncation_of_integers() {
        let s = AtomicMeasureSpace::counting((-2..=2).collect())
            .unwrap()
            .with_truncation_note("Z truncated to [-2, 2]");
        assert_eq!(s.total_measure(), 5.0);
        assert_eq!(s.measure_of(&IndexSet::new([0, 1])).unwrap(), 2.0);
        assert_eq!(s.truncation_note(), Some("Z truncated to [-2, 2]"));
    }

    #[test]
    fn rejects_bad_weights_and_labels() {
        assert_eq!(
            AtomicMeasureSpace::new(vec![0, 1], vec![1.0, -1.0]),
            Err(Error::NonpositiveWeight {
                atom: 1,
                weight: -1.0
            })
        );
        assert!(matches!(
            AtomicMeasureSpace::new(vec![0, 1], vec![1.0, f64::INFINITY]),
            Err(Error::NonpositiveWeight { .. })
        ));
        assert_eq!(
            AtomicMeasureSpace::new(vec![3, 3], vec![1.0, 1.0]),
            Err(Error::DuplicateAtom(3))
        );
        assert!(matches!(
            AtomicMeasureSpace::new(vec![0], vec![]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn measure_of_sets() {
        let s = AtomicMeasureSpace::new(vec![10, 20], vec![0.5, 0.25]).unwrap();
        assert_eq!(s.measure_of(&IndexSet::empty()).unwrap(), 0.0);
        assert_eq!(s.measure_of(&IndexSet::new([10, 20])).unwrap(), 0.75);
        assert_eq!(
            s.measure_of(&IndexSet::new([10, 99])),
            Err(Error::ForeignAtom(99))
        );
    }

    #[test]
    fn partition_verdicts() {
        let p = Partition::new(
            IndexSet::new([1, 2, 3]),
            vec![IndexSet::new([1]), IndexSet::new([2]), IndexSet::new([3])],
        );
        assert!(p.is_valid());

        let p = Partition::new(
            IndexSet::new([1, 2]),
            vec![IndexSet::new([1]), IndexSet::new([1, 2])],
        );
        assert_eq!(p.defect(), Some(PartitionDefect::Overlap(1)));

        let p = Partition::new(
            IndexSet::new([1, 2, 3]),
            vec![IndexSet::new([1]), IndexSet::new([2])],
        );
        assert_eq!(p.defect(), Some(PartitionDefect::Uncovered(3)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn finitely_additive(
                weights in prop::collection::vec(0.01f64..100.0, 1..20),
                labels in prop::collection::vec(0usize..4, 20),
            ) {
                let n = weights.len();
                let space = AtomicMeasureSpace::new((0..n as i64).collect(), weights).unwrap();
                let parent = space.full_set();
                let parts: Vec<IndexSet> = (0..4)
                    .map(|p| (0..n).filter(|&i| labels[i] == p).map(|i| i as i64).collect())
                    .collect();
                let whole = space.measure_of(&parent).unwrap();
                let sum: f64 = parts.iter().map(|d| space.measure_of(d).unwrap()).sum();
                prop_assert!((whole - sum).abs() <= 1e-14 * whole);
                for d in &parts {
                    let m = space.measure_of(d).unwrap();
                    prop_assert_eq!(m == 0.0, d.is_empty());
                }
            }
        }
    }
}
