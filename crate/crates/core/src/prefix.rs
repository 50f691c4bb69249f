//! Prefix-free leader paths in a D-ary tree.
//!
//! A leader's root path plays the role of a codeword: if no path is a prefix
//! of another, a multicast addressed to one leader is never relayed through
//! another leader. Path depths are chosen by a D-ary Huffman construction
//! over leader importance, and concrete paths are then allocated canonically.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{int, inv_pow, to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrefixError {
    #[error("arity must be at least 2, got {0}")]
    InvalidArity(u32),
    #[error("leader {0} has depth 0; local leaders sit strictly below the root")]
    ZeroDepth(LeaderId),
    #[error("leader {0} appears more than once")]
    DuplicateLeader(LeaderId),
    #[error("importance profile is empty")]
    EmptyProfile,
    #[error("importance of leader {0} is negative")]
    NegativeImportance(LeaderId),
    #[error("importances sum to {0}, not 1")]
    NotNormalized(String),
    #[error("depths violate the Kraft inequality (sum {0} > 1)")]
    KraftViolated(String),
    #[error("assignment and profile cover different leaders")]
    IdMismatch,
}

/// Identifier of a local leader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LeaderId(pub u32);

impl fmt::Display for LeaderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Root-to-node path as a sequence of branch indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodePath(pub Vec<u32>);

impl NodePath {
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// True if `self` is a prefix of `other`, equality included.
    pub fn is_prefix_of(&self, other: &NodePath) -> bool {
        other.0.starts_with(&self.0)
    }
}

/// Single digits when every branch is below 10 (`"102"`), dot-separated
/// otherwise (`"1.12.0"`).
impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&b| b < 10) {
            for b in &self.0 {
                write!(f, "{b}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
            f.write_str(&parts.join("."))
        }
    }
}

impl FromStr for NodePath {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("invalid node path `{s}`");
        if s.contains('.') {
            s.split('.')
                .map(|p| p.parse().map_err(|_| bad()))
                .collect::<Result<_, _>>()
                .map(NodePath)
        } else {
            s.chars()
                .map(|c| c.to_digit(10).ok_or_else(bad))
                .collect::<Result<_, _>>()
                .map(NodePath)
        }
    }
}

impl Serialize for NodePath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodePath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn check_arity(arity: u32) -> Result<(), PrefixError> {
    if arity < 2 {
        return Err(PrefixError::InvalidArity(arity));
    }
    Ok(())
}

/// Depth of each leader's path below the global leader.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DepthAssignment {
    arity: u32,
    depths: BTreeMap<LeaderId, u32>,
}

impl DepthAssignment {
    pub fn new(
        arity: u32,
        entries: impl IntoIterator<Item = (LeaderId, u32)>,
    ) -> Result<Self, PrefixError> {
        check_arity(arity)?;
        let mut depths = BTreeMap::new();
        for (id, depth) in entries {
            if depth == 0 {
                return Err(PrefixError::ZeroDepth(id));
            }
            if depths.insert(id, depth).is_some() {
                return Err(PrefixError::DuplicateLeader(id));
            }
        }
        Ok(DepthAssignment { arity, depths })
    }

    /// Leaders numbered `0..depths.len()` in order.
    pub fn from_depths(arity: u32, depths: &[u32]) -> Result<Self, PrefixError> {
        Self::new(
            arity,
            depths
                .iter()
                .enumerate()
                .map(|(i, &d)| (LeaderId(i as u32), d)),
        )
    }

    pub fn arity(&self) -> u32 {
        self.arity
    }

    pub fn depths(&self) -> &BTreeMap<LeaderId, u32> {
        &self.depths
    }

    pub fn depth_of(&self, id: LeaderId) -> Option<u32> {
        self.depths.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }
}

/// Importance of each leader, an exact probability mass function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportanceProfile {
    weights: BTreeMap<LeaderId, Rational>,
}

impl ImportanceProfile {
    pub fn new(
        entries: impl IntoIterator<Item = (LeaderId, Rational)>,
    ) -> Result<Self, PrefixError> {
        let mut weights = BTreeMap::new();
        for (id, p) in entries {
            if p.is_negative() {
                return Err(PrefixError::NegativeImportance(id));
            }
            if weights.insert(id, p).is_some() {
                return Err(PrefixError::DuplicateLeader(id));
            }
        }
        if weights.is_empty() {
            return Err(PrefixError::EmptyProfile);
        }
        let total: Rational = weights.values().sum();
        if !total.is_one() {
            return Err(PrefixError::NotNormalized(total.to_string()));
        }
        Ok(ImportanceProfile { weights })
    }

    /// Leaders numbered `0..probs.len()` in order.
    pub fn from_probs(probs: &[Rational]) -> Result<Self, PrefixError> {
        Self::new(
            probs
                .iter()
                .cloned()
                .enumerate()
                .map(|(i, p)| (LeaderId(i as u32), p)),
        )
    }

    /// Normalizes non-negative integer weights into a profile.
    pub fn from_weights(weights: &[u64]) -> Result<Self, PrefixError> {
        let total: u64 = weights.iter().sum();
        if total == 0 {
            return Err(PrefixError::NotNormalized("0".into()));
        }
        Self::from_probs(
            &weights
                .iter()
                .map(|&w| int(w as u128) / int(total as u128))
                .collect::<Vec<_>>(),
        )
    }

    pub fn weights(&self) -> &BTreeMap<LeaderId, Rational> {
        &self.weights
    }

    pub fn get(&self, id: LeaderId) -> Option<&Rational> {
        self.weights.get(&id)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `Σ D^(-n_i)`.
pub fn kraft_sum(assignment: &DepthAssignment) -> Rational {
    assignment
        .depths
        .values()
        .map(|&d| inv_pow(assignment.arity, d))
        .sum()
}

pub fn kraft_holds(assignment: &DepthAssignment) -> bool {
    kraft_sum(assignment) <= Rational::one()
}

/// Closed form of the Kraft sum over `count` consecutive depths starting at
/// `first_depth`: `D^(-n_1) (D^(-M) - 1) / (D^(-1) - 1)`.
pub fn consecutive_depth_sum(arity: u32, first_depth: u32, count: u32) -> Rational {
    let one = Rational::one();
    inv_pow(arity, first_depth) * (inv_pow(arity, count) - &one) / (inv_pow(arity, 1) - one)
}

/// `Σ p_i n_i`.
pub fn expected_depth(
    assignment: &DepthAssignment,
    profile: &ImportanceProfile,
) -> Result<Rational, PrefixError> {
    if assignment.len() != profile.len() {
        return Err(PrefixError::IdMismatch);
    }
    assignment
        .depths
        .iter()
        .try_fold(Rational::zero(), |acc, (id, &d)| {
            let p = profile.get(*id).ok_or(PrefixError::IdMismatch)?;
            Ok(acc + p * int(d as u128))
        })
}

/// Base-D Shannon entropy of the importance profile.
pub fn entropy_base_d(profile: &ImportanceProfile, arity: u32) -> f64 {
    let ln_d = (arity as f64).ln();
    -profile
        .weights
        .values()
        .map(to_f64)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln() / ln_d)
        .sum::<f64>()
}

/// Huffman merge candidate: a leaf or a merged subtree.
struct Candidate {
    weight: Rational,
    /// Smallest leader id contained; padding leaves rank after every real id.
    key: u64,
    leaves: Vec<u64>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.weight == other.weight && self.key == other.key
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (&self.weight, self.key).cmp(&(&other.weight, other.key))
    }
}

/// Minimum expected-depth path lengths via D-ary Huffman merging.
///
/// When `(M - 1) mod (D - 1) != 0` the leaf set is padded with zero-weight
/// dummies, which are stripped afterwards. Equal weights merge in order of the
/// smallest contained leader id. Depths are clamped to at least 1 since the
/// root is the global leader.
pub fn optimal_depths(
    profile: &ImportanceProfile,
    arity: u32,
) -> Result<DepthAssignment, PrefixError> {
    check_arity(arity)?;
    let m = profile.len() as u64;
    let d = arity as u64;
    let padding = if m <= 1 {
        0
    } else {
        (d - 1 - (m - 1) % (d - 1)) % (d - 1)
    };

    let ids: Vec<LeaderId> = profile.weights.keys().copied().collect();
    let mut depth = vec![0u32; (m + padding) as usize];
    let mut heap: BinaryHeap<Reverse<Candidate>> = profile
        .weights
        .iter()
        .enumerate()
        .map(|(slot, (id, w))| Candidate {
            weight: w.clone(),
            key: id.0 as u64,
            leaves: vec![slot as u64],
        })
        .chain((0..padding).map(|k| Candidate {
            weight: Rational::zero(),
            key: u32::MAX as u64 + 1 + k,
            leaves: vec![m + k],
        }))
        .map(Reverse)
        .collect();

    while heap.len() > 1 {
        let mut merged = Candidate {
            weight: Rational::zero(),
            key: u64::MAX,
            leaves: Vec::new(),
        };
        for _ in 0..arity {
            let Some(Reverse(c)) = heap.pop() else { break };
            merged.weight += c.weight;
            merged.key = merged.key.min(c.key);
            merged.leaves.extend(c.leaves);
        }
        for &leaf in &merged.leaves {
            depth[leaf as usize] += 1;
        }
        heap.push(Reverse(merged));
    }

    DepthAssignment::new(
        arity,
        ids.iter()
            .enumerate()
            .map(|(slot, &id)| (id, depth[slot].max(1))),
    )
}

/// Leader-to-path map produced by [`assign_paths`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixPlan {
    pub arity: u32,
    pub paths: BTreeMap<LeaderId, NodePath>,
}

/// Allocates canonical prefix-free paths for the given depths.
///
/// Leaders are visited by (depth, id). Each receives the lexicographically
/// smallest path of its depth that does not extend an earlier allocation:
/// the successor of the previous path in base D, right-padded with zeros.
pub fn assign_paths(assignment: &DepthAssignment) -> Result<PrefixPlan, PrefixError> {
    let sum = kraft_sum(assignment);
    if sum > Rational::one() {
        return Err(PrefixError::KraftViolated(sum.to_string()));
    }
    let mut order: Vec<(u32, LeaderId)> =
        assignment.depths.iter().map(|(&id, &d)| (d, id)).collect();
    order.sort();

    let arity = assignment.arity;
    let mut paths = BTreeMap::new();
    let mut next: Vec<u32> = Vec::new();
    for (depth, id) in order {
        next.resize(depth as usize, 0);
        paths.insert(id, NodePath(next.clone()));
        // Advance to the successor at this depth. Running off the top is
        // only possible after the final allocation when Kraft holds.
        for digit in next.iter_mut().rev() {
            *digit += 1;
            if *digit < arity {
                break;
            }
            *digit = 0;
        }
    }
    Ok(PrefixPlan { arity, paths })
}

/// True iff no path equals or is a prefix of another.
///
/// In lexicographic order a prefix sorts immediately before its extensions
/// (or before a path that in turn extends it), so checking neighbours suffices.
pub fn verify_prefix_free(plan: &PrefixPlan) -> bool {
    let mut sorted: Vec<&NodePath> = plan.paths.values().collect();
    sorted.sort();
    sorted.windows(2).all(|w| !w[0].is_prefix_of(w[1]))
}

/// True iff no leader sits on (or shares) another leader's root path, so a
/// multicast towards one leader is never overheard by a leader it passes.
pub fn security_check(plan: &PrefixPlan) -> bool {
    let leaders: BTreeSet<&[u32]> = plan.paths.values().map(|p| p.0.as_slice()).collect();
    if leaders.len() != plan.paths.len() {
        return false;
    }
    plan.paths
        .values()
        .all(|path| (0..path.0.len()).all(|relay_depth| !leaders.contains(&path.0[..relay_depth])))
}
