//! Complete D-ary tree model of a hierarchical network.
//!
//! The root is the global leader; local leaders are elected at various depths.
//! All probabilities here are exact rationals. Only the Monte Carlo link
//! simulation works in floating point.

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exact::{int, is_probability, to_f64, Rational};
use crate::rng::trial_rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("arity must be at least 2, got {0}")]
    InvalidArity(u32),
    #[error("depth {depth} outside the valid range [{min}, {max}]")]
    DepthOutOfRange { depth: u32, min: u32, max: u32 },
    #[error(
        "{count} leaders requested at depth {depth}, but that level holds only {capacity} nodes"
    )]
    CountExceedsLevel {
        depth: u32,
        count: u128,
        capacity: u128,
    },
    #[error("depth {0} listed more than once in the leader profile")]
    DuplicateDepth(u32),
    #[error("link failure probability must lie in [0, 1]")]
    InvalidFailureProbability,
    #[error("node counts overflow 128-bit integers for arity {arity} and depth {depth}")]
    Overflow { arity: u32, depth: u32 },
    #[error("at least one trial is required")]
    NoTrials,
}

/// Which denominator turns a per-level leader count into a probability over
/// the whole tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `D^(n_max+1) - 1`, the closed form used in the original derivation.
    /// Equals the node count only for binary trees.
    #[default]
    Paper,
    /// The true node count `(D^(n_max+1) - 1) / (D - 1)`.
    Exact,
}

/// A complete D-ary tree: every node above `max_depth` has exactly `arity`
/// children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaryTree {
    arity: u32,
    max_depth: u32,
}

impl DaryTree {
    pub fn new(arity: u32, max_depth: u32) -> Result<Self, TreeError> {
        if arity < 2 {
            return Err(TreeError::InvalidArity(arity));
        }
        let tree = DaryTree { arity, max_depth };
        // Reject shapes whose normalizer does not fit.
        tree.paper_denominator()?;
        Ok(tree)
    }

    pub fn arity(&self) -> u32 {
        self.arity
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    fn pow(&self, exp: u32) -> Result<u128, TreeError> {
        (self.arity as u128)
            .checked_pow(exp)
            .ok_or(TreeError::Overflow {
                arity: self.arity,
                depth: exp,
            })
    }

    /// Total number of nodes, `(D^(n_max+1) - 1) / (D - 1)`.
    pub fn node_count(&self) -> u128 {
        // Checked in `new`.
        let top = self
            .pow(self.max_depth + 1)
            .expect("validated at construction");
        (top - 1) / (self.arity as u128 - 1)
    }

    pub fn nodes_at_depth(&self, depth: u32) -> Result<u128, TreeError> {
        if depth > self.max_depth {
            return Err(TreeError::DepthOutOfRange {
                depth,
                min: 0,
                max: self.max_depth,
            });
        }
        self.pow(depth)
    }

    fn paper_denominator(&self) -> Result<u128, TreeError> {
        Ok(self.pow(self.max_depth + 1)? - 1)
    }

    pub fn denominator(&self, mode: Normalization) -> u128 {
        match mode {
            Normalization::Paper => self.paper_denominator().expect("validated at construction"),
            Normalization::Exact => self.node_count(),
        }
    }

    fn check_count(&self, count: u128, depth: u32) -> Result<(), TreeError> {
        let capacity = self.nodes_at_depth(depth)?;
        if count > capacity {
            return Err(TreeError::CountExceedsLevel {
                depth,
                count,
                capacity,
            });
        }
        Ok(())
    }

    /// `t_j = s_j / D^(n_j)`: chance that a node at depth `n_j` is a local leader.
    pub fn local_leader_fraction(&self, count: u128, depth: u32) -> Result<Rational, TreeError> {
        self.check_count(count, depth)?;
        Ok(int(count) / int(self.nodes_at_depth(depth)?))
    }

    /// Chance that a node drawn uniformly from the whole tree is one of the
    /// `count` leaders at `depth`.
    pub fn p_leader_at_level(
        &self,
        count: u128,
        depth: u32,
        mode: Normalization,
    ) -> Result<Rational, TreeError> {
        self.check_count(count, depth)?;
        Ok(int(count) / int(self.denominator(mode)))
    }

    /// Chance that a uniformly drawn node is any local leader.
    pub fn p_any_local_leader(
        &self,
        profile: &LeaderCountProfile,
        mode: Normalization,
    ) -> Result<Rational, TreeError> {
        profile
            .levels()
            .iter()
            .try_fold(Rational::zero(), |acc, l| {
                Ok(acc + self.p_leader_at_level(l.count, l.depth, mode)?)
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelLeaders {
    pub depth: u32,
    pub count: u128,
}

/// Number of elected local leaders per depth.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct LeaderCountProfile {
    levels: Vec<LevelLeaders>,
}

impl LeaderCountProfile {
    /// Validates depths against `tree` (1..=n_max, distinct) and counts
    /// against level capacity. Levels are kept sorted by depth.
    pub fn new(tree: &DaryTree, mut levels: Vec<LevelLeaders>) -> Result<Self, TreeError> {
        let mut seen = BTreeSet::new();
        for l in &levels {
            if l.depth < 1 || l.depth > tree.max_depth() {
                return Err(TreeError::DepthOutOfRange {
                    depth: l.depth,
                    min: 1,
                    max: tree.max_depth(),
                });
            }
            if !seen.insert(l.depth) {
                return Err(TreeError::DuplicateDepth(l.depth));
            }
            tree.check_count(l.count, l.depth)?;
        }
        levels.sort_by_key(|l| l.depth);
        Ok(LeaderCountProfile { levels })
    }

    pub fn levels(&self) -> &[LevelLeaders] {
        &self.levels
    }

    pub fn total(&self) -> u128 {
        self.levels.iter().map(|l| l.count).sum()
    }
}

/// Independent, identically distributed link failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkModel {
    q: Rational,
}

impl LinkModel {
    pub fn new(q: Rational) -> Result<Self, TreeError> {
        if !is_probability(&q) {
            return Err(TreeError::InvalidFailureProbability);
        }
        Ok(LinkModel { q })
    }

    pub fn failure_probability(&self) -> &Rational {
        &self.q
    }

    fn check_depth(depth: u32) -> Result<(), TreeError> {
        if depth < 1 {
            return Err(TreeError::DepthOutOfRange {
                depth,
                min: 1,
                max: u32::MAX,
            });
        }
        Ok(())
    }

    /// `(1 - q)^n`: every link on the root path to depth `n` is up.
    pub fn path_reliability(&self, depth: u32) -> Result<Rational, TreeError> {
        Self::check_depth(depth)?;
        Ok(num_traits::pow(Rational::one() - &self.q, depth as usize))
    }

    /// `(1 - q)^(n-1) q`: the first `n - 1` links are up and the last one fails.
    pub fn last_link_failure_prob(&self, depth: u32) -> Result<Rational, TreeError> {
        Self::check_depth(depth)?;
        Ok(num_traits::pow(Rational::one() - &self.q, depth as usize - 1) * &self.q)
    }
}

/// Counts from a Monte Carlo run over a root path of fixed depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LinkSimCounts {
    pub trials: u64,
    /// Trials in which every link was up.
    pub path_up: u64,
    /// Trials in which all but the last link were up and the last one failed.
    pub last_link_down: u64,
}

impl LinkSimCounts {
    pub fn path_reliability(&self) -> f64 {
        self.path_up as f64 / self.trials as f64
    }

    pub fn last_link_failure(&self) -> f64 {
        self.last_link_down as f64 / self.trials as f64
    }
}

/// Simulates `trials` independent root paths of `depth` links.
///
/// Trial `i` draws from the stream `(seed, i)`, and counts are integer sums,
/// so the parallel result is bit-identical to a sequential run.
pub fn simulate_links(
    link: &LinkModel,
    depth: u32,
    trials: u64,
    seed: u64,
) -> Result<LinkSimCounts, TreeError> {
    if trials == 0 {
        return Err(TreeError::NoTrials);
    }
    let q = to_f64(&link.q);
    let (path_up, last_link_down) = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let up: Vec<bool> = (0..depth).map(|_| rng.gen::<f64>() >= q).collect();
            let all_up = up.iter().all(|&u| u);
            let last_down = match up.split_last() {
                Some((last, prefix)) => !last && prefix.iter().all(|&u| u),
                None => false,
            };
            (all_up as u64, last_down as u64)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(LinkSimCounts {
        trials,
        path_up,
        last_link_down,
    })
}

/// Monte Carlo estimate of [`LinkModel::path_reliability`].
pub fn simulate_path_reliability(
    link: &LinkModel,
    depth: u32,
    trials: u64,
    seed: u64,
) -> Result<f64, TreeError> {
    Ok(simulate_links(link, depth, trials, seed)?.path_reliability())
}
