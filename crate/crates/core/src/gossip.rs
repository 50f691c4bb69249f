//! Level-controlled gossip over a leveled, sectored sensor field.
//!
//! Nodes are leveled by hop count from the base station and sectored by
//! bearing. An event travels inward only: a node accepts a copy only from a
//! sender at a strictly higher level and forwards it (at most once) with its
//! own level's probability. Inner levels use higher probabilities.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::trial_rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GossipError {
    #[error("node id {0} listed more than once")]
    DuplicateNode(u32),
    #[error("unknown node {0}")]
    UnknownNode(u32),
    #[error("communication radius must be positive and finite")]
    InvalidRadius,
    #[error("coordinates must be finite")]
    InvalidPosition,
    #[error("sector count must be at least 1")]
    InvalidSectorCount,
    #[error("node {0} sits exactly on the base station, so its bearing is undefined")]
    NodeAtBaseStation(u32),
    #[error("node {0} cannot reach the base station")]
    Unreachable(u32),
    #[error("node {0} has no sector assignment")]
    Unsectored(u32),
    #[error("at least one level probability is required")]
    EmptyConfig,
    #[error("probability for level {level} is {value}, outside [0, 1]")]
    ProbabilityOutOfRange { level: usize, value: f64 },
    #[error("level probabilities must strictly decrease outward (P_{level} = {inner} <= P_{next} = {outer})", next = level + 1)]
    NotStrictlyDecreasing {
        level: usize,
        inner: f64,
        outer: f64,
    },
    #[error(
        "field reaches level {max_level} but only {configured} level probabilities are configured"
    )]
    ConfigTooShort { max_level: u32, configured: usize },
    #[error("at least one trial is required")]
    NoTrials,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNode {
    pub id: u32,
    #[serde(flatten)]
    pub position: Position,
}

/// Sensor positions in meters, a base station, and a common radio range.
///
/// Two parties are neighbours when their distance is at most `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    nodes: Vec<SensorNode>,
    base_station: Position,
    radius: f64,
    index: BTreeMap<u32, usize>,
}

fn distance(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

impl Field {
    /// Nodes are stored in ascending id order.
    pub fn new(
        mut nodes: Vec<SensorNode>,
        base_station: Position,
        radius: f64,
    ) -> Result<Self, GossipError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GossipError::InvalidRadius);
        }
        let finite = |p: Position| p.x.is_finite() && p.y.is_finite();
        if !finite(base_station) || !nodes.iter().all(|n| finite(n.position)) {
            return Err(GossipError::InvalidPosition);
        }
        nodes.sort_by_key(|n| n.id);
        let mut index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(GossipError::DuplicateNode(n.id));
            }
        }
        Ok(Field {
            nodes,
            base_station,
            radius,
            index,
        })
    }

    pub fn nodes(&self) -> &[SensorNode] {
        &self.nodes
    }

    pub fn base_station(&self) -> Position {
        self.base_station
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn slot(&self, id: u32) -> Result<usize, GossipError> {
        self.index
            .get(&id)
            .copied()
            .ok_or(GossipError::UnknownNode(id))
    }

    fn in_range(&self, a: Position, b: Position) -> bool {
        distance(a, b) <= self.radius
    }

    /// Neighbour slots of every node, ascending.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                if self.in_range(self.nodes[i].position, self.nodes[j].position) {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        adj
    }
}

/// Hop count from the base station (level 0) for every reachable node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Leveling {
    pub levels: BTreeMap<u32, u32>,
    pub unreachable: Vec<u32>,
}

impl Leveling {
    pub fn level(&self, id: u32) -> Option<u32> {
        self.levels.get(&id).copied()
    }

    pub fn max_level(&self) -> u32 {
        self.levels.values().copied().max().unwrap_or(0)
    }
}

/// Breadth-first leveling outward from the base station.
pub fn assign_levels(field: &Field) -> Leveling {
    let n = field.nodes.len();
    let adj = field.adjacency();
    let mut level: Vec<Option<u32>> = vec![None; n];
    let mut queue = VecDeque::new();
    for (i, node) in field.nodes.iter().enumerate() {
        if field.in_range(node.position, field.base_station) {
            level[i] = Some(1);
            queue.push_back(i);
        }
    }
    while let Some(v) = queue.pop_front() {
        let next = level[v].unwrap() + 1;
        for &w in &adj[v] {
            if level[w].is_none() {
                level[w] = Some(next);
                queue.push_back(w);
            }
        }
    }
    let mut levels = BTreeMap::new();
    let mut unreachable = Vec::new();
    for (node, l) in field.nodes.iter().zip(level) {
        match l {
            Some(l) => {
                levels.insert(node.id, l);
            }
            None => unreachable.push(node.id),
        }
    }
    Leveling {
        levels,
        unreachable,
    }
}

/// Equiangular sector of every node, counted counterclockwise from the
/// positive x-axis as seen from the base station.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sectoring {
    pub sector_count: u32,
    pub sectors: BTreeMap<u32, u32>,
}

pub fn bearing_degrees(from: Position, to: Position) -> f64 {
    let deg = (to.y - from.y).atan2(to.x - from.x).to_degrees();
    let deg = if deg < 0.0 { deg + 360.0 } else { deg };
    // -0.0 and tiny negatives round up to exactly 360.
    if deg >= 360.0 {
        0.0
    } else {
        deg
    }
}

pub fn assign_sectors(field: &Field, sector_count: u32) -> Result<Sectoring, GossipError> {
    if sector_count == 0 {
        return Err(GossipError::InvalidSectorCount);
    }
    let width = 360.0 / sector_count as f64;
    let mut sectors = BTreeMap::new();
    for node in &field.nodes {
        if node.position == field.base_station {
            return Err(GossipError::NodeAtBaseStation(node.id));
        }
        let angle = bearing_degrees(field.base_station, node.position);
        let sector = ((angle / width).floor() as u32).min(sector_count - 1);
        sectors.insert(node.id, sector);
    }
    Ok(Sectoring {
        sector_count,
        sectors,
    })
}

/// Leveling-sectoring coordinates of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Location {
    pub level: u32,
    pub sector: u32,
}

pub fn locate(
    id: u32,
    leveling: &Leveling,
    sectoring: &Sectoring,
) -> Result<Location, GossipError> {
    let level = leveling.level(id).ok_or(GossipError::Unreachable(id))?;
    let sector = *sectoring
        .sectors
        .get(&id)
        .ok_or(GossipError::Unsectored(id))?;
    Ok(Location { level, sector })
}

/// Per-level transmit probabilities `P_1 > P_2 > ... > P_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GossipConfig {
    probabilities: Vec<f64>,
}

impl GossipConfig {
    pub fn new(probabilities: Vec<f64>) -> Result<Self, GossipError> {
        if probabilities.is_empty() {
            return Err(GossipError::EmptyConfig);
        }
        for (i, &p) in probabilities.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(GossipError::ProbabilityOutOfRange {
                    level: i + 1,
                    value: p,
                });
            }
        }
        for (i, w) in probabilities.windows(2).enumerate() {
            if w[0] <= w[1] {
                return Err(GossipError::NotStrictlyDecreasing {
                    level: i + 1,
                    inner: w[0],
                    outer: w[1],
                });
            }
        }
        Ok(GossipConfig { probabilities })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `P_level` for `level >= 1`.
    pub fn at(&self, level: u32) -> Option<f64> {
        let i = (level as usize).checked_sub(1)?;
        self.probabilities.get(i).copied()
    }

    pub fn levels(&self) -> usize {
        self.probabilities.len()
    }
}

/// `Π_{k=1..L} P_k`: delivery probability from level `L` on a chain with one
/// node per level.
pub fn analytic_line_delivery(
    config: &GossipConfig,
    origin_level: u32,
) -> Result<f64, GossipError> {
    if origin_level as usize > config.levels() {
        return Err(GossipError::ConfigTooShort {
            max_level: origin_level,
            configured: config.levels(),
        });
    }
    Ok(config.probabilities[..origin_level as usize]
        .iter()
        .product())
}

/// One accepted copy: `sender` transmitted and `receiver` took it in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Hop {
    pub sender: u32,
    pub sender_level: u32,
    pub receiver: u32,
    pub receiver_level: u32,
}

/// Full record of a single trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialTrace {
    pub trial: u64,
    /// Nodes that transmitted, in round order.
    pub transmitters: Vec<u32>,
    pub hops: Vec<Hop>,
    pub delivered: bool,
}

/// Line-oriented text, one record per line, for debugging.
impl fmt::Display for TrialTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for h in &self.hops {
            writeln!(
                f,
                "trial={} hop {}(L{}) -> {}(L{})",
                self.trial, h.sender, h.sender_level, h.receiver, h.receiver_level
            )?;
        }
        writeln!(
            f,
            "trial={} transmissions={} delivered={}",
            self.trial,
            self.transmitters.len(),
            self.delivered
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub delivery_probability: f64,
    pub mean_transmissions: f64,
    pub delivered: u64,
    pub trials: u64,
    pub seed: u64,
}

/// Prepared simulation over a fixed field, leveling and configuration.
pub struct GossipSim<'a> {
    field: &'a Field,
    config: &'a GossipConfig,
    adjacency: Vec<Vec<usize>>,
    level: Vec<Option<u32>>,
    /// Leveled slots grouped by level, index 0 holding level 1.
    by_level: Vec<Vec<usize>>,
    origin: usize,
}

impl<'a> GossipSim<'a> {
    pub fn new(
        field: &'a Field,
        leveling: &Leveling,
        config: &'a GossipConfig,
        origin: u32,
    ) -> Result<Self, GossipError> {
        let origin_slot = field.slot(origin)?;
        if leveling.level(origin).is_none() {
            return Err(GossipError::Unreachable(origin));
        }
        let max_level = leveling.max_level();
        if max_level as usize > config.levels() {
            return Err(GossipError::ConfigTooShort {
                max_level,
                configured: config.levels(),
            });
        }
        let level: Vec<Option<u32>> = field.nodes.iter().map(|n| leveling.level(n.id)).collect();
        let mut by_level = vec![Vec::new(); max_level as usize];
        for (slot, l) in level.iter().enumerate() {
            if let Some(l) = l {
                by_level[*l as usize - 1].push(slot);
            }
        }
        Ok(GossipSim {
            field,
            config,
            adjacency: field.adjacency(),
            level,
            by_level,
            origin: origin_slot,
        })
    }

    /// Runs one trial with the draws for stream `(seed, trial)`.
    ///
    /// One uniform is drawn per node, in id order, before the event starts; a
    /// node transmits iff it holds a copy and its draw is below its level's
    /// probability. Fixing the draws up front gives common random numbers
    /// across configurations.
    pub fn run_trial(&self, seed: u64, trial: u64, record: bool) -> TrialTrace {
        let mut rng = trial_rng(seed, trial);
        let draws: Vec<f64> = (0..self.field.nodes.len()).map(|_| rng.gen()).collect();
        let level = |slot: usize| self.level[slot].expect("only leveled nodes take part");
        let id = |slot: usize| self.field.nodes[slot].id;

        let mut holds = vec![false; self.field.nodes.len()];
        holds[self.origin] = true;
        let mut transmitters = Vec::new();
        let mut hops = Vec::new();
        let mut delivered = false;

        // Rounds from the origin's level inward; within a round, by node id.
        for round in (1..=level(self.origin)).rev() {
            let p = self.config.at(round).expect("config covers every level");
            for &slot in &self.by_level[round as usize - 1] {
                if !holds[slot] || draws[slot] >= p {
                    continue;
                }
                transmitters.push(id(slot));
                if round == 1 {
                    delivered = true;
                }
                for &nb in &self.adjacency[slot] {
                    // Copies from the same or a lower level are discarded.
                    match self.level[nb] {
                        Some(l) if l < round => {
                            holds[nb] = true;
                            if record {
                                hops.push(Hop {
                                    sender: id(slot),
                                    sender_level: round,
                                    receiver: id(nb),
                                    receiver_level: l,
                                });
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
        TrialTrace {
            trial,
            transmitters,
            hops,
            delivered,
        }
    }

    pub fn run(&self, trials: u64, seed: u64) -> Result<SimReport, GossipError> {
        if trials == 0 {
            return Err(GossipError::NoTrials);
        }
        let (delivered, transmissions) = (0..trials)
            .into_par_iter()
            .map(|t| {
                let trace = self.run_trial(seed, t, false);
                (trace.delivered as u64, trace.transmitters.len() as u64)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        Ok(SimReport {
            delivery_probability: delivered as f64 / trials as f64,
            mean_transmissions: transmissions as f64 / trials as f64,
            delivered,
            trials,
            seed,
        })
    }
}

/// Estimates delivery probability and transmission cost of an event raised at
/// `origin`. Deterministic for a given seed.
pub fn simulate_gossip(
    field: &Field,
    leveling: &Leveling,
    config: &GossipConfig,
    origin: u32,
    trials: u64,
    seed: u64,
) -> Result<SimReport, GossipError> {
    GossipSim::new(field, leveling, config, origin)?.run(trials, seed)
}
