//! Fault-tolerant fusion of interval estimates.
//!
//! `n` abstract sensors each report a closed interval; at most `f` of them
//! may be faulty. Four fusion rules are provided:
//!
//! * **M** (Marzullo): hull of every point covered by at least `n - f`
//!   intervals. Always contains the true value, but small input changes can
//!   make it jump.
//! * **Ω** (overlap): the piecewise-constant count of intervals covering each
//!   point.
//! * **N**: the regions where Ω is at least `n - f`, kept as separate
//!   intervals rather than merged into a hull.
//! * **S**: from the `(f+1)`-th largest left endpoint to the `(f+1)`-th
//!   smallest right endpoint. Moves by at most ε when every endpoint moves by
//!   at most ε. Reported as the best of the four in the literature.
//!
//! Endpoints are inclusive everywhere and point intervals `[x, x]` are valid.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::trial_rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("interval [{lo}, {hi}] is invalid; endpoints must be finite with lo <= hi")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("no intervals given")]
    Empty,
    #[error("fault bound f = {f} must be below the interval count n = {n}")]
    FaultBound { f: usize, n: usize },
    #[error("no point is covered by at least {threshold} intervals")]
    NoAgreement { threshold: usize },
    #[error("S bounds cross (a = {a} > b = {b}): more than f inputs are faulty")]
    InconsistentInputs { a: f64, b: f64 },
    #[error("perturbation size must be finite and non-negative")]
    InvalidEpsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, FusionError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(FusionError::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = FusionError;
    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionProblem {
    intervals: Vec<Interval>,
    faults: usize,
}

impl FusionProblem {
    pub fn new(intervals: Vec<Interval>, faults: usize) -> Result<Self, FusionError> {
        if intervals.is_empty() {
            return Err(FusionError::Empty);
        }
        if faults >= intervals.len() {
            return Err(FusionError::FaultBound {
                f: faults,
                n: intervals.len(),
            });
        }
        Ok(FusionProblem { intervals, faults })
    }

    pub fn from_pairs(pairs: &[(f64, f64)], faults: usize) -> Result<Self, FusionError> {
        let intervals = pairs
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<_, _>>()?;
        Self::new(intervals, faults)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn faults(&self) -> usize {
        self.faults
    }

    /// `n - f`, the minimum coverage a point needs to be trusted.
    pub fn threshold(&self) -> usize {
        self.intervals.len() - self.faults
    }
}

/// Ω as a step function: exact counts at every endpoint and on each open gap
/// between consecutive endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapProfile {
    /// Distinct endpoints, ascending.
    pub breakpoints: Vec<f64>,
    /// Count at each breakpoint.
    pub at_point: Vec<usize>,
    /// Count on the open gap after each breakpoint (`len - 1` entries).
    pub between: Vec<usize>,
}

impl OverlapProfile {
    pub fn omega_at(&self, x: f64) -> usize {
        match self.breakpoints.binary_search_by(|b| b.total_cmp(&x)) {
            Ok(i) => self.at_point[i],
            Err(0) => 0,
            Err(i) if i == self.breakpoints.len() => 0,
            Err(i) => self.between[i - 1],
        }
    }

    pub fn peak(&self) -> usize {
        self.at_point.iter().copied().max().unwrap_or(0)
    }

    /// Maximal closed intervals on which Ω is at least `threshold`, ascending.
    ///
    /// A gap's count never exceeds the counts at its two endpoints, so a
    /// region is a run of qualifying breakpoints joined by qualifying gaps.
    pub fn superlevel(&self, threshold: usize) -> Vec<Interval> {
        let mut regions = Vec::new();
        let mut start: Option<f64> = None;
        for (i, &b) in self.breakpoints.iter().enumerate() {
            if self.at_point[i] >= threshold {
                start.get_or_insert(b);
                let continues = self.between.get(i).is_some_and(|&c| c >= threshold);
                if !continues {
                    regions.push(Interval {
                        lo: start.take().unwrap(),
                        hi: b,
                    });
                }
            }
        }
        regions
    }
}

pub fn omega_function(problem: &FusionProblem) -> OverlapProfile {
    let mut breakpoints: Vec<f64> = problem
        .intervals
        .iter()
        .flat_map(|i| [i.lo, i.hi])
        .collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();

    let mut starts = vec![0usize; breakpoints.len()];
    let mut ends = vec![0usize; breakpoints.len()];
    let pos = |x: f64| breakpoints.binary_search_by(|b| b.total_cmp(&x)).unwrap();
    for i in &problem.intervals {
        starts[pos(i.lo)] += 1;
        ends[pos(i.hi)] += 1;
    }

    let mut at_point = Vec::with_capacity(breakpoints.len());
    let mut between = Vec::with_capacity(breakpoints.len().saturating_sub(1));
    let mut open = 0usize;
    for k in 0..breakpoints.len() {
        // Closed ends: intervals starting here count at the point, intervals
        // ending here stop counting just after it.
        open += starts[k];
        at_point.push(open);
        open -= ends[k];
        if k + 1 < breakpoints.len() {
            between.push(open);
        }
    }
    OverlapProfile {
        breakpoints,
        at_point,
        between,
    }
}

/// Marzullo's M: smallest interval containing every point covered by at least
/// `n - f` inputs.
pub fn m_function(problem: &FusionProblem) -> Result<Interval, FusionError> {
    let profile = omega_function(problem);
    let t = problem.threshold();
    let hits: Vec<f64> = profile
        .breakpoints
        .iter()
        .zip(&profile.at_point)
        .filter(|(_, &c)| c >= t)
        .map(|(&b, _)| b)
        .collect();
    match (hits.first(), hits.last()) {
        (Some(&lo), Some(&hi)) => Ok(Interval { lo, hi }),
        _ => Err(FusionError::NoAgreement { threshold: t }),
    }
}

/// N: the separate regions where Ω lies in `[n - f, n]`.
pub fn n_function(problem: &FusionProblem) -> Result<Vec<Interval>, FusionError> {
    let t = problem.threshold();
    let regions = omega_function(problem).superlevel(t);
    if regions.is_empty() {
        return Err(FusionError::NoAgreement { threshold: t });
    }
    Ok(regions)
}

/// S: `[(f+1)-th largest lo, (f+1)-th smallest hi]`.
pub fn s_function(problem: &FusionProblem) -> Result<Interval, FusionError> {
    let mut los: Vec<f64> = problem.intervals.iter().map(|i| i.lo).collect();
    let mut his: Vec<f64> = problem.intervals.iter().map(|i| i.hi).collect();
    los.sort_by(|a, b| b.total_cmp(a));
    his.sort_by(f64::total_cmp);
    let (a, b) = (los[problem.faults], his[problem.faults]);
    if a > b {
        return Err(FusionError::InconsistentInputs { a, b });
    }
    Ok(Interval { lo: a, hi: b })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionFn {
    M,
    Omega,
    N,
    S,
}

impl FusionFn {
    pub const ALL: [FusionFn; 4] = [FusionFn::M, FusionFn::Omega, FusionFn::N, FusionFn::S];

    pub fn name(self) -> &'static str {
        match self {
            FusionFn::M => "m",
            FusionFn::Omega => "omega",
            FusionFn::N => "n",
            FusionFn::S => "s",
        }
    }

    /// The output as a list of intervals.
    ///
    /// Ω yields the regions where the overlap count reaches its peak, the
    /// integration interval of highest coverage.
    pub fn evaluate(self, problem: &FusionProblem) -> Result<Vec<Interval>, FusionError> {
        match self {
            FusionFn::M => m_function(problem).map(|i| vec![i]),
            FusionFn::Omega => {
                let profile = omega_function(problem);
                Ok(profile.superlevel(profile.peak()))
            }
            FusionFn::N => n_function(problem),
            FusionFn::S => s_function(problem).map(|i| vec![i]),
        }
    }
}

fn hull(regions: &[Interval]) -> Interval {
    Interval {
        lo: regions.iter().map(|i| i.lo).fold(f64::INFINITY, f64::min),
        hi: regions
            .iter()
            .map(|i| i.hi)
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Largest endpoint movement between two outputs. Outputs with a different
/// number of regions are compared through their hulls.
fn displacement(a: &[Interval], b: &[Interval]) -> f64 {
    let pairs: Vec<(Interval, Interval)> = if a.len() == b.len() {
        a.iter().copied().zip(b.iter().copied()).collect()
    } else {
        vec![(hull(a), hull(b))]
    };
    pairs
        .iter()
        .map(|(x, y)| (x.lo - y.lo).abs().max((x.hi - y.hi).abs()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub function: FusionFn,
    pub epsilon: f64,
    pub probes: u64,
    pub seed: u64,
    pub max_displacement: f64,
    /// Probes whose perturbed problem had no defined output (for example S
    /// bounds crossing). They do not contribute to the maximum.
    pub undefined: u64,
    /// Probes whose output had a different number of regions than the base.
    pub region_count_changes: u64,
}

/// Randomly jitters every endpoint by up to ±`epsilon` and reports the worst
/// movement of the selected function's output.
///
/// Probe `k` uses stream `(seed, k)`. Endpoints that cross are re-sorted so
/// each perturbed pair is still a valid interval. An error on the unperturbed
/// problem is returned as is.
pub fn lipschitz_probe(
    function: FusionFn,
    problem: &FusionProblem,
    epsilon: f64,
    probes: u64,
    seed: u64,
) -> Result<ProbeReport, FusionError> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(FusionError::InvalidEpsilon);
    }
    let base = function.evaluate(problem)?;
    let mut report = ProbeReport {
        function,
        epsilon,
        probes,
        seed,
        max_displacement: 0.0,
        undefined: 0,
        region_count_changes: 0,
    };
    for k in 0..probes {
        let mut rng = trial_rng(seed, k);
        let mut jitter = || {
            if epsilon == 0.0 {
                0.0
            } else {
                rng.gen_range(-epsilon..=epsilon)
            }
        };
        let intervals = problem
            .intervals
            .iter()
            .map(|i| {
                let (a, b) = (i.lo + jitter(), i.hi + jitter());
                Interval {
                    lo: a.min(b),
                    hi: a.max(b),
                }
            })
            .collect();
        let perturbed = FusionProblem {
            intervals,
            faults: problem.faults,
        };
        match function.evaluate(&perturbed) {
            Ok(out) => {
                if out.len() != base.len() {
                    report.region_count_changes += 1;
                }
                report.max_displacement = report.max_displacement.max(displacement(&base, &out));
            }
            Err(_) => report.undefined += 1,
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(pairs: &[(f64, f64)], f: usize) -> FusionProblem {
        FusionProblem::from_pairs(pairs, f).unwrap()
    }

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn validation() {
        assert!(matches!(
            Interval::new(2.0, 1.0),
            Err(FusionError::InvalidInterval { .. })
        ));
        assert!(Interval::new(1.0, 1.0).is_ok());
        assert!(matches!(
            Interval::new(f64::NAN, 1.0),
            Err(FusionError::InvalidInterval { .. })
        ));
        assert_eq!(FusionProblem::new(vec![], 0), Err(FusionError::Empty));
        assert_eq!(
            FusionProblem::from_pairs(&[(0.0, 1.0)], 1),
            Err(FusionError::FaultBound { f: 1, n: 1 })
        );
        let parsed: Interval = serde_json::from_str("[1.5, 2]").unwrap();
        assert_eq!(parsed, iv(1.5, 2.0));
        assert!(serde_json::from_str::<Interval>("[3, 2]").is_err());
    }

    #[test]
    fn m_examples() {
        assert_eq!(
            m_function(&problem(&[(8.0, 12.0), (11.0, 13.0), (14.0, 15.0)], 1)).unwrap(),
            iv(11.0, 12.0)
        );
        assert_eq!(
            m_function(&problem(&[(0.0, 2.0), (1.0, 3.0)], 0)).unwrap(),
            iv(1.0, 2.0)
        );
        assert_eq!(
            m_function(&problem(&[(0.0, 1.0), (2.0, 3.0), (4.0, 5.0)], 1)),
            Err(FusionError::NoAgreement { threshold: 2 })
        );
    }

    #[test]
    fn omega_counts() {
        let p = omega_function(&problem(&[(0.0, 2.0), (1.0, 3.0), (2.0, 4.0)], 0));
        assert_eq!(p.omega_at(2.0), 3);
        assert_eq!(p.omega_at(0.5), 1);
        assert_eq!(p.omega_at(1.0), 2);
        assert_eq!(p.omega_at(3.5), 1);
        assert_eq!(p.omega_at(-1.0), 0);
        assert_eq!(p.omega_at(4.0), 1);
        assert_eq!(p.omega_at(4.5), 0);
        let single = omega_function(&problem(&[(2.0, 5.0)], 0));
        assert_eq!(single.omega_at(3.0), 1);
        assert_eq!(single.omega_at(6.0), 0);
        let point = omega_function(&problem(&[(1.0, 1.0), (1.0, 2.0)], 0));
        assert_eq!(point.omega_at(1.0), 2);
        assert_eq!(point.omega_at(1.5), 1);
    }

    #[test]
    fn n_examples() {
        assert_eq!(
            n_function(&problem(&[(0.0, 2.0), (1.0, 3.0), (2.0, 4.0)], 1)).unwrap(),
            vec![iv(1.0, 3.0)]
        );
        assert_eq!(
            n_function(&problem(&[(0.0, 1.0), (0.0, 1.0)], 0)).unwrap(),
            vec![iv(0.0, 1.0)]
        );
        assert_eq!(
            n_function(&problem(
                &[(0.0, 1.0), (3.0, 4.0), (0.0, 1.0), (3.0, 4.0)],
                2
            ))
            .unwrap(),
            vec![iv(0.0, 1.0), iv(3.0, 4.0)]
        );
        // Touching intervals meet in a single point region.
        assert_eq!(
            n_function(&problem(&[(0.0, 1.0), (1.0, 2.0)], 0)).unwrap(),
            vec![iv(1.0, 1.0)]
        );
        assert!(matches!(
            n_function(&problem(&[(0.0, 1.0), (2.0, 3.0)], 0)),
            Err(FusionError::NoAgreement { .. })
        ));
    }

    #[test]
    fn s_examples() {
        assert_eq!(
            s_function(&problem(&[(0.0, 2.0), (1.0, 3.0), (2.0, 4.0)], 1)).unwrap(),
            iv(1.0, 3.0)
        );
        assert_eq!(
            s_function(&problem(&[(0.0, 1.0)], 0)).unwrap(),
            iv(0.0, 1.0)
        );
        assert_eq!(
            s_function(&problem(&[(0.0, 1.0), (10.0, 11.0), (20.0, 21.0)], 1)).unwrap(),
            iv(10.0, 11.0)
        );
        assert_eq!(
            s_function(&problem(&[(0.0, 1.0), (10.0, 11.0)], 0)),
            Err(FusionError::InconsistentInputs { a: 10.0, b: 1.0 })
        );
    }

    #[test]
    fn omega_selector_returns_peak_regions() {
        let out = FusionFn::Omega
            .evaluate(&problem(&[(0.0, 2.0), (1.0, 3.0), (2.0, 4.0)], 0))
            .unwrap();
        assert_eq!(out, vec![iv(2.0, 2.0)]);
        for f in FusionFn::ALL {
            assert_eq!(
                f.evaluate(&problem(&[(0.0, 1.0)], 0)).unwrap(),
                vec![iv(0.0, 1.0)]
            );
        }
    }

    #[test]
    fn probes() {
        let p = problem(&[(0.0, 2.0), (1.0, 3.0), (2.0, 4.0)], 1);
        for f in FusionFn::ALL {
            let r = lipschitz_probe(f, &p, 0.0, 20, 1).unwrap();
            assert_eq!(r.max_displacement, 0.0);
            assert_eq!(r.undefined, 0);
        }
        let r = lipschitz_probe(FusionFn::S, &p, 0.01, 500, 9).unwrap();
        assert!(r.max_displacement <= 0.01 + 1e-12);
        assert!(r.max_displacement > 0.0);

        let witness = problem(&[(0.0, 2.0), (2.0, 4.0), (4.0001, 12.0)], 1);
        assert_eq!(m_function(&witness).unwrap(), iv(2.0, 2.0));
        let r = lipschitz_probe(FusionFn::M, &witness, 1e-3, 200, 0).unwrap();
        assert!(r.max_displacement >= 1.9, "{r:?}");

        assert_eq!(
            lipschitz_probe(FusionFn::S, &p, -1.0, 1, 0),
            Err(FusionError::InvalidEpsilon)
        );
        let bad = problem(&[(0.0, 1.0), (10.0, 11.0)], 0);
        assert!(matches!(
            lipschitz_probe(FusionFn::S, &bad, 0.1, 1, 0),
            Err(FusionError::InconsistentInputs { .. })
        ));
    }

    fn arb_problem() -> impl proptest::strategy::Strategy<Value = FusionProblem> {
        use proptest::prelude::*;
        proptest::collection::vec((-20i32..20, 0i32..12), 1..=8).prop_flat_map(|raw| {
            let n = raw.len();
            (Just(raw), 0..n).prop_map(|(raw, f)| {
                let pairs: Vec<(f64, f64)> = raw
                    .iter()
                    .map(|&(lo, w)| (lo as f64 / 2.0, (lo + w) as f64 / 2.0))
                    .collect();
                FusionProblem::from_pairs(&pairs, f).unwrap()
            })
        })
    }

    proptest::proptest! {
        #[test]
        fn superlevel_matches_point_counts(p in arb_problem()) {
            let profile = omega_function(&p);
            let t = p.threshold();
            let regions = profile.superlevel(t);
            // Probe every endpoint and the midpoints and margins around them.
            let mut xs: Vec<f64> = profile.breakpoints.clone();
            for w in profile.breakpoints.windows(2) {
                xs.push((w[0] + w[1]) / 2.0);
            }
            xs.push(profile.breakpoints[0] - 1.0);
            xs.push(profile.breakpoints.last().unwrap() + 1.0);
            for x in xs {
                let brute = p.intervals().iter().filter(|i| i.contains(x)).count();
                proptest::prop_assert_eq!(profile.omega_at(x), brute);
                let inside = regions.iter().any(|r| r.contains(x));
                proptest::prop_assert_eq!(inside, brute >= t);
            }
        }

        #[test]
        fn n_hull_equals_m(p in arb_problem()) {
            match m_function(&p) {
                Ok(m) => proptest::prop_assert_eq!(hull(&n_function(&p).unwrap()), m),
                Err(e) => proptest::prop_assert_eq!(n_function(&p), Err(e)),
            }
        }
    }
}
