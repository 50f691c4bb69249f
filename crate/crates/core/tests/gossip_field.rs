use hhcn::gossip::{
    assign_levels, assign_sectors, bearing_degrees, locate, Field, GossipConfig, GossipSim,
    Position, SensorNode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BS: Position = Position { x: 50.0, y: 50.0 };

fn random_field(seed: u64, n: u32) -> Field {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let nodes = (0..n)
        .map(|id| SensorNode {
            id: 100 + id,
            position: Position {
                x: r.gen_range(0.0..100.0),
                y: r.gen_range(0.0..100.0),
            },
        })
        .collect();
    Field::new(nodes, BS, 22.0).unwrap()
}

/// Hop distances by repeated relaxation over all pairs, base station at 0.
fn relaxed_levels(field: &Field) -> Vec<Option<u32>> {
    let pts: Vec<Position> = std::iter::once(field.base_station())
        .chain(field.nodes().iter().map(|n| n.position))
        .collect();
    let near = |a: Position, b: Position| {
        ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt() <= field.radius()
    };
    let mut dist: Vec<Option<u32>> = vec![None; pts.len()];
    dist[0] = Some(0);
    loop {
        let mut changed = false;
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                if i == j || !near(pts[i], pts[j]) {
                    continue;
                }
                if let Some(d) = dist[j] {
                    if dist[i].is_none_or(|cur| d + 1 < cur) {
                        dist[i] = Some(d + 1);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return dist[1..].to_vec();
        }
    }
}

#[test]
fn levels_match_relaxation_oracle() {
    for seed in 0..20 {
        let field = random_field(seed, 50);
        let leveling = assign_levels(&field);
        let oracle = relaxed_levels(&field);
        for (node, want) in field.nodes().iter().zip(oracle) {
            assert_eq!(
                leveling.level(node.id),
                want,
                "seed {seed} node {}",
                node.id
            );
            assert_eq!(leveling.unreachable.contains(&node.id), want.is_none());
        }
    }
}

#[test]
fn sectors_follow_bearing() {
    let field = random_field(7, 50);
    let leveling = assign_levels(&field);
    let sectoring = assign_sectors(&field, 6).unwrap();
    for node in field.nodes() {
        let bearing = bearing_degrees(BS, node.position);
        let sector = sectoring.sectors[&node.id];
        assert!(sector < 6);
        assert!(bearing >= sector as f64 * 60.0 && bearing < (sector + 1) as f64 * 60.0);
        if let Ok(loc) = locate(node.id, &leveling, &sectoring) {
            assert_eq!(loc.sector, sector);
            assert_eq!(Some(loc.level), leveling.level(node.id));
        }
    }
}

#[test]
fn certain_forwarding_always_delivers() {
    let field = random_field(3, 50);
    let leveling = assign_levels(&field);
    let levels = leveling.max_level() as usize;
    let probs: Vec<f64> = (0..levels).map(|i| 1.0 - i as f64 * 1e-9).collect();
    let config = GossipConfig::new(probs).unwrap();
    for &id in leveling.levels.keys() {
        let sim = GossipSim::new(&field, &leveling, &config, id).unwrap();
        assert_eq!(sim.run(50, 1).unwrap().delivered, 50, "origin {id}");
    }
}

#[test]
fn higher_probabilities_never_lose_a_delivery() {
    let field = random_field(11, 50);
    let leveling = assign_levels(&field);
    let levels = leveling.max_level() as usize;
    let low: Vec<f64> = (0..levels).map(|i| 0.6 - 0.05 * i as f64).collect();
    let high: Vec<f64> = low.iter().map(|p| p + 0.3).collect();
    let (low, high) = (
        GossipConfig::new(low).unwrap(),
        GossipConfig::new(high).unwrap(),
    );
    let origin = *leveling
        .levels
        .iter()
        .max_by_key(|(id, l)| (**l, std::cmp::Reverse(**id)))
        .unwrap()
        .0;
    let a = GossipSim::new(&field, &leveling, &low, origin).unwrap();
    let b = GossipSim::new(&field, &leveling, &high, origin).unwrap();
    for t in 0..2000 {
        let (x, y) = (a.run_trial(5, t, true), b.run_trial(5, t, true));
        assert!(!x.delivered || y.delivered, "trial {t}");
        assert!(
            x.transmitters.iter().all(|n| y.transmitters.contains(n)),
            "trial {t}"
        );
    }
}
