#![allow(dead_code)]

use diffpos::diffraction::solve_diffraction_point;
use diffpos::rng::SimRng;
use diffpos::{BuildingModel, Edge, EdgeKind, NodePosition, Point3};
use rand::Rng;

/// Anchor, lifted node and edge drawn over the default building.
#[derive(Debug, Clone)]
pub struct Config {
    pub anchor: Point3,
    pub node: NodePosition,
    pub node3: Point3,
    pub edge: Edge,
}

pub fn random_anchor<R: Rng>(rng: &mut R) -> Point3 {
    Point3::new(
        rng.random_range(0.0..20.0),
        rng.random_range(-30.0..-2.0),
        rng.random_range(0.0..30.0),
    )
}

/// Draws configurations until one has a diffraction point on the edge.
pub fn random_config(b: &BuildingModel, rng: &mut SimRng) -> Config {
    loop {
        let anchor = random_anchor(rng);
        let node = NodePosition::new(
            rng.random_range(0.0..b.length()),
            rng.random_range(0.05..b.breadth()),
            rng.random_range(1..=b.num_floors()),
        );
        let kind = if rng.random::<bool>() {
            EdgeKind::Upper
        } else {
            EdgeKind::Lower
        };
        let edge = b.edge(node.floor, kind).unwrap();
        let node3 = node.to_point(b);
        if solve_diffraction_point(&anchor, &node3, &edge).is_ok() {
            return Config {
                anchor,
                node,
                node3,
                edge,
            };
        }
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len().div_ceil(2) - 1]
}
