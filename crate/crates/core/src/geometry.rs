//! Simplified building model and coordinate conventions.
//!
//! The window facade is the plane `y = 0`, the building interior is
//! `0 < y <= B`, and anchors sit outside at `y < 0`. The origin is the
//! ground-floor lower corner of the facade. Floors are indexed from 1.
//! Every floor carries one window band whose upper and lower horizontal
//! edges run along the x-axis.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        (*self - *other).norm()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<Point3> for f64 {
    type Output = Point3;
    fn mul(self, rhs: Point3) -> Point3 {
        Point3::new(self * rhs.x, self * rhs.y, self * rhs.z)
    }
}

/// Which horizontal window edge a diffraction path uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Upper,
    Lower,
}

impl EdgeKind {
    pub fn other(self) -> EdgeKind {
        match self {
            EdgeKind::Upper => EdgeKind::Lower,
            EdgeKind::Lower => EdgeKind::Upper,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Upper => "upper",
            EdgeKind::Lower => "lower",
        }
    }
}

/// A horizontal diffracting edge in the facade plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub endpoint_1: Point3,
    pub endpoint_2: Point3,
    pub kind: EdgeKind,
    pub floor: usize,
}

impl Edge {
    /// Builds an edge at height `z` spanning `[x_start, x_end]` along `y = 0`.
    pub fn horizontal(x_start: f64, x_end: f64, z: f64, kind: EdgeKind, floor: usize) -> Self {
        Self {
            endpoint_1: Point3::new(x_start, 0.0, z),
            endpoint_2: Point3::new(x_end, 0.0, z),
            kind,
            floor,
        }
    }

    pub fn z(&self) -> f64 {
        self.endpoint_1.z
    }

    /// Point at parameter `lambda`: `lambda * X1 + (1 - lambda) * X2`.
    pub fn point_at(&self, lambda: f64) -> Point3 {
        lambda * self.endpoint_1 + (1.0 - lambda) * self.endpoint_2
    }

    /// Checks the facade-plane invariant (`y = 0`, equal heights, finite).
    pub fn is_well_formed(&self) -> bool {
        self.endpoint_1.is_finite()
            && self.endpoint_2.is_finite()
            && self.endpoint_1.y == 0.0
            && self.endpoint_2.y == 0.0
            && self.endpoint_1.z == self.endpoint_2.z
    }
}

/// Rectangular multi-storey building with one full-width window band per floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingModel {
    num_floors: usize,
    floor_height: f64,
    length: f64,
    breadth: f64,
    window_height: f64,
    window_x: (f64, f64),
}

impl Default for BuildingModel {
    /// Seven floors of 3.5 m, a 20 m x 20 m footprint and 1 m windows.
    fn default() -> Self {
        Self {
            num_floors: 7,
            floor_height: 3.5,
            length: 20.0,
            breadth: 20.0,
            window_height: 1.0,
            window_x: (0.0, 20.0),
        }
    }
}

impl BuildingModel {
    /// Window band spans the full floor length.
    pub fn new(
        num_floors: usize,
        floor_height: f64,
        length: f64,
        breadth: f64,
        window_height: f64,
    ) -> Result<Self> {
        Self::with_window_extent(
            num_floors,
            floor_height,
            length,
            breadth,
            window_height,
            (0.0, length),
        )
    }

    pub fn with_window_extent(
        num_floors: usize,
        floor_height: f64,
        length: f64,
        breadth: f64,
        window_height: f64,
        window_x: (f64, f64),
    ) -> Result<Self> {
        let finite = [
            floor_height,
            length,
            breadth,
            window_height,
            window_x.0,
            window_x.1,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig(
                "building dimensions must be finite".into(),
            ));
        }
        if num_floors < 1 {
            return Err(Error::InvalidConfig("num_floors must be at least 1".into()));
        }
        if !(window_height > 0.0 && floor_height > window_height) {
            return Err(Error::InvalidConfig(format!(
                "need floor_height > window_height > 0, got {floor_height} and {window_height}"
            )));
        }
        if !(length > 0.0 && breadth > 0.0) {
            return Err(Error::InvalidConfig(
                "length and breadth must be positive".into(),
            ));
        }
        if window_x.0 == window_x.1 {
            return Err(Error::DegenerateEdge);
        }
        Ok(Self {
            num_floors,
            floor_height,
            length,
            breadth,
            window_height,
            window_x,
        })
    }

    pub fn num_floors(&self) -> usize {
        self.num_floors
    }
    pub fn floor_height(&self) -> f64 {
        self.floor_height
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn breadth(&self) -> f64 {
        self.breadth
    }
    pub fn window_height(&self) -> f64 {
        self.window_height
    }
    pub fn window_extent(&self) -> (f64, f64) {
        self.window_x
    }

    pub fn check_floor(&self, floor: usize) -> Result<()> {
        if floor == 0 || floor > self.num_floors {
            return Err(Error::FloorOutOfRange {
                floor,
                num_floors: self.num_floors,
            });
        }
        Ok(())
    }

    /// Height of a node on `floor`: the mid point of the storey.
    pub fn node_z(&self, floor: usize) -> Result<f64> {
        self.check_floor(floor)?;
        Ok(self.node_z_unchecked(floor))
    }

    pub(crate) fn node_z_unchecked(&self, floor: usize) -> f64 {
        (floor as f64 - 1.0) * self.floor_height + 0.5 * self.floor_height
    }

    /// Upper and lower window edges of `floor`, half a window height above
    /// and below the node plane.
    pub fn edges_for_floor(&self, floor: usize) -> Result<(Edge, Edge)> {
        let zn = self.node_z(floor)?;
        let half = 0.5 * self.window_height;
        let (x1, x2) = self.window_x;
        Ok((
            Edge::horizontal(x1, x2, zn + half, EdgeKind::Upper, floor),
            Edge::horizontal(x1, x2, zn - half, EdgeKind::Lower, floor),
        ))
    }

    pub fn edge(&self, floor: usize, kind: EdgeKind) -> Result<Edge> {
        let (upper, lower) = self.edges_for_floor(floor)?;
        Ok(match kind {
            EdgeKind::Upper => upper,
            EdgeKind::Lower => lower,
        })
    }

    /// Floor whose node plane is closest to `z`, clamped into `1..=N`.
    pub fn nearest_floor(&self, z: f64) -> usize {
        if !z.is_finite() {
            return 1;
        }
        let idx = (z / self.floor_height).floor() + 1.0;
        idx.clamp(1.0, self.num_floors as f64) as usize
    }

    pub fn contains_footprint(&self, x: f64, y: f64) -> bool {
        (0.0..=self.length).contains(&x) && y > 0.0 && y <= self.breadth
    }
}

/// Unknown-position device, located at the mid height of its floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    pub x: f64,
    pub y: f64,
    pub floor: usize,
}

impl NodePosition {
    pub fn new(x: f64, y: f64, floor: usize) -> Self {
        Self { x, y, floor }
    }

    /// Validated constructor: requires `0 <= x <= L`, `0 < y <= B` and a valid floor.
    pub fn inside(building: &BuildingModel, x: f64, y: f64, floor: usize) -> Result<Self> {
        building.check_floor(floor)?;
        if !building.contains_footprint(x, y) {
            return Err(Error::InvalidConfig(format!(
                "node ({x}, {y}) outside the floor footprint"
            )));
        }
        Ok(Self { x, y, floor })
    }

    pub fn z(&self, building: &BuildingModel) -> f64 {
        building.node_z_unchecked(self.floor)
    }

    pub fn to_point(&self, building: &BuildingModel) -> Point3 {
        Point3::new(self.x, self.y, self.z(building))
    }
}

/// Known anchor positions, all outside the facade (`y < 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    anchors: Vec<Point3>,
}

impl Default for AnchorConfig {
    /// Four anchors on the facade side with vertical diversity across seven floors.
    fn default() -> Self {
        Self {
            anchors: vec![
                Point3::new(2.0, -10.0, 5.0),
                Point3::new(8.0, -10.0, 12.0),
                Point3::new(12.0, -10.0, 17.0),
                Point3::new(18.0, -10.0, 24.0),
            ],
        }
    }
}

impl AnchorConfig {
    pub fn new(anchors: Vec<Point3>) -> Result<Self> {
        if anchors.len() < 3 {
            return Err(Error::InvalidConfig(format!(
                "need at least 3 anchors, got {}",
                anchors.len()
            )));
        }
        if let Some((j, a)) = anchors.iter().enumerate().find(|(_, a)| !a.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "anchor {j} not finite: {a:?}"
            )));
        }
        if let Some((j, _)) = anchors.iter().enumerate().find(|(_, a)| a.y >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "anchor {j} must lie outside the facade (y < 0)"
            )));
        }
        Ok(Self { anchors })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn as_slice(&self) -> &[Point3] {
        &self.anchors
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3> {
        self.anchors.iter()
    }
}
