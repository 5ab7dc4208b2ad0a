//! Offline characterisation of the NLOS bias of the upper-edge diffraction
//! path: `b = p(alpha) - |alpha - X|` sampled uniformly over a floor.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::diffraction::path_length_via;
use crate::error::{Error, Result};
use crate::geometry::{AnchorConfig, BuildingModel, EdgeKind, Point3};
use crate::rng;

pub const DEFAULT_BIAS_SAMPLES: usize = 100_000;
pub const MIN_BIAS_SAMPLES: usize = 1_000;
pub const BIAS_BIN_WIDTH: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn from_samples(samples: &[f64], bin_width: f64) -> Self {
        let mut counts = Vec::new();
        for &s in samples {
            let bin = (s / bin_width).floor().max(0.0) as usize;
            if bin >= counts.len() {
                counts.resize(bin + 1, 0);
            }
            counts[bin] += 1;
        }
        Self { bin_width, counts }
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|i| i as f64 * self.bin_width)
            .collect()
    }
}

/// Empirical bias distribution for one anchor and one floor (or all floors).
#[derive(Debug, Clone, PartialEq)]
pub struct BiasDistribution {
    /// Raw samples; empty when the distribution was loaded from a summary file.
    pub samples: Vec<f64>,
    pub n: usize,
    pub min: f64,
    pub mean: f64,
    pub histogram: Histogram,
    /// Draws rejected because the upper edge had no diffraction point.
    pub discarded: usize,
}

impl BiasDistribution {
    fn from_samples(samples: Vec<f64>, discarded: usize) -> Self {
        let n = samples.len();
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = samples.iter().sum::<f64>() / n as f64;
        let histogram = Histogram::from_samples(&samples, BIAS_BIN_WIDTH);
        Self {
            samples,
            n,
            min,
            mean,
            histogram,
            discarded,
        }
    }

    fn from_summary(n: usize, min: f64, mean: f64) -> Self {
        Self {
            samples: Vec::new(),
            n,
            min,
            mean,
            histogram: Histogram {
                bin_width: BIAS_BIN_WIDTH,
                counts: Vec::new(),
            },
            discarded: 0,
        }
    }
}

/// Draws `n_samples` node positions uniformly over the footprint of `floor`
/// and records the excess of the upper-edge path over the straight distance.
pub fn sample_bias(
    anchor: &Point3,
    floor: usize,
    building: &BuildingModel,
    n_samples: usize,
    rng_seed: u64,
) -> Result<BiasDistribution> {
    if n_samples < MIN_BIAS_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "bias characterisation needs at least {MIN_BIAS_SAMPLES} samples, got {n_samples}"
        )));
    }
    let edge = building.edge(floor, EdgeKind::Upper)?;
    let z = building.node_z(floor)?;
    let mut rng = rng::stream(rng_seed, &[]);
    let mut samples = Vec::with_capacity(n_samples);
    let mut discarded = 0usize;
    while samples.len() < n_samples {
        let x = rng.random::<f64>() * building.length();
        let y = (1.0 - rng.random::<f64>()) * building.breadth();
        let node = Point3::new(x, y, z);
        match path_length_via(anchor, &node, &edge) {
            Ok((p, _)) => samples.push((p - anchor.distance(&node)).max(0.0)),
            Err(Error::NoEdgeDiffraction { .. }) => {
                discarded += 1;
                if discarded > n_samples {
                    return Err(Error::GeometryWarning {
                        discarded,
                        drawn: discarded + samples.len(),
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    if 2 * discarded > discarded + samples.len() {
        return Err(Error::GeometryWarning {
            discarded,
            drawn: discarded + samples.len(),
        });
    }
    Ok(BiasDistribution::from_samples(samples, discarded))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BiasMode {
    Floorwise,
    Composite,
}

impl fmt::Display for BiasMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BiasMode::Floorwise => "floorwise",
            BiasMode::Composite => "composite",
        })
    }
}

impl FromStr for BiasMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "floorwise" => Ok(BiasMode::Floorwise),
            "composite" => Ok(BiasMode::Composite),
            other => Err(Error::InvalidConfig(format!("unknown bias mode '{other}'"))),
        }
    }
}

/// Floor key of a bias table entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FloorKey {
    Floor(usize),
    All,
}

impl fmt::Display for FloorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FloorKey::Floor(i) => write!(f, "{i}"),
            FloorKey::All => f.write_str("ALL"),
        }
    }
}

/// Which statistic of the bias distribution feeds a range correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasStatistic {
    Min,
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasTable {
    mode: BiasMode,
    num_anchors: usize,
    num_floors: usize,
    entries: BTreeMap<(usize, FloorKey), BiasDistribution>,
}

impl BiasTable {
    pub fn mode(&self) -> BiasMode {
        self.mode
    }

    pub fn num_anchors(&self) -> usize {
        self.num_anchors
    }

    pub fn num_floors(&self) -> usize {
        self.num_floors
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, FloorKey), &BiasDistribution)> {
        self.entries.iter()
    }

    /// Distribution that applies to `anchor` when the node is assumed on `floor`.
    pub fn get(&self, anchor: usize, floor: usize) -> Option<&BiasDistribution> {
        let key = match self.mode {
            BiasMode::Floorwise => FloorKey::Floor(floor),
            BiasMode::Composite => FloorKey::All,
        };
        self.entries.get(&(anchor, key))
    }

    pub fn statistic(&self, anchor: usize, floor: usize, stat: BiasStatistic) -> Option<f64> {
        self.get(anchor, floor).map(|d| match stat {
            BiasStatistic::Min => d.min,
            BiasStatistic::Mean => d.mean,
        })
    }

    /// Writes `anchor_index,floor_index,n,min_m,mean_m`, one row per entry.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["anchor_index", "floor_index", "n", "min_m", "mean_m"])?;
        for ((anchor, floor), d) in &self.entries {
            w.write_record([
                anchor.to_string(),
                floor.to_string(),
                d.n.to_string(),
                d.min.to_string(),
                d.mean.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `anchor_index,floor_index,bin_lo_m,bin_hi_m,count` histogram rows.
    pub fn write_histogram_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "anchor_index",
            "floor_index",
            "bin_lo_m",
            "bin_hi_m",
            "count",
        ])?;
        for ((anchor, floor), d) in &self.entries {
            let edges = d.histogram.bin_edges();
            for (i, count) in d.histogram.counts.iter().enumerate() {
                w.write_record([
                    anchor.to_string(),
                    floor.to_string(),
                    edges[i].to_string(),
                    edges[i + 1].to_string(),
                    count.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`BiasTable::write_csv`]. The mode follows
    /// from the floor column (`ALL` rows mean a composite table).
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut entries = BTreeMap::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(Error::Parse(format!(
                    "bias row has {} fields, expected 5",
                    rec.len()
                )));
            }
            let anchor: usize = parse_field(&rec[0], "anchor_index")?;
            let floor = match rec[1].trim() {
                "ALL" => FloorKey::All,
                s => {
                    let f: usize = parse_field(s, "floor_index")?;
                    if f == 0 {
                        return Err(Error::Parse("floor_index is 1-based".into()));
                    }
                    FloorKey::Floor(f)
                }
            };
            let n: usize = parse_field(&rec[2], "n")?;
            let min: f64 = parse_field(&rec[3], "min_m")?;
            let mean: f64 = parse_field(&rec[4], "mean_m")?;
            if !(min.is_finite() && mean.is_finite() && min >= 0.0 && min <= mean) {
                return Err(Error::Parse(format!(
                    "bias statistics invalid for anchor {anchor}: min {min}, mean {mean}"
                )));
            }
            if entries
                .insert(
                    (anchor, floor),
                    BiasDistribution::from_summary(n, min, mean),
                )
                .is_some()
            {
                return Err(Error::Parse(format!(
                    "duplicate bias row ({anchor}, {floor})"
                )));
            }
        }
        if entries.is_empty() {
            return Err(Error::Parse("bias table is empty".into()));
        }
        let composite = entries.keys().all(|(_, f)| *f == FloorKey::All);
        let floorwise = entries.keys().all(|(_, f)| *f != FloorKey::All);
        let mode = match (composite, floorwise) {
            (true, _) => BiasMode::Composite,
            (_, true) => BiasMode::Floorwise,
            _ => {
                return Err(Error::Parse(
                    "bias table mixes ALL and per-floor rows".into(),
                ))
            }
        };
        let num_anchors = entries.keys().map(|(a, _)| a + 1).max().unwrap_or(0);
        let num_floors = entries
            .keys()
            .filter_map(|(_, f)| match f {
                FloorKey::Floor(i) => Some(*i),
                FloorKey::All => None,
            })
            .max()
            .unwrap_or(0);
        let expected = match mode {
            BiasMode::Floorwise => num_anchors * num_floors,
            BiasMode::Composite => num_anchors,
        };
        if entries.len() != expected {
            return Err(Error::Parse(format!(
                "bias table incomplete: {} rows, expected {expected}",
                entries.len()
            )));
        }
        Ok(Self {
            mode,
            num_anchors,
            num_floors,
            entries,
        })
    }

    /// Checks the table covers the anchors and floors of a scenario.
    pub fn check_covers(&self, building: &BuildingModel, anchors: &AnchorConfig) -> Result<()> {
        if self.num_anchors != anchors.len() {
            return Err(Error::InvalidConfig(format!(
                "bias table has {} anchors, scenario has {}",
                self.num_anchors,
                anchors.len()
            )));
        }
        if self.mode == BiasMode::Floorwise && self.num_floors != building.num_floors() {
            return Err(Error::InvalidConfig(format!(
                "bias table has {} floors, building has {}",
                self.num_floors,
                building.num_floors()
            )));
        }
        Ok(())
    }
}

fn parse_field<T: FromStr>(s: &str, name: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse {name} from '{s}'")))
}

/// Characterises the bias for every anchor, either per floor or pooled over
/// all floors. Each `(anchor, floor)` pair draws from its own seeded stream,
/// so composite entries pool exactly the floorwise samples.
pub fn build_bias_table(
    building: &BuildingModel,
    anchors: &AnchorConfig,
    mode: BiasMode,
    n_samples: usize,
    rng_seed: u64,
) -> Result<BiasTable> {
    let n_floors = building.num_floors();
    let pairs: Vec<(usize, usize)> = (0..anchors.len())
        .flat_map(|j| (1..=n_floors).map(move |i| (j, i)))
        .collect();
    let floorwise = pairs
        .par_iter()
        .map(|&(j, i)| {
            let seed = rng::derive_seed(rng_seed, &[j as u64, i as u64]);
            sample_bias(&anchors.as_slice()[j], i, building, n_samples, seed)
                .map(|d| ((j, FloorKey::Floor(i)), d))
        })
        .collect::<Result<Vec<_>>>()?;

    let entries = match mode {
        BiasMode::Floorwise => floorwise.into_iter().collect(),
        BiasMode::Composite => {
            let mut pooled: BTreeMap<(usize, FloorKey), (Vec<f64>, usize)> = BTreeMap::new();
            for ((j, _), d) in floorwise {
                let slot = pooled.entry((j, FloorKey::All)).or_default();
                slot.0.extend_from_slice(&d.samples);
                slot.1 += d.discarded;
            }
            pooled
                .into_iter()
                .map(|(k, (s, disc))| (k, BiasDistribution::from_samples(s, disc)))
                .collect()
        }
    };
    Ok(BiasTable {
        mode,
        num_anchors: anchors.len(),
        num_floors: n_floors,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_building() -> BuildingModel {
        BuildingModel::new(3, 3.5, 20.0, 20.0, 1.0).unwrap()
    }

    #[test]
    fn samples_nonnegative_and_ordered_stats() {
        let b = BuildingModel::default();
        let d = sample_bias(&Point3::new(10.0, -10.0, 12.0), 3, &b, 5_000, 1).unwrap();
        assert_eq!(d.n, 5_000);
        assert!(d.samples.iter().all(|&s| s >= 0.0));
        assert!(d.min <= d.mean);
        assert_eq!(d.histogram.counts.iter().sum::<u64>(), 5_000);
    }

    #[test]
    fn too_few_samples_rejected() {
        let b = BuildingModel::default();
        assert!(matches!(
            sample_bias(&Point3::new(10.0, -10.0, 12.0), 3, &b, 999, 1),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn anchor_far_beyond_edge_triggers_geometry_warning() {
        let b = BuildingModel::default();
        let r = sample_bias(&Point3::new(200.0, -1.0, 12.0), 3, &b, 1_000, 1);
        assert!(matches!(r, Err(Error::GeometryWarning { .. })), "{r:?}");
    }

    #[test]
    fn collinear_limit_has_vanishing_bias() {
        // Anchor, edge point and node nearly on one straight line.
        let b = BuildingModel::default();
        let floor = 3;
        let zn = b.node_z(floor).unwrap();
        let ze = zn + 0.5;
        let node = Point3::new(10.0, 0.5, zn);
        // extend the node -> edge-point line (10, 0, ze) outward by 10 m in y
        let anchor = Point3::new(10.0, -10.0, ze + 10.0 * (ze - zn) / 0.5);
        let edge = b.edge(floor, EdgeKind::Upper).unwrap();
        let (p, _) = path_length_via(&anchor, &node, &edge).unwrap();
        assert!((p - anchor.distance(&node)).abs() < 1e-9);
    }

    #[test]
    fn composite_pools_floorwise_samples() {
        let b = small_building();
        let anchors = AnchorConfig::default();
        let fw = build_bias_table(&b, &anchors, BiasMode::Floorwise, 2_000, 9).unwrap();
        let cp = build_bias_table(&b, &anchors, BiasMode::Composite, 2_000, 9).unwrap();
        assert_eq!(fw.len(), 3 * 4);
        assert_eq!(cp.len(), 4);
        for j in 0..anchors.len() {
            let floors: Vec<_> = (1..=3).map(|i| fw.get(j, i).unwrap()).collect();
            let c = cp.get(j, 2).unwrap();
            let min_fw = floors.iter().map(|d| d.min).fold(f64::INFINITY, f64::min);
            assert_eq!(c.min, min_fw);
            let lo = floors.iter().map(|d| d.mean).fold(f64::INFINITY, f64::min);
            let hi = floors
                .iter()
                .map(|d| d.mean)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= c.mean && c.mean <= hi);
            assert_eq!(c.n, 6_000);
        }
    }

    #[test]
    fn single_floor_modes_agree() {
        let b = BuildingModel::new(1, 3.5, 20.0, 20.0, 1.0).unwrap();
        let anchors = AnchorConfig::default();
        let fw = build_bias_table(&b, &anchors, BiasMode::Floorwise, 1_000, 3).unwrap();
        let cp = build_bias_table(&b, &anchors, BiasMode::Composite, 1_000, 3).unwrap();
        for j in 0..anchors.len() {
            let (a, c) = (fw.get(j, 1).unwrap(), cp.get(j, 1).unwrap());
            assert_eq!(a.samples, c.samples);
            assert_eq!((a.min, a.mean), (c.min, c.mean));
        }
    }

    #[test]
    fn csv_reload_preserves_statistics() {
        let b = small_building();
        let anchors = AnchorConfig::default();
        for mode in [BiasMode::Floorwise, BiasMode::Composite] {
            let t = build_bias_table(&b, &anchors, mode, 1_000, 5).unwrap();
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            let back = BiasTable::read_csv(buf.as_slice()).unwrap();
            assert_eq!(back.mode(), mode);
            back.check_covers(&b, &anchors).unwrap();
            for ((k, d), (k2, d2)) in t.entries().zip(back.entries()) {
                assert_eq!(k, k2);
                assert_eq!((d.n, d.min, d.mean), (d2.n, d2.min, d2.mean));
            }
        }
    }

    #[test]
    fn csv_rejects_mixed_and_incomplete_tables() {
        let mixed = "anchor_index,floor_index,n,min_m,mean_m\n0,ALL,10,0.1,0.2\n0,1,10,0.1,0.2\n";
        assert!(BiasTable::read_csv(mixed.as_bytes()).is_err());
        let missing = "anchor_index,floor_index,n,min_m,mean_m\n0,1,10,0.1,0.2\n1,2,10,0.1,0.2\n";
        assert!(BiasTable::read_csv(missing.as_bytes()).is_err());
        let bad = "anchor_index,floor_index,n,min_m,mean_m\n0,1,10,0.5,0.2\n";
        assert!(BiasTable::read_csv(bad.as_bytes()).is_err());
    }
}
