use diffpos::bias::{build_bias_table, sample_bias, BiasMode, BiasStatistic, BiasTable};
use diffpos::{AnchorConfig, BuildingModel, Point3};

const SEED: u64 = 20_240_601;

// Reference run of the default-seeded sampler; the quadrature mean over the
// footprint is 0.110770 with a per-sample spread of 0.064.
const REF_MIN: f64 = 8.555_769_426_266e-10;
const REF_MEAN: f64 = 0.110_983_344_672;
const QUADRATURE_MEAN: f64 = 0.110_770_42;

#[test]
fn regression_anchor_on_floor_three() {
    let b = BuildingModel::default();
    let anchor = Point3::new(10.0, -10.0, 12.0);
    let d = sample_bias(&anchor, 3, &b, 100_000, SEED).unwrap();
    assert_eq!(d.n, 100_000);
    assert!(d.samples.iter().all(|&s| s >= 0.0));
    assert!((d.mean - QUADRATURE_MEAN).abs() < 5.0 * 0.064 / 100_000f64.sqrt());
    assert!((d.min - REF_MIN).abs() < 1e-12);
    assert!((d.mean - REF_MEAN).abs() < 1e-11);
}

#[test]
fn doubling_samples_moves_mean_under_one_percent() {
    let b = BuildingModel::default();
    for (j, a) in AnchorConfig::default().iter().enumerate() {
        for floor in [1, 4, 7] {
            let m1 = sample_bias(a, floor, &b, 100_000, SEED + j as u64)
                .unwrap()
                .mean;
            let m2 = sample_bias(a, floor, &b, 200_000, SEED + j as u64)
                .unwrap()
                .mean;
            assert!(
                (m1 - m2).abs() < 0.01 * m2,
                "anchor {j} floor {floor}: {m1} vs {m2}"
            );
        }
    }
}

#[test]
fn composite_pools_floorwise_samples() {
    let b = BuildingModel::default();
    let anchors = AnchorConfig::default();
    let fw = build_bias_table(&b, &anchors, BiasMode::Floorwise, 2000, SEED).unwrap();
    let co = build_bias_table(&b, &anchors, BiasMode::Composite, 2000, SEED).unwrap();
    assert_eq!(fw.len(), anchors.len() * b.num_floors());
    assert_eq!(co.len(), anchors.len());
    for j in 0..anchors.len() {
        let floors = 1..=b.num_floors();
        let means: Vec<f64> = floors.clone().map(|i| fw.get(j, i).unwrap().mean).collect();
        let mins: Vec<f64> = floors.map(|i| fw.get(j, i).unwrap().min).collect();
        let c = co.get(j, 1).unwrap();
        let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(c.mean >= lo - 1e-12 && c.mean <= hi + 1e-12);
        assert_eq!(c.min, mins.iter().cloned().fold(f64::INFINITY, f64::min));
        assert_eq!(co.get(j, 5), co.get(j, 1));
        assert!(c.min <= c.mean);
    }
}

#[test]
fn single_floor_tables_coincide() {
    let b = BuildingModel::new(1, 3.5, 20.0, 20.0, 1.0).unwrap();
    let anchors = AnchorConfig::default();
    let fw = build_bias_table(&b, &anchors, BiasMode::Floorwise, 1000, 3).unwrap();
    let co = build_bias_table(&b, &anchors, BiasMode::Composite, 1000, 3).unwrap();
    for j in 0..anchors.len() {
        for stat in [BiasStatistic::Min, BiasStatistic::Mean] {
            assert_eq!(fw.statistic(j, 1, stat), co.statistic(j, 1, stat));
        }
    }
}

#[test]
fn csv_round_trip_keeps_statistics() {
    let b = BuildingModel::default();
    let anchors = AnchorConfig::default();
    for mode in [BiasMode::Floorwise, BiasMode::Composite] {
        let t = build_bias_table(&b, &anchors, mode, 1000, 9).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = BiasTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.mode(), mode);
        back.check_covers(&b, &anchors).unwrap();
        for j in 0..anchors.len() {
            for i in 1..=b.num_floors() {
                for stat in [BiasStatistic::Min, BiasStatistic::Mean] {
                    assert_eq!(back.statistic(j, i, stat), t.statistic(j, i, stat));
                }
            }
        }
    }
}

#[test]
fn incomplete_table_is_rejected() {
    let b = BuildingModel::default();
    let anchors = AnchorConfig::default();
    let t = build_bias_table(&b, &anchors, BiasMode::Floorwise, 1000, 9).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
    let res = BiasTable::read_csv(truncated.as_bytes()).and_then(|t| t.check_covers(&b, &anchors));
    assert!(res.is_err());
}
