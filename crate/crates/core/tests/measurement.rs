use diffpos::diffraction::path_length;
use diffpos::measurement::{generate_measurements, sample_node, NoiseModel};
use diffpos::rng::stream;
use diffpos::{AnchorConfig, BuildingModel, EdgeKind, NodePosition};

#[test]
fn noiseless_upper_ranges_are_path_lengths() {
    let b = BuildingModel::default();
    let anchors = AnchorConfig::default();
    let node = NodePosition::new(7.5, 11.0, 4);
    let rv = generate_measurements(
        &node,
        &anchors,
        &b,
        &NoiseModel::noiseless(),
        1.0,
        &mut stream(1, &[0]),
    )
    .unwrap();
    for (a, r) in anchors.iter().zip(rv.ranges()) {
        assert_eq!(*r, path_length(a, &node, EdgeKind::Upper, &b).unwrap());
    }
    assert!(rv
        .ground_truth()
        .edge_choices
        .iter()
        .all(|&e| e == EdgeKind::Upper));
}

#[test]
fn noiseless_mixed_ranges_stay_within_scan_bound() {
    let b = BuildingModel::default();
    let anchors = AnchorConfig::default();
    let mut rng = stream(2, &[0]);
    for _ in 0..500 {
        let node = sample_node(&b, &mut rng);
        let rv =
            generate_measurements(&node, &anchors, &b, &NoiseModel::noiseless(), 0.5, &mut rng)
                .unwrap();
        for ((a, r), e) in anchors
            .iter()
            .zip(rv.ranges())
            .zip(&rv.ground_truth().edge_choices)
        {
            let up = path_length(a, &node, EdgeKind::Upper, &b).unwrap();
            let chosen = path_length(a, &node, *e, &b).unwrap();
            assert_eq!(*r, chosen);
            assert!((r - up).abs() <= 1.1);
        }
    }
}

#[test]
fn noisy_mean_converges_to_noiseless_range() {
    let b = BuildingModel::default();
    let anchors = AnchorConfig::default();
    let node = NodePosition::new(3.0, 15.0, 6);
    let noise = NoiseModel::gaussian(0.1).unwrap();
    let mut rng = stream(3, &[0]);
    let n = 10_000;
    let mut sums = vec![0.0; anchors.len()];
    for _ in 0..n {
        let rv = generate_measurements(&node, &anchors, &b, &noise, 1.0, &mut rng).unwrap();
        for (s, r) in sums.iter_mut().zip(rv.ranges()) {
            *s += r;
        }
    }
    for (a, s) in anchors.iter().zip(&sums) {
        let truth = path_length(a, &node, EdgeKind::Upper, &b).unwrap();
        assert!((s / n as f64 - truth).abs() < 3.0 * 0.1 / 100.0);
    }
}

#[test]
fn edge_choice_frequency_matches_probability() {
    let b = BuildingModel::default();
    let anchors = AnchorConfig::default();
    let node = NodePosition::new(10.0, 10.0, 3);
    let noise = NoiseModel::default();
    for p in [0.5, 0.2] {
        let mut rng = stream(4, &[0]);
        let draws = 10_000;
        let mut upper = 0usize;
        for _ in 0..draws / anchors.len() {
            let rv = generate_measurements(&node, &anchors, &b, &noise, p, &mut rng).unwrap();
            upper += rv
                .ground_truth()
                .edge_choices
                .iter()
                .filter(|&&e| e == EdgeKind::Upper)
                .count();
        }
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (upper as f64 - p * draws as f64).abs() < 3.0 * sd,
            "p={p}: {upper}"
        );
    }
}

#[test]
fn node_sampling_is_uniform_over_floors() {
    let b = BuildingModel::default();
    let mut rng = stream(5, &[0]);
    let n = 100_000;
    let mut counts = vec![0usize; b.num_floors() + 1];
    for _ in 0..n {
        let node = sample_node(&b, &mut rng);
        assert!(NodePosition::inside(&b, node.x, node.y, node.floor).is_ok());
        counts[node.floor] += 1;
    }
    assert_eq!(counts[0], 0);
    let expected = 1.0 / b.num_floors() as f64;
    for c in &counts[1..] {
        assert!((*c as f64 / n as f64 - expected).abs() < 0.02);
    }
}

#[test]
fn same_seed_gives_same_vector() {
    let b = BuildingModel::default();
    let anchors = AnchorConfig::default();
    let run = || {
        let mut rng = stream(6, &[1, 42]);
        let node = sample_node(&b, &mut rng);
        generate_measurements(&node, &anchors, &b, &NoiseModel::default(), 0.5, &mut rng).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn rejects_bad_edge_probability() {
    let b = BuildingModel::default();
    let node = NodePosition::new(1.0, 1.0, 1);
    let r = generate_measurements(
        &node,
        &AnchorConfig::default(),
        &b,
        &NoiseModel::default(),
        1.5,
        &mut stream(0, &[]),
    );
    assert!(r.is_err());
    assert!(NoiseModel::gaussian(-0.1).is_err());
}
