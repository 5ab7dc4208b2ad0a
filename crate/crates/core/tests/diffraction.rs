mod common;

use diffpos::diffraction::{
    fermat_oracle, fermat_oracle_exhaustive, law_residuals, path_difference_scan, path_length,
    path_length_via, solve_diffraction_point,
};
use diffpos::estimators::jacobian_row;
use diffpos::{AnchorConfig, BuildingModel, EdgeKind, NodePosition, Point3};
use proptest::prelude::*;

fn building() -> BuildingModel {
    BuildingModel::default()
}

prop_compose! {
    fn config()(
        ax in 0.0..20.0f64, ay in -30.0..-2.0f64, az in 0.0..30.0f64,
        nx in 0.0..20.0f64, ny in 0.05..20.0f64, floor in 1usize..=7, upper in any::<bool>(),
    ) -> (Point3, NodePosition, EdgeKind) {
        let kind = if upper { EdgeKind::Upper } else { EdgeKind::Lower };
        (Point3::new(ax, ay, az), NodePosition::new(nx, ny, floor), kind)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn selected_root_obeys_law_and_matches_fermat((anchor, node, kind) in config()) {
        let b = building();
        let edge = b.edge(node.floor, kind).unwrap();
        let n3 = node.to_point(&b);
        if let Ok(sol) = solve_diffraction_point(&anchor, &n3, &edge) {
            let (unsigned, signed) = law_residuals(&anchor, &n3, &edge, &sol.point);
            prop_assert!(unsigned < 1e-9 && signed < 1e-9);
            let oracle = fermat_oracle(&anchor, &n3, &edge, 1e-3);
            prop_assert!((oracle - sol.lambda).abs() < 1e-5, "{} vs {}", oracle, sol.lambda);
        }
    }

    #[test]
    fn path_is_never_shorter_than_line_of_sight((anchor, node, kind) in config()) {
        let b = building();
        if let Ok(p) = path_length(&anchor, &node, kind, &b) {
            prop_assert!(p >= anchor.distance(&node.to_point(&b)) - 1e-12);
        }
    }

    #[test]
    fn mirrored_configuration_mirrors_lambda((anchor, node, kind) in config()) {
        let b = building();
        let edge = b.edge(node.floor, kind).unwrap();
        let n3 = node.to_point(&b);
        let l = b.length();
        let ma = Point3::new(l - anchor.x, anchor.y, anchor.z);
        let mn = Point3::new(l - n3.x, n3.y, n3.z);
        if let (Ok(s), Ok(m)) = (
            solve_diffraction_point(&anchor, &n3, &edge),
            solve_diffraction_point(&ma, &mn, &edge),
        ) {
            prop_assert!((s.lambda - (1.0 - m.lambda)).abs() < 1e-9);
            let (p, _) = path_length_via(&anchor, &n3, &edge).unwrap();
            let (pm, _) = path_length_via(&ma, &mn, &edge).unwrap();
            prop_assert!((p - pm).abs() < 1e-9);
        }
    }

    #[test]
    fn jacobian_matches_central_differences((anchor, node, _kind) in config()) {
        let b = building();
        let edge = b.edge(node.floor, EdgeKind::Upper).unwrap();
        let n3 = node.to_point(&b);
        let Ok(sol) = solve_diffraction_point(&anchor, &n3, &edge) else { return Ok(()) };
        let c = sol.coefficients;
        prop_assume!(c.discriminant() > 1e-6 * c.b * c.b);
        prop_assume!(sol.lambda > 1e-3 && sol.lambda < 1.0 - 1e-3);
        let row = jacobian_row(&anchor, &n3, &edge).unwrap();
        let h = 1e-5;
        let p = |dx: f64, dy: f64| {
            path_length_via(&anchor, &Point3::new(n3.x + dx, n3.y + dy, n3.z), &edge).unwrap().0
        };
        let fd = [(p(h, 0.0) - p(-h, 0.0)) / (2.0 * h), (p(0.0, h) - p(0.0, -h)) / (2.0 * h)];
        for k in 0..2 {
            prop_assert!((row[k] - fd[k]).abs() <= 1e-6 * fd[k].abs().max(1e-3));
        }
    }
}

#[test]
fn ternary_and_exhaustive_oracles_agree() {
    let b = building();
    let mut rng = diffpos::rng::stream(7, &[0]);
    for _ in 0..200 {
        let c = common::random_config(&b, &mut rng);
        let t = fermat_oracle(&c.anchor, &c.node3, &c.edge, 1e-3);
        let e = fermat_oracle_exhaustive(&c.anchor, &c.node3, &c.edge, 1e-3);
        assert!((t - e).abs() < 1e-7, "{t} vs {e}");
    }
}

#[test]
fn scan_max_stays_near_one_meter() {
    let h = path_difference_scan(&building(), &AnchorConfig::default(), 0.5).unwrap();
    assert_eq!(h.skipped, 0);
    assert!(h.max > 0.5 && h.max <= 1.1, "max {}", h.max);
    let cdf = h.cdf();
    assert!((cdf.last().unwrap().1 - 1.0).abs() < 1e-12);
}
