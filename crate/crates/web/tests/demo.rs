use noiseprints_web::{
    calibration_curve, calibration_curve_js, rotation_recovery, tamper_map, DEMO_ALPHA,
};

#[test]
fn curve_is_decreasing_in_fpr() {
    let curve = calibration_curve(16384, -128, -100).unwrap();
    assert_eq!(curve.len(), 29);
    assert!((curve[0].tau - 0.101739).abs() < 5e-7);
    for pair in curve.windows(2) {
        assert!(pair[1].tau < pair[0].tau);
    }
    assert!(calibration_curve(16384, -10, -20).is_err());
    assert!(calibration_curve_js(16384, 0, 1).contains("\"error\""));
}

#[test]
fn tamper_map_localizes_owned_region() {
    let view = tamper_map(0.5, 2.0, 0.2).unwrap();
    assert_eq!(view.owned_columns, 32);
    let w = view.width;
    let mean = |cols: std::ops::Range<usize>| {
        let mut s = 0.0;
        let mut n = 0.0;
        for y in 0..view.height {
            for x in cols.clone() {
                s += view.values[y * w + x];
                n += 1.0;
            }
        }
        s / n
    };
    // away from the seam, owned columns carry the planted correlation
    assert!(mean(0..24) > 0.8 * DEMO_ALPHA, "{}", mean(0..24));
    assert!(mean(40..64).abs() < 0.05, "{}", mean(40..64));
    let left_masked = (0..view.height).all(|y| (0..24).all(|x| view.mask[y * w + x]));
    assert!(left_masked);

    let untouched = tamper_map(0.0, 2.0, 0.2).unwrap();
    assert!((untouched.global_score - DEMO_ALPHA).abs() < 1e-6);
    assert!(tamper_map(1.5, 2.0, 0.2).is_err());
}

#[test]
fn rotation_is_recovered_by_alignment() {
    let view = rotation_recovery(25.0, -64).unwrap();
    assert!(view.raw_score < view.tau, "{view:?}");
    let aligned = view.aligned_score.expect("alignment found");
    assert!(aligned > view.tau, "{view:?}");
    assert!(view.pass);
    match view.estimated {
        Some(noiseprints::TransformSpec::Rotation { angle_degrees }) => {
            assert!((angle_degrees - 25.0).abs() <= 0.2)
        }
        other => panic!("{other:?}"),
    }
}
