use aubry_core::lagrangian::TonelliLagrangian;
use aubry_wasm::{beta_slice, level_velocity, section_returns, trajectory_samples};

#[test]
fn flat_trajectory_is_a_straight_wrapped_line() {
    let l = TonelliLagrangian::flat_kinetic();
    let s = trajectory_samples(&l, [0.1, 0.2, 0.3, 0.7], 2.0, 0.01, 50).unwrap();
    assert_eq!(s.len() % 3, 0);
    let n = s.len() / 3;
    let last = &s[3 * (n - 1)..];
    assert!((last[0] - 0.7).abs() < 1e-12);
    assert!((last[1] - 0.6).abs() < 1e-12);
    assert!((last[2] - 0.29).abs() < 1e-12);
}

#[test]
fn section_points_keep_the_energy() {
    let l = TonelliLagrangian::two_well(0.05, 0.01).unwrap();
    let v = level_velocity(&l, [0.3, 0.0], 0.2, 0.5).unwrap();
    let e = 0.5 * (v[0] * v[0] + v[1] * v[1]) + l.potential_value([0.3, 0.0]);
    assert!((e - 0.5).abs() < 1e-12);
    let pts = section_returns(&l, 0.5, 4, 5, 0.01).unwrap();
    assert_eq!(pts.len(), 2 * 4 * 5);
    for p in pts.chunks(2) {
        assert!((0.0..1.0).contains(&p[0]));
        // on the level the horizontal speed is bounded by the kinetic energy
        assert!(p[1].abs() <= (2.0 * 0.6f64).sqrt());
    }
}

#[test]
fn flat_beta_slice_is_quadratic() {
    let l = TonelliLagrangian::flat_kinetic();
    let s = beta_slice(&l, [1, 0], 2, 2, 1).unwrap();
    for r in s.chunks(3) {
        let h2 = r[0] * r[0] + r[1] * r[1];
        assert!((r[2] - 0.5 * h2).abs() < 1e-3, "{r:?}");
    }
}

#[test]
fn oversized_requests_are_refused() {
    let l = TonelliLagrangian::flat_kinetic();
    assert!(trajectory_samples(&l, [0.0; 4], 1e6, 1e-3, 1).is_err());
    assert!(beta_slice(&l, [0, 0], 2, 1, 1).is_err());
}
