//! Values frozen from an independent 50-digit evaluation
//! (tools/derive_constants.py).

use mdi_keyrate::channel::{gains_x, gains_z};
use mdi_keyrate::decoy_algebra::{coefficient_sets, vandermonde_inverse_row};
use mdi_keyrate::finite_key::gamma_bar;
use mdi_keyrate::key_rate::lambda_ec;
use mdi_keyrate::{Basis, ChannelParams, IntensityLadder};

fn mao(total_km: f64) -> ChannelParams {
    ChannelParams {
        misalignment: 0.015,
        dark_count: 6.02e-6,
        attenuation_db_per_km: 0.2,
        detector_efficiency: 0.145,
        length_a_km: 0.0,
        length_b_km: 0.0,
    }
    .with_distance(total_km)
}

fn rel(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

fn assert_rel(got: f64, want: f64, tol: f64) {
    assert!(rel(got, want) < tol, "got {got:e}, want {want:e}");
}

#[test]
fn x_gains_at_zero_distance() {
    let l = IntensityLadder::new(Basis::X, vec![0.1, 1e-6], vec![0.5, 0.5], 0.5).unwrap();
    let s = gains_x(&mao(0.0), &l).unwrap();
    assert_rel(s.q(0, 0), 2.0681550982998443899e-4, 1e-10);
    assert_rel(s.qe(0, 0), 5.3156032120066249821e-5, 1e-10);
}

#[test]
fn z_gains_at_zero_distance() {
    let l = IntensityLadder::new(Basis::Z, vec![0.1, 1e-6], vec![0.5, 0.5], 0.5).unwrap();
    let s = gains_z(&mao(0.0), &l).unwrap();
    assert_rel(s.q(0, 0), 1.0320422135700879128e-4, 1e-10);
    assert_rel(s.qe(0, 0), 1.7144352680562462953e-6, 1e-10);
}

#[test]
fn gains_fall_with_distance() {
    let lx = IntensityLadder::new(Basis::X, vec![0.4, 0.1, 1e-6], vec![0.3, 0.3, 0.4], 0.5).unwrap();
    let lz = IntensityLadder::new(Basis::Z, vec![0.4, 0.1, 1e-6], vec![0.3, 0.3, 0.4], 0.5).unwrap();
    let near = (gains_x(&mao(0.0), &lx).unwrap(), gains_z(&mao(0.0), &lz).unwrap());
    let far = (gains_x(&mao(100.0), &lx).unwrap(), gains_z(&mao(100.0), &lz).unwrap());
    for (a, b) in [(&near.0, &far.0), (&near.1, &far.1)] {
        for (q0, q1) in a.gains().iter().zip(b.gains()) {
            assert!(q1 < q0);
        }
    }
}

#[test]
fn gamma_bar_symmetric_point() {
    let g = gamma_bar(1e-10, 0.02, 1e6, 1e6).unwrap();
    assert_rel(g, 1.1717203315849161591e-3, 1e-12);
}

#[test]
fn inverse_rows_k3() {
    let mu = [0.6, 0.2, 0.01];
    let want = [
        [8.474576271186440678e-3, -7.8947368421052631579e-2, 1.0704727921498661909],
        [-0.88983050847457627119, 8.0263157894736842105, -7.1364852809991079393],
        [8.474576271186440678, -26.315789473684210526, 17.841213202497769848],
    ];
    for (a, row) in want.iter().enumerate() {
        let got = vandermonde_inverse_row(&mu, a).unwrap();
        for (g, w) in got.iter().zip(row) {
            assert_rel(*g, *w, 1e-12);
        }
    }
}

#[test]
fn coefficient_sets_k4() {
    let l = IntensityLadder::new(
        Basis::X,
        vec![0.5, 0.2, 0.05, 1e-6],
        vec![0.25; 4],
        0.5,
    )
    .unwrap();
    let c = coefficient_sets(&l).unwrap();
    let even0 = [
        -2.4425549157766880672e-7,
        3.3928024033458218233e-6,
        -3.1149396213880545454e-5,
        1.0000280006065123759,
    ];
    let even1 = [
        -0.24426159796495824844,
        3.3928770449986954314,
        -31.149614259654042618,
        27.00075601637583415,
    ];
    let odd = [
        -2.0357221556363332439,
        28.034596764775453371,
        -25.000650013762779072,
    ];
    for i in 0..4 {
        assert_rel(c.a_even[0][i], even0[i], 1e-9);
        assert_rel(c.a_even[1][i], even1[i], 1e-9);
    }
    assert_eq!(c.a_odd[0], 0.0);
    for i in 0..3 {
        assert_rel(c.a_odd[i + 1], odd[i], 1e-9);
    }
    assert_rel(c.c_tail, 1.775405061909820763e-3, 1e-9);
}

#[test]
fn error_correction_leakage() {
    let l = IntensityLadder::new(Basis::Z, vec![0.3, 1e-6], vec![0.9, 0.1], 0.5).unwrap();
    let s = gains_z(&mao(0.0), &l).unwrap();
    assert_rel(lambda_ec(&s, &l, 1.16).unwrap(), 9.6507978908675887005e-5, 1e-10);
}
