mod common;

use proptest::prelude::*;

use common::{c, max_abs, random_cmat, random_cvec, unit_channels};
use ris_zf::beamform::{
    bs_ris_zf, bs_ue_zf, build_gamma, build_q1, build_q2, cascade, nulling_residual, zf_precoder,
    ZfSettings,
};
use ris_zf::linalg::{CMat, CVec};
use ris_zf::phaseopt::random_phases;
use ris_zf::Error;

#[test]
fn matches_svd_pseudo_inverse() {
    for seed in 0..50 {
        let q = random_cmat(5, 8, seed);
        let w = zf_precoder(&q).unwrap();
        let pinv = q.clone().pseudo_inverse(1e-12).unwrap();
        let err = max_abs(&(&w - &pinv));
        assert!(err < 1e-8, "seed {seed}: {err}");
        // Moore–Penrose conditions
        assert!(max_abs(&(&q * &w * &q - &q)) < 1e-8);
        assert!(max_abs(&(&w * &q * &w - &w)) < 1e-8);
        let qw = &q * &w;
        assert!(max_abs(&(&qw - qw.adjoint())) < 1e-8);
    }
}

#[test]
fn rejects_dependent_rows() {
    let mut q = random_cmat(4, 8, 1);
    let row = q.row(0) * c(2.0, -1.0);
    q.set_row(3, &row);
    assert!(matches!(zf_precoder(&q), Err(Error::RankDeficient { .. })));
}

#[test]
fn ridge_trades_nulling_for_conditioning() {
    let q = random_cmat(4, 6, 3);
    let exact = zf_precoder(&q).unwrap();
    let ridged = ris_zf::beamform::zf_precoder_with(
        &q,
        &ZfSettings {
            ridge: 1e-3,
            ..Default::default()
        },
    )
    .unwrap();
    let id = CMat::identity(4, 4);
    assert!(nulling_residual(&q, &exact, &id) < 1e-10);
    assert!(nulling_residual(&q, &ridged, &id) > 1e-6);
    assert!(ridged.norm() < exact.norm());
}

#[test]
fn cascade_matches_elementwise_sum() {
    let h = random_cmat(7, 5, 9);
    let v = random_cvec(5, 10);
    let phases = [0.3, -1.2, 2.9, 0.0, -3.1];
    let got = cascade(&h, &phases, &v);
    let mut expect = CVec::zeros(7);
    for n in 0..5 {
        let coeff = c(0.0, -phases[n]).exp() * v[n];
        for m in 0..7 {
            expect[m] += h[(m, n)] * coeff;
        }
    }
    assert!((got - expect).norm() < 1e-12);
}

#[test]
fn q1_rows_are_conjugated_channels() {
    let (_, chs) = unit_channels(12, 3, 2, 2, 4);
    let phases = random_phases(2, 3, 8);
    let q1 = build_q1(&chs, &phases).unwrap();
    assert_eq!(q1.shape(), (4, 12));
    for k in 0..2 {
        let g = cascade(&chs.bs_ris[k], &phases.phases[k], &chs.ris_ue[k][0]);
        for m in 0..12 {
            assert!((q1[(k, m)] - g[m].conj()).norm() < 1e-14);
        }
    }
    for u in 0..2 {
        for m in 0..12 {
            assert_eq!(q1[(2 + u, m)], chs.direct[u][m].conj());
        }
    }
}

#[test]
fn ue_zf_nulls_at_reference_size() {
    for seed in 0..100 {
        let (_, chs) = unit_channels(32, 4, 4, 2, seed);
        let phases = random_phases(4, 4, seed + 1000);
        let w = bs_ue_zf(&chs, &phases, &ZfSettings::default()).unwrap();
        let q1 = build_q1(&chs, &phases).unwrap();
        let r = nulling_residual(&q1, &w.w, &CMat::identity(6, 6));
        assert!(r < 1e-9, "seed {seed}: {r}");
    }
}

#[test]
fn ris_zf_meets_selection_constraints() {
    for seed in 0..100 {
        let (_, chs) = unit_channels(40, 4, 4, 2, seed);
        let w = bs_ris_zf(&chs, &ZfSettings::default()).unwrap();
        let q2 = build_q2(&chs).unwrap();
        let gamma = build_gamma(4, 4, 2);
        assert!(nulling_residual(&q2, &w.w, &gamma) < 1e-9);
        // each RIS sees the same unit response on every element, nothing else
        for k in 0..4 {
            let resp = chs.bs_ris[k].adjoint() * &w.w;
            for j in 0..6 {
                for i in 0..4 {
                    let want = if j == k { 1.0 } else { 0.0 };
                    assert!((resp[(i, j)] - c(want, 0.0)).norm() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn ris_zf_is_phase_independent() {
    let (_, chs) = unit_channels(30, 2, 3, 1, 2);
    let a = bs_ris_zf(&chs, &ZfSettings::default()).unwrap();
    let b = bs_ris_zf(&chs, &ZfSettings::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.w.shape(), (30, 4));
}

#[test]
fn gamma_layout() {
    let g = build_gamma(2, 3, 1);
    assert_eq!(g.shape(), (7, 3));
    let ones: Vec<(usize, usize)> = (0..7)
        .flat_map(|r| (0..3).map(move |c| (r, c)))
        .filter(|&(r, col)| g[(r, col)].re == 1.0)
        .collect();
    assert_eq!(
        ones,
        vec![(0, 0), (1, 0), (2, 0), (3, 1), (4, 1), (5, 1), (6, 2)]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Scaling row i of Q by s_i scales column i of W by 1/s_i.
    #[test]
    fn row_scaling_covariance(seed in any::<u64>(), mags in proptest::collection::vec(1e-6f64..1e6, 4), angs in proptest::collection::vec(-3.0f64..3.0, 4)) {
        let q = random_cmat(4, 9, seed);
        let s: Vec<_> = mags.iter().zip(&angs).map(|(&m, &a)| c(0.0, a).exp() * m).collect();
        let mut qs = q.clone();
        for (i, si) in s.iter().enumerate() {
            let row = qs.row(i) * *si;
            qs.set_row(i, &row);
        }
        let w = zf_precoder(&q).unwrap();
        let ws = zf_precoder(&qs).unwrap();
        for (i, si) in s.iter().enumerate() {
            let expect = w.column(i) / *si;
            let err = (ws.column(i) - &expect).norm() / expect.norm();
            prop_assert!(err < 1e-7, "column {} relative error {}", i, err);
        }
    }

    #[test]
    fn nulling_holds_for_random_shapes(seed in any::<u64>(), rows in 1usize..8, extra in 0usize..8) {
        let q = random_cmat(rows, rows + extra, seed);
        let w = zf_precoder(&q).unwrap();
        prop_assert!(nulling_residual(&q, &w, &CMat::identity(rows, rows)) < 1e-8);
    }
}
