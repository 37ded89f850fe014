//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Built with `harness = false`.

// 0.6366 is the rounded test correlation, not 2/π.
#![allow(clippy::approx_constant)]

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;

use common::{config, random_cmat, random_cvec, unit_system};
use ris_zf::beamform::{
    bs_ris_zf, bs_ue_zf, build_gamma, build_q1, build_q2, nulling_residual, zf_precoder, ZfSettings,
};
use ris_zf::channel::{build_correlation, ChannelSampler, CorrelationMatrix};
use ris_zf::harness::{run_sweep, summary_csv, Curve, SweepSummary};
use ris_zf::linalg::{CMat, CVec};
use ris_zf::metrics::{complexity_counts, rank_diagnostics, sinr_bs_ris_zf, sinr_from_bracket};
use ris_zf::phaseopt::{
    asymptotic_phases_bs_ue_zf, optimal_phases_bs_ris_zf, random_phases, ris_zf_brackets, PhaseRule,
};
use ris_zf::schedule::{schedule, Assignment, ProbeTable, ScheduleParams};
use ris_zf::sysconfig::Scheme;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Unit-variance links with the reference sinc correlation (λ/4 spacing).
fn unit_sinc_sampler(m: usize, n: usize, k: usize, ud: usize) -> ChannelSampler {
    let (sys, ch) = unit_system(m, n, k, ud);
    let (_, sinc, _) = config(&format!("ris_elements={n}\n"));
    let c = build_correlation(&sinc, n).unwrap();
    ChannelSampler::new(
        &sys,
        &ch,
        vec![CorrelationMatrix::from_matrix(c.entries, 1.0); k],
    )
    .unwrap()
}

fn grid(step_deg: f64) -> Vec<f64> {
    let n = (360.0 / step_deg).round() as usize;
    (0..n)
        .map(|i| -PI + i as f64 * step_deg.to_radians())
        .collect()
}

fn pairs(g: &[f64]) -> impl Iterator<Item = [f64; 2]> + '_ {
    g.iter().flat_map(move |&a| g.iter().map(move |&b| [a, b]))
}

fn mean_rate(s: &SweepSummary, scheme: Scheme, curve: Curve, m: usize, n: usize) -> (f64, f64) {
    let r = s.row(scheme, curve, m, n, 0.0).expect("grid point present");
    (r.mean_sum_rate.unwrap(), r.stderr.unwrap())
}

fn c1_ue_zf_nulling() -> Outcome {
    let s = unit_sinc_sampler(32, 4, 4, 2);
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let chs = s.sample(seed);
        let phases = random_phases(4, 4, 1000 + seed);
        let w = bs_ue_zf(&chs, &phases, &ZfSettings::default()).unwrap();
        let q1 = build_q1(&chs, &phases).unwrap();
        worst = worst.max(nulling_residual(&q1, &w.w, &CMat::identity(6, 6)));
    }

    // physical link scales: entrywise residual relative to ‖q_i‖‖w_j‖
    let (sys, ch, _) = config("antennas=32\nris_elements=4\n");
    let phys = ChannelSampler::from_config(&sys, &ch).unwrap();
    let mut worst_rel: f64 = 0.0;
    for seed in 0..100 {
        let chs = phys.sample(seed);
        let phases = random_phases(4, 4, seed);
        let q = build_q1(&chs, &phases).unwrap();
        let w = zf_precoder(&q).unwrap();
        let r = &q * &w - CMat::identity(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                worst_rel =
                    worst_rel.max(r[(i, j)].norm() / (q.row(i).norm() * w.column(j).norm()));
            }
        }
    }
    outcome(
        worst < 1e-9 && worst_rel < 1e-9,
        format!("max|Q1W-I| = {worst:.2e} (unit links); physical-scale relative {worst_rel:.2e}"),
    )
}

fn c2_ris_zf_constraints() -> Outcome {
    let s = unit_sinc_sampler(40, 4, 4, 2);
    let gamma = build_gamma(4, 4, 2);
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let chs = s.sample(seed);
        let w = bs_ris_zf(&chs, &ZfSettings::default()).unwrap();
        let q2 = build_q2(&chs).unwrap();
        worst = worst.max(nulling_residual(&q2, &w.w, &gamma));
    }
    outcome(worst < 1e-9, format!("max|Q2W-Gamma| = {worst:.2e}"))
}

fn c3_phase_oracles() -> Outcome {
    let zf = ZfSettings::default();
    let g1 = grid(1.0);
    let mut worst_cf: f64 = 0.0;
    for seed in 0..20 {
        let s = unit_sinc_sampler(8, 2, 1, 0);
        let chs = s.sample(seed);
        let b = ris_zf_brackets(&chs, &zf).unwrap();
        let h = &chs.ris_ue[0][0];
        let best = pairs(&g1)
            .map(|p| sinr_from_bracket(h, &p, &b[0], 1.0))
            .fold(0.0, f64::max);
        let phases = optimal_phases_bs_ris_zf(&chs, &zf).unwrap();
        let got = sinr_bs_ris_zf(&chs, &phases, 0, 1.0, &zf).unwrap();
        worst_cf = worst_cf.max((best - got) / best);
    }

    let r = CMat::from_row_slice(
        2,
        2,
        &[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.6366, 0.0),
            Complex64::new(0.6366, 0.0),
            Complex64::new(1.0, 0.0),
        ],
    );
    let quad = |h: &CVec, p: &[f64]| {
        let x = CVec::from_iterator(2, (0..2).map(|i| Complex64::from_polar(1.0, -p[i]) * h[i]));
        x.dotc(&(&r * &x)).re
    };
    let g05 = grid(0.5);
    let mut worst_fp: f64 = 0.0;
    for seed in 0..20 {
        let h = random_cvec(2, 500 + seed);
        let best = pairs(&g05).map(|p| quad(&h, &p)).fold(0.0, f64::max);
        let init = random_phases(1, 2, seed).phases.remove(0);
        let fp = asymptotic_phases_bs_ue_zf(&h, &r, &init, 1e-8, 500, 0.5, 0).unwrap();
        worst_fp = worst_fp.max((best - quad(&h, &fp.phases)) / best);
    }
    outcome(
        worst_cf < 1e-3 && worst_fp < 1e-3,
        format!("closed form shortfall {worst_cf:.1e}, fixed point shortfall {worst_fp:.1e} (relative to grid max)"),
    )
}

fn c4_random_vs_optimal() -> Outcome {
    let (sys, ch, run) = config(
        "correlation=iid\npower_mode=sum_power_normalized\nschemes=bs_ue_zf\n\
         phase_rules=optimal,random\nsweep_n=4\nsweep_m=16,256\ntrials=300\n",
    );
    let s = run_sweep(&run, &sys, &ch).unwrap();
    let gap = |m| {
        let (opt, _) = mean_rate(&s, Scheme::BsUeZf, Curve::Phase(PhaseRule::Optimal), m, 4);
        let (rnd, _) = mean_rate(&s, Scheme::BsUeZf, Curve::Phase(PhaseRule::Random), m, 4);
        (opt - rnd) / opt
    };
    let (g16, g256) = (gap(16), gap(256));
    outcome(
        g256 < g16 && g256 < 0.05,
        format!(
            "gap M=16 {:.2}%, M=256 {:.2}% (P = {} W)",
            g16 * 100.0,
            g256 * 100.0,
            sys.total_power
        ),
    )
}

fn c5_asymptotic_tracking() -> Outcome {
    let (sys, ch, run) = config("schemes=bs_ris_zf\nsweep_n=4\nsweep_m=40,64,256\ntrials=300\n");
    let s = run_sweep(&run, &sys, &ch).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for m in [40, 64] {
        let (opt, _) = mean_rate(&s, Scheme::BsRisZf, Curve::Phase(PhaseRule::Optimal), m, 4);
        let (asy, _) = mean_rate(
            &s,
            Scheme::BsRisZf,
            Curve::Phase(PhaseRule::Asymptotic),
            m,
            4,
        );
        let rel = (asy - opt).abs() / opt;
        ok &= rel < 0.02;
        detail.push(format!("M={m} rel diff {rel:.1e}"));
    }
    let (opt, se) = mean_rate(
        &s,
        Scheme::BsRisZf,
        Curve::Phase(PhaseRule::Optimal),
        256,
        4,
    );
    let (ana, _) = mean_rate(&s, Scheme::BsRisZf, Curve::AsymptoticSinr, 256, 4);
    ok &= (ana - opt).abs() <= 2.0 * se;
    detail.push(format!(
        "M=256 analytic {ana:.3} vs optimal {opt:.3} +/- {se:.3}"
    ));
    outcome(ok, detail.join(", "))
}

fn c6_monotone_in_n() -> Outcome {
    let (sys, ch, run) = config(
        "power_mode=sum_power_normalized\nschemes=bs_ue_zf\nsweep_n=1,4,8\nsweep_m=128\ntrials=300\n",
    );
    let s = run_sweep(&run, &sys, &ch).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for rule in PhaseRule::ALL {
        let v: Vec<(f64, f64)> = [1, 4, 8]
            .iter()
            .map(|&n| mean_rate(&s, Scheme::BsUeZf, Curve::Phase(rule), 128, n))
            .collect();
        for w in v.windows(2) {
            // 95% intervals must not overlap
            ok &= w[0].0 + 1.96 * w[0].1 < w[1].0 - 1.96 * w[1].1;
        }
        detail.push(format!(
            "{rule}: {:.2} < {:.2} < {:.2}",
            v[0].0, v[1].0, v[2].0
        ));
    }
    outcome(ok, detail.join("; "))
}

fn c7_complexity() -> Outcome {
    let diff = |xs: &[i128]| xs.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
    let nth = |xs: &[i128], k: usize| (0..k).fold(xs.to_vec(), |a, _| diff(&a));
    let mut ok = true;
    for n in [1u64, 4, 8] {
        let ue: Vec<i128> = (1..64)
            .map(|m| complexity_counts(m, n, 4, 4, 2).bs_ue_zf as i128)
            .collect();
        let ris: Vec<i128> = (1..64)
            .map(|m| complexity_counts(m, n, 4, 4, 2).bs_ris_zf as i128)
            .collect();
        ok &= nth(&ue, 2).iter().all(|&d| d == 0) && nth(&ris, 2).iter().all(|&d| d == 0);
    }
    for m in [8u64, 64, 256] {
        let ue: Vec<i128> = (1..32)
            .map(|n| complexity_counts(m, n, 4, 4, 2).bs_ue_zf as i128)
            .collect();
        let ris: Vec<i128> = (1..32)
            .map(|n| complexity_counts(m, n, 4, 4, 2).bs_ris_zf as i128)
            .collect();
        let d3 = nth(&ris, 3);
        ok &= d3.iter().all(|&d| d == d3[0] && d > 0) && nth(&ris, 4).iter().all(|&d| d == 0);
        let d2 = nth(&ue, 2);
        ok &= d2.iter().all(|&d| d == d2[0] && d > 0) && nth(&ue, 3).iter().all(|&d| d == 0);
    }
    outcome(
        ok,
        "M: second differences 0; N: RIS-ZF cubic, UE-ZF quadratic (exact integers)",
    )
}

fn c8_rank_bound() -> Outcome {
    let (sys, ch) = unit_system(40, 4, 4, 2);
    let mut violations = 0;
    for inst in 0..200u64 {
        let ranks: Vec<usize> = (0..4).map(|k| 1 + ((inst as usize * 7 + k) % 4)).collect();
        let corr = ranks
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let a = random_cmat(4, r, inst * 8 + k as u64);
                let g = &a * a.adjoint();
                let c = CMat::from_fn(4, 4, |i, j| {
                    g[(i, j)] / (g[(i, i)].re * g[(j, j)].re).sqrt()
                });
                CorrelationMatrix::from_matrix(c, 1.0)
            })
            .collect();
        let chs = ChannelSampler::new(&sys, &ch, corr).unwrap().sample(inst);
        if !rank_diagnostics(&chs, &ranks).unwrap().holds {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in 200 instances"),
    )
}

fn c9_scheduling() -> Outcome {
    let t = ProbeTable::new(DMatrix::from_row_slice(
        3,
        3,
        &[0.1, 0.2, 0.9, 0.2, 0.3, 0.1, 0.6, 0.1, 0.4],
    ))
    .unwrap();
    let a = schedule(
        &t,
        &ScheduleParams {
            u_max: 2,
            p_min: 0.5,
        },
    );
    let mut ok = a.scheduled == vec![2, 0]
        && a.assignment[&2] == Assignment::Direct
        && a.assignment[&0] == Assignment::Ris(1);
    ok &= schedule(
        &t,
        &ScheduleParams {
            u_max: 2,
            p_min: 1.0,
        },
    )
    .scheduled
    .is_empty();
    ok &= schedule(
        &t,
        &ScheduleParams {
            u_max: 5,
            p_min: 0.0,
        },
    )
    .scheduled
    .len()
        == 3;

    let mut rng_seed = 0u64;
    for _ in 0..200 {
        rng_seed += 1;
        let m = random_cmat(4, 7, rng_seed);
        let t = ProbeTable::new(m.map(|z| z.norm_sqr())).unwrap();
        for u_max in 1..8 {
            for p in [0.0, 0.5, 1.0, 2.0] {
                let base = schedule(&t, &ScheduleParams { u_max, p_min: p });
                let wider = schedule(
                    &t,
                    &ScheduleParams {
                        u_max: u_max + 1,
                        p_min: p,
                    },
                );
                let stricter = schedule(
                    &t,
                    &ScheduleParams {
                        u_max,
                        p_min: p + 0.5,
                    },
                );
                ok &= base.scheduled.iter().all(|u| wider.scheduled.contains(u));
                ok &= stricter
                    .scheduled
                    .iter()
                    .all(|u| base.scheduled.contains(u));
            }
        }
    }
    outcome(
        ok,
        "reference traces and U_max/p_min monotonicity over 200 tables",
    )
}

fn c10_determinism() -> Outcome {
    let (sys, ch, mut run) = config("");
    run.threads = 1;
    let a = summary_csv(&run_sweep(&run, &sys, &ch).unwrap());
    run.threads = 2;
    let b = summary_csv(&run_sweep(&run, &sys, &ch).unwrap());
    outcome(
        a == b,
        format!(
            "default sweep ({} trials/point), {} summary rows, threads 1 vs 2",
            run.trials,
            a.lines().count() - 1
        ),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            1,
            "BS-UE-ZF nulling",
            Duration::from_secs(10),
            c1_ue_zf_nulling,
        ),
        (
            2,
            "BS-RIS-ZF constraints",
            Duration::from_secs(20),
            c2_ris_zf_constraints,
        ),
        (
            3,
            "phase-design grid oracles",
            Duration::from_secs(60),
            c3_phase_oracles,
        ),
        (
            4,
            "random vs optimal gap shrinks",
            Duration::from_secs(180),
            c4_random_vs_optimal,
        ),
        (
            5,
            "asymptotic tracking",
            Duration::from_secs(180),
            c5_asymptotic_tracking,
        ),
        (
            6,
            "monotone in N",
            Duration::from_secs(180),
            c6_monotone_in_n,
        ),
        (
            7,
            "complexity orders",
            Duration::from_secs(1),
            c7_complexity,
        ),
        (8, "rank bound", Duration::from_secs(30), c8_rank_bound),
        (9, "scheduling", Duration::from_secs(1), c9_scheduling),
        (10, "determinism", Duration::from_secs(300), c10_determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| name.contains(f.as_str()) || *f == id.to_string())
        {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.passed && took <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name}: {} [{:.1}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
