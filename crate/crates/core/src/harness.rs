//! Monte Carlo sweep runner and CSV emitters.
//!
//! A grid point is one `(N, M)` pair. Every trial of a point draws one true
//! channel set from `trial_seed(master, point, trial)`; each CSI-error level,
//! scheme and phase rule is evaluated on that same draw, so curves are
//! compared on common random numbers. Trials run in parallel and are merged
//! by `(point, trial)` key, which makes the output independent of the thread
//! count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::beamform::{
    apply_power_mode, bs_ris_zf, bs_ue_zf, build_gamma, build_q1, build_q2, nulling_residual,
    ZfSettings,
};
use crate::channel::{ChannelSampler, ChannelSet};
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, CMat};
use crate::metrics::{sinr_exact, Sinrs, TrialResult, RANK_TOL};
use crate::phaseopt::{
    asymptotic_bs_ris_zf_all, asymptotic_phases_bs_ue_zf_all, optimal_phases_bs_ris_zf,
    optimal_phases_bs_ue_zf, random_phases, PhaseConfig, PhaseOptSettings, PhaseRule,
};
use crate::rng::{stream_seed, trial_seed, Stream};
use crate::sysconfig::{validate_config, ChannelModelConfig, Scheme, SystemConfig};

/// Share of failed trials above which a grid point is flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sweep_m: Vec<usize>,
    pub sweep_n: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub phase_rules: Vec<PhaseRule>,
    pub trials: usize,
    pub master_seed: u64,
    pub csi_tau: Vec<f64>,
    pub output_dir: PathBuf,
    /// 0 uses every core.
    pub threads: usize,
    pub phase_opt: PhaseOptSettings,
    pub ridge: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sweep_m: vec![8, 16, 32, 64, 128, 256],
            sweep_n: vec![1, 4, 8],
            schemes: Scheme::ALL.to_vec(),
            phase_rules: PhaseRule::ALL.to_vec(),
            trials: 500,
            master_seed: 1,
            csi_tau: vec![0.0],
            output_dir: PathBuf::from("out"),
            threads: 0,
            phase_opt: PhaseOptSettings::default(),
            ridge: 0.0,
        }
    }
}

/// A curve in the summary: a phase rule, or the analytic large-array SINR
/// of BS-RIS-ZF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Curve {
    Phase(PhaseRule),
    AsymptoticSinr,
}

impl Curve {
    pub fn as_str(self) -> &'static str {
        match self {
            Curve::Phase(r) => r.as_str(),
            Curve::AsymptoticSinr => "asymptotic_sinr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub scheme: Scheme,
    pub curve: Curve,
    pub antennas: usize,
    pub elements: usize,
    pub num_ris: usize,
    pub direct_users: usize,
    pub csi_tau: f64,
    pub result: TrialResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub curve: Curve,
    pub antennas: usize,
    pub elements: usize,
    pub csi_tau: f64,
    /// Successful trials.
    pub trials: usize,
    pub failures: usize,
    /// `None` when no trial succeeded.
    pub mean_sum_rate: Option<f64>,
    pub stderr: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPoint {
    pub scheme: Scheme,
    pub curve: Option<Curve>,
    pub antennas: usize,
    pub elements: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSummary {
    pub rows: Vec<SummaryRow>,
    pub skipped: Vec<SkippedPoint>,
    pub trials: Vec<TrialRecord>,
}

impl SweepSummary {
    pub fn flagged(&self) -> bool {
        self.rows.iter().any(|r| r.flagged)
    }

    pub fn row(
        &self,
        scheme: Scheme,
        curve: Curve,
        antennas: usize,
        elements: usize,
        csi_tau: f64,
    ) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| {
            r.scheme == scheme
                && r.curve == curve
                && r.antennas == antennas
                && r.elements == elements
                && r.csi_tau == csi_tau
        })
    }
}

/// Mean and standard error (sample standard deviation over √n).
pub fn mean_and_stderr(xs: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((mean, (var / n as f64).sqrt()))
}

/// Everything needed to evaluate one `(N, M)` point.
struct GridPoint {
    index: u64,
    sys: SystemConfig,
    sampler: ChannelSampler,
    correlations: Vec<CMat>,
    /// Active schemes with their curves.
    plan: Vec<(Scheme, Vec<Curve>)>,
}

fn curves_for(scheme: Scheme, rules: &[PhaseRule]) -> Vec<Curve> {
    let mut c: Vec<Curve> = rules.iter().map(|&r| Curve::Phase(r)).collect();
    if scheme == Scheme::BsRisZf {
        c.push(Curve::AsymptoticSinr);
    }
    c
}

type Outcome = (Scheme, Curve, usize, Result<TrialResult>);

struct Evaluator<'a> {
    run: &'a RunConfig,
    zf: ZfSettings,
    point: &'a GridPoint,
}

impl Evaluator<'_> {
    fn trial(&self, trial: usize) -> Vec<Outcome> {
        let seed = trial_seed(self.run.master_seed, self.point.index, trial as u64);
        let truth = self
            .point
            .sampler
            .sample(stream_seed(seed, Stream::Channel));
        let mut out = Vec::new();
        for (ti, &tau) in self.run.csi_tau.iter().enumerate() {
            let estimate = self.point.sampler.apply_estimation_error(
                &truth,
                tau,
                stream_seed(seed, Stream::EstimationError),
            );
            for (scheme, curves) in &self.point.plan {
                let results = match &estimate {
                    Ok(est) => match scheme {
                        Scheme::BsUeZf => self.ue_zf(&truth, est, curves, seed),
                        Scheme::BsRisZf => self.ris_zf(&truth, est, curves, seed),
                    },
                    Err(e) => curves.iter().map(|_| Err(clone_err(e))).collect(),
                };
                for (curve, r) in curves.iter().zip(results) {
                    out.push((*scheme, *curve, ti, r));
                }
            }
        }
        out
    }

    fn init_phases(&self, seed: u64) -> PhaseConfig {
        random_phases(
            self.point.sys.num_ris,
            self.point.sys.elements,
            stream_seed(seed, Stream::InitialPhases),
        )
    }

    fn ue_zf(
        &self,
        truth: &ChannelSet,
        est: &ChannelSet,
        curves: &[Curve],
        seed: u64,
    ) -> Vec<Result<TrialResult>> {
        let sys = &self.point.sys;
        curves
            .iter()
            .map(|curve| {
                let (phases, fp_residual) = match curve {
                    Curve::Phase(PhaseRule::Random) => (
                        random_phases(
                            sys.num_ris,
                            sys.elements,
                            stream_seed(seed, Stream::RandomPhases),
                        ),
                        0.0,
                    ),
                    Curve::Phase(PhaseRule::Optimal) => {
                        let (p, _) = optimal_phases_bs_ue_zf(
                            est,
                            sys,
                            &self.init_phases(seed),
                            &self.run.phase_opt,
                            &self.zf,
                        )?;
                        (p, 0.0)
                    }
                    Curve::Phase(PhaseRule::Asymptotic) => {
                        let (p, art) = asymptotic_phases_bs_ue_zf_all(
                            est,
                            &self.point.correlations,
                            &self.init_phases(seed),
                            &self.run.phase_opt,
                        )?;
                        (p, art.fixed_point_residual)
                    }
                    Curve::AsymptoticSinr => unreachable!("BS-UE-ZF has no analytic curve"),
                };
                let bf = bs_ue_zf(est, &phases, &self.zf)?;
                let q1 = build_q1(est, &phases)?;
                let residual =
                    nulling_residual(&q1, &bf.w, &CMat::identity(q1.nrows(), q1.nrows()));
                let bf = apply_power_mode(bf, sys)?;
                let sinrs = sinr_exact(truth, &phases, &bf, sys)?;
                let mut r = TrialResult::from_sinrs(&sinrs, seed);
                r.nulling_residual = residual;
                r.fixed_point_residual = fp_residual;
                Ok(r)
            })
            .collect()
    }

    fn ris_zf(
        &self,
        truth: &ChannelSet,
        est: &ChannelSet,
        curves: &[Curve],
        seed: u64,
    ) -> Vec<Result<TrialResult>> {
        let sys = &self.point.sys;
        let prepared = (|| -> Result<_> {
            let bf = bs_ris_zf(est, &self.zf)?;
            let q2 = build_q2(est)?;
            let gamma = build_gamma(est.num_ris(), est.elements(), est.direct_users());
            let residual = nulling_residual(&q2, &bf.w, &gamma);
            let rank = numerical_rank(&q2, RANK_TOL);
            let bf = apply_power_mode(bf, sys)?;
            Ok((bf, residual, rank))
        })();
        let (bf, residual, rank) = match prepared {
            Ok(p) => p,
            Err(e) => return curves.iter().map(|_| Err(clone_err(&e))).collect(),
        };
        let finish = |sinrs: &Sinrs| {
            let mut r = TrialResult::from_sinrs(sinrs, seed);
            r.nulling_residual = residual;
            r.rank_q2 = Some(rank);
            r
        };
        curves
            .iter()
            .map(|curve| {
                let phases = match curve {
                    Curve::Phase(PhaseRule::Random) => random_phases(
                        sys.num_ris,
                        sys.elements,
                        stream_seed(seed, Stream::RandomPhases),
                    ),
                    Curve::Phase(PhaseRule::Optimal) => optimal_phases_bs_ris_zf(est, &self.zf)?,
                    Curve::Phase(PhaseRule::Asymptotic) => {
                        asymptotic_bs_ris_zf_all(
                            est,
                            &self.point.correlations,
                            &sys.noise_variance_blocked,
                        )?
                        .0
                    }
                    Curve::AsymptoticSinr => {
                        let (phases, _, limits) = asymptotic_bs_ris_zf_all(
                            est,
                            &self.point.correlations,
                            &sys.noise_variance_blocked,
                        )?;
                        // direct UEs do not see the RISs; take their exact SINR
                        let exact = sinr_exact(truth, &phases, &bf, sys)?;
                        let beta2 = bf.scaling * bf.scaling;
                        let sinrs = Sinrs {
                            blocked: limits.iter().map(|s| s * beta2).collect(),
                            direct: exact.direct,
                        };
                        return Ok(finish(&sinrs));
                    }
                };
                let sinrs = sinr_exact(truth, &phases, &bf, sys)?;
                Ok(finish(&sinrs))
            })
            .collect()
    }
}

// Error is not Clone (io::Error); trial failures only need the message.
fn clone_err(e: &Error) -> Error {
    match e {
        Error::RankDeficient { condition } => Error::RankDeficient {
            condition: *condition,
        },
        other => Error::Dimension(other.to_string()),
    }
}

fn build_points(
    run: &RunConfig,
    sys: &SystemConfig,
    ch: &ChannelModelConfig,
    skipped: &mut Vec<SkippedPoint>,
) -> Vec<GridPoint> {
    let mut points = Vec::new();
    let mut index = 0u64;
    for &n in &run.sweep_n {
        for &m in &run.sweep_m {
            let this = index;
            index += 1;
            let sys_p = sys.with_dimensions(m, n);
            let sampler = match ChannelSampler::from_config(&sys_p, ch) {
                Ok(s) => s,
                Err(e) => {
                    for &scheme in &run.schemes {
                        skipped.push(SkippedPoint {
                            scheme,
                            curve: None,
                            antennas: m,
                            elements: n,
                            reason: e.to_string(),
                        });
                    }
                    continue;
                }
            };
            let mut plan = Vec::new();
            for &scheme in &run.schemes {
                let report = validate_config(&sys_p, ch, scheme);
                if !report.passed() {
                    skipped.push(SkippedPoint {
                        scheme,
                        curve: None,
                        antennas: m,
                        elements: n,
                        reason: report.reason(),
                    });
                    continue;
                }
                let mut curves = curves_for(scheme, &run.phase_rules);
                if scheme == Scheme::BsUeZf && !sys_p.single_user_per_ris() {
                    curves.retain(|c| {
                        let keep = *c != Curve::Phase(PhaseRule::Asymptotic);
                        if !keep {
                            skipped.push(SkippedPoint {
                                scheme,
                                curve: Some(*c),
                                antennas: m,
                                elements: n,
                                reason: "large-array fixed point needs one UE per RIS".into(),
                            });
                        }
                        keep
                    });
                }
                if !curves.is_empty() {
                    plan.push((scheme, curves));
                }
            }
            if plan.is_empty() {
                continue;
            }
            let correlations = sampler.correlations().iter().map(|c| c.scaled()).collect();
            points.push(GridPoint {
                index: this,
                sys: sys_p,
                sampler,
                correlations,
                plan,
            });
        }
    }
    points
}

/// Runs every grid point and trial, then aggregates.
pub fn run_sweep(
    run: &RunConfig,
    sys: &SystemConfig,
    ch: &ChannelModelConfig,
) -> Result<SweepSummary> {
    let mut summary = SweepSummary::default();
    let points = build_points(run, sys, ch, &mut summary.skipped);
    let zf = ZfSettings {
        ridge: run.ridge,
        ..Default::default()
    };

    let units: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..run.trials).map(move |t| (p, t)))
        .collect();
    let work = || -> Vec<Vec<Outcome>> {
        units
            .par_iter()
            .map(|&(p, t)| {
                Evaluator {
                    run,
                    zf,
                    point: &points[p],
                }
                .trial(t)
            })
            .collect()
    };
    let results = if run.threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(run.threads)
            .build()
            .map_err(|e| Error::Dimension(format!("thread pool: {e}")))?
            .install(work)
    };

    // aggregate per (point, scheme, curve, tau)
    for (pi, point) in points.iter().enumerate() {
        let base = pi * run.trials;
        for (scheme, curves) in &point.plan {
            for &curve in curves {
                for (ti, &tau) in run.csi_tau.iter().enumerate() {
                    let mut rates = Vec::with_capacity(run.trials);
                    let mut failures = 0;
                    for (t, outcomes) in results[base..base + run.trials].iter().enumerate() {
                        let hit = outcomes
                            .iter()
                            .find(|(s, c, i, _)| s == scheme && *c == curve && *i == ti)
                            .expect("every planned curve is evaluated");
                        match &hit.3 {
                            Ok(r) => {
                                rates.push(r.sum_rate);
                                summary.trials.push(TrialRecord {
                                    trial: t,
                                    scheme: *scheme,
                                    curve,
                                    antennas: point.sys.antennas,
                                    elements: point.sys.elements,
                                    num_ris: point.sys.num_ris,
                                    direct_users: point.sys.direct_users,
                                    csi_tau: tau,
                                    result: r.clone(),
                                });
                            }
                            Err(_) => failures += 1,
                        }
                    }
                    let stats = mean_and_stderr(&rates);
                    summary.rows.push(SummaryRow {
                        scheme: *scheme,
                        curve,
                        antennas: point.sys.antennas,
                        elements: point.sys.elements,
                        csi_tau: tau,
                        trials: rates.len(),
                        failures,
                        mean_sum_rate: stats.map(|s| s.0),
                        stderr: stats.map(|s| s.1),
                        flagged: failures as f64 > FAILURE_FLAG_FRACTION * run.trials as f64,
                    });
                }
            }
        }
    }
    summary.rows.sort_by(|a, b| {
        (a.scheme, a.curve, a.elements)
            .cmp(&(b.scheme, b.curve, b.elements))
            .then(a.csi_tau.total_cmp(&b.csi_tau))
            .then(a.antennas.cmp(&b.antennas))
    });
    Ok(summary)
}

// ---------------------------------------------------------------------------
// CSV output

pub const SUMMARY_HEADER: &str =
    "scheme,phase_rule,M,N,csi_tau,trials,failures,mean_sum_rate,stderr,flagged";
pub const TRIALS_HEADER: &str = "trial,scheme,phase_rule,M,N,K,U_d,csi_tau,sinr_min,sinr_max,sum_rate,nulling_residual,rank_q2,seed";
pub const SKIPPED_HEADER: &str = "scheme,phase_rule,M,N,reason";
pub const PLOT_HEADER: &str = "phase_rule,N,csi_tau,M,mean_rate,stderr";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn summary_csv(s: &SweepSummary) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in &s.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scheme,
            r.curve.as_str(),
            r.antennas,
            r.elements,
            r.csi_tau,
            r.trials,
            r.failures,
            opt(r.mean_sum_rate),
            opt(r.stderr),
            r.flagged
        );
    }
    out
}

pub fn trials_csv(s: &SweepSummary) -> String {
    let mut out = format!("{TRIALS_HEADER}\n");
    for t in &s.trials {
        let r = &t.result;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            t.trial,
            t.scheme,
            t.curve.as_str(),
            t.antennas,
            t.elements,
            t.num_ris,
            t.direct_users,
            t.csi_tau,
            r.sinr_min(),
            r.sinr_max(),
            r.sum_rate,
            r.nulling_residual,
            r.rank_q2.map(|x| x.to_string()).unwrap_or_default(),
            r.seed
        );
    }
    out
}

pub fn skipped_csv(s: &SweepSummary) -> String {
    let mut out = format!("{SKIPPED_HEADER}\n");
    for k in &s.skipped {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            k.scheme,
            k.curve.map(|c| c.as_str()).unwrap_or("*"),
            k.antennas,
            k.elements,
            quote(&k.reason)
        );
    }
    out
}

/// Plot-ready curves of one scheme: `(M, mean_rate, stderr)` per
/// `(phase_rule, N, csi_tau)`.
pub fn plot_csv(s: &SweepSummary, scheme: Scheme) -> String {
    let mut out = format!("{PLOT_HEADER}\n");
    for r in s.rows.iter().filter(|r| r.scheme == scheme) {
        if let (Some(m), Some(e)) = (r.mean_sum_rate, r.stderr) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.curve.as_str(),
                r.elements,
                r.csi_tau,
                r.antennas,
                m,
                e
            );
        }
    }
    out
}

/// Writes `summary.csv`, `trials.csv`, `skipped.csv`, `plotdata_fig2.csv`
/// (BS-UE-ZF) and `plotdata_fig3.csv` (BS-RIS-ZF) into `dir`.
pub fn emit_outputs(s: &SweepSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("summary.csv", summary_csv(s)),
        ("trials.csv", trials_csv(s)),
        ("skipped.csv", skipped_csv(s)),
        ("plotdata_fig2.csv", plot_csv(s, Scheme::BsUeZf)),
        ("plotdata_fig3.csv", plot_csv(s, Scheme::BsRisZf)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stderr_of_known_sample() {
        let (m, e) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        // sd = sqrt(5/3)
        assert!((e - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(mean_and_stderr(&[]), None);
        assert_eq!(mean_and_stderr(&[7.0]), Some((7.0, 0.0)));
    }

    #[test]
    fn empty_summary_writes_headers_only() {
        let s = SweepSummary::default();
        assert_eq!(summary_csv(&s), format!("{SUMMARY_HEADER}\n"));
        assert_eq!(trials_csv(&s), format!("{TRIALS_HEADER}\n"));
        assert_eq!(plot_csv(&s, Scheme::BsUeZf), format!("{PLOT_HEADER}\n"));
    }
}
