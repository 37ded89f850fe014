//! RIS phase-shift design rules.
//!
//! * BS-UE-ZF: principal-eigenvector design with `Q₁` frozen per iteration,
//!   its single-UE closed form, and the large-array fixed point.
//! * BS-RIS-ZF: the closed form and its large-array version, which also gives
//!   the limiting SINR.
//! * Uniform random phases.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::beamform::{bs_ris_zf_inverse, build_gamma, build_q1, zf_precoder_with, ZfSettings};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{
    angle_distance, hermitian_condition, principal_eigenvector, wrap_angle, CMat, CVec,
};
use crate::rng::rng_from_seed;
use crate::sysconfig::SystemConfig;

pub const EIGEN_TOL: f64 = 1e-10;
pub const EIGEN_MAX_ITER: usize = 1000;

/// Phase rule selectable in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhaseRule {
    Optimal,
    Asymptotic,
    Random,
}

impl PhaseRule {
    pub const ALL: [PhaseRule; 3] = [PhaseRule::Optimal, PhaseRule::Asymptotic, PhaseRule::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseRule::Optimal => "optimal",
            PhaseRule::Asymptotic => "asymptotic",
            PhaseRule::Random => "random",
        }
    }
}

impl fmt::Display for PhaseRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseRule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "optimal" => Ok(PhaseRule::Optimal),
            "asymptotic" => Ok(PhaseRule::Asymptotic),
            "random" => Ok(PhaseRule::Random),
            other => Err(format!("unknown phase rule `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseOrigin {
    Optimal,
    ClosedForm,
    Asymptotic,
    Random,
}

/// Per-RIS phase vectors φ_k ∈ [−π, π)^N; Φ_k = diag(e^{jφ_k}).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    pub phases: Vec<Vec<f64>>,
    pub origin: PhaseOrigin,
}

impl PhaseConfig {
    pub fn zeros(num_ris: usize, elements: usize, origin: PhaseOrigin) -> Self {
        PhaseConfig {
            phases: vec![vec![0.0; elements]; num_ris],
            origin,
        }
    }

    /// Wraps every entry into `[−π, π)`.
    pub fn from_vecs(phases: Vec<Vec<f64>>, origin: PhaseOrigin) -> Self {
        PhaseConfig {
            phases: phases
                .into_iter()
                .map(|v| v.into_iter().map(wrap_angle).collect())
                .collect(),
            origin,
        }
    }

    /// Diagonal of Φ_k.
    pub fn reflection(&self, k: usize) -> CVec {
        CVec::from_iterator(
            self.phases[k].len(),
            self.phases[k]
                .iter()
                .map(|&p| Complex64::from_polar(1.0, p)),
        )
    }

    /// Largest wrapped entrywise difference to `other`.
    pub fn max_change(&self, other: &PhaseConfig) -> f64 {
        self.phases
            .iter()
            .zip(&other.phases)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| angle_distance(x, y)))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOptSettings {
    /// Cap on alternating (rebuild `Q₁`) iterations.
    pub outer_iters: usize,
    /// Stop when no phase moves by more than this (rad).
    pub outer_tol: f64,
    pub fixed_point_tol: f64,
    pub fixed_point_max_iter: usize,
    /// Step fraction of the wrapped fixed-point update, in (0, 1].
    pub damping: f64,
}

impl Default for PhaseOptSettings {
    fn default() -> Self {
        PhaseOptSettings {
            outer_iters: 100,
            outer_tol: 1e-8,
            fixed_point_tol: 1e-8,
            fixed_point_max_iter: 500,
            damping: 0.5,
        }
    }
}

/// Angle of `z`, refusing zero or non-finite arguments.
pub fn checked_angle(z: Complex64, ris: usize, element: usize) -> Result<f64> {
    let r = z.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::UndefinedAngle { ris, element });
    }
    Ok(z.arg())
}

/// i.i.d. uniform phases on `[−π, π)`.
pub fn random_phases(num_ris: usize, elements: usize, seed: u64) -> PhaseConfig {
    let mut rng = rng_from_seed(seed);
    let phases = (0..num_ris)
        .map(|_| {
            (0..elements)
                .map(|_| wrap_angle(rng.random_range(-PI..PI)))
                .collect()
        })
        .collect();
    PhaseConfig {
        phases,
        origin: PhaseOrigin::Random,
    }
}

/// Unit-modulus maximizer of `v^H (Σ q q^H) v` (approximately, through the
/// principal eigenvector), returned as phases with `v = e^{−jφ}`.
///
/// The eigenvector is projected entrywise to unit modulus and rotated so that
/// `v^H q_0` is real and positive; with a single `q` this is exactly
/// `φ_i = −∠q_i`.
pub fn eigen_phases(qs: &[CVec], ris: usize) -> Result<Vec<f64>> {
    let n = qs.first().map(|q| q.len()).unwrap_or(0);
    let mut s = CMat::zeros(n, n);
    for q in qs {
        s += q * q.adjoint();
    }
    let (v, _) = principal_eigenvector(&s, EIGEN_TOL, EIGEN_MAX_ITER);
    let mut unit = CVec::zeros(n);
    for i in 0..n {
        let a = checked_angle(v[i], ris, i)?;
        unit[i] = Complex64::from_polar(1.0, a);
    }
    let lead = unit.dotc(&qs[0]);
    if lead.norm() > 0.0 {
        let rot = Complex64::from_polar(1.0, lead.arg());
        unit.iter_mut().for_each(|z| *z *= rot);
    }
    (0..n).map(|i| Ok(wrap_angle(-unit[i].arg()))).collect()
}

/// `q_{k,l} = diag(h_{k,l}^H) H_k^H w_{k,l}` for every blocked UE, grouped per RIS.
pub fn desired_signal_vectors(chs: &ChannelSet, w: &CMat) -> Vec<Vec<CVec>> {
    let mut col = 0;
    chs.bs_ris
        .iter()
        .zip(&chs.ris_ue)
        .map(|(h, ues)| {
            ues.iter()
                .map(|hu| {
                    let b = h.adjoint() * w.column(col);
                    col += 1;
                    hu.zip_map(&b, |x, y| x.conj() * y)
                })
                .collect()
        })
        .collect()
}

/// Sum-power-normalized sum rate of a perfect ZF precoder: every UE receives
/// `β² / σ_j²` with `β² = P / ‖W‖_F²`.
pub fn normalized_zf_objective(w: &CMat, cfg: &SystemConfig) -> f64 {
    let f2 = w.norm_squared();
    if !(f2 > 0.0) {
        return 0.0;
    }
    let beta2 = cfg.total_power / f2;
    cfg.noise_variances()
        .iter()
        .map(|s| (1.0 + beta2 / s).log2())
        .sum()
}

/// Diagnostics of the alternating BS-UE-ZF design.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingDiagnostics {
    /// Outer iterations performed.
    pub iterations: usize,
    pub converged: bool,
    /// Power-normalized objective at every visited phase configuration.
    pub objective_trace: Vec<f64>,
    /// Index into the trace of the returned configuration.
    pub best_index: usize,
    pub final_change: f64,
}

/// Phases from one eigen update with `Q₁` (hence `W`) frozen.
pub fn eigen_update_bs_ue_zf(chs: &ChannelSet, w: &CMat) -> Result<PhaseConfig> {
    let qs = desired_signal_vectors(chs, w);
    let phases = qs
        .iter()
        .enumerate()
        .map(|(k, q)| eigen_phases(q, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseConfig {
        phases,
        origin: PhaseOrigin::Optimal,
    })
}

/// Single-UE-per-RIS closed form
/// `φ_{k,i} = −∠(h*_{k,1,i} [H_k^H W e_k]_i)` for the given precoder.
pub fn closed_form_phases_bs_ue_zf(chs: &ChannelSet, w: &CMat) -> Result<PhaseConfig> {
    let qs = desired_signal_vectors(chs, w);
    let mut phases = Vec::with_capacity(qs.len());
    for (k, q) in qs.iter().enumerate() {
        if q.len() != 1 {
            return Err(Error::NotSingleUserPerRis {
                ris: k,
                count: q.len(),
            });
        }
        phases.push(
            q[0].iter()
                .enumerate()
                .map(|(i, &z)| checked_angle(z, k, i).map(|a| wrap_angle(-a)))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(PhaseConfig {
        phases,
        origin: PhaseOrigin::ClosedForm,
    })
}

/// BS-UE-ZF phase design: rebuild `Q₁` from the current phases, take the
/// eigen update for every RIS, repeat until the phases stop moving.
/// Returns the visited configuration with the best power-normalized
/// objective.
pub fn optimal_phases_bs_ue_zf(
    chs: &ChannelSet,
    cfg: &SystemConfig,
    init: &PhaseConfig,
    settings: &PhaseOptSettings,
    zf: &ZfSettings,
) -> Result<(PhaseConfig, AlternatingDiagnostics)> {
    let mut current = init.clone();
    let mut trace = Vec::new();
    let mut best: Option<(f64, usize, PhaseConfig)> = None;
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut iterations = 0;

    let mut consider = |phases: &PhaseConfig, w: &CMat, trace: &mut Vec<f64>| {
        let obj = normalized_zf_objective(w, cfg);
        trace.push(obj);
        if best.as_ref().is_none_or(|(b, _, _)| obj > *b) {
            best = Some((obj, trace.len() - 1, phases.clone()));
        }
    };

    let mut w = zf_precoder_with(&build_q1(chs, &current)?, zf)?;
    consider(&current, &w, &mut trace);
    while iterations < settings.outer_iters.max(1) {
        let next = eigen_update_bs_ue_zf(chs, &w)?;
        change = next.max_change(&current);
        current = next;
        iterations += 1;
        w = zf_precoder_with(&build_q1(chs, &current)?, zf)?;
        consider(&current, &w, &mut trace);
        if change < settings.outer_tol {
            converged = true;
            break;
        }
    }
    let (_, best_index, mut phases) = best.expect("at least one evaluation");
    phases.origin = PhaseOrigin::Optimal;
    Ok((
        phases,
        AlternatingDiagnostics {
            iterations,
            converged,
            objective_trace: trace,
            best_index,
            final_change: change,
        },
    ))
}

/// Result of the large-array fixed point for one RIS.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub phases: Vec<f64>,
    /// Max wrapped distance between φ_i and the right-hand side.
    pub residual: f64,
    pub iterations: usize,
}

/// Right-hand side `−∠(h*_i Σ_l R_{il} e^{−jφ_l} h_l)` of the fixed-point
/// equation.
pub fn fixed_point_map(h: &CVec, r: &CMat, phases: &[f64], ris: usize) -> Result<Vec<f64>> {
    let x = CVec::from_iterator(
        h.len(),
        phases
            .iter()
            .zip(h.iter())
            .map(|(&p, &hl)| Complex64::from_polar(1.0, -p) * hl),
    );
    let rx = r * x;
    (0..h.len())
        .map(|i| checked_angle(h[i].conj() * rx[i], ris, i).map(|a| wrap_angle(-a)))
        .collect()
}

/// Large-array BS-UE-ZF phases for a RIS serving one UE: damped iteration of
/// the fixed-point map. Returns the iterate with the smallest residual.
pub fn asymptotic_phases_bs_ue_zf(
    h: &CVec,
    r: &CMat,
    init: &[f64],
    tol: f64,
    max_iter: usize,
    damping: f64,
    ris: usize,
) -> Result<FixedPoint> {
    if h.len() != r.nrows() || init.len() != h.len() {
        return Err(Error::Dimension(format!(
            "fixed point: h has {} entries, R is {}x{}, init has {}",
            h.len(),
            r.nrows(),
            r.ncols(),
            init.len()
        )));
    }
    let mut phases: Vec<f64> = init.iter().map(|&p| wrap_angle(p)).collect();
    let mut best = FixedPoint {
        phases: phases.clone(),
        residual: f64::INFINITY,
        iterations: 0,
    };
    for it in 0..=max_iter {
        let target = fixed_point_map(h, r, &phases, ris)?;
        let residual = phases
            .iter()
            .zip(&target)
            .map(|(&a, &b)| angle_distance(a, b))
            .fold(0.0, f64::max);
        if residual < best.residual {
            best = FixedPoint {
                phases: phases.clone(),
                residual,
                iterations: it,
            };
        }
        if residual <= tol || it == max_iter {
            break;
        }
        for (p, t) in phases.iter_mut().zip(&target) {
            *p = wrap_angle(*p + damping * wrap_angle(t - *p));
        }
    }
    Ok(best)
}

/// Artifacts of the large-array designs.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticArtifacts {
    /// f_k per RIS (BS-RIS-ZF only; empty for BS-UE-ZF).
    pub f: Vec<CVec>,
    /// Worst fixed-point residual over all RISs (0 for closed forms).
    pub fixed_point_residual: f64,
    pub iterations: usize,
}

/// Large-array BS-UE-ZF phases for every RIS, using each RIS's correlation
/// `R_k` and first UE channel.
pub fn asymptotic_phases_bs_ue_zf_all(
    chs: &ChannelSet,
    correlations: &[CMat],
    init: &PhaseConfig,
    settings: &PhaseOptSettings,
) -> Result<(PhaseConfig, AsymptoticArtifacts)> {
    let mut phases = Vec::with_capacity(chs.num_ris());
    let mut residual: f64 = 0.0;
    let mut iterations = 0;
    for (k, ues) in chs.ris_ue.iter().enumerate() {
        if ues.len() != 1 {
            return Err(Error::NotSingleUserPerRis {
                ris: k,
                count: ues.len(),
            });
        }
        let fp = asymptotic_phases_bs_ue_zf(
            &ues[0],
            &correlations[k],
            &init.phases[k],
            settings.fixed_point_tol,
            settings.fixed_point_max_iter,
            settings.damping,
            k,
        )?;
        residual = residual.max(fp.residual);
        iterations = iterations.max(fp.iterations);
        phases.push(fp.phases);
    }
    Ok((
        PhaseConfig {
            phases,
            origin: PhaseOrigin::Asymptotic,
        },
        AsymptoticArtifacts {
            f: Vec::new(),
            fixed_point_residual: residual,
            iterations,
        },
    ))
}

/// `[H_k^H Q₂^H (Q₂Q₂^H)^{-1} Γ e_k]` for every RIS.
pub fn ris_zf_brackets(chs: &ChannelSet, zf: &ZfSettings) -> Result<Vec<CVec>> {
    let pinv = bs_ris_zf_inverse(chs, zf)?;
    let gamma = build_gamma(chs.num_ris(), chs.elements(), chs.direct_users());
    let w = pinv * gamma;
    Ok(chs
        .bs_ris
        .iter()
        .enumerate()
        .map(|(k, h)| h.adjoint() * w.column(k))
        .collect())
}

/// BS-RIS-ZF closed form `φ_{k,i} = −∠(h*_{k,1,i} [H_k^H Q₂^H (Q₂Q₂^H)^{-1} Γ e_k]_i)`.
pub fn optimal_phases_bs_ris_zf(chs: &ChannelSet, zf: &ZfSettings) -> Result<PhaseConfig> {
    let brackets = ris_zf_brackets(chs, zf)?;
    let phases = brackets
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let h = &chs.ris_ue[k][0];
            (0..b.len())
                .map(|i| checked_angle(h[i].conj() * b[i], k, i).map(|a| wrap_angle(-a)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseConfig {
        phases,
        origin: PhaseOrigin::ClosedForm,
    })
}

/// Large-array BS-RIS-ZF design for RIS `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticRisZf {
    pub phases: Vec<f64>,
    pub f: CVec,
    /// Limiting SINR `(Σ_i |f_{k,i}| |h_{k,i}|)² / σ²_k`.
    pub sinr: f64,
}

fn invert_correlation(r: &CMat, ris: usize, limit: f64) -> Result<CMat> {
    let condition = hermitian_condition(r);
    if !(condition <= limit) {
        return Err(Error::SingularCorrelation { ris, condition });
    }
    r.clone()
        .try_inverse()
        .ok_or(Error::SingularCorrelation { ris, condition })
}

/// `f_k = [0 … R_k … 0] · blkdiag(R_1^{-1}, …, R_K^{-1}, I_{U_d}) · Γ e_k`
/// evaluated block by block, then the phases `−∠(h*_i f_i)` and the limiting
/// SINR. Every `R_m` must be invertible.
pub fn asymptotic_phases_and_sinr_bs_ris_zf(
    h: &CVec,
    correlations: &[CMat],
    direct_users: usize,
    k: usize,
    noise_variance: f64,
) -> Result<AsymptoticRisZf> {
    let num_ris = correlations.len();
    let n = h.len();
    if k >= num_ris
        || correlations
            .iter()
            .any(|r| r.nrows() != n || r.ncols() != n)
    {
        return Err(Error::Dimension(format!(
            "RIS index {k} of {num_ris}, N={n}"
        )));
    }
    let inverses = correlations
        .iter()
        .enumerate()
        .map(|(m, r)| invert_correlation(r, m, crate::beamform::DEFAULT_CONDITION_LIMIT))
        .collect::<Result<Vec<_>>>()?;
    let gamma = build_gamma(num_ris, n, direct_users);
    let selector = gamma.column(k).into_owned();
    // blkdiag(R^{-1}.., I) · Γ e_k
    let mut mid = CVec::zeros(n * num_ris + direct_users);
    for (m, inv) in inverses.iter().enumerate() {
        let block = inv * selector.rows(m * n, n);
        mid.rows_mut(m * n, n).copy_from(&block);
    }
    for u in 0..direct_users {
        mid[n * num_ris + u] = selector[n * num_ris + u];
    }
    // [0 … R_k … 0] picks block k
    let f = &correlations[k] * mid.rows(k * n, n);
    let phases = (0..n)
        .map(|i| checked_angle(h[i].conj() * f[i], k, i).map(|a| wrap_angle(-a)))
        .collect::<Result<Vec<_>>>()?;
    let amplitude: f64 = f
        .iter()
        .zip(h.iter())
        .map(|(a, b)| a.norm() * b.norm())
        .sum();
    Ok(AsymptoticRisZf {
        phases,
        f,
        sinr: amplitude * amplitude / noise_variance,
    })
}

/// Large-array BS-RIS-ZF phases and limiting SINRs for every RIS.
pub fn asymptotic_bs_ris_zf_all(
    chs: &ChannelSet,
    correlations: &[CMat],
    noise_blocked: &[f64],
) -> Result<(PhaseConfig, AsymptoticArtifacts, Vec<f64>)> {
    let mut phases = Vec::new();
    let mut f = Vec::new();
    let mut sinrs = Vec::new();
    for (k, ues) in chs.ris_ue.iter().enumerate() {
        if ues.len() != 1 {
            return Err(Error::NotSingleUserPerRis {
                ris: k,
                count: ues.len(),
            });
        }
        let a = asymptotic_phases_and_sinr_bs_ris_zf(
            &ues[0],
            correlations,
            chs.direct_users(),
            k,
            noise_blocked[k],
        )?;
        phases.push(a.phases);
        f.push(a.f);
        sinrs.push(a.sinr);
    }
    Ok((
        PhaseConfig {
            phases,
            origin: PhaseOrigin::Asymptotic,
        },
        AsymptoticArtifacts {
            f,
            fixed_point_residual: 0.0,
            iterations: 0,
        },
        sinrs,
    ))
}
