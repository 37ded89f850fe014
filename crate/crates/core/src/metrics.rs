//! SINR and rate evaluation, multiplication counts, and rank diagnostics.

use crate::beamform::{build_q1, build_q2, BeamformerSet, ZfSettings};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, CVec};
use crate::phaseopt::{ris_zf_brackets, PhaseConfig};
use crate::sysconfig::SystemConfig;

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sinrs {
    /// Per blocked UE, RIS-major.
    pub blocked: Vec<f64>,
    pub direct: Vec<f64>,
}

impl Sinrs {
    pub fn all(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocked.iter().chain(self.direct.iter()).copied()
    }
}

/// Per-trial record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub sinr_blocked: Vec<f64>,
    pub sinr_direct: Vec<f64>,
    /// log2(1+SINR) per UE, blocked then direct.
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    /// `max |Q W − target|` of the designed precoder.
    pub nulling_residual: f64,
    pub fixed_point_residual: f64,
    pub rank_q2: Option<usize>,
    pub seed: u64,
}

impl TrialResult {
    pub fn from_sinrs(sinrs: &Sinrs, seed: u64) -> Self {
        let rates: Vec<f64> = sinrs.all().map(|s| (1.0 + s).log2()).collect();
        TrialResult {
            sum_rate: rates.iter().sum(),
            rates,
            sinr_blocked: sinrs.blocked.clone(),
            sinr_direct: sinrs.direct.clone(),
            nulling_residual: 0.0,
            fixed_point_residual: 0.0,
            rank_q2: None,
            seed,
        }
    }

    pub fn sinr_min(&self) -> f64 {
        self.sinr_blocked
            .iter()
            .chain(&self.sinr_direct)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sinr_max(&self) -> f64 {
        self.sinr_blocked
            .iter()
            .chain(&self.sinr_direct)
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Desired power over interference plus noise for every UE, with the
/// beamformers exactly as given. Column `j` of `W` serves UE `j` in the
/// blocked-then-direct order.
pub fn sinr_exact(
    chs: &ChannelSet,
    phases: &PhaseConfig,
    w: &BeamformerSet,
    cfg: &SystemConfig,
) -> Result<Sinrs> {
    let q = build_q1(chs, phases)?;
    let users = q.nrows();
    if w.w.ncols() != users || w.w.nrows() != q.ncols() {
        return Err(Error::Dimension(format!(
            "beamformer is {}x{}, system has M={} and {users} UEs",
            w.w.nrows(),
            w.w.ncols(),
            q.ncols()
        )));
    }
    let noise = cfg.noise_variances();
    if noise.len() != users {
        return Err(Error::Dimension(format!(
            "{} noise variances for {users} UEs",
            noise.len()
        )));
    }
    let s = &q * &w.w;
    let sinr: Vec<f64> = (0..users)
        .map(|j| {
            let row = s.row(j);
            let desired = row[j].norm_sqr();
            let total: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            desired / ((total - desired).max(0.0) + noise[j])
        })
        .collect();
    let ub = chs.blocked_users();
    Ok(Sinrs {
        blocked: sinr[..ub].to_vec(),
        direct: sinr[ub..].to_vec(),
    })
}

/// `|Σ_i e^{jφ_i} h*_i b_i|² / σ²` for one RIS given its bracket vector `b`.
pub fn sinr_from_bracket(h: &CVec, phases: &[f64], bracket: &CVec, noise_variance: f64) -> f64 {
    let sum: num_complex::Complex64 = (0..h.len())
        .map(|i| num_complex::Complex64::from_polar(1.0, phases[i]) * h[i].conj() * bracket[i])
        .sum();
    sum.norm_sqr() / noise_variance
}

/// BS-RIS-ZF SINR of the UE behind RIS `k` in closed form.
pub fn sinr_bs_ris_zf(
    chs: &ChannelSet,
    phases: &PhaseConfig,
    k: usize,
    noise_variance: f64,
    zf: &ZfSettings,
) -> Result<f64> {
    let brackets = ris_zf_brackets(chs, zf)?;
    Ok(sinr_from_bracket(
        &chs.ris_ue[k][0],
        &phases.phases[k],
        &brackets[k],
        noise_variance,
    ))
}

/// Σ log2(1 + SINR).
pub fn sum_rate(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|s| (1.0 + s).log2()).sum()
}

/// Reading of the unexplained `d` in the BS-RIS-ZF multiplication count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DTermReading {
    /// `d` is the number of direct UEs.
    #[default]
    DirectUsers,
    /// `d` taken as a separately supplied literal value.
    Literal(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityCounts {
    pub bs_ue_zf: u128,
    pub bs_ris_zf: u128,
}

/// Multiplications needed to build the beamformers and phases of each scheme.
pub fn complexity_counts(m: u64, n: u64, k: u64, ub: u64, ud: u64) -> ComplexityCounts {
    complexity_counts_with(m, n, k, ub, ud, DTermReading::DirectUsers)
}

pub fn complexity_counts_with(
    m: u64,
    n: u64,
    k: u64,
    ub: u64,
    ud: u64,
    d: DTermReading,
) -> ComplexityCounts {
    let (m, n, k, ub, ud) = (m as u128, n as u128, k as u128, ub as u128, ud as u128);
    let d = match d {
        DTermReading::DirectUsers => ud,
        DTermReading::Literal(v) => v as u128,
    };
    let u = ub + ud;
    let bs_ue_zf = ub * (u.pow(3) + 2 * m * u.pow(2) + m * n * u + m * n * n + m * n + 1);
    let s = n * ub + ud;
    let bs_ris_zf = ub * (s.pow(3) + (2 * m + ub + k + d) * s.pow(2) + m * n * s + 1);
    ComplexityCounts {
        bs_ue_zf,
        bs_ris_zf,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankDiagnostics {
    pub rank_q2: usize,
    /// Σ_k rank(D_k) + U_d.
    pub bound: usize,
    pub holds: bool,
}

/// Numerical rank of `Q₂` against the bound from the correlation ranks.
pub fn rank_diagnostics(chs: &ChannelSet, corr_ranks: &[usize]) -> Result<RankDiagnostics> {
    if corr_ranks.len() != chs.num_ris() {
        return Err(Error::Dimension(format!(
            "{} correlation ranks for K={}",
            corr_ranks.len(),
            chs.num_ris()
        )));
    }
    let q2 = build_q2(chs)?;
    let rank_q2 = numerical_rank(&q2, RANK_TOL);
    let bound = corr_ranks.iter().sum::<usize>() + chs.direct_users();
    Ok(RankDiagnostics {
        rank_q2,
        bound,
        holds: rank_q2 <= bound,
    })
}
