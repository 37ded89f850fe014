//! Cascaded channels, the stacked channel matrices used by the two
//! zero-forcing schemes, the RIS selection matrix, and the precoders.
//!
//! Ordering convention used everywhere: blocked UEs first, RIS-major and
//! UE-minor (`(1,1), (1,2), …, (K,L_K)`), then direct UEs. Rows of `Q₁`,
//! columns of the BS-UE-ZF precoder and noise-variance lists all follow it.
//! For BS-RIS-ZF the precoder has one column per RIS followed by the direct
//! UEs.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_condition, CMat, CVec};
use crate::phaseopt::PhaseConfig;
use crate::sysconfig::{PowerMode, Scheme, SystemConfig};

/// Condition-number limit on the equilibrated Gram matrix.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e12;

/// g_{k,l} = H_k Φ_k^H h_{k,l}.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedChannel {
    pub g: CVec,
    pub ris: usize,
    pub ue: usize,
}

/// `H Φ^H h` with `Φ = diag(e^{jφ})`.
pub fn cascade(h_bs_ris: &CMat, phases: &[f64], h_ris_ue: &CVec) -> CVec {
    let scaled = CVec::from_iterator(
        phases.len(),
        phases
            .iter()
            .zip(h_ris_ue.iter())
            .map(|(&p, &h)| Complex64::from_polar(1.0, -p) * h),
    );
    h_bs_ris * scaled
}

/// Cascaded channels of every blocked UE in the fixed order.
pub fn cascaded_channels(chs: &ChannelSet, phases: &PhaseConfig) -> Result<Vec<CascadedChannel>> {
    check_phases(chs, phases)?;
    let mut out = Vec::with_capacity(chs.blocked_users());
    for (k, (h, ues)) in chs.bs_ris.iter().zip(&chs.ris_ue).enumerate() {
        for (l, hu) in ues.iter().enumerate() {
            out.push(CascadedChannel {
                g: cascade(h, &phases.phases[k], hu),
                ris: k,
                ue: l,
            });
        }
    }
    Ok(out)
}

fn check_phases(chs: &ChannelSet, phases: &PhaseConfig) -> Result<()> {
    if phases.phases.len() != chs.num_ris()
        || phases.phases.iter().any(|p| p.len() != chs.elements())
    {
        return Err(Error::Dimension(format!(
            "phase config has {} RIS vectors, channels have K={} N={}",
            phases.phases.len(),
            chs.num_ris(),
            chs.elements()
        )));
    }
    Ok(())
}

fn stack_rows(rows: &[CVec], m: usize) -> CMat {
    let mut q = CMat::zeros(rows.len(), m);
    for (i, r) in rows.iter().enumerate() {
        for (j, z) in r.iter().enumerate() {
            q[(i, j)] = z.conj();
        }
    }
    q
}

/// Q₁ ∈ C^{(U_b+U_d)×M}: rows g_{k,l}^H, then h_{d,u}^H.
pub fn build_q1(chs: &ChannelSet, phases: &PhaseConfig) -> Result<CMat> {
    let mut rows: Vec<CVec> = cascaded_channels(chs, phases)?
        .into_iter()
        .map(|c| c.g)
        .collect();
    rows.extend(chs.direct.iter().cloned());
    Ok(stack_rows(&rows, chs.antennas()))
}

/// Q₂ ∈ C^{(NK+U_d)×M}: blocks H_k^H, then rows h_{d,u}^H.
pub fn build_q2(chs: &ChannelSet) -> Result<CMat> {
    if let Some((ris, ues)) = chs.ris_ue.iter().enumerate().find(|(_, u)| u.len() != 1) {
        return Err(Error::NotSingleUserPerRis {
            ris,
            count: ues.len(),
        });
    }
    let m = chs.antennas();
    let n = chs.elements();
    let k = chs.num_ris();
    let mut q = CMat::zeros(n * k + chs.direct_users(), m);
    for (b, h) in chs.bs_ris.iter().enumerate() {
        q.view_mut((b * n, 0), (n, m)).copy_from(&h.adjoint());
    }
    for (u, hd) in chs.direct.iter().enumerate() {
        for j in 0..m {
            q[(n * k + u, j)] = hd[j].conj();
        }
    }
    Ok(q)
}

/// Γ ∈ {0,1}^{(NK+U_d)×(K+U_d)}: column k selects RIS k's N rows, the last
/// U_d columns are the identity on the last U_d rows.
pub fn build_gamma(k: usize, n: usize, ud: usize) -> CMat {
    let one = Complex64::new(1.0, 0.0);
    let mut g = CMat::zeros(n * k + ud, k + ud);
    for c in 0..k {
        for r in c * n..(c + 1) * n {
            g[(r, c)] = one;
        }
    }
    for u in 0..ud {
        g[(n * k + u, k + u)] = one;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZfSettings {
    /// Maximum condition number of the equilibrated Gram matrix.
    pub condition_limit: f64,
    /// Ridge added to the equilibrated Gram matrix (0 = exact ZF).
    pub ridge: f64,
}

impl Default for ZfSettings {
    fn default() -> Self {
        ZfSettings {
            condition_limit: DEFAULT_CONDITION_LIMIT,
            ridge: 0.0,
        }
    }
}

/// `W = Q^H (Q Q^H)^{-1}` with default settings.
pub fn zf_precoder(q: &CMat) -> Result<CMat> {
    zf_precoder_with(q, &ZfSettings::default())
}

/// Right pseudo-inverse of a full-row-rank `Q`.
///
/// The Gram matrix `G = QQ^H` is equilibrated to unit diagonal before the
/// rank test and the Cholesky solve, so rows of very different power (RIS
/// cascades against direct links) do not trip the condition check.
pub fn zf_precoder_with(q: &CMat, settings: &ZfSettings) -> Result<CMat> {
    let r = q.nrows();
    let gram = q * q.adjoint();
    let mut inv_sqrt_diag = Vec::with_capacity(r);
    for i in 0..r {
        let d = gram[(i, i)].re;
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::RankDeficient {
                condition: f64::INFINITY,
            });
        }
        inv_sqrt_diag.push(1.0 / d.sqrt());
    }
    let mut eq = CMat::from_fn(r, r, |i, j| {
        gram[(i, j)] * (inv_sqrt_diag[i] * inv_sqrt_diag[j])
    });
    // exact hermitian symmetry for the eigen/cholesky routines
    for i in 0..r {
        eq[(i, i)] = Complex64::new(eq[(i, i)].re + settings.ridge, 0.0);
        for j in 0..i {
            let avg = (eq[(i, j)] + eq[(j, i)].conj()) * 0.5;
            eq[(i, j)] = avg;
            eq[(j, i)] = avg.conj();
        }
    }
    let condition = hermitian_condition(&eq);
    if !(condition <= settings.condition_limit) {
        return Err(Error::RankDeficient { condition });
    }
    let chol = eq.cholesky().ok_or(Error::RankDeficient { condition })?;
    let d = CMat::from_diagonal(&CVec::from_iterator(
        r,
        inv_sqrt_diag.iter().map(|&x| Complex64::new(x, 0.0)),
    ));
    // (QQ^H)^{-1} = D^{-1/2} G_eq^{-1} D^{-1/2}
    let inner = chol.solve(&d);
    Ok(q.adjoint() * (&d * inner))
}

/// `max |Q W − target|`.
pub fn nulling_residual(q: &CMat, w: &CMat, target: &CMat) -> f64 {
    (q * w - target)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Precoder columns plus the scheme that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    /// M × (U_b+U_d) for BS-UE-ZF, M × (K+U_d) for BS-RIS-ZF.
    pub w: CMat,
    pub scheme: Scheme,
    /// β applied by [`apply_power_mode`]; 1 when unscaled.
    pub scaling: f64,
}

/// BS-UE-ZF precoder for the given phases.
pub fn bs_ue_zf(
    chs: &ChannelSet,
    phases: &PhaseConfig,
    settings: &ZfSettings,
) -> Result<BeamformerSet> {
    let q1 = build_q1(chs, phases)?;
    Ok(BeamformerSet {
        w: zf_precoder_with(&q1, settings)?,
        scheme: Scheme::BsUeZf,
        scaling: 1.0,
    })
}

/// `Q₂^H (Q₂Q₂^H)^{-1}`, the factor of the BS-RIS-ZF precoder before Γ.
pub fn bs_ris_zf_inverse(chs: &ChannelSet, settings: &ZfSettings) -> Result<CMat> {
    zf_precoder_with(&build_q2(chs)?, settings)
}

/// BS-RIS-ZF precoder `Q₂^H (Q₂Q₂^H)^{-1} Γ`; independent of the phases.
pub fn bs_ris_zf(chs: &ChannelSet, settings: &ZfSettings) -> Result<BeamformerSet> {
    let pinv = bs_ris_zf_inverse(chs, settings)?;
    let gamma = build_gamma(chs.num_ris(), chs.elements(), chs.direct_users());
    Ok(BeamformerSet {
        w: pinv * gamma,
        scheme: Scheme::BsRisZf,
        scaling: 1.0,
    })
}

/// Power scaling β for the configured mode: 1 when literal,
/// `√(P / ‖W‖_F²)` when sum-power normalized.
pub fn power_scaling(w: &CMat, cfg: &SystemConfig) -> Result<f64> {
    match cfg.power_mode {
        PowerMode::PaperLiteral => Ok(1.0),
        PowerMode::SumPowerNormalized => {
            let f2 = w.norm_squared();
            if !(f2 > 0.0) {
                return Err(Error::ZeroPower);
            }
            Ok((cfg.total_power / f2).sqrt())
        }
    }
}

pub fn apply_power_mode(mut w: BeamformerSet, cfg: &SystemConfig) -> Result<BeamformerSet> {
    let beta = power_scaling(&w.w, cfg)?;
    if beta != 1.0 {
        w.w *= Complex64::new(beta, 0.0);
    }
    w.scaling *= beta;
    Ok(w)
}
