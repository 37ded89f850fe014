//! Correlated Rayleigh channel generation for the BS→RIS, RIS→UE and BS→UE
//! links, plus the parametric CSI-error model and a flat CSV dump format.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_sqrt, numerical_rank, CMat, CVec};
use crate::rng::rng_from_seed;
use crate::sysconfig::{default_grid_cols, ChannelModelConfig, CorrelationModel, SystemConfig};

/// Normalized sinc, `sin(πx)/(πx)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// RIS-side spatial correlation `R = scale · C`.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    /// Scale-free part C (unit diagonal for the sinc model).
    pub entries: CMat,
    /// μ·A multiplier.
    pub scale: f64,
    /// Element coordinates (m), row-major over the grid. Empty when the
    /// matrix was supplied directly.
    pub positions: Vec<[f64; 2]>,
    sqrt: CMat,
}

impl CorrelationMatrix {
    /// Wraps an arbitrary Hermitian PSD matrix.
    pub fn from_matrix(entries: CMat, scale: f64) -> Self {
        assert!(entries.is_square(), "correlation matrix must be square");
        let sqrt = hermitian_sqrt(&entries);
        CorrelationMatrix {
            entries,
            scale,
            positions: Vec::new(),
            sqrt,
        }
    }

    pub fn identity(n: usize, scale: f64) -> Self {
        let entries = CMat::identity(n, n);
        CorrelationMatrix {
            sqrt: entries.clone(),
            entries,
            scale,
            positions: Vec::new(),
        }
    }

    /// N.
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `R = scale · C`, i.e. `E{H^H H} / M`.
    pub fn scaled(&self) -> CMat {
        &self.entries * Complex64::new(self.scale, 0.0)
    }

    /// Hermitian square root of C (not of R).
    pub fn unit_sqrt(&self) -> &CMat {
        &self.sqrt
    }

    /// Numerical rank of C.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.entries, 1e-10)
    }
}

/// Element centres on a `rows × cols` grid with pitch `d`, row-major.
pub fn element_positions(n: usize, cols: usize, d: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| [(i % cols) as f64 * d, (i / cols) as f64 * d])
        .collect()
}

/// RIS correlation for `n` elements under the configured model.
pub fn build_correlation(ch: &ChannelModelConfig, n: usize) -> Result<CorrelationMatrix> {
    if n == 0 {
        return Err(Error::Dimension(
            "RIS must have at least one element".into(),
        ));
    }
    let cols = ch.grid_cols.unwrap_or_else(|| default_grid_cols(n));
    if cols == 0 || !n.is_multiple_of(cols) {
        return Err(Error::Dimension(format!(
            "N={n} is not a multiple of grid_cols={cols}"
        )));
    }
    let positions = element_positions(n, cols, ch.element_spacing);
    let scale = ch.element_gain();
    let mut corr = match ch.correlation {
        CorrelationModel::Iid => CorrelationMatrix::identity(n, scale),
        CorrelationModel::Sinc => {
            let lambda = ch.wavelength();
            let c = CMat::from_fn(n, n, |i, l| {
                let dx = positions[i][0] - positions[l][0];
                let dy = positions[i][1] - positions[l][1];
                Complex64::new(sinc(2.0 * dx.hypot(dy) / lambda), 0.0)
            });
            CorrelationMatrix::from_matrix(c, scale)
        }
    };
    corr.positions = positions;
    Ok(corr)
}

/// One realization of every channel in the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// H_k ∈ C^{M×N}, BS → RIS k.
    pub bs_ris: Vec<CMat>,
    /// h_{k,l} ∈ C^N, RIS k → its l-th blocked UE.
    pub ris_ue: Vec<Vec<CVec>>,
    /// h_{d,u} ∈ C^M, BS → direct UE u.
    pub direct: Vec<CVec>,
    pub seed: u64,
}

impl ChannelSet {
    pub fn antennas(&self) -> usize {
        self.bs_ris
            .first()
            .map(|h| h.nrows())
            .or_else(|| self.direct.first().map(|h| h.len()))
            .unwrap_or(0)
    }

    pub fn elements(&self) -> usize {
        self.bs_ris.first().map(|h| h.ncols()).unwrap_or(0)
    }

    pub fn num_ris(&self) -> usize {
        self.bs_ris.len()
    }

    pub fn blocked_per_ris(&self) -> Vec<usize> {
        self.ris_ue.iter().map(|v| v.len()).collect()
    }

    pub fn blocked_users(&self) -> usize {
        self.ris_ue.iter().map(|v| v.len()).sum()
    }

    pub fn direct_users(&self) -> usize {
        self.direct.len()
    }
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Draws channel sets for a fixed scenario.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    antennas: usize,
    blocked_per_ris: Vec<usize>,
    direct_users: usize,
    corr: Vec<CorrelationMatrix>,
    /// sqrt(scale)·C^{1/2} per RIS, right factor of H_k.
    bs_ris_factor: Vec<CMat>,
    /// sqrt(ris_ue_variance)·C^{1/2} per RIS.
    ris_ue_factor: Vec<CMat>,
    direct_std: f64,
}

impl ChannelSampler {
    pub fn new(
        cfg: &SystemConfig,
        ch: &ChannelModelConfig,
        corr: Vec<CorrelationMatrix>,
    ) -> Result<Self> {
        if corr.len() != cfg.num_ris || cfg.blocked_per_ris.len() != cfg.num_ris {
            return Err(Error::Dimension(format!(
                "{} correlation matrices / {} L entries for K={}",
                corr.len(),
                cfg.blocked_per_ris.len(),
                cfg.num_ris
            )));
        }
        if let Some(c) = corr.iter().find(|c| c.len() != cfg.elements) {
            return Err(Error::Dimension(format!(
                "correlation of size {} for N={}",
                c.len(),
                cfg.elements
            )));
        }
        let bs_ris_factor = corr
            .iter()
            .map(|c| c.unit_sqrt() * Complex64::new(c.scale.max(0.0).sqrt(), 0.0))
            .collect();
        let ris_ue_factor = corr
            .iter()
            .map(|c| c.unit_sqrt() * Complex64::new(ch.ris_ue_link_variance.sqrt(), 0.0))
            .collect();
        Ok(ChannelSampler {
            antennas: cfg.antennas,
            blocked_per_ris: cfg.blocked_per_ris.clone(),
            direct_users: cfg.direct_users,
            corr,
            bs_ris_factor,
            ris_ue_factor,
            direct_std: ch.direct_link_variance.sqrt(),
        })
    }

    /// Builds correlations from the channel config and wraps them.
    pub fn from_config(cfg: &SystemConfig, ch: &ChannelModelConfig) -> Result<Self> {
        let c = build_correlation(ch, cfg.elements)?;
        Self::new(cfg, ch, vec![c; cfg.num_ris])
    }

    pub fn correlations(&self) -> &[CorrelationMatrix] {
        &self.corr
    }

    /// Deterministic draw for `seed`. Draw order: every H_k (row-major), then
    /// every h_{k,l}, then every h_{d,u}.
    pub fn sample(&self, seed: u64) -> ChannelSet {
        let mut rng = rng_from_seed(seed);
        let m = self.antennas;
        let bs_ris = self
            .bs_ris_factor
            .iter()
            .map(|s| {
                let n = s.nrows();
                let z = CMat::from_row_iterator(m, n, (0..m * n).map(|_| complex_normal(&mut rng)));
                z * s
            })
            .collect();
        let ris_ue = self
            .ris_ue_factor
            .iter()
            .zip(&self.blocked_per_ris)
            .map(|(s, &lk)| {
                (0..lk)
                    .map(|_| {
                        let z = CVec::from_iterator(
                            s.nrows(),
                            (0..s.nrows()).map(|_| complex_normal(&mut rng)),
                        );
                        s * z
                    })
                    .collect()
            })
            .collect();
        let direct = (0..self.direct_users)
            .map(|_| {
                CVec::from_iterator(
                    m,
                    (0..m).map(|_| complex_normal(&mut rng) * self.direct_std),
                )
            })
            .collect();
        ChannelSet {
            bs_ris,
            ris_ue,
            direct,
            seed,
        }
    }

    /// Replaces every coefficient h by `√(1−τ)·h + √τ·e`, where `e` is an
    /// independent draw from the same model.
    pub fn apply_estimation_error(
        &self,
        chs: &ChannelSet,
        tau: f64,
        seed: u64,
    ) -> Result<ChannelSet> {
        if !(0.0..1.0).contains(&tau) {
            return Err(Error::range(
                "estimation_error_fraction",
                format!("tau={tau} not in [0,1)"),
            ));
        }
        if tau == 0.0 {
            return Ok(chs.clone());
        }
        let err = self.sample(seed);
        let a = Complex64::new((1.0 - tau).sqrt(), 0.0);
        let b = Complex64::new(tau.sqrt(), 0.0);
        Ok(ChannelSet {
            bs_ris: chs
                .bs_ris
                .iter()
                .zip(&err.bs_ris)
                .map(|(h, e)| h * a + e * b)
                .collect(),
            ris_ue: chs
                .ris_ue
                .iter()
                .zip(&err.ris_ue)
                .map(|(hs, es)| hs.iter().zip(es).map(|(h, e)| h * a + e * b).collect())
                .collect(),
            direct: chs
                .direct
                .iter()
                .zip(&err.direct)
                .map(|(h, e)| h * a + e * b)
                .collect(),
            seed: chs.seed,
        })
    }
}

/// Samples one channel set with explicit per-RIS correlations.
pub fn sample_channels(
    cfg: &SystemConfig,
    ch: &ChannelModelConfig,
    corr: &[CorrelationMatrix],
    seed: u64,
) -> Result<ChannelSet> {
    Ok(ChannelSampler::new(cfg, ch, corr.to_vec())?.sample(seed))
}

// ---------------------------------------------------------------------------
// dump format:
//   # M=<m>,N=<n>,K=<k>,L=<l1;l2;..>,U_d=<ud>,seed=<s>
//   re,im
//   <one complex entry per line>
// Entries: H_1..H_K row-major, then h_{k,l} (RIS-major), then h_{d,u}.

pub fn channel_dump_string(chs: &ChannelSet) -> String {
    let l: Vec<String> = chs
        .blocked_per_ris()
        .iter()
        .map(|x| x.to_string())
        .collect();
    let mut out = format!(
        "# M={},N={},K={},L={},U_d={},seed={}\nre,im\n",
        chs.antennas(),
        chs.elements(),
        chs.num_ris(),
        l.join(";"),
        chs.direct_users(),
        chs.seed
    );
    let mut put = |z: &Complex64| {
        let _ = writeln!(out, "{},{}", z.re, z.im);
    };
    for h in &chs.bs_ris {
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                put(&h[(i, j)]);
            }
        }
    }
    chs.ris_ue
        .iter()
        .flatten()
        .flat_map(|v| v.iter())
        .for_each(&mut put);
    chs.direct.iter().flat_map(|v| v.iter()).for_each(&mut put);
    out
}

pub fn write_channel_dump(chs: &ChannelSet, path: &Path) -> Result<()> {
    fs::write(path, channel_dump_string(chs)).map_err(|e| Error::io(path, e))
}

pub fn parse_channel_dump(text: &str) -> Result<ChannelSet> {
    let bad = |line: usize, msg: String| Error::Parse {
        path: "channel dump".into(),
        line,
        msg,
    };
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|h| h.strip_prefix('#'))
        .ok_or_else(|| bad(1, "missing `#` header".into()))?;
    let (mut m, mut n, mut k, mut ud, mut seed) = (None, None, None, None, None);
    let mut l: Option<Vec<usize>> = None;
    for field in header.trim().split(',') {
        let (key, val) = field
            .split_once('=')
            .ok_or_else(|| bad(1, format!("bad header field `{field}`")))?;
        let num = |v: &str| v.parse::<u64>().map_err(|e| bad(1, format!("{key}: {e}")));
        match key.trim() {
            "M" => m = Some(num(val)? as usize),
            "N" => n = Some(num(val)? as usize),
            "K" => k = Some(num(val)? as usize),
            "U_d" => ud = Some(num(val)? as usize),
            "seed" => seed = Some(num(val)?),
            "L" => {
                l = Some(if val.is_empty() {
                    Vec::new()
                } else {
                    val.split(';')
                        .map(|x| num(x).map(|v| v as usize))
                        .collect::<Result<_>>()?
                })
            }
            other => return Err(bad(1, format!("unknown header field `{other}`"))),
        }
    }
    let missing = || bad(1, "incomplete header".into());
    let (m, n, k, ud, seed, l) = (
        m.ok_or_else(missing)?,
        n.ok_or_else(missing)?,
        k.ok_or_else(missing)?,
        ud.ok_or_else(missing)?,
        seed.ok_or_else(missing)?,
        l.ok_or_else(missing)?,
    );
    if l.len() != k {
        return Err(bad(1, format!("L has {} entries for K={k}", l.len())));
    }
    if lines.next().map(str::trim) != Some("re,im") {
        return Err(bad(2, "expected `re,im` column header".into()));
    }
    let mut values = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (re, im) = line
            .split_once(',')
            .ok_or_else(|| bad(idx + 3, format!("bad entry `{line}`")))?;
        let p = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| bad(idx + 3, e.to_string()))
        };
        values.push(Complex64::new(p(re)?, p(im)?));
    }
    let ub: usize = l.iter().sum();
    let expected = k * m * n + ub * n + ud * m;
    if values.len() != expected {
        return Err(bad(
            0,
            format!("{} entries, expected {expected}", values.len()),
        ));
    }
    let mut it = values.into_iter();
    let bs_ris = (0..k)
        .map(|_| CMat::from_row_iterator(m, n, it.by_ref().take(m * n)))
        .collect();
    let ris_ue = l
        .iter()
        .map(|&lk| {
            (0..lk)
                .map(|_| CVec::from_iterator(n, it.by_ref().take(n)))
                .collect()
        })
        .collect();
    let direct = (0..ud)
        .map(|_| CVec::from_iterator(m, it.by_ref().take(m)))
        .collect();
    Ok(ChannelSet {
        bs_ris,
        ris_ue,
        direct,
        seed,
    })
}

pub fn read_channel_dump(path: &Path) -> Result<ChannelSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_channel_dump(&text)
}
