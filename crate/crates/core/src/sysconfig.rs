//! Scenario configuration: dimensions, powers, noise, channel-model
//! parameters, and the flat `key = value` file format they load from.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::RunConfig;
use crate::phaseopt::{PhaseOptSettings, PhaseRule};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const DEFAULT_NOISE_PSD_DBM_HZ: f64 = -174.0;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 10e6;
pub const DEFAULT_CARRIER_HZ: f64 = 1.8e9;
pub const DEFAULT_MU_LAMBDA2_DB: f64 = -75.0;
/// 60 dBm. With two hops at μλ² = −75 dB this puts the cascaded links at a
/// moderate SNR for M in the tens to hundreds.
pub const DEFAULT_TOTAL_POWER_W: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    BsUeZf,
    BsRisZf,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::BsUeZf, Scheme::BsRisZf];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::BsUeZf => "bs_ue_zf",
            Scheme::BsRisZf => "bs_ris_zf",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "bs_ue_zf" => Ok(Scheme::BsUeZf),
            "bs_ris_zf" => Ok(Scheme::BsRisZf),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMode {
    /// Beamformers used exactly as the ZF formulas produce them.
    PaperLiteral,
    /// Beamformers scaled to meet the total power budget.
    SumPowerNormalized,
}

impl PowerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PowerMode::PaperLiteral => "paper_literal",
            PowerMode::SumPowerNormalized => "sum_power_normalized",
        }
    }
}

impl FromStr for PowerMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "paper_literal" => Ok(PowerMode::PaperLiteral),
            "sum_power_normalized" => Ok(PowerMode::SumPowerNormalized),
            other => Err(format!("unknown power mode `{other}`")),
        }
    }
}

/// RIS-side spatial correlation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationModel {
    /// sinc(2‖u_i − u_l‖/λ) over the element grid.
    Sinc,
    /// Identity correlation, independent elements.
    Iid,
}

impl CorrelationModel {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationModel::Sinc => "sinc",
            CorrelationModel::Iid => "iid",
        }
    }
}

impl FromStr for CorrelationModel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "sinc" => Ok(CorrelationModel::Sinc),
            "iid" => Ok(CorrelationModel::Iid),
            other => Err(format!("unknown correlation model `{other}`")),
        }
    }
}

/// Scenario dimensions, powers and noise levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// BS antennas (M).
    pub antennas: usize,
    /// Elements per RIS (N).
    pub elements: usize,
    /// Number of RISs (K).
    pub num_ris: usize,
    /// Blocked UEs served by each RIS (L_k).
    pub blocked_per_ris: Vec<usize>,
    /// Directly served UEs (U_d).
    pub direct_users: usize,
    /// Noise variance (W) per blocked UE, RIS-major order.
    pub noise_variance_blocked: Vec<f64>,
    /// Noise variance (W) per direct UE.
    pub noise_variance_direct: Vec<f64>,
    /// Transmit power budget (W); only used in sum-power-normalized mode.
    pub total_power: f64,
    pub power_mode: PowerMode,
    /// Bandwidth (Hz) used to turn a noise PSD into a variance.
    pub bandwidth: f64,
}

impl SystemConfig {
    /// U_b = Σ L_k.
    pub fn blocked_users(&self) -> usize {
        self.blocked_per_ris.iter().sum()
    }

    pub fn total_users(&self) -> usize {
        self.blocked_users() + self.direct_users
    }

    /// `(k, l)` pairs of blocked UEs in RIS-major, UE-minor order.
    pub fn blocked_index(&self) -> Vec<(usize, usize)> {
        self.blocked_per_ris
            .iter()
            .enumerate()
            .flat_map(|(k, &lk)| (0..lk).map(move |l| (k, l)))
            .collect()
    }

    /// Noise variances in beamformer column order: blocked UEs, then direct.
    pub fn noise_variances(&self) -> Vec<f64> {
        self.noise_variance_blocked
            .iter()
            .chain(self.noise_variance_direct.iter())
            .copied()
            .collect()
    }

    pub fn single_user_per_ris(&self) -> bool {
        self.blocked_per_ris.iter().all(|&l| l == 1)
    }

    /// Copy with different M and N, noise lists untouched.
    pub fn with_dimensions(&self, antennas: usize, elements: usize) -> Self {
        SystemConfig {
            antennas,
            elements,
            ..self.clone()
        }
    }
}

/// Parameters of the channel model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModelConfig {
    /// Carrier frequency (Hz).
    pub carrier_frequency: f64,
    /// RIS element pitch d (m).
    pub element_spacing: f64,
    /// RIS element area A (m²).
    pub element_area: f64,
    /// μλ² in dB.
    pub attenuation_mu_lambda2_db: f64,
    /// RIS grid width; `None` picks the largest divisor of N not above √N.
    pub grid_cols: Option<usize>,
    pub correlation: CorrelationModel,
    /// Per-coefficient variance of BS→direct-UE channels.
    pub direct_link_variance: f64,
    /// Per-coefficient variance scale of RIS→UE channels.
    pub ris_ue_link_variance: f64,
    /// τ: fraction of channel energy replaced by estimation error.
    pub estimation_error_fraction: f64,
}

impl ChannelModelConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// Average intensity attenuation μ recovered from μλ².
    pub fn mu(&self) -> f64 {
        let l = self.wavelength();
        db_to_linear(self.attenuation_mu_lambda2_db) / (l * l)
    }

    /// μ·A, the scale of the BS→RIS correlation.
    pub fn element_gain(&self) -> f64 {
        self.mu() * self.element_area
    }
}

impl Default for ChannelModelConfig {
    fn default() -> Self {
        let lambda = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ;
        let d = lambda / 4.0;
        let mut ch = ChannelModelConfig {
            carrier_frequency: DEFAULT_CARRIER_HZ,
            element_spacing: d,
            element_area: d * d,
            attenuation_mu_lambda2_db: DEFAULT_MU_LAMBDA2_DB,
            grid_cols: None,
            correlation: CorrelationModel::Sinc,
            direct_link_variance: 1.0,
            ris_ue_link_variance: 0.0,
            estimation_error_fraction: 0.0,
        };
        ch.ris_ue_link_variance = ch.element_gain();
        ch
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Noise variance (W) from a PSD in dBm/Hz over `bandwidth` Hz.
pub fn noise_variance_from_psd(psd_dbm_hz: f64, bandwidth: f64) -> f64 {
    db_to_linear(psd_dbm_hz - 30.0) * bandwidth
}

/// Largest divisor of `n` not exceeding √n.
pub fn default_grid_cols(n: usize) -> usize {
    let mut c = (n as f64).sqrt().floor() as usize;
    while c > 1 && !n.is_multiple_of(c) {
        c -= 1;
    }
    c.max(1)
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Scheme this check gates, if it is a feasibility condition.
    pub blocks: Option<Scheme>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub scheme: Scheme,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One-line reason listing every failed check.
    pub fn reason(&self) -> String {
        self.failures()
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "ok  " } else { "FAIL" };
            write!(f, "{tag} {:<24} {}", c.name, c.detail)?;
            if let (false, Some(s)) = (c.passed, c.blocks) {
                write!(f, " [blocks {s}]")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Checks every scenario invariant plus the feasibility condition of `scheme`.
pub fn validate_config(
    cfg: &SystemConfig,
    ch: &ChannelModelConfig,
    scheme: Scheme,
) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name, passed, detail: String, blocks| {
        checks.push(Check {
            name,
            passed,
            detail,
            blocks,
        })
    };

    let k = cfg.num_ris;
    let ub = cfg.blocked_users();
    let ud = cfg.direct_users;
    let m = cfg.antennas;
    let n = cfg.elements;

    push(
        "dimensions_positive",
        m >= 1 && n >= 1 && k >= 1,
        format!("M={m}, N={n}, K={k}"),
        None,
    );
    push(
        "blocked_list_length",
        cfg.blocked_per_ris.len() == k,
        format!("len(L)={} vs K={k}", cfg.blocked_per_ris.len()),
        None,
    );
    push(
        "blocked_users_per_ris",
        cfg.blocked_per_ris.iter().all(|&l| l >= 1),
        format!("L={:?}", cfg.blocked_per_ris),
        None,
    );
    push(
        "blocked_at_least_ris",
        ub >= k && k >= 1,
        format!("U_b={ub} >= K={k} >= 1"),
        None,
    );
    push(
        "noise_list_lengths",
        cfg.noise_variance_blocked.len() == ub && cfg.noise_variance_direct.len() == ud,
        format!(
            "{} blocked / {} direct variances for U_b={ub}, U_d={ud}",
            cfg.noise_variance_blocked.len(),
            cfg.noise_variance_direct.len()
        ),
        None,
    );
    let positive = |x: &f64| x.is_finite() && *x > 0.0;
    push(
        "variances_positive",
        cfg.noise_variance_blocked.iter().all(positive)
            && cfg.noise_variance_direct.iter().all(positive)
            && positive(&ch.direct_link_variance)
            && positive(&ch.ris_ue_link_variance),
        "noise and link variances must be > 0".into(),
        None,
    );
    push(
        "power_and_bandwidth",
        positive(&cfg.total_power) && positive(&cfg.bandwidth),
        format!("P={}, B={}", cfg.total_power, cfg.bandwidth),
        None,
    );
    push(
        "channel_geometry",
        positive(&ch.carrier_frequency)
            && positive(&ch.element_spacing)
            && positive(&ch.element_area),
        format!(
            "f={}, d={}, A={}",
            ch.carrier_frequency, ch.element_spacing, ch.element_area
        ),
        None,
    );
    let cols_ok = match ch.grid_cols {
        Some(c) => c >= 1 && n.is_multiple_of(c),
        None => true,
    };
    push(
        "grid_cols_divides_n",
        cols_ok,
        format!("grid_cols={:?}, N={n}", ch.grid_cols),
        None,
    );
    let tau = ch.estimation_error_fraction;
    push(
        "estimation_error_range",
        (0.0..1.0).contains(&tau),
        format!("tau={tau} in [0,1)"),
        None,
    );

    match scheme {
        Scheme::BsUeZf => push(
            "bs_ue_zf_feasible",
            m >= ub + ud,
            format!("requires M >= U_b + U_d = {} (M={m})", ub + ud),
            Some(Scheme::BsUeZf),
        ),
        Scheme::BsRisZf => {
            push(
                "bs_ris_zf_single_user",
                cfg.single_user_per_ris(),
                format!("requires L_k = 1 for all k (L={:?})", cfg.blocked_per_ris),
                Some(Scheme::BsRisZf),
            );
            push(
                "bs_ris_zf_feasible",
                m > n * k + ud,
                format!("requires M > N*K + U_d = {} (M={m})", n * k + ud),
                Some(Scheme::BsRisZf),
            );
        }
    }

    ValidationReport { scheme, checks }
}

// ---------------------------------------------------------------------------
// key = value file format

/// Every key the config file accepts, with a short description.
pub const KEYS: &[(&str, &str)] = &[
    ("antennas", "BS antennas M"),
    ("ris_elements", "elements per RIS N"),
    ("num_ris", "number of RISs K"),
    (
        "blocked_per_ris",
        "L_k list (a single value is repeated K times)",
    ),
    ("direct_users", "direct UEs U_d"),
    ("noise_psd_dbm_hz", "noise PSD (dBm/Hz)"),
    ("bandwidth", "bandwidth (Hz)"),
    (
        "noise_variance",
        "noise variance (W) for every UE, overrides the PSD",
    ),
    (
        "noise_variance_blocked",
        "per-blocked-UE noise variance list (W)",
    ),
    (
        "noise_variance_direct",
        "per-direct-UE noise variance list (W)",
    ),
    ("total_power", "transmit power budget P (W)"),
    ("power_mode", "paper_literal | sum_power_normalized"),
    ("carrier_frequency", "carrier frequency (Hz)"),
    (
        "element_spacing",
        "RIS pitch d: metres, `lambda` or `lambda/<x>`",
    ),
    ("element_area", "element area A (m^2), default d^2"),
    ("mu_lambda2_db", "mu*lambda^2 (dB)"),
    ("grid_cols", "RIS grid width"),
    ("correlation", "sinc | iid"),
    ("direct_link_variance", "BS->direct UE coefficient variance"),
    (
        "ris_ue_link_variance",
        "RIS->UE coefficient variance, default mu*A",
    ),
    ("estimation_error_fraction", "CSI error tau in [0,1)"),
    ("sweep_m", "list of M values"),
    ("sweep_n", "list of N values"),
    ("schemes", "subset of bs_ue_zf,bs_ris_zf"),
    ("phase_rules", "subset of optimal,asymptotic,random"),
    ("trials", "Monte Carlo trials per grid point"),
    ("master_seed", "master RNG seed"),
    ("csi_tau", "list of CSI error fractions"),
    ("output_dir", "output directory"),
    ("threads", "worker threads (0 = all cores)"),
    (
        "outer_iters",
        "max alternating iterations for BS-UE-ZF optimal phases",
    ),
    ("outer_tol", "alternating-iteration phase tolerance (rad)"),
    ("fixed_point_tol", "asymptotic fixed-point tolerance (rad)"),
    (
        "fixed_point_max_iter",
        "asymptotic fixed-point iteration cap",
    ),
    ("damping", "asymptotic fixed-point damping in (0,1]"),
    (
        "ridge",
        "opt-in ridge added to the equilibrated Gram matrix (0 = off)",
    ),
];

/// Raw `key -> (value, line)` map. Overrides carry line 0.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    source: String,
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut raw = RawConfig {
            source: source.to_string(),
            entries: BTreeMap::new(),
        };
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
                path: source.to_string(),
                line: lineno,
                msg: format!("expected `key = value`, got `{body}`"),
            })?;
            raw.insert(key.trim(), value.trim(), lineno)?;
        }
        Ok(raw)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn insert(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::UnknownKey {
                key: key.to_string(),
                line,
            });
        }
        self.entries
            .insert(key.to_string(), (value.to_string(), line));
        Ok(())
    }

    /// Applies a `key=value` override (e.g. from `--set`).
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| Error::Parse {
            path: "--set".into(),
            line: 0,
            msg: format!("expected key=value, got `{assignment}`"),
        })?;
        self.insert(k.trim(), v.trim(), 0)
    }

    fn get(&self, key: &str) -> Option<&(String, usize)> {
        self.entries.get(key)
    }

    fn bad(&self, key: &str, line: usize, msg: impl fmt::Display) -> Error {
        Error::Parse {
            path: self.source.clone(),
            line,
            msg: format!("`{key}`: {msg}"),
        }
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| self.bad(key, *line, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => {
                if v.trim().is_empty() {
                    return Ok(Some(Vec::new()));
                }
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<T>()
                            .map_err(|e| self.bad(key, *line, format!("cannot parse `{s}`: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(Some)
            }
        }
    }

    /// Builds fully populated configs, applying defaults for omitted keys.
    pub fn build(&self) -> Result<(SystemConfig, ChannelModelConfig, RunConfig)> {
        let pos = |key: &str, v: usize| -> Result<usize> {
            if v == 0 {
                Err(Error::range(key, "must be a positive integer"))
            } else {
                Ok(v)
            }
        };
        let pos_f = |key: &str, v: f64| -> Result<f64> {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(Error::range(key, format!("must be > 0, got {v}")))
            }
        };

        let antennas = pos("antennas", self.parsed("antennas")?.unwrap_or(64))?;
        let elements = pos("ris_elements", self.parsed("ris_elements")?.unwrap_or(4))?;
        let num_ris = pos("num_ris", self.parsed("num_ris")?.unwrap_or(4))?;
        let mut blocked: Vec<usize> = self.list("blocked_per_ris")?.unwrap_or_else(|| vec![1]);
        if blocked.len() == 1 && num_ris > 1 {
            blocked = vec![blocked[0]; num_ris];
        }
        if blocked.len() != num_ris {
            return Err(Error::range(
                "blocked_per_ris",
                format!("{} entries for num_ris={num_ris}", blocked.len()),
            ));
        }
        if blocked.contains(&0) {
            return Err(Error::range("blocked_per_ris", "every L_k must be >= 1"));
        }
        let direct_users: usize = self.parsed("direct_users")?.unwrap_or(2);
        let ub: usize = blocked.iter().sum();

        let bandwidth = pos_f(
            "bandwidth",
            self.parsed("bandwidth")?.unwrap_or(DEFAULT_BANDWIDTH_HZ),
        )?;
        let psd: f64 = self
            .parsed("noise_psd_dbm_hz")?
            .unwrap_or(DEFAULT_NOISE_PSD_DBM_HZ);
        let scalar = match self.parsed::<f64>("noise_variance")? {
            Some(v) => pos_f("noise_variance", v)?,
            None => noise_variance_from_psd(psd, bandwidth),
        };
        let noise_list = |key: &str, count: usize| -> Result<Vec<f64>> {
            match self.list::<f64>(key)? {
                None => Ok(vec![scalar; count]),
                Some(v) if v.len() == 1 && count > 1 => Ok(vec![pos_f(key, v[0])?; count]),
                Some(v) if v.len() == count => v.into_iter().map(|x| pos_f(key, x)).collect(),
                Some(v) => Err(Error::range(
                    key,
                    format!("{} entries, expected {count}", v.len()),
                )),
            }
        };
        let noise_variance_blocked = noise_list("noise_variance_blocked", ub)?;
        let noise_variance_direct = noise_list("noise_variance_direct", direct_users)?;

        let sys = SystemConfig {
            antennas,
            elements,
            num_ris,
            blocked_per_ris: blocked,
            direct_users,
            noise_variance_blocked,
            noise_variance_direct,
            total_power: pos_f(
                "total_power",
                self.parsed("total_power")?.unwrap_or(DEFAULT_TOTAL_POWER_W),
            )?,
            power_mode: self
                .parsed("power_mode")?
                .unwrap_or(PowerMode::PaperLiteral),
            bandwidth,
        };

        let carrier_frequency = pos_f(
            "carrier_frequency",
            self.parsed("carrier_frequency")?
                .unwrap_or(DEFAULT_CARRIER_HZ),
        )?;
        let lambda = SPEED_OF_LIGHT / carrier_frequency;
        let element_spacing = match self.get("element_spacing") {
            None => lambda / 4.0,
            Some((v, line)) => pos_f(
                "element_spacing",
                parse_spacing(v, lambda).map_err(|e| self.bad("element_spacing", *line, e))?,
            )?,
        };
        let element_area = pos_f(
            "element_area",
            self.parsed("element_area")?
                .unwrap_or(element_spacing * element_spacing),
        )?;
        let mut ch = ChannelModelConfig {
            carrier_frequency,
            element_spacing,
            element_area,
            attenuation_mu_lambda2_db: self
                .parsed("mu_lambda2_db")?
                .unwrap_or(DEFAULT_MU_LAMBDA2_DB),
            grid_cols: self.parsed("grid_cols")?,
            correlation: self
                .parsed("correlation")?
                .unwrap_or(CorrelationModel::Sinc),
            direct_link_variance: pos_f(
                "direct_link_variance",
                self.parsed("direct_link_variance")?.unwrap_or(1.0),
            )?,
            ris_ue_link_variance: 0.0,
            estimation_error_fraction: self.parsed("estimation_error_fraction")?.unwrap_or(0.0),
        };
        ch.ris_ue_link_variance = pos_f(
            "ris_ue_link_variance",
            self.parsed("ris_ue_link_variance")?
                .unwrap_or_else(|| ch.element_gain()),
        )?;
        if let Some(0) = ch.grid_cols {
            return Err(Error::range("grid_cols", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&ch.estimation_error_fraction) {
            return Err(Error::range(
                "estimation_error_fraction",
                "must lie in [0, 1)",
            ));
        }

        let defaults = RunConfig::default();
        let d_opt = defaults.phase_opt;
        let phase_opt = PhaseOptSettings {
            outer_iters: self.parsed("outer_iters")?.unwrap_or(d_opt.outer_iters),
            outer_tol: self.parsed("outer_tol")?.unwrap_or(d_opt.outer_tol),
            fixed_point_tol: self
                .parsed("fixed_point_tol")?
                .unwrap_or(d_opt.fixed_point_tol),
            fixed_point_max_iter: self
                .parsed("fixed_point_max_iter")?
                .unwrap_or(d_opt.fixed_point_max_iter),
            damping: self.parsed("damping")?.unwrap_or(d_opt.damping),
        };
        if !(phase_opt.damping > 0.0 && phase_opt.damping <= 1.0) {
            return Err(Error::range("damping", "must lie in (0, 1]"));
        }
        let csi_tau: Vec<f64> = self
            .list("csi_tau")?
            .unwrap_or_else(|| vec![ch.estimation_error_fraction]);
        if csi_tau.iter().any(|t| !(0.0..1.0).contains(t)) {
            return Err(Error::range("csi_tau", "every value must lie in [0, 1)"));
        }
        let ridge: f64 = self.parsed("ridge")?.unwrap_or(0.0);
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::range("ridge", "must be >= 0"));
        }
        let run = RunConfig {
            sweep_m: self.list("sweep_m")?.unwrap_or(defaults.sweep_m),
            sweep_n: self.list("sweep_n")?.unwrap_or(defaults.sweep_n),
            schemes: self.list::<Scheme>("schemes")?.unwrap_or(defaults.schemes),
            phase_rules: self
                .list::<PhaseRule>("phase_rules")?
                .unwrap_or(defaults.phase_rules),
            trials: pos("trials", self.parsed("trials")?.unwrap_or(defaults.trials))?,
            master_seed: self.parsed("master_seed")?.unwrap_or(defaults.master_seed),
            csi_tau,
            output_dir: self
                .parsed::<String>("output_dir")?
                .map(PathBuf::from)
                .unwrap_or(defaults.output_dir),
            threads: self.parsed("threads")?.unwrap_or(defaults.threads),
            phase_opt,
            ridge,
        };
        if run.sweep_m.contains(&0) || run.sweep_n.contains(&0) {
            return Err(Error::range("sweep_m/sweep_n", "values must be positive"));
        }
        Ok((sys, ch, run))
    }
}

fn parse_spacing(v: &str, lambda: f64) -> std::result::Result<f64, String> {
    let v = v.trim();
    if let Some(rest) = v.strip_prefix("lambda") {
        let rest = rest.trim();
        if rest.is_empty() {
            return Ok(lambda);
        }
        if let Some(div) = rest.strip_prefix('/') {
            let x: f64 = div.trim().parse().map_err(|e| format!("{e}"))?;
            return Ok(lambda / x);
        }
        return Err(format!("cannot parse spacing `{v}`"));
    }
    v.parse::<f64>().map_err(|e| format!("{e}"))
}

/// Loads the three configs from a key=value file.
pub fn load_config(path: &Path) -> Result<(SystemConfig, ChannelModelConfig, RunConfig)> {
    RawConfig::from_path(path)?.build()
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Serializes the configs back to the key=value format. Every field is
/// written explicitly so a reload reproduces identical values.
pub fn to_config_string(sys: &SystemConfig, ch: &ChannelModelConfig, run: &RunConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("antennas", sys.antennas.to_string());
    kv("ris_elements", sys.elements.to_string());
    kv("num_ris", sys.num_ris.to_string());
    kv("blocked_per_ris", join(&sys.blocked_per_ris));
    kv("direct_users", sys.direct_users.to_string());
    kv("bandwidth", sys.bandwidth.to_string());
    kv("noise_variance_blocked", join(&sys.noise_variance_blocked));
    kv("noise_variance_direct", join(&sys.noise_variance_direct));
    kv("total_power", sys.total_power.to_string());
    kv("power_mode", sys.power_mode.as_str().into());
    kv("carrier_frequency", ch.carrier_frequency.to_string());
    kv("element_spacing", ch.element_spacing.to_string());
    kv("element_area", ch.element_area.to_string());
    kv("mu_lambda2_db", ch.attenuation_mu_lambda2_db.to_string());
    if let Some(c) = ch.grid_cols {
        kv("grid_cols", c.to_string());
    }
    kv("correlation", ch.correlation.as_str().into());
    kv("direct_link_variance", ch.direct_link_variance.to_string());
    kv("ris_ue_link_variance", ch.ris_ue_link_variance.to_string());
    kv(
        "estimation_error_fraction",
        ch.estimation_error_fraction.to_string(),
    );
    kv("sweep_m", join(&run.sweep_m));
    kv("sweep_n", join(&run.sweep_n));
    kv("schemes", join(&run.schemes));
    kv("phase_rules", join(&run.phase_rules));
    kv("trials", run.trials.to_string());
    kv("master_seed", run.master_seed.to_string());
    kv("csi_tau", join(&run.csi_tau));
    kv("output_dir", run.output_dir.display().to_string());
    kv("threads", run.threads.to_string());
    kv("outer_iters", run.phase_opt.outer_iters.to_string());
    kv("outer_tol", run.phase_opt.outer_tol.to_string());
    kv("fixed_point_tol", run.phase_opt.fixed_point_tol.to_string());
    kv(
        "fixed_point_max_iter",
        run.phase_opt.fixed_point_max_iter.to_string(),
    );
    kv("damping", run.phase_opt.damping.to_string());
    kv("ridge", run.ridge.to_string());
    out
}
