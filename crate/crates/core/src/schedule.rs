//! Probe-based UE scheduling and RIS assignment.
//!
//! The BS broadcasts once with every RIS off and once per RIS with only that
//! RIS on (reflection Φ = I). UEs are ranked by their best received power,
//! filtered by a minimum power, truncated to `U_max`, and assigned to the
//! probe state that gave them that power.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::rng::rng_from_seed;

/// Channels of every candidate UE. Missing links are zero vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateChannels {
    /// H_k, BS → RIS k.
    pub bs_ris: Vec<CMat>,
    /// `ris_ue[k][u]`: RIS k → candidate u.
    pub ris_ue: Vec<Vec<CVec>>,
    /// `direct[u]`: BS → candidate u (zero for blocked candidates).
    pub direct: Vec<CVec>,
}

impl CandidateChannels {
    pub fn num_ues(&self) -> usize {
        self.direct.len()
    }

    /// Random pool: `blocked` UEs with no direct path followed by `direct`
    /// UEs; every UE has a link to every RIS.
    #[allow(clippy::too_many_arguments)]
    pub fn sample(
        antennas: usize,
        elements: usize,
        num_ris: usize,
        blocked: usize,
        direct: usize,
        bs_ris_variance: f64,
        ris_ue_variance: f64,
        direct_variance: f64,
        seed: u64,
    ) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut cn = |var: f64| {
            let s = (var / 2.0).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        };
        let u = blocked + direct;
        let bs_ris = (0..num_ris)
            .map(|_| CMat::from_fn(antennas, elements, |_, _| cn(bs_ris_variance)))
            .collect();
        let ris_ue = (0..num_ris)
            .map(|_| {
                (0..u)
                    .map(|_| CVec::from_fn(elements, |_, _| cn(ris_ue_variance)))
                    .collect()
            })
            .collect();
        let direct = (0..u)
            .map(|i| {
                if i < blocked {
                    CVec::zeros(antennas)
                } else {
                    CVec::from_fn(antennas, |_, _| cn(direct_variance))
                }
            })
            .collect();
        CandidateChannels {
            bs_ris,
            ris_ue,
            direct,
        }
    }
}

/// Received probe power per state (row 0: all RISs off; row k: RIS k on)
/// and UE (column).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTable {
    pub powers: DMatrix<f64>,
}

impl ProbeTable {
    pub fn new(powers: DMatrix<f64>) -> Result<Self> {
        if powers.nrows() == 0 || powers.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Dimension(
                "probe table needs at least one state and nonnegative powers".into(),
            ));
        }
        Ok(ProbeTable { powers })
    }

    pub fn num_ris(&self) -> usize {
        self.powers.nrows() - 1
    }

    pub fn num_ues(&self) -> usize {
        self.powers.ncols()
    }

    /// Best state for `ue` and its power; ties go to the lowest RIS index,
    /// and the all-off state only wins strictly.
    pub fn best_state(&self, ue: usize) -> (usize, f64) {
        let mut best = (0, self.powers[(0, ue)]);
        let mut ris_best: Option<(usize, f64)> = None;
        for s in 1..self.powers.nrows() {
            let p = self.powers[(s, ue)];
            if ris_best.is_none_or(|(_, b)| p > b) {
                ris_best = Some((s, p));
            }
        }
        if let Some((s, p)) = ris_best {
            if p >= best.1 {
                best = (s, p);
            }
        }
        best
    }

    /// CSV with header `ue_id,state_0,..,state_K`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ue_id");
        for s in 0..self.powers.nrows() {
            let _ = write!(out, ",state_{s}");
        }
        out.push('\n');
        for u in 0..self.num_ues() {
            let _ = write!(out, "{u}");
            for s in 0..self.powers.nrows() {
                let _ = write!(out, ",{}", self.powers[(s, u)]);
            }
            out.push('\n');
        }
        out
    }
}

/// Isotropic unit-power broadcast probes with Φ = I:
/// row 0 is `‖h_d‖²/M`, row k is `‖h_d + H_k h_{k,u}‖²/M`.
pub fn probe_powers(c: &CandidateChannels) -> Result<ProbeTable> {
    let u = c.num_ues();
    let k = c.bs_ris.len();
    if c.ris_ue.len() != k || c.ris_ue.iter().any(|v| v.len() != u) {
        return Err(Error::Dimension(format!(
            "candidate channels: K={k}, U={u}, ris_ue shape mismatch"
        )));
    }
    let m = c.direct.first().map(|h| h.len()).unwrap_or(0);
    let mf = m.max(1) as f64;
    let mut powers = DMatrix::zeros(k + 1, u);
    for ue in 0..u {
        powers[(0, ue)] = c.direct[ue].norm_squared() / mf;
        for ris in 0..k {
            let total = &c.direct[ue] + &c.bs_ris[ris] * &c.ris_ue[ris][ue];
            powers[(ris + 1, ue)] = total.norm_squared() / mf;
        }
    }
    ProbeTable::new(powers)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    /// Maximum number of scheduled UEs.
    pub u_max: usize,
    /// Minimum best-state receive power (W).
    pub p_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Assignment {
    Direct,
    /// 0-based RIS index.
    Ris(usize),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScheduleOutcome {
    /// Scheduled UE ids in rank order.
    pub scheduled: Vec<usize>,
    pub assignment: BTreeMap<usize, Assignment>,
}

/// Ranks UEs by best probe power (ties by lower id), keeps those at or
/// above `p_min`, takes the first `U_max`.
pub fn schedule(t: &ProbeTable, p: &ScheduleParams) -> ScheduleOutcome {
    let mut ranked: Vec<(usize, usize, f64)> = (0..t.num_ues())
        .map(|u| {
            let (s, pw) = t.best_state(u);
            (u, s, pw)
        })
        .filter(|&(_, _, pw)| pw >= p.p_min)
        .collect();
    ranked.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    ranked.truncate(p.u_max);
    let mut out = ScheduleOutcome::default();
    for (u, s, _) in ranked {
        out.scheduled.push(u);
        out.assignment.insert(
            u,
            if s == 0 {
                Assignment::Direct
            } else {
                Assignment::Ris(s - 1)
            },
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[f64]]) -> ProbeTable {
        let r = rows.len();
        let c = rows[0].len();
        ProbeTable::new(DMatrix::from_fn(r, c, |i, j| rows[i][j])).unwrap()
    }

    #[test]
    fn ranking_trace() {
        // states: off, RIS1, RIS2; UEs 0,1,2
        let t = table(&[&[0.1, 0.2, 0.9], &[0.2, 0.3, 0.1], &[0.6, 0.1, 0.4]]);
        let out = schedule(
            &t,
            &ScheduleParams {
                u_max: 2,
                p_min: 0.5,
            },
        );
        assert_eq!(out.scheduled, vec![2, 0]);
        assert_eq!(out.assignment[&2], Assignment::Direct);
        assert_eq!(out.assignment[&0], Assignment::Ris(1));
    }

    #[test]
    fn threshold_above_everything() {
        let t = table(&[&[0.1, 0.2], &[0.3, 0.4]]);
        let out = schedule(
            &t,
            &ScheduleParams {
                u_max: 5,
                p_min: 1.0,
            },
        );
        assert!(out.scheduled.is_empty());
        assert!(out.assignment.is_empty());
    }

    #[test]
    fn nothing_binds() {
        let t = table(&[&[0.0, 0.2, 0.0], &[0.3, 0.0, 0.0]]);
        let out = schedule(
            &t,
            &ScheduleParams {
                u_max: 3,
                p_min: 0.0,
            },
        );
        assert_eq!(out.scheduled.len(), 3);
    }

    #[test]
    fn ties_prefer_lowest_ris_then_direct() {
        let t = table(&[&[0.5, 0.5], &[0.2, 0.5], &[0.5, 0.5]]);
        assert_eq!(t.best_state(0), (2, 0.5));
        assert_eq!(t.best_state(1), (1, 0.5));
    }

    #[test]
    fn blocked_ue_without_ris_receives_nothing() {
        let c = CandidateChannels::sample(8, 4, 2, 1, 1, 1.0, 1.0, 1.0, 3);
        let t = probe_powers(&c).unwrap();
        assert_eq!(t.powers[(0, 0)], 0.0);
        assert!(t.powers[(0, 1)] > 0.0);
        assert!(t
            .to_csv()
            .starts_with("ue_id,state_0,state_1,state_2\n0,0,"));
    }

    #[test]
    fn unit_direct_channel_probe() {
        let m = 16;
        let c = CandidateChannels {
            bs_ris: vec![CMat::zeros(m, 2)],
            ris_ue: vec![vec![CVec::zeros(2)]],
            direct: vec![CVec::from_element(m, Complex64::new(1.0, 0.0))],
        };
        let t = probe_powers(&c).unwrap();
        assert!((t.powers[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((t.powers[(1, 0)] - 1.0).abs() < 1e-15);
    }
}
