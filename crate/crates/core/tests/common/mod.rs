#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use ris_zf::channel::{ChannelSampler, ChannelSet, CorrelationMatrix};
use ris_zf::harness::RunConfig;
use ris_zf::linalg::{CMat, CVec};
use ris_zf::rng::rng_from_seed;
use ris_zf::sysconfig::{ChannelModelConfig, RawConfig, SystemConfig};

pub fn config(text: &str) -> (SystemConfig, ChannelModelConfig, RunConfig) {
    RawConfig::parse(text, "test").unwrap().build().unwrap()
}

/// Unit noise and unit link variances, so residuals are on an O(1) scale.
pub fn unit_system(m: usize, n: usize, k: usize, ud: usize) -> (SystemConfig, ChannelModelConfig) {
    let (sys, ch, _) = config(&format!(
        "antennas={m}\nris_elements={n}\nnum_ris={k}\ndirect_users={ud}\n\
         noise_variance=1\nris_ue_link_variance=1\ncorrelation=iid\n"
    ));
    (sys, ch)
}

pub fn unit_sampler(
    sys: &SystemConfig,
    ch: &ChannelModelConfig,
    corr: Option<CMat>,
) -> ChannelSampler {
    let c = match corr {
        Some(c) => CorrelationMatrix::from_matrix(c, 1.0),
        None => CorrelationMatrix::identity(sys.elements, 1.0),
    };
    ChannelSampler::new(sys, ch, vec![c; sys.num_ris]).unwrap()
}

pub fn unit_channels(
    m: usize,
    n: usize,
    k: usize,
    ud: usize,
    seed: u64,
) -> (SystemConfig, ChannelSet) {
    let (sys, ch) = unit_system(m, n, k, ud);
    let chs = unit_sampler(&sys, &ch, None).sample(seed);
    (sys, chs)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_cmat(rows: usize, cols: usize, seed: u64) -> CMat {
    let mut rng = rng_from_seed(seed);
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

pub fn random_cvec(n: usize, seed: u64) -> CVec {
    let m = random_cmat(n, 1, seed);
    CVec::from_iterator(n, m.iter().copied())
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
