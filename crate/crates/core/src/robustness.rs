//! Static positional disorder and finite-bandwidth averaging around a
//! register design, plus tabulation of the design curves.

use std::num::NonZeroUsize;

use gauss_quad::GaussHermite;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitudes::{g_tilde, h_func};
use crate::error::{Error, Result};
use crate::protocol::{Register, RegisterConfig};
use crate::solver::solve;

/// Draws per trial before a trial with scrambled ordering is given up.
pub const MAX_RESAMPLES: usize = 1000;
/// Relative bandwidths at or above this are rejected.
pub const MAX_BANDWIDTH: f64 = 0.3;
/// Wavevectors below this are dropped from the quadrature.
pub const MIN_WAVEVECTOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionNoise {
    /// Std of each position is this fraction of the qubit's designed distance `d_i`.
    Relative(f64),
    /// Same std for every position, in units of `1/k0`.
    Absolute(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub noise: PositionNoise,
    pub trials: usize,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn relative(sigma_rel: f64, trials: usize, seed: u64) -> Self {
        Self { noise: PositionNoise::Relative(sigma_rel), trials, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self.noise {
            PositionNoise::Relative(s) if !(0.0..0.5).contains(&s) => {
                return Err(Error::Config(format!("sigma_rel = {s} must lie in [0, 0.5)")));
            }
            PositionNoise::Absolute(s) if !(s.is_finite() && s >= 0.0) => {
                return Err(Error::Config(format!("absolute sigma = {s} must be non-negative")));
            }
            _ => {}
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Perturbed positions by qubit (empty when no ordered draw was found).
    pub positions: Vec<f64>,
    /// Process fidelity; `None` for a rejected trial.
    pub fidelity: Option<f64>,
    pub resamples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityStats {
    pub accepted_trials: usize,
    pub rejected_trials: usize,
    pub resampled_draws: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub quantiles: Quantiles,
}

impl FidelityStats {
    pub fn standard_error(&self) -> f64 {
        self.std / (self.accepted_trials as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderOutcome {
    pub stats: FidelityStats,
    pub trials: Vec<TrialRecord>,
}

/// Linear interpolation between order statistics of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarise(records: &[TrialRecord]) -> FidelityStats {
    let mut values: Vec<f64> = records.iter().filter_map(|r| r.fidelity).collect();
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    values.sort_by(f64::total_cmp);
    FidelityStats {
        accepted_trials: n,
        rejected_trials: records.len() - n,
        resampled_draws: records.iter().map(|r| r.resamples).sum(),
        mean,
        std,
        min: values.first().copied().unwrap_or(f64::NAN),
        max: values.last().copied().unwrap_or(f64::NAN),
        quantiles: Quantiles {
            q05: quantile(&values, 0.05),
            q25: quantile(&values, 0.25),
            q50: quantile(&values, 0.5),
            q75: quantile(&values, 0.75),
            q95: quantile(&values, 0.95),
        },
    }
}

fn is_ordered(positions: &[f64]) -> bool {
    positions.first().is_none_or(|&x| x < 0.0) && positions.windows(2).all(|w| w[1] < w[0])
}

fn run_trial(register: &Register, spec: &DisorderSpec, design: &[f64], trial: usize) -> TrialRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(trial as u64);
    let kd = &register.config().kd;
    let sigma = |i: usize| match spec.noise {
        PositionNoise::Relative(s) => s * kd[i],
        PositionNoise::Absolute(s) => s,
    };
    for resamples in 0..MAX_RESAMPLES {
        let positions: Vec<f64> = design
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let z: f64 = rng.sample(StandardNormal);
                x + sigma(i) * z
            })
            .collect();
        if !is_ordered(&positions) {
            continue;
        }
        let fidelity = register
            .problem_at(&positions, 1.0)
            .and_then(|p| solve(&p))
            .map(|ch| register.overlap(&ch.r).0.powi(2))
            .ok();
        return TrialRecord { trial, positions, fidelity, resamples };
    }
    TrialRecord { trial, positions: Vec::new(), fidelity: None, resamples: MAX_RESAMPLES }
}

/// Monte Carlo over Gaussian position noise (mirror fixed). Each trial has
/// its own random stream derived from `(seed, trial)`, so the outcome does
/// not depend on scheduling.
pub fn disorder_trials(config: &RegisterConfig, spec: &DisorderSpec) -> Result<DisorderOutcome> {
    spec.validate()?;
    let register = Register::new(config)?;
    let design = config.positions();
    let trials: Vec<TrialRecord> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(&register, spec, &design, t))
        .collect();
    Ok(DisorderOutcome { stats: summarise(&trials), trials })
}

/// Process fidelity averaged over a Gaussian spread of wavevectors with
/// std `rel_bandwidth · k0` around the design momentum `k0 = 1`. The
/// physical couplings and positions stay at their design values.
pub fn wavepacket_fidelity(config: &RegisterConfig, rel_bandwidth: f64, n_samples: usize) -> Result<f64> {
    if !(rel_bandwidth.is_finite() && rel_bandwidth >= 0.0) {
        return Err(Error::Config(format!("bandwidth {rel_bandwidth} must be non-negative")));
    }
    if rel_bandwidth >= MAX_BANDWIDTH {
        return Err(Error::Config(format!("bandwidth {rel_bandwidth} must be below {MAX_BANDWIDTH}")));
    }
    let n = NonZeroUsize::new(n_samples).ok_or_else(|| Error::Config("n_samples must be positive".into()))?;
    let register = Register::new(config)?;
    let positions = config.positions();
    let at = |k: f64| -> Result<f64> {
        let ch = solve(&register.problem_at(&positions, k)?)?;
        Ok(register.overlap(&ch.r).0.powi(2))
    };
    if rel_bandwidth == 0.0 {
        return at(1.0);
    }
    let rule = GaussHermite::new(n);
    let nodes: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (1.0 + std::f64::consts::SQRT_2 * rel_bandwidth * x, w))
        .filter(|&(k, _)| k >= MIN_WAVEVECTOR)
        .collect();
    let total_weight: f64 = nodes.iter().map(|(_, w)| w).sum();
    let mut sum = 0.0;
    for (k, w) in nodes {
        sum += w * at(k)?;
    }
    Ok(sum / total_weight)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kd: f64,
    pub g_tilde: f64,
    pub h: f64,
}

/// `(kd, g̃(kd), h(kd))` on a grid that stays at least 1e−6 from multiples of π.
pub fn sweep_design_functions(kd_grid: &[f64]) -> Result<Vec<SweepRow>> {
    kd_grid
        .iter()
        .map(|&kd| {
            let r = kd.rem_euclid(std::f64::consts::PI);
            if r.min(std::f64::consts::PI - r) < 1e-6 {
                return Err(Error::Divergence { kd, tolerance: 1e-6 });
            }
            Ok(SweepRow { kd, g_tilde: g_tilde(kd)?, h: h_func(kd)? })
        })
        .collect()
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::protocol::{design_register, verify_swap};

    #[test]
    fn zero_noise_keeps_designs_perfect() {
        for (n, target) in [(1, 1), (2, 1), (3, 2)] {
            let c = design_register(n, target, 1.4, &[]).unwrap();
            let out = disorder_trials(&c, &DisorderSpec::relative(0.0, 16, 3)).unwrap();
            assert_eq!(out.stats.accepted_trials, 16);
            assert!(out.stats.min >= 1.0 - 1e-8);
            assert_eq!(out.stats.resampled_draws, 0);
        }
    }

    #[test]
    fn trials_are_reproducible_and_order_independent() {
        let c = design_register(2, 1, FRAC_PI_2, &[]).unwrap();
        let spec = DisorderSpec::relative(0.2, 64, 99);
        let a = disorder_trials(&c, &spec).unwrap();
        let b = disorder_trials(&c, &spec).unwrap();
        assert_eq!(a, b);
        let register = Register::new(&c).unwrap();
        let design = c.positions();
        for t in [0, 17, 63] {
            assert_eq!(run_trial(&register, &spec, &design, t), a.trials[t]);
        }
        let other = disorder_trials(&c, &DisorderSpec::relative(0.2, 64, 100)).unwrap();
        assert_ne!(a.trials, other.trials);
    }

    #[test]
    fn stats_are_consistent() {
        let c = design_register(1, 1, FRAC_PI_2, &[]).unwrap();
        let out = disorder_trials(&c, &DisorderSpec::relative(0.15, 200, 5)).unwrap();
        let s = &out.stats;
        assert!(s.mean > 0.0 && s.mean <= 1.0);
        let q = &s.quantiles;
        assert!(s.min <= q.q05 && q.q05 <= q.q25 && q.q25 <= q.q50 && q.q50 <= q.q75 && q.q75 <= q.q95 && q.q95 <= s.max);
        assert_eq!(s.accepted_trials + s.rejected_trials, 200);
    }

    #[test]
    fn large_noise_resamples() {
        let c = design_register(3, 1, 0.5, &[]).unwrap();
        let out = disorder_trials(&c, &DisorderSpec::relative(0.45, 100, 1)).unwrap();
        assert!(out.stats.resampled_draws > 0);
        for t in &out.trials {
            assert!(is_ordered(&t.positions));
        }
    }

    #[test]
    fn invalid_specs() {
        let c = design_register(1, 1, 1.0, &[]).unwrap();
        assert!(disorder_trials(&c, &DisorderSpec::relative(0.5, 10, 0)).is_err());
        assert!(disorder_trials(&c, &DisorderSpec::relative(0.1, 0, 0)).is_err());
        let abs = DisorderSpec { noise: PositionNoise::Absolute(-1.0), trials: 3, seed: 0 };
        assert!(disorder_trials(&c, &abs).is_err());
        let abs = DisorderSpec { noise: PositionNoise::Absolute(0.1), trials: 3, seed: 0 };
        assert!(disorder_trials(&c, &abs).is_ok());
    }

    #[test]
    fn quantile_interpolates() {
        let data = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&data, 0.5), 2.0);
        assert_eq!(quantile(&data, 0.125), 0.5);
        assert_eq!(quantile(&[7.0], 0.95), 7.0);
    }

    #[test]
    fn wavepacket_limits() {
        let c = design_register(2, 1, FRAC_PI_2, &[]).unwrap();
        let f = verify_swap(&c).unwrap().fidelity;
        assert!((wavepacket_fidelity(&c, 0.0, 16).unwrap() - f * f).abs() < 1e-12);
        assert!(wavepacket_fidelity(&c, 0.3, 16).is_err());
        assert!(wavepacket_fidelity(&c, -0.1, 16).is_err());
        assert!(wavepacket_fidelity(&c, 0.05, 0).is_err());
    }

    #[test]
    fn wavepacket_quadrature_converges() {
        let c = design_register(1, 1, FRAC_PI_2, &[]).unwrap();
        for bw in [0.02, 0.05, 0.1] {
            let a = wavepacket_fidelity(&c, bw, 32).unwrap();
            let b = wavepacket_fidelity(&c, bw, 64).unwrap();
            assert!((a - b).abs() < 1e-8, "bw={bw}: {a} vs {b}");
        }
    }

    #[test]
    fn wavepacket_fidelity_degrades_with_bandwidth() {
        let c = design_register(1, 1, FRAC_PI_2, &[]).unwrap();
        let values: Vec<f64> = linspace(0.0, 0.1, 11).iter().map(|&bw| wavepacket_fidelity(&c, bw, 48).unwrap()).collect();
        for w in values.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{values:?}");
        }
        assert!(values[10] < values[0]);
    }

    #[test]
    fn sweep_examples() {
        let rows = sweep_design_functions(&linspace(0.01, PI - 0.01, 2001)).unwrap();
        let min = rows.iter().map(|r| r.g_tilde).fold(f64::INFINITY, f64::min);
        assert!((min - 1.0).abs() < 1e-6);
        assert!(rows.iter().all(|r| r.g_tilde >= 1.0 - 1e-12 && r.h > 0.0 && r.h <= PI));
        let shifted = sweep_design_functions(&linspace(0.01 + PI, 2.0 * PI - 0.01, 2001)).unwrap();
        for (a, b) in rows.iter().zip(&shifted) {
            assert!((a.g_tilde - b.g_tilde).abs() < 1e-10 * a.g_tilde.max(1.0));
        }
        assert!(sweep_design_functions(&[PI]).is_err());
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
    }
}
