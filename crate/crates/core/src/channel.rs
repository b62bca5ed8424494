//! Gaussian channel with a frame codebook and minimum-distance decoding.
//!
//! A source symbol `c` is sent as codeword `M_c`; the receiver sees
//! `h = M_c + g` with `g ~ N(0, σ²I)` and decodes to the nearest codeword.
//! Trial `t` draws its symbol and its noise from the keyed stream `(seed, t)`,
//! so results do not depend on how trials are scheduled across threads.

use std::io::{self, Write};

use libm::erfc;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{self, Frame};
use crate::linalg::{self, Matrix};
use crate::rng::{Gaussian, RngSeed};

/// Two-sided 95% normal quantile used for binomial half-widths.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone)]
pub struct ChannelConfig {
    pub codebook: Frame,
    pub sigma: f64,
    pub trials: u64,
    pub seed: RngSeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelResult {
    pub sigma: f64,
    pub trials: u64,
    pub errors: u64,
    pub error_rate: f64,
    /// Normal-approximation binomial 95% half-width.
    pub ci95_halfwidth: f64,
    pub per_class_errors: Vec<u64>,
    pub per_class_trials: Vec<u64>,
    /// `−σ² log(error_rate)`; absent when no errors were observed.
    pub exponent_estimate: Option<f64>,
    /// `(1/8) min_{c≠c'} ‖M_c − M_c'‖²`
    pub exponent_target: f64,
}

impl ChannelResult {
    /// Monte Carlo standard error `√(p(1−p)/n)`.
    pub fn std_error(&self) -> f64 {
        (self.error_rate * (1.0 - self.error_rate) / self.trials as f64).sqrt()
    }
}

/// Nearest codeword index; exact ties go to the smaller index.
pub fn min_distance_decode(h: &[f64], codebook: &Frame) -> Result<usize> {
    if h.len() != codebook.d() {
        return Err(Error::domain(format!(
            "received vector has length {}, codebook dimension is {}",
            h.len(),
            codebook.d()
        )));
    }
    Ok(decode(h, codebook.columns()))
}

fn decode(h: &[f64], codes: &Matrix) -> usize {
    let mut best = (0, f64::INFINITY);
    for c in 0..codes.cols() {
        let dist: f64 = h
            .iter()
            .enumerate()
            .map(|(i, v)| (v - codes[(i, c)]).powi(2))
            .sum();
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best.0
}

/// `(1/8)` of the smallest squared distance between distinct codewords.
pub fn exponent_target(codebook: &Frame) -> f64 {
    let m = codebook.columns();
    let mut min = f64::INFINITY;
    for a in 0..m.cols() {
        for b in a + 1..m.cols() {
            min = min.min(linalg::distance(&m.column(a), &m.column(b)).powi(2));
        }
    }
    min / 8.0
}

#[derive(Clone)]
struct Counts {
    errors: Vec<u64>,
    trials: Vec<u64>,
}

impl Counts {
    fn new(c: usize) -> Self {
        Counts {
            errors: vec![0; c],
            trials: vec![0; c],
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.errors.iter_mut().zip(other.errors) {
            *a += b;
        }
        for (a, b) in self.trials.iter_mut().zip(other.trials) {
            *a += b;
        }
        self
    }
}

fn run_trial(codes: &Matrix, sigma: f64, seed: RngSeed, t: u64) -> (usize, bool) {
    let (d, c) = (codes.rows(), codes.cols());
    let mut gauss = Gaussian::new(seed.keyed_stream(t));
    let sent = gauss.rng_mut().random_range(0..c as u64) as usize;
    let h: Vec<f64> = (0..d)
        .map(|i| codes[(i, sent)] + sigma * gauss.sample())
        .collect();
    (sent, decode(&h, codes) != sent)
}

pub fn simulate_channel(config: &ChannelConfig) -> Result<ChannelResult> {
    let ChannelConfig {
        codebook,
        sigma,
        trials,
        seed,
    } = config;
    if !(*sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!(
            "noise level must be positive, got {sigma}"
        )));
    }
    if *trials == 0 {
        return Err(Error::domain("trials must be at least 1"));
    }
    let c = codebook.c();
    if c < 2 {
        return Err(Error::domain("a codebook needs at least two codewords"));
    }
    let codes = codebook.columns();
    let counts = (0..*trials)
        .into_par_iter()
        .fold(
            || Counts::new(c),
            |mut acc, t| {
                let (sent, wrong) = run_trial(codes, *sigma, *seed, t);
                acc.trials[sent] += 1;
                acc.errors[sent] += wrong as u64;
                acc
            },
        )
        .reduce(|| Counts::new(c), Counts::merge);

    let errors: u64 = counts.errors.iter().sum();
    let error_rate = errors as f64 / *trials as f64;
    let ci95_halfwidth = Z_95 * (error_rate * (1.0 - error_rate) / *trials as f64).sqrt();
    Ok(ChannelResult {
        sigma: *sigma,
        trials: *trials,
        errors,
        error_rate,
        ci95_halfwidth,
        per_class_errors: counts.errors,
        per_class_trials: counts.trials,
        exponent_estimate: (errors > 0).then(|| -sigma * sigma * error_rate.ln()),
        exponent_target: exponent_target(codebook),
    })
}

/// Exact error probability of minimum-distance decoding between two
/// codewords at distance `D`: `Q(D / 2σ)`.
pub fn pairwise_error_analytic(distance: f64, sigma: f64) -> Result<f64> {
    if !(distance > 0.0) || !(sigma > 0.0) {
        return Err(Error::domain(format!(
            "distance and sigma must be positive, got D={distance} sigma={sigma}"
        )));
    }
    Ok(gaussian_tail(distance / (2.0 * sigma)))
}

/// Standard-normal upper tail `Q(x)`.
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub sigma: f64,
    pub error_rate: f64,
    pub ci95: f64,
    /// Absent (row unestimable) when the run saw no errors.
    pub exponent_estimate: Option<f64>,
    pub exponent_target: f64,
}

impl ExponentRow {
    pub fn estimable(&self) -> bool {
        self.exponent_estimate.is_some()
    }
}

/// Runs the channel at each noise level (same seed at every level) and
/// reports `−σ² log P_err` against its small-noise limit.
pub fn error_exponent_sweep(
    codebook: &Frame,
    sigmas: &[f64],
    trials: u64,
    seed: RngSeed,
) -> Result<Vec<ExponentRow>> {
    if sigmas.is_empty() {
        return Err(Error::domain("sweep needs at least one sigma"));
    }
    if sigmas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::domain("sweep sigmas must be strictly decreasing"));
    }
    sigmas
        .iter()
        .map(|&sigma| {
            let r = simulate_channel(&ChannelConfig {
                codebook: codebook.clone(),
                sigma,
                trials,
                seed,
            })?;
            Ok(ExponentRow {
                sigma,
                error_rate: r.error_rate,
                ci95: r.ci95_halfwidth,
                exponent_estimate: r.exponent_estimate,
                exponent_target: r.exponent_target,
            })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "sigma,error_rate,ci95,exponent_estimate,exponent_target";

/// Sweep rows as CSV; an unestimable row leaves `exponent_estimate` empty.
pub fn write_sweep_csv<W: Write>(rows: &[ExponentRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        let est = r
            .exponent_estimate
            .map(|e| format!("{e:?}"))
            .unwrap_or_default();
        writeln!(
            w,
            "{:?},{:?},{:?},{},{:?}",
            r.sigma, r.error_rate, r.ci95, est, r.exponent_target
        )?;
    }
    Ok(())
}

/// `C` Gaussian directions normalized to the unit sphere.
pub fn random_unit_codebook(d: usize, c: usize, seed: RngSeed) -> Result<Frame> {
    let mut g = Gaussian::new(seed.stream());
    let m = Matrix::from_fn(d, c, |_, _| g.sample());
    let mut f = frames::make_frame(m, true)?;
    f.meta.insert("generator".into(), "random_unit".into());
    f.meta.insert("seed".into(), seed.0.to_string());
    Ok(f)
}

/// `C` copies of `e1`: the worst unit-norm codebook.
pub fn repeated_vector_codebook(d: usize, c: usize) -> Result<Frame> {
    let m = Matrix::from_fn(d, c, |i, _| if i == 0 { 1.0 } else { 0.0 });
    frames::make_frame(m, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{cross_frame, make_frame, mercedes_frame};

    fn antipodal() -> Frame {
        make_frame(
            Matrix::from_columns(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap(),
            true,
        )
        .unwrap()
    }

    #[test]
    fn decode_examples() {
        let book = antipodal();
        assert_eq!(min_distance_decode(&[0.9, 0.1], &book).unwrap(), 0);
        assert_eq!(min_distance_decode(&[-0.2, 3.0], &book).unwrap(), 1);
        // Midpoint: exact tie goes to the smaller index.
        assert_eq!(min_distance_decode(&[0.0, 0.7], &book).unwrap(), 0);
        assert!(min_distance_decode(&[0.0, 0.0, 0.0], &book).is_err());
    }

    #[test]
    fn decode_matches_exhaustive_scan() {
        let book = random_unit_codebook(3, 5, RngSeed(4)).unwrap();
        let mut g = Gaussian::new(RngSeed(99).stream());
        for _ in 0..200 {
            let h: Vec<f64> = (0..3).map(|_| g.sample()).collect();
            let dists: Vec<f64> = (0..5)
                .map(|c| linalg::distance(&h, &book.column(c)))
                .collect();
            let mut best = 0;
            for c in 1..5 {
                if dists[c] < dists[best] {
                    best = c;
                }
            }
            assert_eq!(min_distance_decode(&h, &book).unwrap(), best);
        }
    }

    #[test]
    fn analytic_examples() {
        // Q(1) and Q(2) from standard normal tables.
        assert!((pairwise_error_analytic(2.0, 1.0).unwrap() - 0.158_655_253_931_457).abs() < 1e-12);
        assert!((pairwise_error_analytic(2.0, 0.5).unwrap() - 0.022_750_131_948_179).abs() < 1e-12);
        assert!(pairwise_error_analytic(2.0, 1e-3).unwrap() < 1e-300);
        assert!(pairwise_error_analytic(0.0, 1.0).is_err());
        assert!(pairwise_error_analytic(1.0, -1.0).is_err());
    }

    #[test]
    fn exponent_targets() {
        assert!((exponent_target(&antipodal()) - 0.5).abs() < 1e-15);
        assert!((exponent_target(&mercedes_frame()) - 0.375).abs() < 1e-12);
        assert!((exponent_target(&cross_frame()) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_trial_is_all_or_nothing() {
        for seed in 0..20 {
            let r = simulate_channel(&ChannelConfig {
                codebook: cross_frame(),
                sigma: 0.7,
                trials: 1,
                seed: RngSeed(seed),
            })
            .unwrap();
            assert!(r.error_rate == 0.0 || r.error_rate == 1.0);
            assert_eq!(r.errors as f64 / r.trials as f64, r.error_rate);
        }
    }

    #[test]
    fn huge_noise_is_uniform_guessing() {
        let r = simulate_channel(&ChannelConfig {
            codebook: cross_frame(),
            sigma: 1e3,
            trials: 100_000,
            seed: RngSeed(8),
        })
        .unwrap();
        assert!(
            (r.error_rate - 0.75).abs() <= 3.0 * r.ci95_halfwidth,
            "{r:?}"
        );
    }

    #[test]
    fn simulation_is_deterministic() {
        let config = ChannelConfig {
            codebook: mercedes_frame(),
            sigma: 0.6,
            trials: 20_000,
            seed: RngSeed(12),
        };
        assert_eq!(
            simulate_channel(&config).unwrap(),
            simulate_channel(&config).unwrap()
        );
    }

    #[test]
    fn invalid_configs() {
        let base = ChannelConfig {
            codebook: antipodal(),
            sigma: 0.0,
            trials: 10,
            seed: RngSeed(1),
        };
        assert!(simulate_channel(&base).is_err());
        assert!(simulate_channel(&ChannelConfig {
            sigma: 1.0,
            trials: 0,
            ..base.clone()
        })
        .is_err());
        assert!(error_exponent_sweep(&antipodal(), &[0.5, 0.8], 10, RngSeed(1)).is_err());
    }

    #[test]
    fn zero_error_rows_are_flagged() {
        let rows = error_exponent_sweep(&antipodal(), &[0.05], 1000, RngSeed(2)).unwrap();
        assert!(!rows[0].estimable());
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[3], "");
        assert_eq!(row[4], "0.5");
    }

    #[test]
    fn repeated_codebook_always_decodes_first() {
        let book = repeated_vector_codebook(2, 4).unwrap();
        let r = simulate_channel(&ChannelConfig {
            codebook: book,
            sigma: 0.5,
            trials: 4000,
            seed: RngSeed(3),
        })
        .unwrap();
        assert_eq!(r.per_class_errors[0], 0);
        assert_eq!(r.errors, r.per_class_trials[1..].iter().sum::<u64>());
    }
}
