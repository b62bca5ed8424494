//! Unconstrained feature model trained by full-batch gradient descent.
//!
//! The objective is
//!
//! ```text
//! L(M, Z) = Σ_samples −log softmax(Mᵀz)_y + (ω/2)‖Z‖² + (λ/2)‖M‖²
//! ```
//!
//! with `M` the `d×C` linear classifier and `Z` the `d×N` free features laid
//! out class-major (column `i·C + y` is sample `i` of class `y`). Both blocks
//! are updated simultaneously from the same iterate:
//! `Z ← Z − α∇_Z L`, `M ← M − β∇_M L`. The step sizes and decays are tied by
//! `λ/ω = α/β = N/C`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::collapse::{self, balanced_labels};
use crate::error::{Error, Result};
use crate::frames::{self, CorrelationMode, Frame};
use crate::linalg::{self, Matrix};
use crate::rng::{Gaussian, RngSeed};

/// Scaled gradient norm below which a run is considered stationary.
pub const STATIONARY_GRADIENT: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UfmConfig {
    pub d: usize,
    #[serde(rename = "C")]
    pub classes: usize,
    pub n_per_class: usize,
    pub lambda: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub max_iters: usize,
    pub seed: RngSeed,
    pub init_scale: f64,
    pub record_every: usize,
}

impl UfmConfig {
    /// Configuration with `ω = λC/N` and `β = αC/N`, 50 000 iterations,
    /// initial scale 0.1 and a trajectory sample every 100 iterations.
    pub fn new(
        d: usize,
        classes: usize,
        n_per_class: usize,
        lambda: f64,
        alpha: f64,
    ) -> Result<Self> {
        let n = (classes * n_per_class) as f64;
        let ratio = classes as f64 / n;
        let config = UfmConfig {
            d,
            classes,
            n_per_class,
            lambda,
            omega: lambda * ratio,
            alpha,
            beta: alpha * ratio,
            max_iters: 50_000,
            seed: RngSeed(0),
            init_scale: 0.1,
            record_every: 100,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_seed(mut self, seed: impl Into<RngSeed>) -> Self {
        self.seed = seed.into();
        self
    }

    pub fn with_init_scale(mut self, init_scale: f64) -> Self {
        self.init_scale = init_scale;
        self
    }

    pub fn with_record_every(mut self, record_every: usize) -> Self {
        self.record_every = record_every;
        self
    }

    pub fn n_samples(&self) -> usize {
        self.classes * self.n_per_class
    }

    pub fn labels(&self) -> Vec<usize> {
        balanced_labels(self.classes, self.n_per_class)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.classes == 0 || self.n_per_class == 0 {
            return Err(Error::domain(format!(
                "d, C and n_per_class must be positive (d={}, C={}, n_per_class={})",
                self.d, self.classes, self.n_per_class
            )));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("omega", self.omega),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("init_scale", self.init_scale),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.max_iters == 0 || self.record_every == 0 {
            return Err(Error::domain("max_iters and record_every must be positive"));
        }
        let ratio = self.n_samples() as f64 / self.classes as f64;
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        if !rel(self.lambda / self.omega, ratio) || !rel(self.alpha / self.beta, ratio) {
            return Err(Error::domain(format!(
                "hyperparameters must satisfy lambda/omega = alpha/beta = N/C = {ratio}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UfmState {
    pub m: Matrix,
    pub z: Matrix,
    pub iter: usize,
}

impl UfmState {
    /// Independent zero-mean Gaussian entries with standard deviation
    /// `init_scale`; `M` is drawn first, row-major, then `Z`.
    pub fn initial(config: &UfmConfig) -> Self {
        let mut g = Gaussian::new(config.seed.stream());
        let s = config.init_scale;
        let m = Matrix::from_fn(config.d, config.classes, |_, _| s * g.sample());
        let z = Matrix::from_fn(config.d, config.n_samples(), |_, _| s * g.sample());
        UfmState { m, z, iter: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub iter: usize,
    pub ce_loss: f64,
    pub ufm_loss: f64,
    pub nc1: f64,
    pub nc2: f64,
    pub nc3_signed_maxcorr: f64,
    pub nc4_agreement: f64,
    pub max_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: UfmConfig,
    pub samples: Vec<TrajectorySample>,
}

pub const TRAJECTORY_CSV_HEADER: &str =
    "iter,ce_loss,ufm_loss,nc1,nc2,nc3_signed_maxcorr,nc4_agreement,max_norm";

impl Trajectory {
    /// Writes the trajectory as CSV. Floats use Rust's shortest round-trip
    /// formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                s.iter,
                s.ce_loss,
                s.ufm_loss,
                s.nc1,
                s.nc2,
                s.nc3_signed_maxcorr,
                s.nc4_agreement,
                s.max_norm
            )?;
        }
        Ok(())
    }

    pub fn last(&self) -> Option<&TrajectorySample> {
        self.samples.last()
    }
}

fn check_problem(m: &Matrix, z: &Matrix, labels: &[usize]) -> Result<()> {
    if m.rows() != z.rows() {
        return Err(Error::domain(format!(
            "classifier is {}x{} but features are {}x{}",
            m.rows(),
            m.cols(),
            z.rows(),
            z.cols()
        )));
    }
    if labels.len() != z.cols() {
        return Err(Error::domain(format!(
            "{} labels for {} feature columns",
            labels.len(),
            z.cols()
        )));
    }
    match labels.iter().find(|&&y| y >= m.cols()) {
        Some(bad) => Err(Error::domain(format!(
            "label {bad} out of range for {} classes",
            m.cols()
        ))),
        None => Ok(()),
    }
}

fn check_decay(lambda: f64, omega: f64) -> Result<()> {
    if !(lambda > 0.0) || !(omega > 0.0) {
        return Err(Error::domain(format!(
            "weight decays must be positive, got lambda={lambda} omega={omega}"
        )));
    }
    Ok(())
}

/// Summed cross-entropy `Σ −log softmax(Mᵀz)_y` over all feature columns.
pub fn ce_loss(m: &Matrix, z: &Matrix, labels: &[usize]) -> Result<f64> {
    check_problem(m, z, labels)?;
    Ok(ce_loss_unchecked(m, z, labels))
}

fn ce_loss_unchecked(m: &Matrix, z: &Matrix, labels: &[usize]) -> f64 {
    let logits = m.t_matmul(z);
    let c = m.cols();
    labels
        .iter()
        .enumerate()
        .map(|(col, &y)| {
            let l: Vec<f64> = (0..c).map(|k| logits[(k, col)]).collect();
            linalg::log_sum_exp(&l) - l[y]
        })
        .sum()
}

pub fn ufm_loss(m: &Matrix, z: &Matrix, labels: &[usize], lambda: f64, omega: f64) -> Result<f64> {
    check_decay(lambda, omega)?;
    check_problem(m, z, labels)?;
    Ok(ufm_loss_unchecked(m, z, labels, lambda, omega))
}

fn ufm_loss_unchecked(m: &Matrix, z: &Matrix, labels: &[usize], lambda: f64, omega: f64) -> f64 {
    ce_loss_unchecked(m, z, labels)
        + 0.5 * omega * z.frobenius_norm().powi(2)
        + 0.5 * lambda * m.frobenius_norm().powi(2)
}

/// Analytic gradients `(∇_M L, ∇_Z L)`.
///
/// For a sample `z` of class `y` with `p = softmax(Mᵀz)`:
/// `∇_z = M p − M_y + ωz`, and it contributes `(p_k − [k = y]) z` to column
/// `k` of `∇_M`, which also carries `λM`.
pub fn ufm_gradients(
    m: &Matrix,
    z: &Matrix,
    labels: &[usize],
    lambda: f64,
    omega: f64,
) -> Result<(Matrix, Matrix)> {
    check_problem(m, z, labels)?;
    Ok(gradients_unchecked(m, z, labels, lambda, omega))
}

fn gradients_unchecked(
    m: &Matrix,
    z: &Matrix,
    labels: &[usize],
    lambda: f64,
    omega: f64,
) -> (Matrix, Matrix) {
    let c = m.cols();
    let logits = m.t_matmul(z);
    // residual[k][col] = softmax_k − [k = y]
    let mut residual = Matrix::zeros(c, z.cols());
    for (col, &y) in labels.iter().enumerate() {
        let l: Vec<f64> = (0..c).map(|k| logits[(k, col)]).collect();
        let p = linalg::softmax_unchecked(&l);
        for k in 0..c {
            residual[(k, col)] = p[k] - if k == y { 1.0 } else { 0.0 };
        }
    }
    let grad_z = m.matmul(&residual).add(&z.scale(omega));
    let grad_m = z.matmul(&residual.transpose()).add(&m.scale(lambda));
    (grad_m, grad_z)
}

fn divergence(iter: usize, trajectory: Trajectory) -> Error {
    Error::Divergence {
        iter,
        trajectory: Box::new(trajectory),
    }
}

/// One simultaneous gradient step.
pub fn gd_step(state: &UfmState, config: &UfmConfig) -> Result<UfmState> {
    let labels = config.labels();
    check_problem(&state.m, &state.z, &labels)?;
    let (grad_m, grad_z) =
        gradients_unchecked(&state.m, &state.z, &labels, config.lambda, config.omega);
    if !grad_m.is_finite() || !grad_z.is_finite() {
        return Err(divergence(
            state.iter,
            Trajectory {
                config: config.clone(),
                samples: Vec::new(),
            },
        ));
    }
    Ok(apply_step(state, config, &grad_m, &grad_z))
}

fn apply_step(state: &UfmState, config: &UfmConfig, grad_m: &Matrix, grad_z: &Matrix) -> UfmState {
    UfmState {
        m: state.m.sub(&grad_m.scale(config.beta)),
        z: state.z.sub(&grad_z.scale(config.alpha)),
        iter: state.iter + 1,
    }
}

pub fn sample_state(state: &UfmState, config: &UfmConfig, labels: &[usize]) -> TrajectorySample {
    let ce = ce_loss_unchecked(&state.m, &state.z, labels);
    let reg = 0.5 * config.omega * state.z.frobenius_norm().powi(2)
        + 0.5 * config.lambda * state.m.frobenius_norm().powi(2);
    let nc1 = collapse::nc1_variability(&state.z, labels).unwrap_or(f64::NAN);
    let nc2 = collapse::nc2_self_duality(&state.z, &state.m, labels).unwrap_or(f64::NAN);
    let nc3 = if config.classes >= 2 {
        frames::max_correlation_of(&state.m, CorrelationMode::Signed).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    let nc4 = collapse::nc4_agreement(&state.z, &state.m, labels).unwrap_or(f64::NAN);
    TrajectorySample {
        iter: state.iter,
        ce_loss: ce,
        ufm_loss: ce + reg,
        nc1,
        nc2,
        nc3_signed_maxcorr: nc3,
        nc4_agreement: nc4,
        max_norm: collapse::max_column_norm(&state.m).max(collapse::max_column_norm(&state.z)),
    }
}

pub fn run_ufm(config: &UfmConfig) -> Result<(UfmState, Trajectory)> {
    run_ufm_observed(config, |_| {})
}

/// Runs gradient descent, calling `observer` on the initial state and after
/// every step. Stops after `max_iters` steps or once the gradient norm divided
/// by `√(dN)` drops below [`STATIONARY_GRADIENT`].
pub fn run_ufm_observed(
    config: &UfmConfig,
    mut observer: impl FnMut(&UfmState),
) -> Result<(UfmState, Trajectory)> {
    config.validate()?;
    let labels = config.labels();
    let scale = ((config.d * config.n_samples()) as f64).sqrt();
    let mut trajectory = Trajectory {
        config: config.clone(),
        samples: Vec::new(),
    };
    let mut state = UfmState::initial(config);
    trajectory
        .samples
        .push(sample_state(&state, config, &labels));
    observer(&state);

    while state.iter < config.max_iters {
        let (grad_m, grad_z) =
            gradients_unchecked(&state.m, &state.z, &labels, config.lambda, config.omega);
        if !grad_m.is_finite() || !grad_z.is_finite() {
            return Err(divergence(state.iter, trajectory));
        }
        let grad_norm = (grad_m.frobenius_norm().powi(2) + grad_z.frobenius_norm().powi(2)).sqrt();
        if grad_norm / scale < STATIONARY_GRADIENT {
            break;
        }
        let next = apply_step(&state, config, &grad_m, &grad_z);
        if !next.m.is_finite() || !next.z.is_finite() {
            return Err(divergence(next.iter, trajectory));
        }
        state = next;
        observer(&state);
        if state.iter.is_multiple_of(config.record_every) {
            trajectory
                .samples
                .push(sample_state(&state, config, &labels));
        }
    }
    if trajectory.last().map(|s| s.iter) != Some(state.iter) {
        trajectory
            .samples
            .push(sample_state(&state, config, &labels));
    }
    Ok((state, trajectory))
}

/// Settings for [`synthesize_grassmannian`]: one sample per class, equal
/// step sizes and decays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub lambda: f64,
    pub alpha: f64,
    pub max_iters: usize,
    pub seed: RngSeed,
    pub init_scale: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            lambda: 0.1,
            alpha: 0.1,
            max_iters: 1000,
            seed: RngSeed(1000),
            init_scale: 0.1,
        }
    }
}

impl SynthOptions {
    pub fn config(&self, d: usize, classes: usize) -> Result<UfmConfig> {
        Ok(UfmConfig::new(d, classes, 1, self.lambda, self.alpha)?
            .with_max_iters(self.max_iters)
            .with_seed(self.seed)
            .with_init_scale(self.init_scale)
            .with_record_every(self.max_iters))
    }
}

/// Trains a one-sample-per-class model and returns its normalized classifier
/// as a frame.
pub fn synthesize_grassmannian(d: usize, classes: usize, options: &SynthOptions) -> Result<Frame> {
    if d < 2 || classes < 2 {
        return Err(Error::domain(format!(
            "frame synthesis needs d >= 2 and C >= 2, got d={d} C={classes}"
        )));
    }
    let config = options.config(d, classes)?;
    let (state, _) = run_ufm(&config)?;
    let mut frame = frames::make_frame(state.m, true)?;
    let signed = frames::max_correlation(&frame, CorrelationMode::Signed)?;
    frame
        .meta
        .insert("generator".into(), "ufm_gradient_descent".into());
    frame.meta.insert("seed".into(), options.seed.0.to_string());
    frame.meta.insert("iters".into(), state.iter.to_string());
    frame
        .meta
        .insert("lambda".into(), options.lambda.to_string());
    frame.meta.insert("alpha".into(), options.alpha.to_string());
    frame
        .meta
        .insert("max_corr_signed".into(), signed.to_string());
    Ok(frame)
}
