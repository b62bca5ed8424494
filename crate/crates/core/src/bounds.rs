//! Margin-based generalization bounds.
//!
//! Margins `γ_{i,j} = min_{x ∈ S_i} (M_i − M_j)ᵀ z_x` feed the multiclass
//! margin bound
//!
//! ```text
//! Σ_i p(i) Σ_{j≠i} [ ℜ_{N_i}/γ_{i,j} + √(log log₂(4K/γ_{i,j}) / N_i)
//!                    + √(log(C(C−1)/δ) / (2N_i)) ] + L_{0,1}
//! ```
//!
//! and the covering-number accuracy bound
//! `1 − (1/2N) Σ_i max_{j≠i} 𝒩(r_{i,j}, S_i)` with
//! `r_{i,j} = (1/L) √((ρ² − M_iᵀM_j)/2)`.
//!
//! Rademacher complexities are inputs; nothing here estimates them.

use serde::{Deserialize, Serialize};

use crate::collapse::validate_labels;
use crate::error::{Error, Result};
use crate::frames::{self, correlation_matrix, Frame};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct MarginMatrix {
    gamma: Matrix,
}

impl MarginMatrix {
    /// From `C` rows of `C` entries. Diagonal entries are ignored and stored
    /// as zero.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let c = rows.len();
        if c < 2 {
            return Err(Error::domain(format!(
                "margin matrix needs C >= 2, got {c}"
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != c) {
            return Err(Error::domain(format!(
                "margin row {i} has {} entries, expected {c}",
                rows[i].len()
            )));
        }
        let gamma = Matrix::from_fn(c, c, |i, j| if i == j { 0.0 } else { rows[i][j] });
        if !gamma.is_finite() {
            return Err(Error::domain("margins must be finite"));
        }
        Ok(MarginMatrix { gamma })
    }

    pub fn uniform(classes: usize, value: f64) -> Result<Self> {
        Self::from_rows(&vec![vec![value; classes]; classes])
    }

    pub fn classes(&self) -> usize {
        self.gamma.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.gamma[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        let c = self.classes();
        (0..c)
            .map(|i| (0..c).map(|j| self.gamma[(i, j)]).collect())
            .collect()
    }

    /// Off-diagonal index pairs in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let c = self.classes();
        (0..c).flat_map(move |i| (0..c).filter(move |&j| j != i).map(move |j| (i, j)))
    }

    /// All off-diagonal margins strictly positive.
    pub fn is_separable(&self) -> bool {
        self.pairs().all(|(i, j)| self.get(i, j) > 0.0)
    }
}

pub fn margins(m: &Matrix, z: &Matrix, labels: &[usize]) -> Result<MarginMatrix> {
    if m.rows() != z.rows() {
        return Err(Error::domain("classifier and feature dimensions differ"));
    }
    let c = m.cols();
    if c < 2 {
        return Err(Error::domain("margins need at least two classes"));
    }
    validate_labels(z, labels, c)?;
    let mut gamma = Matrix::from_fn(c, c, |i, j| if i == j { 0.0 } else { f64::INFINITY });
    for (col, &i) in labels.iter().enumerate() {
        let x = z.column(col);
        for j in (0..c).filter(|&j| j != i) {
            let v: f64 = (0..m.rows()).map(|r| (m[(r, i)] - m[(r, j)]) * x[r]).sum();
            if v < gamma[(i, j)] {
                gamma[(i, j)] = v;
            }
        }
    }
    Ok(MarginMatrix { gamma })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginLemmaCheck {
    pub max_residual: f64,
    pub passed: bool,
    pub tolerance: f64,
}

/// Checks `γ_{i,j} + ⟨M_i, M_j⟩ = ρ²` over all ordered pairs. Reports the
/// residual whether or not the configuration is collapsed.
pub fn verify_margin_lemma(
    m: &Matrix,
    gamma: &MarginMatrix,
    rho: f64,
    tol: f64,
) -> Result<MarginLemmaCheck> {
    if m.cols() != gamma.classes() {
        return Err(Error::domain("classifier and margin matrix disagree on C"));
    }
    let max_residual = gamma
        .pairs()
        .map(|(i, j)| (gamma.get(i, j) + m.column_dot(i, j) - rho * rho).abs())
        .fold(0.0, f64::max);
    Ok(MarginLemmaCheck {
        max_residual,
        passed: max_residual <= tol,
        tolerance: tol,
    })
}

/// Inputs of the multiclass margin bound. Field names follow the JSON
/// document accepted by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    #[serde(rename = "C")]
    pub classes: usize,
    pub p: Vec<f64>,
    #[serde(rename = "N")]
    pub n: Vec<f64>,
    /// `ℜ_{N_i}(ℱ)` per class.
    pub rademacher: Vec<f64>,
    #[serde(rename = "K")]
    pub k: f64,
    pub delta: f64,
    pub gamma: Vec<Vec<f64>>,
    /// Caller-supplied empirical risk `L_{0,1}`; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical: Option<f64>,
}

impl BoundParams {
    pub fn from_json(text: &str) -> Result<Self> {
        let params: BoundParams =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn margin_matrix(&self) -> Result<MarginMatrix> {
        MarginMatrix::from_rows(&self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.classes;
        if c < 2 {
            return Err(Error::domain(format!("C must be at least 2, got {c}")));
        }
        for (name, len) in [
            ("p", self.p.len()),
            ("N", self.n.len()),
            ("rademacher", self.rademacher.len()),
        ] {
            if len != c {
                return Err(Error::domain(format!(
                    "{name} has {len} entries, expected C={c}"
                )));
            }
        }
        if self.p.iter().any(|&v| !(v >= 0.0)) || (self.p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::domain("p must be a probability vector"));
        }
        if self.n.iter().any(|&v| !(v >= 1.0) || !v.is_finite()) {
            return Err(Error::domain("every N_i must be at least 1"));
        }
        if self
            .rademacher
            .iter()
            .any(|&v| !(v >= 0.0) || !v.is_finite())
        {
            return Err(Error::domain(
                "Rademacher complexities must be non-negative",
            ));
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(Error::domain(format!("K must be positive, got {}", self.k)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::domain(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        let gamma = self.margin_matrix()?;
        if gamma.classes() != c {
            return Err(Error::domain("gamma must be C x C"));
        }
        for (i, j) in gamma.pairs() {
            check_margin_domain(i, j, gamma.get(i, j), self.k)?;
        }
        Ok(())
    }
}

/// `γ` must satisfy `0 < γ < 2K` so that `log log₂(4K/γ)` is finite and
/// positive.
fn check_margin_domain(i: usize, j: usize, gamma: f64, k: f64) -> Result<()> {
    if !(gamma > 0.0) || !(gamma < 2.0 * k) {
        return Err(Error::domain(format!(
            "margin gamma[{i}][{j}] = {gamma} outside (0, 2K) = (0, {})",
            2.0 * k
        )));
    }
    Ok(())
}

fn log_log_term(gamma: f64, k: f64) -> f64 {
    (4.0 * k / gamma).log2().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTerms {
    pub i: usize,
    pub j: usize,
    pub gamma: f64,
    /// Each entry below is already weighted by `p(i)`.
    pub rademacher: f64,
    pub log: f64,
    pub probability: f64,
    pub empirical: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rademacher_term: f64,
    pub log_term: f64,
    pub empirical_term: f64,
    pub probability_term: f64,
    pub total: f64,
    pub per_pair: Vec<PairTerms>,
}

pub fn multiclass_margin_bound(params: &BoundParams) -> Result<BoundReport> {
    params.validate()?;
    assemble_bound(params, None)
}

/// Same bound with `L_{0,1}` counted from samples:
/// `Σ_i p(i) Σ_{j≠i} #{x ∈ S_i : (M_i − M_j)ᵀz ≤ γ_{i,j}} / N_i`, with `N_i`
/// the number of class-`i` columns of `z`.
pub fn multiclass_margin_bound_from_samples(
    params: &BoundParams,
    m: &Matrix,
    z: &Matrix,
    labels: &[usize],
) -> Result<BoundReport> {
    params.validate()?;
    if m.cols() != params.classes || m.rows() != z.rows() {
        return Err(Error::domain(
            "classifier shape does not match the bound parameters",
        ));
    }
    validate_labels(z, labels, params.classes)?;
    let gamma = params.margin_matrix()?;
    let c = params.classes;
    let mut hits = Matrix::zeros(c, c);
    let mut counts = vec![0usize; c];
    for (col, &i) in labels.iter().enumerate() {
        counts[i] += 1;
        let x = z.column(col);
        for j in (0..c).filter(|&j| j != i) {
            let v: f64 = (0..m.rows()).map(|r| (m[(r, i)] - m[(r, j)]) * x[r]).sum();
            if v <= gamma.get(i, j) {
                hits[(i, j)] += 1.0;
            }
        }
    }
    let fractions = Matrix::from_fn(c, c, |i, j| hits[(i, j)] / counts[i] as f64);
    assemble_bound(params, Some(&fractions))
}

fn assemble_bound(params: &BoundParams, empirical: Option<&Matrix>) -> Result<BoundReport> {
    let gamma = params.margin_matrix()?;
    let c = params.classes as f64;
    let confidence = (c * (c - 1.0) / params.delta).ln();
    let mut per_pair = Vec::new();
    for (i, j) in gamma.pairs() {
        let g = gamma.get(i, j);
        let (p, n) = (params.p[i], params.n[i]);
        per_pair.push(PairTerms {
            i,
            j,
            gamma: g,
            rademacher: p * params.rademacher[i] / g,
            log: p * (log_log_term(g, params.k) / n).sqrt(),
            probability: p * (confidence / (2.0 * n)).sqrt(),
            empirical: empirical.map(|e| p * e[(i, j)]),
        });
    }
    let rademacher_term = per_pair.iter().map(|t| t.rademacher).sum();
    let log_term = per_pair.iter().map(|t| t.log).sum();
    let probability_term = per_pair.iter().map(|t| t.probability).sum();
    let empirical_term = match empirical {
        Some(_) => per_pair.iter().filter_map(|t| t.empirical).sum(),
        None => params.empirical.unwrap_or(0.0),
    };
    Ok(BoundReport {
        rademacher_term,
        log_term,
        empirical_term,
        probability_term,
        total: rademacher_term + log_term + empirical_term + probability_term,
        per_pair,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseMarginCheck {
    /// `Σ_{i≠j} 1/γ_{i,j}`
    pub sum_form: f64,
    /// `C(C−1) max_{i≠j} 1/γ_{i,j}`
    pub max_form: f64,
    pub holds: bool,
}

/// `Σ 1/γ ≤ C(C−1) max 1/γ` for a margin matrix with positive margins.
pub fn inverse_margin_check(gamma: &MarginMatrix) -> Result<InverseMarginCheck> {
    if !gamma.is_separable() {
        return Err(Error::domain("inverse-margin check needs positive margins"));
    }
    let c = gamma.classes() as f64;
    let inverses: Vec<f64> = gamma.pairs().map(|(i, j)| 1.0 / gamma.get(i, j)).collect();
    let sum_form: f64 = inverses.iter().sum();
    let max_form = c * (c - 1.0) * inverses.iter().copied().fold(0.0, f64::max);
    Ok(InverseMarginCheck {
        sum_form,
        max_form,
        holds: sum_form <= max_form * (1.0 + 1e-12),
    })
}

/// Balanced-case check: requires uniform `p` and equal `N_i`.
pub fn balanced_bound_check(params: &BoundParams) -> Result<InverseMarginCheck> {
    params.validate()?;
    let c = params.classes as f64;
    if params.p.iter().any(|&p| (p - 1.0 / c).abs() > 1e-12) {
        return Err(Error::domain("balanced check needs p(i) = 1/C"));
    }
    if params.n.iter().any(|&n| n != params.n[0]) {
        return Err(Error::domain("balanced check needs equal N_i"));
    }
    inverse_margin_check(&params.margin_matrix()?)
}

/// Imbalanced setting: classes `0..C1` are majority classes with `R·N2`
/// samples each, classes `C1..C` are minority classes with `N2` each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorityParams {
    #[serde(rename = "C")]
    pub classes: usize,
    #[serde(rename = "C1")]
    pub majority: usize,
    #[serde(rename = "R")]
    pub ratio: f64,
    #[serde(rename = "N2")]
    pub n_minor: f64,
    pub rademacher: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

impl MinorityParams {
    fn validate(&self) -> Result<()> {
        if !(self.majority < self.classes) {
            return Err(Error::domain("need C1 < C"));
        }
        if !(self.ratio >= 1.0) || !self.ratio.is_finite() {
            return Err(Error::domain(format!(
                "imbalance ratio must be >= 1, got {}",
                self.ratio
            )));
        }
        if !(self.n_minor >= 1.0) {
            return Err(Error::domain("N2 must be at least 1"));
        }
        if !(self.k > 0.0) || !(self.rademacher >= 0.0) {
            return Err(Error::domain(
                "K must be positive and the Rademacher value non-negative",
            ));
        }
        Ok(())
    }

    /// `1 / (C1·R + C − C1)`
    pub fn prefactor(&self) -> f64 {
        1.0 / (self.majority as f64 * self.ratio + (self.classes - self.majority) as f64)
    }

    /// One minority-pair term at margin `gamma`.
    pub fn term(&self, gamma: f64) -> f64 {
        self.prefactor()
            * (self.rademacher / gamma + (log_log_term(gamma, self.k) / self.n_minor).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorityReport {
    pub prefactor: f64,
    pub terms: Vec<(usize, usize, f64)>,
    pub total: f64,
}

/// The margin-bound terms between pairs of minority classes.
pub fn minority_terms(params: &MinorityParams, gamma: &MarginMatrix) -> Result<MinorityReport> {
    params.validate()?;
    if gamma.classes() != params.classes {
        return Err(Error::domain("margin matrix must be C x C"));
    }
    let minority = params.majority..params.classes;
    let mut terms = Vec::new();
    for i in minority.clone() {
        for j in minority.clone().filter(|&j| j != i) {
            let g = gamma.get(i, j);
            check_margin_domain(i, j, g, params.k)?;
            terms.push((i, j, params.term(g)));
        }
    }
    Ok(MinorityReport {
        prefactor: params.prefactor(),
        total: terms.iter().map(|t| t.2).sum(),
        terms,
    })
}

/// Smallest margin whose minority-pair term stays within `budget`. The term
/// decreases in `γ` on `(0, 2K)`, so this is the root of `term(γ) = budget`
/// found by bisection.
pub fn admissible_minority_margin(params: &MinorityParams, budget: f64) -> Result<f64> {
    params.validate()?;
    let (mut lo, mut hi) = (0.0, 2.0 * params.k);
    let floor = params.term(hi * (1.0 - 1e-15));
    if !(budget > floor) {
        return Err(Error::domain(format!(
            "budget {budget} is below the smallest attainable term {floor}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if params.term(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Size of a greedy ε-net: starting from the first point, repeatedly take the
/// uncovered point farthest from the chosen centers until every point is
/// within distance `< eps` of a center. An upper bound on the covering
/// number of the point set.
pub fn covering_number_greedy(points: &[Vec<f64>], eps: f64) -> Result<usize> {
    let first = points
        .first()
        .ok_or_else(|| Error::domain("covering number of an empty set"))?;
    if !(eps > 0.0) {
        return Err(Error::domain(format!(
            "cover radius must be positive, got {eps}"
        )));
    }
    if points.iter().any(|p| p.len() != first.len()) {
        return Err(Error::domain("points have mixed dimensions"));
    }
    let mut nearest: Vec<f64> = points.iter().map(|p| linalg::distance(p, first)).collect();
    let mut centers = 1;
    loop {
        let (far, &gap) = nearest
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty");
        if gap < eps {
            return Ok(centers);
        }
        centers += 1;
        let center = &points[far];
        for (n, p) in nearest.iter_mut().zip(points) {
            *n = n.min(linalg::distance(p, center));
        }
    }
}

/// Per-class point clouds standing in for class supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSupports {
    pub supports: Vec<Vec<Vec<f64>>>,
}

impl ClassSupports {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: ClassSupports =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if let Some(i) = s.supports.iter().position(Vec::is_empty) {
            return Err(Error::Schema(format!("support of class {i} is empty")));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBreakdown {
    pub bound: f64,
    /// `max_{j≠i} 𝒩(r_{i,j}, S_i)` per class.
    pub covers: Vec<usize>,
    pub radii: Vec<Vec<f64>>,
}

/// Accuracy lower bound with the frame columns rescaled to norm `rho`.
pub fn accuracy_bound_breakdown(
    frame: &Frame,
    rho: f64,
    lipschitz: f64,
    supports: &[Vec<Vec<f64>>],
    n_total: usize,
) -> Result<AccuracyBreakdown> {
    let c = frame.c();
    if c < 2 {
        return Err(Error::domain("accuracy bound needs C >= 2"));
    }
    if supports.len() != c {
        return Err(Error::domain(format!(
            "{} class supports for C={c}",
            supports.len()
        )));
    }
    if !(rho > 0.0) || !(lipschitz > 0.0) || n_total == 0 {
        return Err(Error::domain("rho, L and N must be positive"));
    }
    let corr = correlation_matrix(frame.columns());
    let rho2 = rho * rho;
    let mut radii = vec![vec![0.0; c]; c];
    for i in 0..c {
        for j in (0..c).filter(|&j| j != i) {
            let gap = rho2 - rho2 * corr[(i, j)];
            if !(gap > 0.0) {
                return Err(Error::domain(format!(
                    "cover radius for pair ({i}, {j}) is not positive: columns are parallel"
                )));
            }
            radii[i][j] = (gap / 2.0).sqrt() / lipschitz;
        }
    }
    let covers = (0..c)
        .map(|i| {
            (0..c)
                .filter(|&j| j != i)
                .map(|j| covering_number_greedy(&supports[i], radii[i][j]))
                .try_fold(0, |m, n| n.map(|n| m.max(n)))
        })
        .collect::<Result<Vec<usize>>>()?;
    let total: usize = covers.iter().sum();
    Ok(AccuracyBreakdown {
        bound: 1.0 - total as f64 / (2.0 * n_total as f64),
        covers,
        radii,
    })
}

pub fn accuracy_lower_bound(
    frame: &Frame,
    rho: f64,
    lipschitz: f64,
    supports: &[Vec<Vec<f64>>],
    n_total: usize,
) -> Result<f64> {
    accuracy_bound_breakdown(frame, rho, lipschitz, supports, n_total).map(|b| b.bound)
}

/// Accuracy bound for each Type II equivalent frame `M·P`, with the class
/// supports held fixed.
pub fn permutation_bound_sweep(
    frame: &Frame,
    supports: &[Vec<Vec<f64>>],
    rho: f64,
    lipschitz: f64,
    n_total: usize,
    permutations: &[Matrix],
) -> Result<Vec<f64>> {
    permutations
        .iter()
        .map(|p| {
            let permuted = frames::transform_type2(frame, p)?;
            accuracy_lower_bound(&permuted, rho, lipschitz, supports, n_total)
        })
        .collect()
}

/// `max − min` of a non-empty list of bound values.
pub fn bound_range(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() {
        0.0
    } else {
        max - min
    }
}
