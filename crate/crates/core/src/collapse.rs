//! Neural-collapse metrics over a classifier `M` (`d×C`), features `Z`
//! (`d×N`) and 0-based class labels, one per feature column.
//!
//! All metrics are worst-case (max over samples) scalarizations of the
//! per-sample limit statements, so "collapsed" means every sample collapsed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{self, CorrelationMode};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcReport {
    /// `max ‖z_{y,i} − z̄_y‖`
    pub nc1: f64,
    /// `max ‖z_{y,i} − M_y‖`
    pub nc2: f64,
    /// Max signed pairwise correlation of the normalized classifier columns.
    pub nc3_signed: f64,
    pub nc3_welch_gap: Option<f64>,
    /// Fraction of samples where the linear rule agrees with nearest class mean.
    pub nc4_agreement: f64,
    /// Largest column norm over `M` and `Z`.
    pub ref_norm: f64,
}

/// Labels for the class-major layout: column `i·C + y` holds sample `i` of
/// class `y`.
pub fn balanced_labels(classes: usize, n_per_class: usize) -> Vec<usize> {
    (0..classes * n_per_class)
        .map(|col| col % classes)
        .collect()
}

pub(crate) fn validate_labels(z: &Matrix, labels: &[usize], classes: usize) -> Result<()> {
    if labels.len() != z.cols() {
        return Err(Error::domain(format!(
            "{} labels for {} feature columns",
            labels.len(),
            z.cols()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::domain(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let mut counts = vec![0usize; classes];
    labels.iter().for_each(|&y| counts[y] += 1);
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(Error::domain(format!("class {empty} has no samples")));
    }
    Ok(())
}

fn check_shapes(z: &Matrix, m: &Matrix) -> Result<()> {
    if z.rows() != m.rows() {
        return Err(Error::domain(format!(
            "feature dimension {} does not match classifier dimension {}",
            z.rows(),
            m.rows()
        )));
    }
    Ok(())
}

fn num_classes(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |&y| y + 1)
}

/// Per-class feature means `z̄_y`.
pub fn class_means(z: &Matrix, labels: &[usize], classes: usize) -> Result<Vec<Vec<f64>>> {
    validate_labels(z, labels, classes)?;
    let d = z.rows();
    let mut sums = vec![vec![0.0; d]; classes];
    let mut counts = vec![0usize; classes];
    for (col, &y) in labels.iter().enumerate() {
        counts[y] += 1;
        for i in 0..d {
            sums[y][i] += z[(i, col)];
        }
    }
    for (sum, n) in sums.iter_mut().zip(counts) {
        sum.iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(sums)
}

pub fn nc1_variability(z: &Matrix, labels: &[usize]) -> Result<f64> {
    let classes = num_classes(labels);
    let means = class_means(z, labels, classes)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(col, &y)| linalg::distance(&z.column(col), &means[y]))
        .fold(0.0, f64::max))
}

pub fn nc2_self_duality(z: &Matrix, m: &Matrix, labels: &[usize]) -> Result<f64> {
    check_shapes(z, m)?;
    validate_labels(z, labels, m.cols())?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(col, &y)| linalg::distance(&z.column(col), &m.column(y)))
        .fold(0.0, f64::max))
}

/// Signed maximal classifier correlation, plus its gap to the Welch bound.
///
/// The gap is reported only when the Welch bound exists and every pairwise
/// correlation is non-positive; it is measured with the absolute maximal
/// correlation so it is directly comparable to the bound.
pub fn nc3_frame_gap(m: &Matrix) -> Result<(f64, Option<f64>)> {
    let signed = frames::max_correlation_of(m, CorrelationMode::Signed)?;
    let gap = match frames::welch_bound(m.rows(), m.cols()) {
        Some(w) if signed <= 0.0 => {
            let absolute = frames::max_correlation_of(m, CorrelationMode::Absolute)?;
            Some(absolute - w)
        }
        _ => None,
    };
    Ok((signed, gap))
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, v) in values.enumerate() {
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}

fn argmin_first(values: impl Iterator<Item = f64>) -> usize {
    argmax_first(values.map(|v| -v))
}

pub fn nc4_agreement(z: &Matrix, m: &Matrix, labels: &[usize]) -> Result<f64> {
    check_shapes(z, m)?;
    let classes = m.cols();
    let means = class_means(z, labels, classes)?;
    let agree = (0..z.cols())
        .filter(|&col| {
            let x = z.column(col);
            let linear = argmax_first((0..classes).map(|y| linalg::dot(&m.column(y), &x)));
            let nearest = argmin_first(means.iter().map(|mu| linalg::distance(&x, mu)));
            linear == nearest
        })
        .count();
    Ok(agree as f64 / z.cols() as f64)
}

pub fn max_column_norm(m: &Matrix) -> f64 {
    (0..m.cols()).map(|j| m.column_norm(j)).fold(0.0, f64::max)
}

pub fn gnc_report(m: &Matrix, z: &Matrix, labels: &[usize]) -> Result<NcReport> {
    check_shapes(z, m)?;
    validate_labels(z, labels, m.cols())?;
    let (nc3_signed, nc3_welch_gap) = nc3_frame_gap(m)?;
    Ok(NcReport {
        nc1: nc1_variability(z, labels)?,
        nc2: nc2_self_duality(z, m, labels)?,
        nc3_signed,
        nc3_welch_gap,
        nc4_agreement: nc4_agreement(z, m, labels)?,
        ref_norm: max_column_norm(m).max(max_column_norm(z)),
    })
}
