//! Frames with their correlation checks and equivalence transforms.
//!
//! A frame is stored as its analysis matrix: a `d×C` matrix whose columns are
//! the frame vectors. Correlations are always evaluated on unit-normalized
//! copies of the columns, so a frame carrying the norms of a trained
//! classifier reports the same correlations as its normalized version.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::RngSeed;

/// Columns with norm at or below this are rejected as zero vectors.
pub const ZERO_COLUMN_NORM: f64 = 1e-12;

/// Tolerance used by the frame property checks unless overridden.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

const UNIT_NORM_TOLERANCE: f64 = 1e-9;
const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    columns: Matrix,
    normalized: bool,
    pub meta: BTreeMap<String, String>,
}

/// Whether correlations keep their sign (the neural-collapse objective) or
/// are taken in absolute value (the frame-theory coherence).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMode {
    Signed,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub d: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub is_uniform: bool,
    pub is_unit_norm: bool,
    pub is_tight: bool,
    pub is_equiangular: bool,
    pub rank: usize,
    pub max_corr_signed: f64,
    pub max_corr_absolute: f64,
    pub welch_bound: Option<f64>,
    pub welch_gap: Option<f64>,
    pub tolerance: f64,
}

/// Wraps an analysis matrix as a frame, optionally rescaling every column to
/// unit norm. The input column norms are kept in `meta["input_norms"]`.
pub fn make_frame(columns: Matrix, normalize: bool) -> Result<Frame> {
    let norms: Vec<f64> = (0..columns.cols())
        .map(|j| columns.column_norm(j))
        .collect();
    if let Some((index, &norm)) = norms
        .iter()
        .enumerate()
        .find(|(_, &n)| !(n > ZERO_COLUMN_NORM))
    {
        return Err(Error::ZeroColumn { index, norm });
    }
    let columns = if normalize {
        normalize_columns(&columns)
    } else {
        columns
    };
    let mut meta = BTreeMap::new();
    meta.insert(
        "input_norms".to_string(),
        serde_json::to_string(&norms).expect("f64 slices serialize"),
    );
    Ok(Frame {
        columns,
        normalized: normalize,
        meta,
    })
}

fn normalize_columns(m: &Matrix) -> Matrix {
    let norms: Vec<f64> = (0..m.cols()).map(|j| m.column_norm(j)).collect();
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] / norms[j])
}

impl Frame {
    pub fn d(&self) -> usize {
        self.columns.rows()
    }

    pub fn c(&self) -> usize {
        self.columns.cols()
    }

    pub fn columns(&self) -> &Matrix {
        &self.columns
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.columns.column(j)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.c()).map(|j| self.columns.column_norm(j)).collect()
    }

    /// Copy with every column rescaled to unit norm.
    pub fn unit_columns(&self) -> Matrix {
        normalize_columns(&self.columns)
    }

    /// Copy with every column rescaled to norm `rho`.
    pub fn scaled_to(&self, rho: f64) -> Matrix {
        self.unit_columns().scale(rho)
    }

    fn append_transform(&mut self, entry: &str) {
        let log = self.meta.entry("transforms".to_string()).or_default();
        if !log.is_empty() {
            log.push(';');
        }
        log.push_str(entry);
    }

    pub fn to_file(&self) -> FrameFile {
        FrameFile {
            d: self.d(),
            c: self.c(),
            columns: self.columns.columns(),
            normalized: self.normalized,
            meta: self.meta.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("frame serializes")
    }

    pub fn from_json(text: &str) -> Result<Frame> {
        let file: FrameFile =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        file.into_frame()
    }
}

/// On-disk frame document. Columns are listed frame vector by frame vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameFile {
    pub d: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub columns: Vec<Vec<f64>>,
    pub normalized: bool,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl FrameFile {
    pub fn into_frame(self) -> Result<Frame> {
        if self.d == 0 || self.c == 0 {
            return Err(Error::Schema(format!(
                "d and C must be positive, got d={} C={}",
                self.d, self.c
            )));
        }
        if self.columns.len() != self.c {
            return Err(Error::Schema(format!(
                "C={} but {} columns listed",
                self.c,
                self.columns.len()
            )));
        }
        if let Some(j) = self.columns.iter().position(|c| c.len() != self.d) {
            return Err(Error::Schema(format!(
                "column {j} has {} entries, expected d={}",
                self.columns[j].len(),
                self.d
            )));
        }
        let columns =
            Matrix::from_columns(&self.columns).map_err(|e| Error::Schema(e.to_string()))?;
        for j in 0..columns.cols() {
            let norm = columns.column_norm(j);
            if !(norm > ZERO_COLUMN_NORM) {
                return Err(Error::Schema(format!("column {j} is a zero vector")));
            }
            if self.normalized && (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::Schema(format!(
                    "frame is marked normalized but column {j} has norm {norm}"
                )));
            }
        }
        Ok(Frame {
            columns,
            normalized: self.normalized,
            meta: self.meta,
        })
    }
}

pub fn gram(f: &Frame) -> Matrix {
    let m = &f.columns;
    let c = m.cols();
    let mut g = Matrix::zeros(c, c);
    for i in 0..c {
        for j in i..c {
            let v = m.column_dot(i, j);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Gram matrix of the unit-normalized columns of `m`.
pub(crate) fn correlation_matrix(m: &Matrix) -> Matrix {
    let unit = normalize_columns(m);
    unit.t_matmul(&unit)
}

/// Largest pairwise correlation between distinct columns of `m`, measured on
/// unit-normalized copies.
pub fn max_correlation_of(m: &Matrix, mode: CorrelationMode) -> Result<f64> {
    let c = m.cols();
    if c < 2 {
        return Err(Error::domain(format!(
            "max correlation needs C >= 2, got {c}"
        )));
    }
    if let Some(index) = (0..c).find(|&j| !(m.column_norm(j) > ZERO_COLUMN_NORM)) {
        return Err(Error::ZeroColumn {
            index,
            norm: m.column_norm(index),
        });
    }
    let g = correlation_matrix(m);
    let mut best = f64::NEG_INFINITY;
    for i in 0..c {
        for j in i + 1..c {
            let v = match mode {
                CorrelationMode::Signed => g[(i, j)],
                CorrelationMode::Absolute => g[(i, j)].abs(),
            };
            best = best.max(v);
        }
    }
    Ok(best)
}

pub fn max_correlation(f: &Frame, mode: CorrelationMode) -> Result<f64> {
    max_correlation_of(&f.columns, mode)
}

/// Welch lower bound on the absolute maximal correlation of `C` unit vectors
/// in `ℝ^d`. Absent when `C > d(d+1)/2`; zero when `C ≤ d`.
pub fn welch_bound(d: usize, c: usize) -> Option<f64> {
    if d == 0 || c == 0 || c > d * (d + 1) / 2 {
        return None;
    }
    if c <= d {
        return Some(0.0);
    }
    let (d, c) = (d as f64, c as f64);
    Some(((c - d) / (d * (c - 1.0))).sqrt())
}

pub fn check_frame(f: &Frame, tol: f64) -> Result<FrameReport> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let (d, c) = (f.d(), f.c());
    let norms = f.column_norms();
    let first = norms[0];
    let is_uniform = norms.iter().all(|n| (n - first).abs() <= tol);
    let is_unit_norm = norms.iter().all(|n| (n - 1.0).abs() <= tol);
    let rank = linalg::numerical_rank(&f.columns, tol)?;
    let is_tight = rank == d;

    let (max_corr_signed, max_corr_absolute, is_equiangular) = if c >= 2 {
        let g = correlation_matrix(&f.columns);
        let off: Vec<f64> = (0..c)
            .flat_map(|i| (i + 1..c).map(move |j| (i, j)))
            .map(|(i, j)| g[(i, j)])
            .collect();
        let mean_abs = off.iter().map(|v| v.abs()).sum::<f64>() / off.len() as f64;
        let equiangular = is_unit_norm && off.iter().all(|v| (v.abs() - mean_abs).abs() <= tol);
        let signed = off.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let absolute = off.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (signed, absolute, equiangular)
    } else {
        (0.0, 0.0, is_unit_norm)
    };

    let welch = welch_bound(d, c);
    Ok(FrameReport {
        d,
        c,
        is_uniform,
        is_unit_norm,
        is_tight,
        is_equiangular,
        rank,
        max_corr_signed,
        max_corr_absolute,
        welch_bound: welch,
        welch_gap: welch.map(|w| max_corr_absolute - w),
        tolerance: tol,
    })
}

/// Simplex equiangular tight frame `α R √(C/(C−1)) (I − 𝟙𝟙ᵀ/C)`, with `R` the
/// first `C` columns of a seeded random rotation of `ℝ^d`.
pub fn simplex_etf(d: usize, c: usize, alpha: f64, seed: RngSeed) -> Result<Frame> {
    if c < 2 {
        return Err(Error::domain(format!("simplex ETF needs C >= 2, got {c}")));
    }
    if d < c {
        return Err(Error::domain(format!(
            "simplex ETF needs d >= C, got d={d} C={c}"
        )));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!(
            "simplex ETF scale must be positive, got {alpha}"
        )));
    }
    let rotation = linalg::random_rotation(d, seed)?;
    let r = Matrix::from_fn(d, c, |i, j| rotation[(i, j)]);
    let cf = c as f64;
    let centering = Matrix::from_fn(c, c, |i, j| if i == j { 1.0 } else { 0.0 } - 1.0 / cf);
    let m = r.matmul(&centering).scale(alpha * (cf / (cf - 1.0)).sqrt());
    let mut frame = make_frame(m, false)?;
    frame.meta.insert("generator".into(), "simplex_etf".into());
    frame.meta.insert("seed".into(), seed.0.to_string());
    frame.meta.insert("alpha".into(), alpha.to_string());
    Ok(frame)
}

/// Type I equivalence: left multiplication by an orthogonal `R`.
pub fn transform_type1(f: &Frame, r: &Matrix) -> Result<Frame> {
    if r.rows() != f.d() || r.cols() != f.d() {
        return Err(Error::domain(format!(
            "rotation must be {0}x{0}, got {1}x{2}",
            f.d(),
            r.rows(),
            r.cols()
        )));
    }
    let defect = r.orthogonality_defect();
    if defect > ORTHOGONALITY_TOLERANCE {
        return Err(Error::domain(format!(
            "matrix is not orthogonal (max |RᵀR − I| = {defect:e})"
        )));
    }
    let mut out = f.clone();
    out.columns = r.matmul(&f.columns);
    out.append_transform("type1");
    Ok(out)
}

/// Type II equivalence: right multiplication by a permutation `P`, so output
/// column `j` is input column `i` where `P[i][j] = 1`.
pub fn transform_type2(f: &Frame, p: &Matrix) -> Result<Frame> {
    if p.rows() != f.c() || p.cols() != f.c() {
        return Err(Error::domain(format!(
            "permutation must be {0}x{0}, got {1}x{2}",
            f.c(),
            p.rows(),
            p.cols()
        )));
    }
    let perm = linalg::permutation_of(p)
        .ok_or_else(|| Error::domain("matrix is not a 0/1 permutation matrix"))?;
    let mut out = f.clone();
    out.columns = f.columns.matmul(p);
    let order: Vec<String> = perm.iter().map(usize::to_string).collect();
    out.append_transform(&format!("type2[{}]", order.join(",")));
    Ok(out)
}

/// Three unit vectors at 120° in the plane.
pub fn mercedes_frame() -> Frame {
    let cols: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            let t = std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::TAU / 3.0;
            vec![t.cos(), t.sin()]
        })
        .collect();
    make_frame(Matrix::from_columns(&cols).expect("well-formed"), true).expect("unit columns")
}

/// `[e1, e2, −e1, −e2]` in the plane.
pub fn cross_frame() -> Frame {
    let cols = vec![
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![-1.0, 0.0],
        vec![0.0, -1.0],
    ];
    make_frame(Matrix::from_columns(&cols).expect("well-formed"), true).expect("unit columns")
}
