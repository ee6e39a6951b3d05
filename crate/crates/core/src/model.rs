//! Beliefs, linear models and bounding-box state conversions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gaussian belief over one object's state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        debug_assert_eq!(cov.nrows(), mean.len());
        debug_assert_eq!(cov.ncols(), mean.len());
        Self { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// True when no entry is NaN or infinite.
    pub fn is_finite(&self) -> bool {
        self.mean.iter().chain(self.cov.iter()).all(|x| x.is_finite())
    }
}

/// Linear-Gaussian motion and measurement model.
///
/// `x⁺ = F x + G u + w, w ~ N(0, W)` and `z = H x + v, v ~ N(0, V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(
        f: DMatrix<f64>,
        g: DMatrix<f64>,
        w: DMatrix<f64>,
        h: DMatrix<f64>,
        v: DMatrix<f64>,
    ) -> Result<Self> {
        let n = f.nrows();
        let m = h.nrows();
        let ok = f.is_square()
            && g.nrows() == n
            && w.shape() == (n, n)
            && h.ncols() == n
            && v.shape() == (m, m);
        if !ok {
            return Err(Error::Dimension(format!(
                "F {:?}, G {:?}, W {:?}, H {:?}, V {:?}",
                f.shape(),
                g.shape(),
                w.shape(),
                h.shape(),
                v.shape()
            )));
        }
        Ok(Self { f, g, w, h, v })
    }

    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn meas_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.g.ncols()
    }
}

/// Constant-velocity box model over `[u, v, s, r, u̇, v̇, ṡ]` measured as `[u, v, s, r]`.
pub fn sort_motion_model() -> LinearModel {
    let mut f = DMatrix::identity(7, 7);
    for i in 0..3 {
        f[(i, i + 4)] = 1.0;
    }
    let g = DMatrix::zeros(7, 1);
    let w = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 0.01]));
    let mut h = DMatrix::zeros(4, 7);
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    let v = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 10.0, 10.0]));
    LinearModel { f, g, w, h, v }
}

/// Default diagonal of the initial box covariance: uncertain velocities.
pub const SORT_INITIAL_COV_DIAG: [f64; 7] = [10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4];

/// Axis-aligned box in pixels, `(left, top, width, height)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bbox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl Bbox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        Self { left, top, width, height }
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn is_valid(&self) -> bool {
        self.width > 0.0 && self.height > 0.0 && self.left.is_finite() && self.top.is_finite()
    }
}

/// One detector output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: Bbox,
    pub confidence: f64,
    pub frame: u32,
}

impl Detection {
    pub fn new(bbox: Bbox, confidence: f64, frame: u32) -> Result<Self> {
        if !bbox.is_valid() {
            return Err(Error::InvalidDetection(format!("non-positive box {bbox:?}")));
        }
        if frame < 1 {
            return Err(Error::InvalidDetection("frame index must be >= 1".into()));
        }
        Ok(Self { bbox, confidence, frame })
    }
}

/// `(left, top, width, height)` to `[u, v, s, r]`.
pub fn bbox_to_z(b: &Bbox) -> Result<DVector<f64>> {
    if !(b.width > 0.0 && b.height > 0.0) {
        return Err(Error::InvalidDetection(format!("non-positive box {b:?}")));
    }
    Ok(DVector::from_vec(vec![
        b.left + b.width / 2.0,
        b.top + b.height / 2.0,
        b.width * b.height,
        b.width / b.height,
    ]))
}

/// Inverse of [`bbox_to_z`]; reads the first four entries of `z`.
pub fn z_to_bbox(z: &[f64]) -> Result<Bbox> {
    let (u, v, s, r) = (z[0], z[1], z[2], z[3]);
    if !(s > 0.0 && r > 0.0) {
        return Err(Error::DegenerateState { s, r });
    }
    let width = (s * r).sqrt();
    let height = (s / r).sqrt();
    Ok(Bbox::new(u - width / 2.0, v - height / 2.0, width, height))
}

/// Initial belief for a new box track: zero velocity, diagonal covariance.
pub fn box_initial_belief(b: &Bbox, cov_diag: &[f64; 7]) -> Result<GaussianBelief> {
    let z = bbox_to_z(b)?;
    let mut mean = DVector::zeros(7);
    mean.rows_mut(0, 4).copy_from(&z);
    let cov = DMatrix::from_diagonal(&DVector::from_row_slice(cov_diag));
    Ok(GaussianBelief::new(mean, cov))
}

/// Keeps the predicted area positive: when `s + ṡ ≤ 0` the area is held
/// and its rate zeroed for this step. Call before prediction.
pub fn clamp_box_area_rate(belief: &mut GaussianBelief) {
    if belief.mean[2] + belief.mean[6] <= 0.0 {
        belief.mean[6] = 0.0;
    }
}
