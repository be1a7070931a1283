//! Ridge-regularized quadratic response surface over the five tunable
//! parameters.

use nalgebra::{DMatrix, DVector};

use super::{SurfaceError, SurfaceMetric};
use crate::logstore::{TransferLogEntry, TunableParams};

/// Number of quadratic features: intercept, 5 linear, 5 square, 10 cross.
pub const FEATURE_COUNT: usize = 21;

fn coords(theta: &TunableParams) -> [f64; 5] {
    [
        theta.cc as f64,
        theta.p as f64,
        theta.pp as f64,
        theta.cpu_num as f64,
        theta.cpu_freq_ghz,
    ]
}

fn features(theta: &TunableParams) -> [f64; FEATURE_COUNT] {
    let x = coords(theta);
    let mut out = [0.0; FEATURE_COUNT];
    out[0] = 1.0;
    out[1..6].copy_from_slice(&x);
    for i in 0..5 {
        out[6 + i] = x[i] * x[i];
    }
    let mut k = 11;
    for i in 0..5 {
        for j in (i + 1)..5 {
            out[k] = x[i] * x[j];
            k += 1;
        }
    }
    out
}

/// Fitted quadratic in the five parameter coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFit {
    coefficients: Vec<f64>,
}

impl QuadraticFit {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn predict(&self, theta: &TunableParams) -> f64 {
        features(theta)
            .iter()
            .zip(&self.coefficients)
            .map(|(f, c)| f * c)
            .sum()
    }
}

/// Least-squares fit of the chosen metric with uniform ridge weight on
/// all coefficients: solves `(X'X + w I) b = X'y`.
pub fn fit_quadratic(
    members: &[TransferLogEntry],
    metric: SurfaceMetric,
    ridge_weight: f64,
) -> Result<QuadraticFit, SurfaceError> {
    if members.is_empty() {
        return Err(SurfaceError::EmptyLogs);
    }
    let n = members.len();
    let mut design = DMatrix::zeros(n, FEATURE_COUNT);
    let mut response = DVector::zeros(n);
    for (row, entry) in members.iter().enumerate() {
        for (col, f) in features(&entry.params).iter().enumerate() {
            design[(row, col)] = *f;
        }
        response[row] = match metric {
            SurfaceMetric::Throughput => entry.throughput_mbps,
            SurfaceMetric::Energy => entry.energy_j,
        };
    }
    let gram = design.transpose() * &design
        + DMatrix::identity(FEATURE_COUNT, FEATURE_COUNT) * ridge_weight;
    let rhs = design.transpose() * response;
    let solution = gram
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .or_else(|| {
            (design.transpose() * &design
                + DMatrix::identity(FEATURE_COUNT, FEATURE_COUNT) * ridge_weight)
                .lu()
                .solve(&rhs)
        })
        .ok_or_else(|| SurfaceError::FitFailed("normal equations are singular".into()))?;
    Ok(QuadraticFit {
        coefficients: solution.iter().copied().collect(),
    })
}

/// Coordinate-wise bounding box of the member parameter vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBox {
    lo: [f64; 5],
    hi: [f64; 5],
}

impl ThetaBox {
    pub fn contains(&self, theta: &TunableParams) -> bool {
        let x = coords(theta);
        (0..5).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }
}

pub fn theta_box(members: &[TransferLogEntry]) -> ThetaBox {
    let mut lo = [f64::INFINITY; 5];
    let mut hi = [f64::NEG_INFINITY; 5];
    for entry in members {
        let x = coords(&entry.params);
        for i in 0..5 {
            lo[i] = lo[i].min(x[i]);
            hi[i] = hi[i].max(x[i]);
        }
    }
    ThetaBox { lo, hi }
}
