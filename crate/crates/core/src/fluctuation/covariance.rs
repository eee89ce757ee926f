use nalgebra::{DMatrix, DVector};

use super::linear::{LinearizedSystem, Mat6, DIM};
use super::{stability, VarianceMethod, VarianceResult, Y_C};
use crate::error::{Error, Result};

const UNKNOWNS: usize = DIM * (DIM + 1) / 2;

fn packed(i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    r * DIM - r * (r + 1) / 2 + c
}

/// Steady-state covariance V solving A·V + V·Aᵀ + D = 0.
///
/// The 21 independent entries of the symmetric V are obtained from one dense
/// LU solve; A and D are normalized by max|A| first, which leaves V unchanged.
pub fn covariance_lyapunov(lin: &LinearizedSystem) -> Result<Mat6> {
    let report = stability(lin);
    if !report.stable {
        return Err(Error::Unstable {
            margin: report.margin,
        });
    }
    let scale = lin.scale();
    let a = lin.a / scale;
    let d = lin.d / scale;

    let mut m = DMatrix::<f64>::zeros(UNKNOWNS, UNKNOWNS);
    let mut rhs = DVector::<f64>::zeros(UNKNOWNS);
    for i in 0..DIM {
        for j in i..DIM {
            let row = packed(i, j);
            // Σ_k A_ik V_kj + V_ik A_jk = −D_ij
            for k in 0..DIM {
                m[(row, packed(k, j))] += a[(i, k)];
                m[(row, packed(i, k))] += a[(j, k)];
            }
            rhs[row] = -d[(i, j)];
        }
    }
    let sol = m.lu().solve(&rhs).ok_or_else(|| Error::Solver {
        reason: "singular Lyapunov system".into(),
        diagnostics: format!("stability margin {:.3e}", report.margin),
    })?;
    Ok(Mat6::from_fn(|i, j| sol[packed(i, j)]))
}

pub fn variance_lyapunov(lin: &LinearizedSystem) -> Result<VarianceResult> {
    let v = covariance_lyapunov(lin)?;
    Ok(VarianceResult {
        variance: v[(Y_C, Y_C)],
        method: VarianceMethod::Lyapunov,
        diagnostics: None,
    })
}
