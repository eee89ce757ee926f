//! Stability of the drift matrix, by eigenvalues and by the Routh-Hurwitz test.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dd::Dd;
use super::linear::{LinearizedSystem, Mat6, DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouthVerdict {
    Stable,
    Unstable,
    /// A zero pivot appeared in the Routh array (marginal case).
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eigenvalues: Vec<Complex64>,
    pub stable: bool,
    /// Largest real part, rad/s.
    pub margin: f64,
    pub routh_hurwitz: RouthVerdict,
}

impl StabilityReport {
    pub fn routh_hurwitz_stable(&self) -> Option<bool> {
        match self.routh_hurwitz {
            RouthVerdict::Stable => Some(true),
            RouthVerdict::Unstable => Some(false),
            RouthVerdict::Indeterminate => None,
        }
    }
}

pub fn stability(lin: &LinearizedSystem) -> StabilityReport {
    let scale = lin.scale();
    let a = lin.a / scale;

    let mut eigenvalues: Vec<Complex64> = a
        .complex_eigenvalues()
        .iter()
        .map(|z| {
            // Real parts at round-off level are the imaginary axis.
            let re = if z.re.abs() <= 64.0 * f64::EPSILON {
                0.0
            } else {
                z.re
            };
            Complex64::new(re * scale, z.im * scale)
        })
        .collect();
    eigenvalues.sort_by(|x, y| y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im)));
    let margin = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);

    StabilityReport {
        stable: margin < 0.0,
        margin,
        routh_hurwitz: routh_hurwitz(&characteristic_polynomial(&a)),
        eigenvalues,
    }
}

/// Monic characteristic polynomial coefficients [1, c₁, …, c₆] of det(λI − A),
/// highest power first, by the Faddeev-LeVerrier recursion in double-double.
#[allow(clippy::needless_range_loop)]
pub(crate) fn characteristic_polynomial(a: &Mat6) -> [Dd; DIM + 1] {
    let ad: [[Dd; DIM]; DIM] =
        std::array::from_fn(|i| std::array::from_fn(|j| Dd::from(a[(i, j)])));
    let mut coeffs = [Dd::ZERO; DIM + 1];
    coeffs[0] = Dd::from(1.0);
    // M_1 = I; c_k = −tr(A·M_k)/k; M_{k+1} = A·M_k + c_k·I
    let mut m: [[Dd; DIM]; DIM] =
        std::array::from_fn(|i| std::array::from_fn(|j| Dd::from(if i == j { 1.0 } else { 0.0 })));
    for k in 1..=DIM {
        let mut am = [[Dd::ZERO; DIM]; DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                let mut acc = Dd::ZERO;
                for l in 0..DIM {
                    acc = acc + ad[i][l] * m[l][j];
                }
                am[i][j] = acc;
            }
        }
        let mut trace = Dd::ZERO;
        for (i, row) in am.iter().enumerate() {
            trace = trace + row[i];
        }
        let c = -(trace / Dd::from(k as f64));
        coeffs[k] = c;
        for (i, row) in am.iter_mut().enumerate() {
            row[i] = row[i] + c;
        }
        m = am;
    }
    coeffs
}

/// Routh array test on a monic polynomial (highest power first).
pub(crate) fn routh_hurwitz(coeffs: &[Dd]) -> RouthVerdict {
    let n = coeffs.len() - 1;
    let width = n / 2 + 1;
    let mut prev: Vec<Dd> = (0..width)
        .map(|j| coeffs.get(2 * j).copied().unwrap_or(Dd::ZERO))
        .collect();
    let mut cur: Vec<Dd> = (0..width)
        .map(|j| coeffs.get(2 * j + 1).copied().unwrap_or(Dd::ZERO))
        .collect();
    let mut all_positive = true;

    for _ in 0..n {
        let size = prev
            .iter()
            .chain(cur.iter())
            .map(|x| x.abs().to_f64())
            .fold(0.0, f64::max);
        let pivot = cur[0];
        if pivot.abs().to_f64() <= 1e-26 * size {
            return RouthVerdict::Indeterminate;
        }
        if pivot < Dd::ZERO {
            all_positive = false;
        }
        let next: Vec<Dd> = (0..width)
            .map(|j| {
                let p1 = prev.get(j + 1).copied().unwrap_or(Dd::ZERO);
                let c1 = cur.get(j + 1).copied().unwrap_or(Dd::ZERO);
                (pivot * p1 - prev[0] * c1) / pivot
            })
            .collect();
        prev = cur;
        cur = next;
    }
    if all_positive {
        RouthVerdict::Stable
    } else {
        RouthVerdict::Unstable
    }
}
