//! One ridge-regularized Newton step on a linear score.

use nalgebra::{DMatrix, DVector};

use super::tree::Columns;
use crate::error::{Error, Result};

/// Solve `(XᵀHX + λI')Δ = −Xᵀg` where `X = [1 | features]` and `I'` leaves
/// the intercept unpenalized. Returns `(Δintercept, Δcoefficients)`.
pub(crate) fn newton_step(
    data: &Columns,
    g: &[f64],
    h: &[f64],
    in_sample: Option<&[bool]>,
    l2_reg: f64,
) -> Result<(f64, Vec<f64>)> {
    let p = data.cols.len() + 1;
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    let mut x = vec![1.0; p];
    for i in 0..data.n_rows() {
        if in_sample.is_some_and(|s| !s[i]) {
            continue;
        }
        for (k, c) in data.cols.iter().enumerate() {
            x[k + 1] = c[i];
        }
        for r in 0..p {
            b[r] -= g[i] * x[r];
            let hx = h[i] * x[r];
            for c in r..p {
                a[(r, c)] += hx * x[c];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            a[(r, c)] = a[(c, r)];
        }
        // a whisker of ridge on the intercept keeps the system solvable
        a[(r, r)] += if r == 0 { 1e-12 } else { l2_reg };
    }
    let delta = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::DegenerateData("singular design in linear update".into()))?,
    };
    if delta.iter().any(|d| !d.is_finite()) {
        return Err(Error::DegenerateData("non-finite linear update".into()));
    }
    Ok((delta[0], delta.iter().skip(1).copied().collect()))
}
