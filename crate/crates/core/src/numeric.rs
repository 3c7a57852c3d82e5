//! Order-deterministic summation and sample moments.

/// Pairwise summation over fixed-size blocks. The result depends only on the
/// input order, never on how the caller schedules work.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Population variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / xs.len() as f64
}

/// Shape summary of a sample (population moments).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Moments {
        let n = xs.len();
        let m = mean(xs);
        let centered: Vec<f64> = xs.iter().map(|x| x - m).collect();
        let pow = |k: i32| pairwise_sum(&centered.iter().map(|c| c.powi(k)).collect::<Vec<_>>()) / n as f64;
        let m2 = pow(2);
        let (skewness, excess_kurtosis) = if m2 > 0.0 {
            (pow(3) / m2.powf(1.5), pow(4) / (m2 * m2) - 3.0)
        } else {
            (0.0, 0.0)
        };
        Moments {
            n,
            mean: m,
            variance: m2,
            skewness,
            excess_kurtosis,
        }
    }

    /// Jarque–Bera statistic `n/6 · (S² + K²/4)`.
    pub fn jarque_bera(&self) -> f64 {
        self.n as f64 / 6.0 * (self.skewness.powi(2) + self.excess_kurtosis.powi(2) / 4.0)
    }
}
