//! Small statistical helpers shared by the verification suites.

/// Sigma multiplier used for every statistical verdict in the toolkit.
pub const FOUR_SIGMA: f64 = 4.0;

/// Standard error of a Bernoulli frequency estimate.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// True when an empirical frequency sits within 4σ of the analytic value
/// under the binomial model.
pub fn within_four_sigma(observed: f64, expected: f64, n: usize) -> bool {
    let sigma = binomial_sigma(expected, n).max(f64::EPSILON);
    (observed - expected).abs() <= FOUR_SIGMA * sigma
}

/// Mean and standard error of the mean.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    assert!(n > 0);
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Pearson chi-square statistic for an r×c contingency table of counts.
/// Rows or columns with zero totals contribute nothing.
pub fn chi2_contingency(table: &[Vec<u64>]) -> f64 {
    let rows = table.len();
    let cols = table[0].len();
    let row_tot: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_tot: Vec<f64> =
        (0..cols).map(|c| table.iter().map(|r| r[c]).sum::<u64>() as f64).collect();
    let grand: f64 = row_tot.iter().sum();
    if grand == 0.0 {
        return 0.0;
    }
    let mut stat = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let expected = row_tot[i] * col_tot[j] / grand;
            if expected > 0.0 {
                let diff = table[i][j] as f64 - expected;
                stat += diff * diff / expected;
            }
        }
    }
    stat
}

/// Chi-square quantiles at the two-sided-4σ significance level
/// (p = 2·(1−Φ(4)) ≈ 6.3342e-5) for small degrees of freedom.
pub fn chi2_four_sigma_threshold(dof: usize) -> f64 {
    match dof {
        1 => 16.0,
        2 => 19.3339,
        3 => 22.0613,
        4 => 24.5021,
        _ => panic!("threshold table covers 1..=4 degrees of freedom"),
    }
}

/// Sample Pearson correlation of two binary sequences.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx).powi(2);
        vy += (y - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx.sqrt() * vy.sqrt())
}
