//! Deterministic reductions and log-log regression.

use serde::Serialize;

use crate::error::{Error, Result};

/// Sum with a fixed binary tree shape, so the result depends only on the
/// order of `xs`, never on how work was scheduled.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() { 0.0 } else { pairwise_sum(xs) / xs.len() as f64 }
}

/// Standard error of the mean (sample standard deviation / √n).
pub fn stderr(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
}

pub fn rms(xs: &[f64]) -> f64 {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    mean(&sq).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub rows: usize,
}

/// Ordinary least squares of `log y` on `log x`, skipping the first
/// `drop_head` points and any with `y < 1e-12`.
pub fn fit_log_log(points: &[(f64, f64)], drop_head: usize) -> Result<Fit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .skip(drop_head)
        .filter(|(x, y)| *y >= 1e-12 && *x > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = usable.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("{n} usable rows, need at least 4")));
    }
    let nf = n as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("all radii equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = usable.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(Fit { slope, intercept, stderr, rows: n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = (1..10).map(|k| {
            let r = 3f64.powi(k);
            (r, r.powf(1.5))
        }).collect();
        let f = fit_log_log(&pts, 2).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
        assert_eq!(f.rows, 7);
    }

    #[test]
    fn constant_rows() {
        let pts: Vec<_> = (1..8).map(|k| (2f64.powi(k), 0.7)).collect();
        assert!(fit_log_log(&pts, 0).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn insufficient_data() {
        let pts: Vec<_> = (1..6).map(|k| (2f64.powi(k), 1.0)).collect();
        assert!(matches!(fit_log_log(&pts, 2), Err(Error::InsufficientData(_))));
        let zeros: Vec<_> = (1..9).map(|k| (2f64.powi(k), 0.0)).collect();
        assert!(fit_log_log(&zeros, 0).is_err());
    }

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-10);
        assert_eq!(mean(&[]), 0.0);
        assert!((stderr(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
        assert!((rms(&[3.0, -4.0]) - 12.5f64.sqrt()).abs() < 1e-15);
    }
}
