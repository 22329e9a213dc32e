//! Straight-line least squares for log–log rate fits.

use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// Half-width of the two-sided 95% confidence interval on the slope;
    /// `NaN` with fewer than three points.
    pub band: f64,
}

/// Ordinary least squares through `(x, y)` pairs. Needs two distinct `x`.
pub fn least_squares(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    assert!(points.len() >= 2, "line fit needs at least two points");
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let band = if points.len() > 2 {
        let dof = n - 2.0;
        let se = (ssr / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::NAN);
        t * se
    } else {
        f64::NAN
    };
    LineFit {
        slope,
        intercept,
        residual: (ssr / n).sqrt(),
        band,
    }
}

/// Slope of `log value` against `log parameter`.
pub fn log_log(points: &[(f64, f64)]) -> LineFit {
    let logs: Vec<(f64, f64)> = points.iter().map(|(p, v)| (p.ln(), v.ln())).collect();
    least_squares(&logs)
}
