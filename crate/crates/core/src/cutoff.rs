//! Smooth even cutoff in one variable.

/// `C^∞` even function of `y` equal to one for `|y| <= inner` and zero for
/// `|y| >= outer`, built from the classical `exp(-1/t)` bump quotient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothStep {
    inner: f64,
    outer: f64,
}

fn bump(t: f64) -> [f64; 3] {
    if t <= 0.0 {
        return [0.0; 3];
    }
    let f = (-1.0 / t).exp();
    let t2 = t * t;
    [f, f / t2, f * (1.0 - 2.0 * t) / (t2 * t2)]
}

impl SmoothStep {
    pub fn new(inner: f64, outer: f64) -> Self {
        assert!(
            inner >= 0.0 && outer > inner,
            "cutoff needs 0 <= inner < outer"
        );
        Self { inner, outer }
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn value(&self, y: f64) -> f64 {
        self.jet(y)[0]
    }

    /// Value, first and second derivative in `y`.
    pub fn jet(&self, y: f64) -> [f64; 3] {
        let a = y.abs();
        if a <= self.inner {
            return [1.0, 0.0, 0.0];
        }
        if a >= self.outer {
            return [0.0, 0.0, 0.0];
        }
        let width = self.outer - self.inner;
        let u = (a - self.inner) / width;
        let [f, fp, fpp] = bump(1.0 - u);
        let [h, hp, hpp] = bump(u);
        let (f_u, f_uu) = (-fp, fpp);
        let (h_u, h_uu) = (hp, hpp);
        let s = f + h;
        let s_u = f_u + h_u;
        let n = f_u * h - f * h_u;
        let n_u = f_uu * h - f * h_uu;
        let eta = f / s;
        let eta_u = n / (s * s);
        let eta_uu = (n_u * s - 2.0 * n * s_u) / (s * s * s);
        let sign = y.signum();
        [eta, sign * eta_u / width, eta_uu / (width * width)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_and_support() {
        let c = SmoothStep::new(1.0, 2.0);
        assert_eq!(c.jet(0.5), [1.0, 0.0, 0.0]);
        assert_eq!(c.jet(-1.0), [1.0, 0.0, 0.0]);
        assert_eq!(c.jet(2.5), [0.0, 0.0, 0.0]);
        let mid = c.value(1.5);
        assert!((mid - 0.5).abs() < 1e-14);
        assert!((c.value(-1.3) - c.value(1.3)).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_differences() {
        let c = SmoothStep::new(0.5, 1.0);
        let h = 1e-5;
        for &y in &[0.55, 0.7, 0.8, 0.95, -0.6, -0.9] {
            let j = c.jet(y);
            let d1 = (c.value(y + h) - c.value(y - h)) / (2.0 * h);
            let d2 = (c.value(y + h) - 2.0 * c.value(y) + c.value(y - h)) / (h * h);
            assert!((j[1] - d1).abs() < 1e-7, "y={y}: {} vs {}", j[1], d1);
            assert!((j[2] - d2).abs() < 1e-4, "y={y}: {} vs {}", j[2], d2);
        }
    }
}
