//! Gauss-Legendre rules and the split composite rule used for integral representations.

use super::MatfunError;

/// Ratio between consecutive panel breakpoints.
pub const PANEL_GRADING: f64 = 0.2;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss rule split into two halves of `n_nodes / 2` nodes, each spread over `panels`
/// panels of `(0, 1)` graded geometrically toward 0, where the substituted integrands carry
/// their fractional-power terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub n_nodes: usize,
    pub panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { n_nodes: 400, panels: 8 }
    }
}

impl QuadratureSpec {
    pub fn new(n_nodes: usize, panels: usize) -> Result<Self, MatfunError> {
        let spec = Self { n_nodes, panels };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), MatfunError> {
        if self.n_nodes < 8 || self.panels == 0 || self.n_nodes < 2 * self.panels {
            return Err(MatfunError::TooFewNodes { n_nodes: self.n_nodes, panels: self.panels });
        }
        Ok(())
    }

    pub fn nodes_per_panel(&self) -> usize {
        (self.n_nodes / 2).div_ceil(self.panels)
    }

    /// Panel breakpoints `0, g^(P-1), ..., g, 1`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        out.extend((1..=self.panels).map(|k| PANEL_GRADING.powi((self.panels - k) as i32)));
        out
    }

    /// Nodes and weights of one half on `(0, 1)`.
    pub fn unit_rule(&self) -> Vec<(f64, f64)> {
        let per = self.nodes_per_panel();
        let (x, w) = gauss_legendre(per);
        let mut out = Vec::with_capacity(per * self.panels);
        for edge in self.breakpoints().windows(2) {
            let (left, width) = (edge[0], edge[1] - edge[0]);
            for (xi, wi) in x.iter().zip(&w) {
                out.push((left + 0.5 * width * (xi + 1.0), 0.5 * width * wi));
            }
        }
        out
    }

    pub fn doubled(&self) -> Self {
        Self { n_nodes: 2 * self.n_nodes, panels: self.panels }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 25] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn unit_rule_sums_to_one() {
        let rule = QuadratureSpec::default().unit_rule();
        assert_eq!(rule.len(), 200);
        let total: f64 = rule.iter().map(|r| r.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(QuadratureSpec::new(6, 1).is_err());
    }
}
