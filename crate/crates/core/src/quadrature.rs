//! Small quadrature helpers not covered by `gauss-quad`.

use num_complex::Complex64;

/// A tanh-sinh node on `[a, b]`, carrying its distances to both endpoints so
/// that integrands with endpoint singularities can be evaluated without
/// cancellation.
#[derive(Clone, Copy, Debug)]
pub struct DeNode {
    pub x: f64,
    pub dist_a: f64,
    pub dist_b: f64,
    pub weight: f64,
}

/// Tanh-sinh nodes with step `h`, truncated at `|t| ≤ t_max`.
pub fn tanh_sinh_nodes(a: f64, b: f64, h: f64, t_max: f64) -> Vec<DeNode> {
    let half = 0.5 * (b - a);
    let n = (t_max / h).ceil() as i64;
    let mut out = Vec::with_capacity((2 * n + 1) as usize);
    for i in -n..=n {
        let t = i as f64 * h;
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let dist_a = half * 2.0 / (1.0 + (-2.0 * u).exp());
        let dist_b = half * 2.0 / (1.0 + (2.0 * u).exp());
        let weight = h * half * std::f64::consts::FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
        if weight == 0.0 || dist_a == 0.0 || dist_b == 0.0 {
            continue;
        }
        let x = if t < 0.0 { a + dist_a } else { b - dist_b };
        out.push(DeNode {
            x,
            dist_a,
            dist_b,
            weight,
        });
    }
    out
}

/// Neville extrapolation to `x = 0` of a sequence of samples `(x_i, y_i)`;
/// returns the diagonal `P_{0..i}(0)` for each `i`.
pub fn neville_to_zero(xs: &[f64], ys: &[Complex64]) -> Vec<Complex64> {
    let n = xs.len();
    let mut table: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![ys[i]];
        for j in 1..=i {
            let lo = xs[i - j];
            let hi = xs[i];
            let v = (row[j - 1] * lo - table[i - 1][j - 1] * hi) / (lo - hi);
            row.push(v);
        }
        diag.push(row[i]);
        table.push(row);
    }
    diag
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        // ∫_0^1 dx/√(1−x) = 2, evaluated through the endpoint distance.
        for level in 3..8 {
            let h = 0.5f64.powi(level);
            let s: f64 = tanh_sinh_nodes(0.0, 1.0, h, 4.0).iter().map(|n| n.weight / n.dist_b.sqrt()).sum();
            if level >= 6 {
                assert!((s - 2.0).abs() < 1e-13, "level {level}: {s}");
            }
        }
        let s: f64 = tanh_sinh_nodes(-1.0, 2.0, 1.0 / 64.0, 4.0).iter().map(|n| n.weight * n.x.exp()).sum();
        assert!((s - (2f64.exp() - (-1f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn neville_recovers_polynomials_exactly() {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<Complex64> = xs.iter().map(|&x| Complex64::new(1.5 - 2.0 * x + x * x * x, x)).collect();
        let d = neville_to_zero(&xs, &ys);
        assert!((d[3] - Complex64::new(1.5, 0.0)).norm() < 1e-13);
    }
}
