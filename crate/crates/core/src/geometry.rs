//! The symbol `h(x) = Σ sin²(x_j/2)` of the free Hamiltonian, its energy
//! surfaces `M_λ = {h = λ}`, and the geometric coefficients that govern the
//! far field.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{shell_neighbors, LatticePoint};

/// Which boundary value `λ ± i0` of the resolvent is meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LimitSign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl LimitSign {
    pub fn as_f64(self) -> f64 {
        match self {
            LimitSign::Plus => 1.0,
            LimitSign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            LimitSign::Plus => LimitSign::Minus,
            LimitSign::Minus => LimitSign::Plus,
        }
    }
}

/// Position of `λ` relative to the convexity bands `I_d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    /// `(0, 1)` for `d = 2`, `(0, 1/2)` for `d ≥ 3`.
    Low,
    /// Between the two bands; only possible for `d ≥ 3`.
    Middle,
    /// `(1, 2)` for `d = 2`, `(d − 1/2, d)` for `d ≥ 3`.
    High,
}

/// An energy `λ ∈ (0, d) ∖ Z` in dimension `d` together with the limit sign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralParam {
    pub d: usize,
    pub lambda: f64,
    pub sign: LimitSign,
}

impl SpectralParam {
    pub fn new(d: usize, lambda: f64, sign: LimitSign) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid(format!("dimension must be at least 2, got {d}")));
        }
        if !lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite"));
        }
        if (lambda - lambda.round()).abs() < 1e-12 {
            return Err(Error::ThresholdEnergy(lambda));
        }
        if lambda <= 0.0 || lambda >= d as f64 {
            return Err(Error::invalid(format!("lambda = {lambda} lies outside the spectrum (0, {d})")));
        }
        Ok(SpectralParam { d, lambda, sign })
    }

    pub fn plus(d: usize, lambda: f64) -> Result<Self> {
        Self::new(d, lambda, LimitSign::Plus)
    }

    pub fn with_sign(self, sign: LimitSign) -> Self {
        SpectralParam { sign, ..self }
    }

    pub fn band(&self) -> Band {
        let (lo, hi) = band_edges(self.d);
        if self.lambda < lo {
            Band::Low
        } else if self.lambda > hi {
            Band::High
        } else {
            Band::Middle
        }
    }

    pub fn in_i_d(&self) -> bool {
        self.band() != Band::Middle
    }

    pub fn sqrt_lambda(&self) -> f64 {
        self.lambda.sqrt()
    }

    pub fn require_low_band(&self) -> Result<()> {
        match self.band() {
            Band::Low => Ok(()),
            b => Err(Error::Unsupported(format!(
                "lambda = {} (d = {}) is in the {b:?} band; only the low band of I_d is supported here",
                self.lambda, self.d
            ))),
        }
    }
}

/// Upper edge of the low band and lower edge of the high band.
pub fn band_edges(d: usize) -> (f64, f64) {
    if d == 2 {
        (1.0, 1.0)
    } else {
        (0.5, d as f64 - 0.5)
    }
}

/// `h(x) = ½(d − Σ cos x_j) = Σ sin²(x_j/2)`.
pub fn symbol_h(x: &[f64]) -> f64 {
    x.iter().map(|&t| (0.5 * t).sin().powi(2)).sum()
}

/// `∇h(x) = ½ sin x`.
pub fn grad_h(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&t| 0.5 * t.sin()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// A point of `M_λ` with its angular coordinate `θ_j = sin(x_j/2)/√λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
}

/// `x_j = 2 arcsin(√λ θ_j)`.
pub fn surface_point(param: &SpectralParam, theta: &[f64]) -> Result<SurfacePoint> {
    if param.band() == Band::High {
        return Err(Error::Unsupported("the arcsin parametrisation covers the low band only".into()));
    }
    check_dim(param.d, theta.len())?;
    let s = param.sqrt_lambda();
    let x = theta
        .iter()
        .map(|&t| {
            let y = s * t;
            if y.abs() > 1.0 {
                Err(Error::invalid(format!("sqrt(lambda)*theta_j = {y} is outside [-1, 1]")))
            } else {
                Ok(2.0 * y.asin())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfacePoint {
        x,
        theta: theta.to_vec(),
    })
}

fn check_dim(d: usize, got: usize) -> Result<()> {
    if d != got {
        return Err(Error::invalid(format!("expected a {d}-vector, got length {got}")));
    }
    Ok(())
}

/// Density of the surface measure `dM̃_λ` with respect to `dθ`:
/// `(√λ)^{d−2}/2 · Π_j 2/√(1 − λθ_j²)`.
pub fn measure_weight(param: &SpectralParam, theta: &[f64]) -> f64 {
    let s = param.sqrt_lambda();
    let jac: f64 = theta.iter().map(|&t| 2.0 / (1.0 - param.lambda * t * t).sqrt()).product();
    s.powi(param.d as i32 - 2) / 2.0 * jac
}

/// Principal curvatures of the level set of `h` through `x`.
///
/// The normal is `∇h/|∇h|` except in the high band, where the surface
/// encloses `(π, …, π)` and the normal `−∇h/|∇h|` makes it convex.
pub fn principal_curvatures(x: &[f64], band: Band) -> Result<Vec<f64>> {
    let d = x.len();
    let g = grad_h(x);
    let gn = norm(&g);
    if gn < 1e-12 {
        return Err(Error::SingularPoint(x.to_vec()));
    }
    let n = DMatrix::from_fn(d, 1, |i, _| g[i] / gn);
    let proj = DMatrix::<f64>::identity(d, d) - &n * n.transpose();
    let hess = DMatrix::from_fn(d, d, |i, j| if i == j { 0.5 * x[i].cos() } else { 0.0 });
    let shape = &proj * hess * &proj / gn;
    let eig = SymmetricEigen::new(shape);
    // Drop the eigenpair belonging to the normal direction.
    let normal_idx = (0..d)
        .max_by(|&a, &b| {
            let oa = eig.eigenvectors.column(a).dot(&n.column(0)).abs();
            let ob = eig.eigenvectors.column(b).dot(&n.column(0)).abs();
            oa.total_cmp(&ob)
        })
        .expect("d >= 2");
    let orient = if band == Band::High { -1.0 } else { 1.0 };
    let mut k: Vec<f64> = (0..d)
        .filter(|&i| i != normal_idx)
        .map(|i| orient * eig.eigenvalues[i])
        .collect();
    k.sort_by(f64::total_cmp);
    Ok(k)
}

/// `|K(x)|`, the absolute Gaussian curvature of `M_λ` at `x`.
pub fn gaussian_curvature(param: &SpectralParam, x: &[f64]) -> Result<f64> {
    check_dim(param.d, x.len())?;
    Ok(principal_curvatures(x, param.band())?.iter().product::<f64>().abs())
}

/// Outcome of a convexity scan of `M_λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub lambda: f64,
    pub samples: usize,
    pub all_positive: bool,
    pub min_curvature: f64,
    pub max_curvature: f64,
}

/// Deterministic sample of `n` points on `M_λ` (any band), drawn through
/// `y_j = sin(x_j/2) = √λ θ_j` with `θ` uniform on the sphere. Above `d/2`
/// the sample is taken on `M_{d−λ}` and mapped by `x_j ↦ ±π − x_j`.
pub fn sample_surface(d: usize, lambda: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if lambda > 0.5 * d as f64 {
        let low = sample_surface(d, d as f64 - lambda, n, seed)?;
        return Ok(low
            .into_iter()
            .map(|x| x.into_iter().map(|xj| if xj < 0.0 { -std::f64::consts::PI - xj } else { std::f64::consts::PI - xj }).collect())
            .collect());
    }
    let s = lambda.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let max_tries = 1000 * n.max(1);
    for _ in 0..max_tries {
        if out.len() == n {
            break;
        }
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let gn = norm(&g);
        if gn == 0.0 {
            continue;
        }
        let y: Vec<f64> = g.iter().map(|v| s * v / gn).collect();
        if y.iter().all(|v| v.abs() < 1.0) {
            out.push(y.iter().map(|v| 2.0 * v.asin()).collect());
        }
    }
    if out.len() < n {
        return Err(Error::NoConvergence {
            what: "surface sampling".into(),
            detail: format!("only {} of {n} points accepted", out.len()),
        });
    }
    Ok(out)
}

/// Samples `n` points of `M_λ` and checks that every principal curvature is
/// positive.
pub fn convexity_check(param: &SpectralParam, n: usize) -> Result<ConvexityReport> {
    let pts = sample_surface(param.d, param.lambda, n, 0x5eed)?;
    let band = param.band();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in &pts {
        for k in principal_curvatures(x, band)? {
            lo = lo.min(k);
            hi = hi.max(k);
        }
    }
    Ok(ConvexityReport {
        lambda: param.lambda,
        samples: n,
        all_positive: lo > 0.0,
        min_curvature: lo,
        max_curvature: hi,
    })
}

/// The point `x_∞(λ, ω) ∈ M_λ` whose outward normal is `ω` (low band).
///
/// With `sin x_j = c ω_j`, the dominant coordinate `j*` is written as
/// `x_{j*} = ±t`, `t ∈ (0, π)`, which fixes `c = sin t / |ω_{j*}|`; the
/// remaining coordinates are `arcsin(c ω_j)` and `t` is found by bisection on
/// `h = λ`.
pub fn stationary_point(param: &SpectralParam, omega: &[f64]) -> Result<SurfacePoint> {
    param.require_low_band()?;
    check_dim(param.d, omega.len())?;
    let on = norm(omega);
    if !(on > 0.0) {
        return Err(Error::invalid("direction must be nonzero"));
    }
    let w: Vec<f64> = omega.iter().map(|v| v / on).collect();
    let jstar = (0..w.len()).max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs())).expect("d >= 2");
    let wstar = w[jstar].abs();
    let point = |t: f64| -> Vec<f64> {
        let c = t.sin() / wstar;
        (0..w.len())
            .map(|j| {
                if j == jstar {
                    w[j].signum() * t
                } else {
                    (c * w[j]).clamp(-1.0, 1.0).asin()
                }
            })
            .collect()
    };
    let (mut a, mut b) = (0.0f64, std::f64::consts::PI);
    let mut iters = 0;
    while b - a > 1e-15 && iters < 100 {
        let mid = 0.5 * (a + b);
        if symbol_h(&point(mid)) < param.lambda {
            a = mid;
        } else {
            b = mid;
        }
        iters += 1;
    }
    let x = point(0.5 * (a + b));
    let resid = (symbol_h(&x) - param.lambda).abs();
    if resid > 1e-12 {
        return Err(Error::NoConvergence {
            what: "stationary point".into(),
            detail: format!("|h - lambda| = {resid:.3e} after {iters} bisection steps"),
        });
    }
    let s = param.sqrt_lambda();
    let theta = x.iter().map(|&xi| (0.5 * xi).sin() / s).collect();
    Ok(SurfacePoint { x, theta })
}

/// `a(λ, ω) = K(x_∞)^{−1/2} / |∇h(x_∞)|`.
pub fn amplitude_coeff(param: &SpectralParam, omega: &[f64]) -> Result<f64> {
    let p = stationary_point(param, omega)?;
    let k = gaussian_curvature(param, &p.x)?;
    Ok(k.powf(-0.5) / norm(&grad_h(&p.x)))
}

/// `A_±(λ, ω_k) = ¼ Σ_{m ∈ ∂D(R(k)), m∼k} (e^{±i(m−k)·x_∞} − 1)`.
pub fn radiation_coeff(param: &SpectralParam, k: &LatticePoint) -> Result<(Complex64, Complex64)> {
    if k.sup_norm() == 0 {
        return Err(Error::invalid("radiation coefficient needs a nonzero direction"));
    }
    let p = stationary_point(param, &k.as_f64())?;
    let mut plus = Complex64::default();
    let mut minus = Complex64::default();
    for m in shell_neighbors(k) {
        let phase = m.sub(k).dot(&p.x);
        plus += Complex64::from_polar(1.0, phase) - 1.0;
        minus += Complex64::from_polar(1.0, -phase) - 1.0;
    }
    Ok((plus * 0.25, minus * 0.25))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use gauss_quad::GaussLegendre;
    use rand::Rng;
    use std::f64::consts::PI;

    fn lp(l: f64, d: usize) -> SpectralParam {
        SpectralParam::plus(d, l).unwrap()
    }

    #[test]
    fn param_validation() {
        assert!(matches!(SpectralParam::plus(2, 1.0), Err(Error::ThresholdEnergy(_))));
        assert!(SpectralParam::plus(2, 2.5).is_err());
        assert!(SpectralParam::plus(2, -0.1).is_err());
        assert_eq!(lp(0.3, 2).band(), Band::Low);
        assert_eq!(lp(1.5, 2).band(), Band::High);
        assert_eq!(lp(1.45, 3).band(), Band::Middle);
        assert_eq!(lp(2.7, 3).band(), Band::High);
        assert!(!lp(1.45, 3).in_i_d());
        assert!(lp(1.45, 3).require_low_band().is_err());
    }

    #[test]
    fn symbol_examples() {
        assert_eq!(symbol_h(&[0.0, 0.0, 0.0]), 0.0);
        assert_relative_eq!(symbol_h(&[PI; 3]), 3.0, epsilon = 1e-15);
        assert_relative_eq!(symbol_h(&[PI / 2.0, PI / 2.0]), 1.0, epsilon = 1e-15);
        let x = [0.3, -1.2, 2.9];
        let cosform = 0.5 * (3.0 - x.iter().map(|t: &f64| t.cos()).sum::<f64>());
        assert_relative_eq!(symbol_h(&x), cosform, epsilon = 1e-15);
    }

    #[test]
    fn critical_points_sit_at_integer_levels() {
        for bits in 0..8u32 {
            let x: Vec<f64> = (0..3).map(|j| if bits >> j & 1 == 1 { PI } else { 0.0 }).collect();
            assert!(norm(&grad_h(&x)) < 1e-15);
            assert_relative_eq!(symbol_h(&x), bits.count_ones() as f64, epsilon = 1e-14);
            assert!(matches!(principal_curvatures(&x, Band::Low), Err(Error::SingularPoint(_))));
        }
    }

    #[test]
    fn surface_point_examples() {
        let p = surface_point(&lp(0.25, 2), &[1.0, 0.0]).unwrap();
        assert_relative_eq!(p.x[0], PI / 3.0, epsilon = 1e-15);
        assert_eq!(p.x[1], 0.0);
        let p = surface_point(&lp(0.25, 2), &[-1.0, 0.0]).unwrap();
        assert_relative_eq!(p.x[0], -PI / 3.0, epsilon = 1e-15);
        let th = [0.48, -0.6, 0.64];
        let p = surface_point(&lp(0.3, 3), &th).unwrap();
        assert_relative_eq!(symbol_h(&p.x), 0.3, epsilon = 1e-12);
        assert!(surface_point(&lp(1.5, 2), &[1.0, 0.0]).is_err());
    }

    #[test]
    fn measure_weight_examples() {
        let w = measure_weight(&lp(0.25, 2), &[1.0, 0.0]);
        assert_relative_eq!(w, 2.0 / 0.75f64.sqrt(), epsilon = 1e-14);
        let t = [0.6, -0.8];
        let nt = [-0.6, 0.8];
        assert_eq!(measure_weight(&lp(0.7, 2), &t), measure_weight(&lp(0.7, 2), &nt));
    }

    /// Total mass of `dM̃_λ` against `d/dλ` of the area enclosed by `M_λ`
    /// (coarea formula), computed by an unrelated substitution.
    #[test]
    fn total_mass_matches_coarea_oracle() {
        let gl = GaussLegendre::new(80).unwrap();
        let area = |l: f64| {
            // area = ∫ 4 arcsin(√(λ − sin²(x₁/2))) dx₁ with sin(x₁/2) = √λ sin φ.
            let s = l.sqrt();
            gl.integrate(-PI / 2.0, PI / 2.0, |phi| {
                4.0 * (s * phi.cos()).asin() * 2.0 * s * phi.cos() / (1.0 - l * phi.sin().powi(2)).sqrt()
            })
        };
        for l in [0.2, 0.3, 0.6] {
            let h = 1e-4;
            let coarea = (area(l + h) - area(l - h)) / (2.0 * h);
            let n = 512;
            let param = lp(l, 2);
            let mass: f64 = (0..n)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / n as f64;
                    measure_weight(&param, &[a.cos(), a.sin()]) * 2.0 * PI / n as f64
                })
                .sum();
            assert_relative_eq!(mass, coarea, max_relative = 1e-6);
        }
    }

    #[test]
    fn curvature_d2_examples() {
        let k = gaussian_curvature(&lp(0.25, 2), &[PI / 3.0, 0.0]).unwrap();
        assert_relative_eq!(k, 2.0 / 3f64.sqrt(), epsilon = 1e-13);

        let l = 1e-6;
        let p = surface_point(&lp(l, 2), &[0.6, 0.8]).unwrap();
        let k = gaussian_curvature(&lp(l, 2), &p.x).unwrap();
        assert_relative_eq!(k, 1.0 / (2.0 * l.sqrt()), max_relative = 1e-5);
    }

    /// Curvature of the curve `φ ↦ x(√λ(cos φ, sin φ))` by finite differences.
    #[test]
    fn curvature_d2_matches_finite_differences() {
        let param = lp(0.45, 2);
        let curve = |phi: f64| surface_point(&param, &[phi.cos(), phi.sin()]).unwrap().x;
        for phi in [0.1, 0.7, 1.3, 2.9, 4.0] {
            let h = 1e-4;
            let (a, b, c) = (curve(phi - h), curve(phi), curve(phi + h));
            let d1: Vec<f64> = (0..2).map(|i| (c[i] - a[i]) / (2.0 * h)).collect();
            let d2: Vec<f64> = (0..2).map(|i| (c[i] - 2.0 * b[i] + a[i]) / (h * h)).collect();
            let fd = (d1[0] * d2[1] - d1[1] * d2[0]).abs() / norm(&d1).powi(3);
            let k = gaussian_curvature(&param, &b).unwrap();
            assert_relative_eq!(k, fd, max_relative = 1e-6);
        }
    }

    /// Graph chart `x₃ = f(x₁, x₂)` over the `x₁x₂` plane, `K = det D²f / (1 + |∇f|²)²`.
    #[test]
    fn curvature_d3_matches_graph_chart() {
        let param = lp(0.4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 20 {
            let g: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            let th: Vec<f64> = g.iter().map(|v| v / norm(&g)).collect();
            if th[2].abs() < 0.3 {
                continue;
            }
            let x = surface_point(&param, &th).unwrap().x;
            let s3 = x[2].sin();
            let fx: Vec<f64> = (0..2).map(|i| -x[i].sin() / s3).collect();
            let fxx = |i: usize, j: usize| {
                let delta = if i == j { x[j].cos() * s3 * s3 } else { 0.0 };
                -(delta + x[i].sin() * x[j].sin() * x[2].cos()) / s3.powi(3)
            };
            let det = fxx(0, 0) * fxx(1, 1) - fxx(0, 1) * fxx(1, 0);
            let chart = det / (1.0 + fx[0] * fx[0] + fx[1] * fx[1]).powi(2);
            let k = gaussian_curvature(&param, &x).unwrap();
            assert_relative_eq!(k, chart.abs(), max_relative = 1e-10);
            checked += 1;
        }
    }

    #[test]
    fn convexity_examples() {
        assert!(convexity_check(&lp(0.25, 2), 10_000).unwrap().all_positive);
        assert!(convexity_check(&lp(1.6, 2), 2000).unwrap().all_positive);
        assert!(convexity_check(&lp(0.45, 3), 2000).unwrap().all_positive);
        assert!(convexity_check(&lp(2.7, 3), 2000).unwrap().all_positive);
        let mid = convexity_check(&lp(1.45, 3), 2000).unwrap();
        assert!(!mid.all_positive);
        assert!(mid.min_curvature < 0.0);
    }

    #[test]
    fn stationary_point_examples() {
        let p = stationary_point(&lp(0.25, 2), &[1.0, 0.0]).unwrap();
        assert_relative_eq!(p.x[0], PI / 3.0, epsilon = 1e-10);
        assert!(p.x[1].abs() < 1e-12);
        assert_relative_eq!(p.theta[0], 1.0, epsilon = 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (d, l) in [(2, 0.3), (2, 0.9), (3, 0.2), (3, 0.45), (4, 0.3)] {
            let param = lp(l, d);
            for _ in 0..50 {
                let w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let p = stationary_point(&param, &w).unwrap();
                assert!((symbol_h(&p.x) - l).abs() < 1e-12);
                let g = grad_h(&p.x);
                let (gn, wn) = (norm(&g), norm(&w));
                for j in 0..d {
                    assert!((g[j] / gn - w[j] / wn).abs() < 1e-10);
                }
                let neg: Vec<f64> = w.iter().map(|v| -v).collect();
                let q = stationary_point(&param, &neg).unwrap();
                for j in 0..d {
                    assert!((q.x[j] + p.x[j]).abs() < 1e-10);
                }
                // θ(λ, ω) reproduces the stationary point through the parametrisation.
                let back = surface_point(&param, &p.theta).unwrap();
                for j in 0..d {
                    assert!((back.x[j] - p.x[j]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn amplitude_coeff_examples() {
        let a = amplitude_coeff(&lp(0.25, 2), &[1.0, 0.0]).unwrap();
        let expect = (3f64.sqrt() / 2.0).sqrt() * 4.0 / 3f64.sqrt();
        assert_relative_eq!(a, expect, epsilon = 1e-9);
        let param = lp(0.35, 3);
        let w = [0.3, -0.5, 0.8];
        let a = amplitude_coeff(&param, &w).unwrap();
        assert_relative_eq!(a, amplitude_coeff(&param, &[-0.3, 0.5, -0.8]).unwrap(), max_relative = 1e-10);
        assert_relative_eq!(a, amplitude_coeff(&param, &[0.8, 0.3, -0.5]).unwrap(), max_relative = 1e-10);
    }

    #[test]
    fn radiation_coeff_examples() {
        let (ap, am) = radiation_coeff(&lp(0.25, 2), &LatticePoint::from([1, 0])).unwrap();
        let expect = (Complex64::from_polar(1.0, PI / 3.0) - 1.0) * 0.25;
        assert!((ap - expect).norm() < 1e-10);
        assert!((ap.im - 3f64.sqrt() / 8.0).abs() < 1e-10);
        assert!((am - expect.conj()).norm() < 1e-10);
        assert!(radiation_coeff(&lp(0.25, 2), &LatticePoint::origin(2)).is_err());
    }

    #[test]
    fn radiation_coeff_signs_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [2usize, 3] {
            for l in [0.2, 0.45] {
                let param = lp(l, d);
                for _ in 0..200 {
                    let k: Vec<i64> = loop {
                        let k: Vec<i64> = (0..d).map(|_| rng.gen_range(-9..=9)).collect();
                        if k.iter().any(|&c| c != 0) {
                            break k;
                        }
                    };
                    let k = LatticePoint(k);
                    let (ap, am) = radiation_coeff(&param, &k).unwrap();
                    assert!(ap.im > 0.0 && am.im < 0.0);
                    let k3 = LatticePoint(k.0.iter().map(|c| 3 * c).collect());
                    let (bp, bm) = radiation_coeff(&param, &k3).unwrap();
                    assert!((ap - bp).norm() < 1e-12 && (am - bm).norm() < 1e-12);
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symbol_range(x in proptest::collection::vec(-10.0f64..10.0, 2..5)) {
                let h = symbol_h(&x);
                prop_assert!(h >= 0.0 && h <= x.len() as f64 + 1e-12);
            }

            #[test]
            fn samples_lie_on_the_level_set(d in 2usize..4, t in 0.01f64..0.99, seed in 0u64..1000) {
                let l = t * d as f64;
                for x in sample_surface(d, l, 20, seed).unwrap() {
                    prop_assert!((symbol_h(&x) - l).abs() < 1e-12);
                    prop_assert!(x.iter().all(|v| v.abs() <= PI));
                }
            }

            #[test]
            fn surface_points_lie_on_the_level_set(
                l in 0.01f64..0.99,
                phi in 0.0f64..(2.0 * PI),
            ) {
                let p = surface_point(&lp(l, 2), &[phi.cos(), phi.sin()]).unwrap();
                prop_assert!((symbol_h(&p.x) - l).abs() < 1e-12);
            }
        }
    }
}
