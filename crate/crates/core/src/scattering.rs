//! Forward scattering by a finitely supported potential: the
//! Lippmann–Schwinger solve, the scattering amplitude and S-matrix on a
//! discretised energy surface, and far-field/radiation diagnostics.
//!
//! Angular matrices are stored as kernels with respect to the surface
//! measure: the operator `Â` acts as `(Âφ)_i = Σ_j K[i,j] μ_j φ_j` with
//! `μ_j` the grid's measure weights.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{amplitude_coeff, measure_weight, radiation_coeff, stationary_point, surface_point, LimitSign, SpectralParam};
use crate::green::{GreenOptions, GreenTable};
use crate::lattice::{radial_derivative, GridFunction, LatticePoint, RectDomain};
use crate::matrix::{condition_number, frobenius, CMatrix, IndexKind, OperatorMatrix};

/// Condition number above which `λ` is treated as exceptional.
pub const EXCEPTIONAL_COND: f64 = 1e12;

/// A real potential on the interior of a cube.
#[derive(Clone, Debug)]
pub struct Potential {
    domain: RectDomain,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PotentialFile {
    d: usize,
    m: i64,
    entries: Vec<PotentialEntry>,
}

#[derive(Serialize, Deserialize)]
struct PotentialEntry {
    point: LatticePoint,
    value: f64,
}

impl Serialize for Potential {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PotentialFile {
            d: self.domain.dim(),
            m: self.domain.side(),
            entries: self
                .domain
                .interior()
                .iter()
                .zip(&self.values)
                .map(|(p, &value)| PotentialEntry { point: p.clone(), value })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Potential {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = PotentialFile::deserialize(d)?;
        let entries: Vec<(LatticePoint, f64)> = f.entries.into_iter().map(|e| (e.point, e.value)).collect();
        Potential::from_entries(f.d, f.m, &entries).map_err(serde::de::Error::custom)
    }
}

impl PartialEq for Potential {
    fn eq(&self, other: &Self) -> bool {
        self.domain.dim() == other.domain.dim() && self.domain.side() == other.domain.side() && self.values == other.values
    }
}

impl Potential {
    pub fn zero(domain: &RectDomain) -> Self {
        Potential {
            domain: domain.clone(),
            values: vec![0.0; domain.n_interior()],
        }
    }

    /// Values listed in interior-vertex order.
    pub fn from_values(domain: &RectDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.n_interior() {
            return Err(Error::invalid(format!(
                "expected {} potential values, got {}",
                domain.n_interior(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("potential values must be finite"));
        }
        Ok(Potential {
            domain: domain.clone(),
            values,
        })
    }

    /// Unlisted interior points get zero; points outside the interior are rejected.
    pub fn from_entries(d: usize, m: i64, entries: &[(LatticePoint, f64)]) -> Result<Self> {
        let domain = RectDomain::new(d, m)?;
        let mut values = vec![0.0; domain.n_interior()];
        for (p, v) in entries {
            let i = domain
                .interior_index(p)
                .ok_or_else(|| Error::invalid(format!("potential entry {:?} is not an interior point of the cube", p.0)))?;
            values[i] = *v;
        }
        Self::from_values(&domain, values)
    }

    /// I.i.d. uniform values in `[lo, hi)`.
    pub fn random(domain: &RectDomain, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::invalid("random potential range must satisfy lo < hi"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new(lo, hi);
        let values = (0..domain.n_interior()).map(|_| dist.sample(&mut rng)).collect();
        Self::from_values(domain, values)
    }

    pub fn domain(&self) -> &RectDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, p: &LatticePoint) -> f64 {
        self.domain.interior_index(p).map_or(0.0, |i| self.values[i])
    }

    /// Nonzero entries in interior order.
    pub fn support(&self) -> Vec<(LatticePoint, f64)> {
        self.domain
            .interior()
            .iter()
            .zip(&self.values)
            .filter(|(_, &v)| v != 0.0)
            .map(|(p, &v)| (p.clone(), v))
            .collect()
    }

    pub fn scaled(&self, t: f64) -> Potential {
        Potential {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| v * t).collect(),
        }
    }

    /// The potential transported by `n_j → M + 1 − n_j`.
    pub fn reflect(&self) -> Potential {
        let values = self
            .domain
            .interior()
            .iter()
            .map(|p| self.get(&self.domain.reflect(p)))
            .collect();
        Potential {
            domain: self.domain.clone(),
            values,
        }
    }

    pub fn max_abs_diff(&self, other: &Potential) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Quadrature on `M_λ` through the parametrisation `θ ∈ S^{d−1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    pub param: SpectralParam,
    pub theta: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    /// Weights for `∫_{S^{d−1}} dθ`.
    pub weights: Vec<f64>,
    /// Weights for `∫ dM̃_λ`.
    pub mu: Vec<f64>,
}

impl AngularGrid {
    /// `d = 2`: `n` equispaced angles. `d = 3`: `n` Gauss–Legendre nodes in
    /// `cos ϑ` times `2n` equispaced azimuths.
    pub fn new(param: &SpectralParam, n: usize) -> Result<Self> {
        param.require_low_band()?;
        if n < 2 {
            return Err(Error::invalid("angular grid needs at least 2 nodes"));
        }
        let (theta, weights): (Vec<Vec<f64>>, Vec<f64>) = match param.d {
            2 => (0..n)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / n as f64;
                    (vec![a.cos(), a.sin()], 2.0 * PI / n as f64)
                })
                .unzip(),
            3 => {
                let gl = GaussLegendre::new(n).map_err(|e| Error::invalid(e.to_string()))?;
                let naz = 2 * n;
                let mut th = Vec::new();
                let mut w = Vec::new();
                for &(t, wt) in gl.as_node_weight_pairs() {
                    let r = (1.0 - t * t).sqrt();
                    for j in 0..naz {
                        let phi = 2.0 * PI * j as f64 / naz as f64;
                        th.push(vec![r * phi.cos(), r * phi.sin(), t]);
                        w.push(wt * 2.0 * PI / naz as f64);
                    }
                }
                (th, w)
            }
            d => return Err(Error::Unsupported(format!("angular grids for d = {d}"))),
        };
        Self::from_nodes(param, theta, weights)
    }

    pub fn from_nodes(param: &SpectralParam, theta: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if theta.len() != weights.len() {
            return Err(Error::invalid("node and weight counts differ"));
        }
        let x = theta
            .iter()
            .map(|t| surface_point(param, t).map(|p| p.x))
            .collect::<Result<Vec<_>>>()?;
        let mu = theta.iter().zip(&weights).map(|(t, w)| measure_weight(param, t) * w).collect();
        Ok(AngularGrid {
            param: *param,
            theta,
            x,
            weights,
            mu,
        })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn weight_matrix(&self) -> CMatrix {
        crate::matrix::real_diag(&self.mu)
    }

    /// `E[n, i] = e^{i n·x_i}` for the given lattice points.
    pub fn plane_waves(&self, points: &[LatticePoint]) -> CMatrix {
        CMatrix::from_fn(points.len(), self.len(), |r, c| Complex64::from_polar(1.0, points[r].dot(&self.x[c])))
    }
}

/// `ψ̂⁽⁰⁾(n, λ, θ) = (2π)^{−d/2} ρ(θ) e^{in·x(θ)}` with `ρ` the measure density.
pub fn incident_wave(n: &LatticePoint, param: &SpectralParam, theta: &[f64]) -> Result<Complex64> {
    let x = surface_point(param, theta)?.x;
    let scale = (2.0 * PI).powf(-(param.d as f64) / 2.0) * measure_weight(param, theta);
    Ok(Complex64::from_polar(scale, n.dot(&x)))
}

/// The Lippmann–Schwinger system `(I + R₀ V) w = R₀ f` on `supp V`,
/// factorised once.
#[derive(Clone, Debug)]
pub struct ResolventSolver {
    table: GreenTable,
    support: Vec<LatticePoint>,
    v: Vec<f64>,
    lu: Option<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>>,
    cond: f64,
}

impl ResolventSolver {
    pub fn new(v: &Potential, mut table: GreenTable) -> Result<Self> {
        if v.domain().dim() != table.dim() {
            return Err(Error::invalid("potential and Green table dimensions differ"));
        }
        let (support, vals): (Vec<LatticePoint>, Vec<f64>) = v.support().into_iter().unzip();
        table.ensure(support.iter().flat_map(|a| support.iter().map(move |b| a.sub(b))))?;
        let ns = support.len();
        let mut cond = 1.0;
        let lu = if ns == 0 {
            None
        } else {
            let mut m = CMatrix::identity(ns, ns);
            for i in 0..ns {
                for j in 0..ns {
                    m[(i, j)] += table.get(&support[i].sub(&support[j]))? * vals[j];
                }
            }
            cond = condition_number(&m);
            if !(cond <= EXCEPTIONAL_COND) {
                return Err(Error::ExceptionalEnergy {
                    what: "Lippmann-Schwinger system".into(),
                    cond,
                });
            }
            Some(m.lu())
        };
        Ok(ResolventSolver {
            table,
            support,
            v: vals,
            lu,
            cond,
        })
    }

    /// Solver for `V` at `param` with a freshly computed Green table.
    pub fn build(v: &Potential, param: &SpectralParam, options: GreenOptions) -> Result<Self> {
        Self::new(v, GreenTable::new(param, options)?)
    }

    pub fn param(&self) -> SpectralParam {
        self.table.param()
    }

    pub fn table(&self) -> &GreenTable {
        &self.table
    }

    pub fn condition(&self) -> f64 {
        self.cond
    }

    pub fn support(&self) -> &[LatticePoint] {
        &self.support
    }

    /// The same potential at the opposite limit sign.
    pub fn with_sign(&self, sign: LimitSign) -> Result<Self> {
        let mut s = self.clone();
        s.table = self.table.with_sign(sign);
        if self.lu.is_some() {
            let ns = self.support.len();
            let mut m = CMatrix::identity(ns, ns);
            for i in 0..ns {
                for j in 0..ns {
                    m[(i, j)] += s.table.get(&self.support[i].sub(&self.support[j]))? * self.v[j];
                }
            }
            s.lu = Some(m.lu());
        }
        Ok(s)
    }

    /// Makes sure every kernel entry needed for `f` and `window` is tabulated.
    pub fn prepare(&mut self, f_support: &[LatticePoint], window: &[LatticePoint]) -> Result<()> {
        let sources: Vec<LatticePoint> = f_support.iter().chain(&self.support).cloned().collect();
        let targets: Vec<LatticePoint> = window.iter().chain(&self.support).cloned().collect();
        self.table
            .ensure(targets.iter().flat_map(|t| sources.iter().map(move |s| t.sub(s))))
    }

    /// `u = R̂(λ ± i0) f` on `supp V`.
    fn solve_on_support(&self, f: &[(LatticePoint, Complex64)]) -> Result<DVector<Complex64>> {
        let mut rhs = DVector::zeros(self.support.len());
        for (i, s) in self.support.iter().enumerate() {
            for (m, fm) in f {
                rhs[i] += self.table.get(&s.sub(m))? * fm;
            }
        }
        Ok(match &self.lu {
            Some(lu) => lu.solve(&rhs).expect("factorisation checked at construction"),
            None => rhs,
        })
    }

    /// `(R̂(λ ± i0) f)(n)` for `n` in `window`.
    pub fn apply(&mut self, f: &[(LatticePoint, Complex64)], window: &[LatticePoint]) -> Result<Vec<Complex64>> {
        let fs: Vec<LatticePoint> = f.iter().map(|(p, _)| p.clone()).collect();
        self.prepare(&fs, window)?;
        let w = self.solve_on_support(f)?;
        window
            .iter()
            .map(|n| {
                let mut u = Complex64::default();
                for (m, fm) in f {
                    u += self.table.get(&n.sub(m))? * fm;
                }
                for (i, s) in self.support.iter().enumerate() {
                    u -= self.table.get(&n.sub(s))? * self.v[i] * w[i];
                }
                Ok(u)
            })
            .collect()
    }

    /// `(1 − V̂ R̂(λ ± i0)) f`, a finitely supported function.
    pub fn distorted_source(&mut self, f: &[(LatticePoint, Complex64)]) -> Result<Vec<(LatticePoint, Complex64)>> {
        let fs: Vec<LatticePoint> = f.iter().map(|(p, _)| p.clone()).collect();
        self.prepare(&fs, &[])?;
        let w = self.solve_on_support(f)?;
        let mut out: Vec<(LatticePoint, Complex64)> = f.to_vec();
        for (i, s) in self.support.iter().enumerate() {
            out.push((s.clone(), -w[i] * self.v[i]));
        }
        Ok(out)
    }

    /// `(F̂^{(±)} f)(θ) = (2π)^{−d/2} Σ_n e^{−in·x(θ)} ((1 − V̂R̂(λ±i0)) f)(n)`.
    pub fn generalized_fourier(&mut self, f: &[(LatticePoint, Complex64)], thetas: &[Vec<f64>]) -> Result<Vec<Complex64>> {
        let g = self.distorted_source(f)?;
        let param = self.param();
        let scale = (2.0 * PI).powf(-(param.d as f64) / 2.0);
        thetas
            .iter()
            .map(|t| {
                let x = surface_point(&param, t)?.x;
                Ok(g.iter().map(|(n, v)| v * Complex64::from_polar(scale, -n.dot(&x))).sum())
            })
            .collect()
    }
}

/// `(R̂(λ ± i0) f)(n)` on `window`, building the Green table on the fly.
pub fn resolvent_apply(
    v: &Potential,
    param: &SpectralParam,
    f: &[(LatticePoint, Complex64)],
    window: &[LatticePoint],
    options: GreenOptions,
) -> Result<Vec<Complex64>> {
    ResolventSolver::build(v, param, options)?.apply(f, window)
}

/// Measure kernel of the scattering amplitude,
/// `K[i,j] = (2π)^{−d} Σ_{n ∈ supp V} e^{−in·x_i} V(n) ψ_j(n)` with
/// `(I + R₀V) ψ_j = e^{in·x_j}` on `supp V` (outgoing limit).
pub fn amplitude(solver: &ResolventSolver, grid: &AngularGrid) -> Result<OperatorMatrix> {
    let param = solver.param();
    if param.sign != LimitSign::Plus {
        return Err(Error::invalid("the scattering amplitude uses the outgoing resolvent"));
    }
    check_grid(&param, grid)?;
    let n = grid.len();
    let data = match &solver.lu {
        None => CMatrix::zeros(n, n),
        Some(lu) => {
            let e = grid.plane_waves(&solver.support);
            let psi = lu.solve(&e).expect("factorisation checked at construction");
            let scale = (2.0 * PI).powi(-(param.d as i32));
            let mut vpsi = psi;
            for (i, &v) in solver.v.iter().enumerate() {
                vpsi.row_mut(i).scale_mut(v * scale);
            }
            e.adjoint() * vpsi
        }
    };
    Ok(OperatorMatrix::new(data, IndexKind::Angular, IndexKind::Angular, param.lambda, Some(LimitSign::Plus)))
}

/// First Born approximation `(2π)^{−d} Σ_n V(n) e^{−in·(x_i − x_j)}`.
pub fn born_amplitude(v: &Potential, grid: &AngularGrid) -> CMatrix {
    let sup: Vec<(LatticePoint, f64)> = v.support();
    let pts: Vec<LatticePoint> = sup.iter().map(|(p, _)| p.clone()).collect();
    let e = grid.plane_waves(&pts);
    let scale = (2.0 * PI).powi(-(grid.param.d as i32));
    let mut ve = e.clone();
    for (i, (_, val)) in sup.iter().enumerate() {
        ve.row_mut(i).scale_mut(val * scale);
    }
    e.adjoint() * ve
}

fn check_grid(param: &SpectralParam, grid: &AngularGrid) -> Result<()> {
    if grid.param.d != param.d || (grid.param.lambda - param.lambda).abs() > 1e-14 {
        return Err(Error::IndexMismatch("angular grid built for a different energy".into()));
    }
    Ok(())
}

/// `S = I − 2πi K W`.
pub fn s_matrix(a: &OperatorMatrix, grid: &AngularGrid) -> Result<OperatorMatrix> {
    if a.rows != IndexKind::Angular || a.cols != IndexKind::Angular || a.nrows() != grid.len() {
        return Err(Error::IndexMismatch("S-matrix needs an angular x angular amplitude on this grid".into()));
    }
    let n = grid.len();
    let mut s = CMatrix::identity(n, n);
    for j in 0..n {
        for i in 0..n {
            s[(i, j)] -= Complex64::new(0.0, 2.0 * PI) * a.data[(i, j)] * grid.mu[j];
        }
    }
    Ok(OperatorMatrix::new(s, IndexKind::Angular, IndexKind::Angular, a.lambda, a.sign))
}

/// `‖S^H W S − W‖_F / ‖W‖_F`.
pub fn unitarity_defect(s: &OperatorMatrix, grid: &AngularGrid) -> f64 {
    let w = grid.weight_matrix();
    frobenius(&(s.data.adjoint() * &w * &s.data - &w)) / frobenius(&w)
}

/// `‖K − K^H + 2πi K^H W K‖_F / ‖K‖_F` (zero for an empty amplitude).
pub fn optical_defect(a: &OperatorMatrix, grid: &AngularGrid) -> f64 {
    let k = &a.data;
    let norm = frobenius(k);
    if norm == 0.0 {
        return 0.0;
    }
    let w = grid.weight_matrix();
    let lhs = k - k.adjoint() + k.adjoint() * &w * k * Complex64::new(0.0, 2.0 * PI);
    frobenius(&lhs) / norm
}

/// Sampled far-field check: for each radius `R`, the maximum over a fixed fan
/// of directions of `|u(k) − u_∞(k)| · |k|^{(d−1)/2}` with `u = R̂(λ±i0) f`
/// and `u_∞` the leading stationary-phase term.
pub fn far_field_defect(solver: &mut ResolventSolver, f: &[(LatticePoint, Complex64)], radii: &[f64], n_dirs: usize) -> Result<Vec<f64>> {
    let param = solver.param();
    if param.d != 2 {
        return Err(Error::Unsupported("far-field sampling is implemented for d = 2".into()));
    }
    let sgn = param.sign.as_f64();
    let d = param.d as f64;
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let ks: Vec<LatticePoint> = (0..n_dirs)
            .map(|i| {
                let a = 2.0 * PI * (i as f64 + 0.25) / n_dirs as f64;
                LatticePoint::from([(r * a.cos()).round() as i64, (r * a.sin()).round() as i64])
            })
            .collect();
        let u = solver.apply(f, &ks)?;
        let mut thetas = Vec::with_capacity(ks.len());
        let mut lead = Vec::with_capacity(ks.len());
        for k in &ks {
            let omega = k.as_f64();
            let sp = stationary_point(&param, &omega)?;
            let a = amplitude_coeff(&param, &omega)?;
            let kn = k.norm();
            let phase = sgn * ((3.0 - d) * PI / 4.0 + k.dot(&sp.x));
            lead.push(Complex64::from_polar((2.0 * PI).sqrt() * kn.powf(-(d - 1.0) / 2.0) * a, phase));
            thetas.push(sp.theta.iter().map(|t| sgn * t).collect());
        }
        let g = solver.generalized_fourier(f, &thetas)?;
        let worst = ks
            .iter()
            .enumerate()
            .map(|(i, k)| (u[i] - lead[i] * g[i]).norm() * k.norm().powf((d - 1.0) / 2.0))
            .fold(0.0, f64::max);
        out.push(worst);
    }
    Ok(out)
}

/// Cesàro radiation defect
/// `(1/R) Σ_{n ∈ D(R)°, n ≠ 0} |∂_rad u(n) − A(λ, ω_n) u(n)|²` for each `R`,
/// testing against `A_+` or `A_−` as selected by `test_sign`.
pub fn radiation_defect(u: &GridFunction, param: &SpectralParam, test_sign: LimitSign, radii: &[i64]) -> Result<Vec<f64>> {
    let rmax = radii.iter().copied().max().unwrap_or(0);
    let mut shells = vec![0.0f64; rmax as usize + 1];
    for (n, un) in u.iter() {
        let r = n.sup_norm();
        if r == 0 || r > rmax {
            continue;
        }
        let (ap, am) = radiation_coeff(param, n)?;
        let a = match test_sign {
            LimitSign::Plus => ap,
            LimitSign::Minus => am,
        };
        let drad = radial_derivative(u, n)?;
        shells[r as usize] += (drad - a * un).norm_sqr();
    }
    // D(R)° = [−R, R]^d, so a point with sup norm r counts towards every R ≥ r.
    let mut cumulative = shells.clone();
    for r in 1..cumulative.len() {
        cumulative[r] += cumulative[r - 1];
    }
    Ok(radii.iter().map(|&r| cumulative[r as usize] / r as f64).collect())
}

/// Grid function of `R̂₀(λ ± i0) δ₀` on `[−R, R]^d` straight from a table.
pub fn free_resolvent_window(table: &mut GreenTable, radius: i64) -> Result<GridFunction> {
    let d = table.dim();
    let pts = cube_points(d, radius);
    table.ensure(pts.iter().cloned())?;
    let mut u = GridFunction::new();
    for p in pts {
        let v = table.get(&p)?;
        u.set(p, v);
    }
    Ok(u)
}

/// All lattice points of `[−R, R]^d`.
pub fn cube_points(d: usize, radius: i64) -> Vec<LatticePoint> {
    let mut out = vec![Vec::<i64>::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-radius..=radius).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out.into_iter().map(LatticePoint).collect()
}

/// Dense matrix `[R̂(λ ± i0) δ_n](m)` for `m` in `rows`, `n` in `cols`.
pub fn resolvent_matrix(solver: &mut ResolventSolver, rows: &[LatticePoint], cols: &[LatticePoint]) -> Result<CMatrix> {
    solver.prepare(cols, rows)?;
    let mut out = DMatrix::zeros(rows.len(), cols.len());
    for (j, c) in cols.iter().enumerate() {
        let col = solver.apply(&[(c.clone(), Complex64::new(1.0, 0.0))], rows)?;
        for (i, v) in col.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}
