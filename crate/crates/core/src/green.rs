//! The free resolvent kernel
//! `r₀(k, λ ± i0) = lim_{ε↓0} (2π)^{−d} ∫ e^{ik·x} / (h(x) − λ ∓ iε) dx`.
//!
//! In every method the last torus coordinate is integrated in closed form:
//! with `b = ½` and `|w| < 1` solving `b w² − 2a w + b = 0`,
//! `(1/2π) ∫ e^{ikx} / (a − b cos x) dx = w^{|k|} / (a − b w)`.
//!
//! * `Reduction` (d = 2): the remaining 1-D integral is taken directly at
//!   `ε = 0` with tanh-sinh on both sides of the turning point.
//! * `EpsExtrapolation` (d = 2, 3): trapezoid quadrature at `ε = ε₀ 2^{−i}`
//!   followed by polynomial extrapolation to `ε = 0`.
//!
//! Values are stored for `λ + i0` only; `λ − i0` is their conjugate.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{amplitude_coeff, stationary_point, LimitSign, SpectralParam};
use crate::lattice::LatticePoint;
use crate::quadrature::{neville_to_zero, tanh_sinh_nodes, DeNode};

const B: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreenMethod {
    Reduction,
    EpsExtrapolation,
}

impl GreenMethod {
    pub fn default_for(d: usize) -> Self {
        if d == 2 {
            GreenMethod::Reduction
        } else {
            GreenMethod::EpsExtrapolation
        }
    }

    /// Convergence target used when none is requested.
    pub fn default_tolerance(self, d: usize) -> f64 {
        match (self, d) {
            (GreenMethod::Reduction, _) => 1e-12,
            (GreenMethod::EpsExtrapolation, 2) => 1e-8,
            (GreenMethod::EpsExtrapolation, _) => 1e-5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenOptions {
    pub method: GreenMethod,
    pub tolerance: f64,
}

impl GreenOptions {
    pub fn default_for(d: usize) -> Self {
        let method = GreenMethod::default_for(d);
        GreenOptions {
            method,
            tolerance: method.default_tolerance(d),
        }
    }

    pub fn with_method(d: usize, method: GreenMethod) -> Self {
        GreenOptions {
            method,
            tolerance: method.default_tolerance(d),
        }
    }
}

/// Representative of `k` under sign changes and permutations: the sorted
/// absolute values.
pub fn canonical(k: &LatticePoint) -> LatticePoint {
    let mut c: Vec<i64> = k.0.iter().map(|v| v.abs()).collect();
    c.sort_unstable();
    LatticePoint(c)
}

/// `(w, 1/s)` for the closed-form integral over the last coordinate at a
/// complex `a ∉ [−b, b]`.
pub fn close_last(a: Complex64) -> (Complex64, Complex64) {
    let mut s = ((a - B) * (a + B)).sqrt();
    if (a.conj() * s).re < 0.0 {
        s = -s;
    }
    (B / (a + s), s.inv())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct Entry {
    value: Complex64,
    accuracy: f64,
}

/// Values of `r₀` on a set of offsets, closed under the symmetries of `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "GreenTableFile", try_from = "GreenTableFile")]
pub struct GreenTable {
    d: usize,
    lambda: f64,
    sign: LimitSign,
    options: GreenOptions,
    entries: BTreeMap<LatticePoint, Entry>,
}

#[derive(Serialize, Deserialize)]
struct GreenTableFile {
    d: usize,
    lambda: f64,
    sign: LimitSign,
    method: GreenMethod,
    tolerance: f64,
    /// Canonical offsets with `r₀(k, λ + i0)` and an accuracy estimate.
    entries: Vec<GreenTableRow>,
}

#[derive(Serialize, Deserialize)]
struct GreenTableRow {
    offset: LatticePoint,
    value: Complex64,
    accuracy: f64,
}

impl From<GreenTable> for GreenTableFile {
    fn from(t: GreenTable) -> Self {
        GreenTableFile {
            d: t.d,
            lambda: t.lambda,
            sign: t.sign,
            method: t.options.method,
            tolerance: t.options.tolerance,
            entries: t
                .entries
                .into_iter()
                .map(|(offset, e)| GreenTableRow {
                    offset,
                    value: e.value,
                    accuracy: e.accuracy,
                })
                .collect(),
        }
    }
}

impl TryFrom<GreenTableFile> for GreenTable {
    type Error = Error;

    fn try_from(f: GreenTableFile) -> Result<Self> {
        SpectralParam::new(f.d, f.lambda, f.sign)?;
        let mut entries = BTreeMap::new();
        for row in f.entries {
            if row.offset.dim() != f.d || canonical(&row.offset) != row.offset {
                return Err(Error::invalid(format!("non-canonical Green offset {:?}", row.offset.0)));
            }
            entries.insert(
                row.offset,
                Entry {
                    value: row.value,
                    accuracy: row.accuracy,
                },
            );
        }
        Ok(GreenTable {
            d: f.d,
            lambda: f.lambda,
            sign: f.sign,
            options: GreenOptions {
                method: f.method,
                tolerance: f.tolerance,
            },
            entries,
        })
    }
}

impl GreenTable {
    pub fn new(param: &SpectralParam, options: GreenOptions) -> Result<Self> {
        param.require_low_band()?;
        if options.method == GreenMethod::Reduction && param.d != 2 {
            return Err(Error::Unsupported("the 1-D reduction is implemented for d = 2 only".into()));
        }
        if param.d > 3 {
            return Err(Error::Unsupported(format!("Green tables for d = {} are not implemented", param.d)));
        }
        if !(options.tolerance > 0.0) {
            return Err(Error::invalid("Green tolerance must be positive"));
        }
        Ok(GreenTable {
            d: param.d,
            lambda: param.lambda,
            sign: param.sign,
            options,
            entries: BTreeMap::new(),
        })
    }

    /// A table holding every offset of sup norm at most `radius`.
    pub fn with_radius(param: &SpectralParam, options: GreenOptions, radius: i64) -> Result<Self> {
        let mut t = Self::new(param, options)?;
        t.ensure(box_offsets(param.d, radius))?;
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sign(&self) -> LimitSign {
        self.sign
    }

    pub fn options(&self) -> GreenOptions {
        self.options
    }

    pub fn param(&self) -> SpectralParam {
        SpectralParam {
            d: self.d,
            lambda: self.lambda,
            sign: self.sign,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The same table read at the opposite limit sign.
    pub fn with_sign(&self, sign: LimitSign) -> GreenTable {
        GreenTable {
            sign,
            ..self.clone()
        }
    }

    pub fn contains(&self, k: &LatticePoint) -> bool {
        self.entries.contains_key(&canonical(k))
    }

    /// `r₀(k, λ ± i0)`.
    pub fn get(&self, k: &LatticePoint) -> Result<Complex64> {
        let e = self
            .entries
            .get(&canonical(k))
            .ok_or_else(|| Error::MissingValue(k.0.clone()))?;
        Ok(match self.sign {
            LimitSign::Plus => e.value,
            LimitSign::Minus => e.value.conj(),
        })
    }

    pub fn accuracy(&self, k: &LatticePoint) -> Option<f64> {
        self.entries.get(&canonical(k)).map(|e| e.accuracy)
    }

    pub fn max_accuracy(&self) -> f64 {
        self.entries.values().map(|e| e.accuracy).fold(0.0, f64::max)
    }

    pub fn offsets(&self) -> impl Iterator<Item = &LatticePoint> {
        self.entries.keys()
    }

    /// Computes any offsets not yet present.
    pub fn ensure(&mut self, offsets: impl IntoIterator<Item = LatticePoint>) -> Result<()> {
        let missing: BTreeSet<LatticePoint> = offsets
            .into_iter()
            .map(|k| {
                if k.dim() != self.d {
                    Err(Error::invalid(format!("offset {:?} has the wrong dimension", k.0)))
                } else {
                    Ok(canonical(&k))
                }
            })
            .collect::<Result<BTreeSet<_>>>()?
            .into_iter()
            .filter(|k| !self.entries.contains_key(k))
            .collect();
        if missing.is_empty() {
            return Ok(());
        }
        let missing: Vec<LatticePoint> = missing.into_iter().collect();
        let (values, acc) = match (self.options.method, self.d) {
            (GreenMethod::Reduction, 2) => reduction_d2(self.lambda, &missing, self.options.tolerance)?,
            (GreenMethod::EpsExtrapolation, 2 | 3) => eps_extrapolation(self.d, self.lambda, &missing, self.options.tolerance)?,
            _ => return Err(Error::Unsupported("no Green method for this dimension".into())),
        };
        for ((k, value), accuracy) in missing.into_iter().zip(values).zip(acc) {
            self.entries.insert(k, Entry { value, accuracy });
        }
        Ok(())
    }
}

/// Every offset with sup norm at most `radius`, in canonical form.
pub fn box_offsets(d: usize, radius: i64) -> Vec<LatticePoint> {
    let mut out = vec![Vec::<i64>::new()];
    for _ in 0..d {
        let mut next = Vec::new();
        for prefix in &out {
            let lo = prefix.last().copied().unwrap_or(0);
            for c in lo..=radius {
                let mut p = prefix.clone();
                p.push(c);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(LatticePoint).collect()
}

/// `r₀(k, λ ± i0)` for a single offset with default options.
pub fn r0_eval(k: &LatticePoint, param: &SpectralParam) -> Result<Complex64> {
    let mut t = GreenTable::new(param, GreenOptions::default_for(param.d))?;
    t.ensure([k.clone()])?;
    t.get(k)
}

/// `max_k |(d/2 − λ) r₀(k) − ¼ Σ_{±, j} r₀(k ± e_j) − δ_{k,0}|` over `tested`.
pub fn r0_defect(table: &GreenTable, tested: &[LatticePoint]) -> Result<f64> {
    let d = table.dim();
    let diag = d as f64 / 2.0 - table.lambda();
    let mut worst = 0.0f64;
    for k in tested {
        let mut v = table.get(k)? * diag;
        for m in k.neighbors() {
            v -= table.get(&m)? * 0.25;
        }
        if k.sup_norm() == 0 {
            v -= 1.0;
        }
        worst = worst.max(v.norm());
    }
    Ok(worst)
}

/// Leading far-field term
/// `±i (2π|k|)^{−(d−1)/2} e^{±i(k·x_∞ − (d−1)π/4)} a(λ, ω_k)`.
pub fn r0_asymptotic(k: &LatticePoint, param: &SpectralParam) -> Result<Complex64> {
    if k.sup_norm() == 0 {
        return Err(Error::invalid("the asymptotic form needs k != 0"));
    }
    let d = param.d as f64;
    let omega = k.as_f64();
    let x = stationary_point(param, &omega)?.x;
    let a = amplitude_coeff(param, &omega)?;
    let kn = k.norm();
    let phase = k.dot(&x) - (d - 1.0) * FRAC_PI_4;
    let v = Complex64::i() * (2.0 * PI * kn).powf(-(d - 1.0) / 2.0) * Complex64::from_polar(a, phase);
    Ok(match param.sign {
        LimitSign::Plus => v,
        LimitSign::Minus => v.conj(),
    })
}

const DE_T_MAX: f64 = 4.0;
const DE_MAX_LEVEL: i32 = 13;
const CHUNK: usize = 256;

/// Integrand pieces `(w, 1/s)` at a node of `[0, x_c]` or `[x_c, π]`.
fn reduction_node(lambda: f64, xc: f64, node: &DeNode, propagating: bool) -> (Complex64, Complex64) {
    let x = node.x;
    let half = 0.5 * x;
    if propagating {
        // q = λ − sin²(x/2) with √λ − sin(x/2) = 2 cos((x_c + x)/4) sin((x_c − x)/4).
        let diff = 2.0 * (0.25 * (xc + x)).cos() * (0.25 * node.dist_b).sin();
        let q = diff * (lambda.sqrt() + half.sin());
        let sin_phi = 2.0 * (q * (1.0 - q)).sqrt();
        let phi = sin_phi.atan2(1.0 - 2.0 * q);
        (Complex64::from_polar(1.0, phi), Complex64::new(0.0, 2.0 / sin_phi))
    } else {
        let diff = 2.0 * (0.25 * (x + xc)).cos() * (0.25 * node.dist_a).sin();
        let p = diff * (lambda.sqrt() + half.sin());
        let s = (p * (1.0 + p)).sqrt();
        (Complex64::new(B / (B + p + s), 0.0), Complex64::new(1.0 / s, 0.0))
    }
}

fn reduction_sum(lambda: f64, xc: f64, nodes: &[(DeNode, bool)], k1: &[i64], k2: &[i64]) -> Vec<Complex64> {
    let max1 = *k1.iter().max().unwrap_or(&0) as usize;
    let max2 = *k2.iter().max().unwrap_or(&0) as usize;
    let partials: Vec<Vec<Complex64>> = nodes
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![Complex64::default(); k1.len()];
            let mut cosk = vec![0.0; max1 + 1];
            let mut wpow = vec![Complex64::default(); max2 + 1];
            for (node, prop) in chunk {
                let (w, inv_s) = reduction_node(lambda, xc, node, *prop);
                for (j, c) in cosk.iter_mut().enumerate() {
                    *c = (j as f64 * node.x).cos();
                }
                let mut p = inv_s * node.weight;
                for wp in wpow.iter_mut() {
                    *wp = p;
                    p *= w;
                }
                for (i, (&a, &b)) in k1.iter().zip(k2).enumerate() {
                    acc[i] += wpow[b as usize] * cosk[a as usize];
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Complex64::default(); k1.len()];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total.iter().map(|v| v / PI).collect()
}

fn reduction_d2(lambda: f64, offsets: &[LatticePoint], tol: f64) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let xc = 2.0 * lambda.sqrt().asin();
    let k1: Vec<i64> = offsets.iter().map(|k| k.0[0]).collect();
    let k2: Vec<i64> = offsets.iter().map(|k| k.0[1]).collect();
    let mut prev: Option<Vec<Complex64>> = None;
    let mut last_diff = f64::INFINITY;
    for level in 1..=DE_MAX_LEVEL {
        let h = 0.5f64.powi(level);
        let nodes: Vec<(DeNode, bool)> = tanh_sinh_nodes(0.0, xc, h, DE_T_MAX)
            .into_iter()
            .map(|n| (n, true))
            .chain(tanh_sinh_nodes(xc, PI, h, DE_T_MAX).into_iter().map(|n| (n, false)))
            .collect();
        let vals = reduction_sum(lambda, xc, &nodes, &k1, &k2);
        if let Some(p) = prev {
            let diffs: Vec<f64> = vals.iter().zip(&p).map(|(a, b)| (a - b).norm()).collect();
            last_diff = diffs.iter().copied().fold(0.0, f64::max);
            if level >= 4 && last_diff < tol {
                return Ok((vals, diffs));
            }
        }
        prev = Some(vals);
    }
    Err(Error::NoConvergence {
        what: "Green function (1-D reduction)".into(),
        detail: format!("successive tanh-sinh levels differ by {last_diff:.3e} > {tol:.1e}"),
    })
}

const EPS0: f64 = 0.1;
/// Trapezoid intervals on `[0, π]` per unit of `1/ε`.
const MESH_PER_INV_EPS: f64 = 12.0;

fn eps_max_levels(d: usize) -> usize {
    if d == 2 {
        9
    } else {
        7
    }
}

fn trapezoid(n: usize) -> (Vec<f64>, Vec<f64>) {
    let step = PI / n as f64;
    let x: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    let w: Vec<f64> = (0..=n).map(|i| if i == 0 || i == n { 0.5 * step } else { step }).collect();
    (x, w)
}

fn cos_table(x: &[f64], kmax: usize) -> Vec<Vec<f64>> {
    x.iter().map(|&xi| (0..=kmax).map(|k| (k as f64 * xi).cos()).collect()).collect()
}

/// All `r₀(k, λ + iε)` with `0 ≤ k_j ≤ kmax`, indexed `[k_1][k_2]…` flattened
/// with the last coordinate fastest.
fn eps_box(d: usize, lambda: f64, eps: f64, kmax: usize) -> Vec<Complex64> {
    let n = (MESH_PER_INV_EPS / eps).ceil() as usize;
    let (x, w) = trapezoid(n);
    let cs = cos_table(&x, kmax);
    let kk = kmax + 1;
    let z = Complex64::new(lambda, eps);
    let base = d as f64 / 2.0 - z;
    match d {
        2 => {
            let parts: Vec<Vec<Complex64>> = (0..x.len())
                .collect::<Vec<_>>()
                .par_chunks(CHUNK)
                .map(|idx| {
                    let mut acc = vec![Complex64::default(); kk * kk];
                    for &i in idx {
                        let (wv, inv_s) = close_last(base - 0.5 * x[i].cos());
                        let mut p = inv_s * w[i];
                        for k2 in 0..kk {
                            for k1 in 0..kk {
                                acc[k1 * kk + k2] += p * cs[i][k1];
                            }
                            p *= wv;
                        }
                    }
                    acc
                })
                .collect();
            sum_parts(parts, kk * kk, 1.0 / PI)
        }
        3 => {
            let parts: Vec<Vec<Complex64>> = (0..x.len())
                .collect::<Vec<_>>()
                .par_chunks(8)
                .map(|rows| {
                    let mut acc = vec![Complex64::default(); kk * kk * kk];
                    let mut row = vec![Complex64::default(); kk * kk];
                    let mut wpow = vec![Complex64::default(); kk];
                    for &j in rows {
                        row.iter_mut().for_each(|v| *v = Complex64::default());
                        let cj = x[j].cos();
                        for i in 0..x.len() {
                            let (wv, inv_s) = close_last(base - 0.5 * (x[i].cos() + cj));
                            let mut p = inv_s * w[i];
                            for wp in wpow.iter_mut() {
                                *wp = p;
                                p *= wv;
                            }
                            for k1 in 0..kk {
                                let c = cs[i][k1];
                                let r = &mut row[k1 * kk..(k1 + 1) * kk];
                                for (rv, wp) in r.iter_mut().zip(&wpow) {
                                    *rv += wp * c;
                                }
                            }
                        }
                        for k1 in 0..kk {
                            for k2 in 0..kk {
                                let c = cs[j][k2] * w[j];
                                for k3 in 0..kk {
                                    acc[(k1 * kk + k2) * kk + k3] += row[k1 * kk + k3] * c;
                                }
                            }
                        }
                    }
                    acc
                })
                .collect();
            sum_parts(parts, kk * kk * kk, 1.0 / (PI * PI))
        }
        _ => unreachable!("dimension checked by the caller"),
    }
}

fn sum_parts(parts: Vec<Vec<Complex64>>, len: usize, scale: f64) -> Vec<Complex64> {
    let mut total = vec![Complex64::default(); len];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total.iter().map(|v| v * scale).collect()
}

fn box_index(k: &LatticePoint, kk: usize) -> usize {
    k.0.iter().fold(0, |acc, &c| acc * kk + c as usize)
}

fn eps_extrapolation(d: usize, lambda: f64, offsets: &[LatticePoint], tol: f64) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let kmax = offsets.iter().map(|k| k.sup_norm()).max().unwrap_or(0) as usize;
    let kk = kmax + 1;
    let idx: Vec<usize> = offsets.iter().map(|k| box_index(k, kk)).collect();
    let mut eps = Vec::new();
    let mut samples: Vec<Vec<Complex64>> = vec![Vec::new(); offsets.len()];
    let mut prev: Option<Vec<Complex64>> = None;
    let mut last_diff = f64::INFINITY;
    for level in 0..eps_max_levels(d) {
        let e = EPS0 * 0.5f64.powi(level as i32);
        let vals = eps_box(d, lambda, e, kmax);
        eps.push(e);
        for (s, &i) in samples.iter_mut().zip(&idx) {
            s.push(vals[i]);
        }
        let extrap: Vec<Complex64> = samples.iter().map(|s| *neville_to_zero(&eps, s).last().expect("nonempty")).collect();
        if let Some(p) = &prev {
            let diffs: Vec<f64> = extrap.iter().zip(p).map(|(a, b)| (a - b).norm()).collect();
            last_diff = diffs.iter().copied().fold(0.0, f64::max);
            if level >= 2 && last_diff < tol {
                return Ok((extrap, diffs));
            }
        }
        prev = Some(extrap);
    }
    Err(Error::NoConvergence {
        what: "Green function (epsilon extrapolation)".into(),
        detail: format!("successive extrapolants differ by {last_diff:.3e} > {tol:.1e}"),
    })
}

/// Hash-map view of a table restricted to given offsets; handy for callers
/// that look up the same kernel entries many times.
pub fn kernel_cache(table: &GreenTable, offsets: impl IntoIterator<Item = LatticePoint>) -> Result<HashMap<LatticePoint, Complex64>> {
    offsets.into_iter().map(|k| table.get(&k).map(|v| (k, v))).collect()
}
