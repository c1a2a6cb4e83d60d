//! Lattice points, rectangular domains and the boundary calculus of the
//! discrete Laplacian on `Z^d`.
//!
//! The Laplacian is normalised as `(Δu)(n) = ¼ Σ_{m∼n} (u(m) − u(n))`, so that
//! `−Δ` has symbol `h(x) = ½(d − Σ cos x_j)`.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the square lattice `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        LatticePoint(coords.into())
    }

    pub fn origin(d: usize) -> Self {
        LatticePoint(vec![0; d])
    }

    /// The unit vector `e_j` (zero-based `j`).
    pub fn unit(d: usize, j: usize) -> Self {
        let mut c = vec![0; d];
        c[j] = 1;
        LatticePoint(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn add(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|a| -a).collect())
    }

    /// `self ± e_j`.
    pub fn shifted(&self, j: usize, step: i64) -> LatticePoint {
        let mut c = self.0.clone();
        c[j] += step;
        LatticePoint(c)
    }

    /// The `2d` nearest neighbours, ordered `+e_1, −e_1, +e_2, …`.
    pub fn neighbors(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.dim()).flat_map(move |j| [self.shifted(j, 1), self.shifted(j, -1)])
    }

    /// Sup norm `R(k) = max_j |k_j|`.
    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&n, &xi)| n as f64 * xi).sum()
    }

    pub fn is_adjacent(&self, other: &LatticePoint) -> bool {
        let mut diff = 0;
        for (a, b) in self.0.iter().zip(&other.0) {
            diff += (a - b).abs();
            if diff > 1 {
                return false;
            }
        }
        diff == 1
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint(v)
    }
}

impl<const N: usize> From<[i64; N]> for LatticePoint {
    fn from(v: [i64; N]) -> Self {
        LatticePoint(v.to_vec())
    }
}

/// Which face of the cube a boundary vertex sits on: `n_axis = 0` (`Minus`)
/// or `n_axis = M + 1` (`Plus`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceSide {
    Minus,
    Plus,
}

/// The cube `{1 ≤ n_j ≤ M}` together with its face boundary.
///
/// Interior vertices come first (lexicographic), then boundary vertices
/// (lexicographic). Corners, i.e. points with two or more coordinates outside
/// `[1, M]`, belong to neither set.
#[derive(Clone, Debug, PartialEq)]
pub struct RectDomain {
    d: usize,
    m: i64,
    interior: Vec<LatticePoint>,
    boundary: Vec<LatticePoint>,
    interior_index: HashMap<LatticePoint, usize>,
    boundary_index: HashMap<LatticePoint, usize>,
}

impl RectDomain {
    pub fn new(d: usize, m: i64) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid(format!("dimension must be at least 2, got {d}")));
        }
        if m < 1 {
            return Err(Error::invalid(format!("side length must be at least 1, got {m}")));
        }
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        // Enumerate the box [0, M+1]^d lexicographically.
        let side = (m + 2) as usize;
        let total = side.pow(d as u32);
        for flat in 0..total {
            let mut rem = flat;
            let mut coords = vec![0i64; d];
            for j in (0..d).rev() {
                coords[j] = (rem % side) as i64;
                rem /= side;
            }
            let outside = coords.iter().filter(|&&c| c < 1 || c > m).count();
            match outside {
                0 => interior.push(LatticePoint(coords)),
                1 => boundary.push(LatticePoint(coords)),
                _ => {}
            }
        }
        let interior_index = interior.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let boundary_index = boundary.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        Ok(RectDomain {
            d,
            m,
            interior,
            boundary,
            interior_index,
            boundary_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> i64 {
        self.m
    }

    pub fn interior(&self) -> &[LatticePoint] {
        &self.interior
    }

    pub fn boundary(&self) -> &[LatticePoint] {
        &self.boundary
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn interior_index(&self, p: &LatticePoint) -> Option<usize> {
        self.interior_index.get(p).copied()
    }

    pub fn boundary_index(&self, p: &LatticePoint) -> Option<usize> {
        self.boundary_index.get(p).copied()
    }

    pub fn is_interior(&self, p: &LatticePoint) -> bool {
        self.interior_index.contains_key(p)
    }

    pub fn is_boundary(&self, p: &LatticePoint) -> bool {
        self.boundary_index.contains_key(p)
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.is_interior(p) || self.is_boundary(p)
    }

    /// Face `(axis, side)` of a boundary vertex.
    pub fn face_of(&self, p: &LatticePoint) -> Option<(usize, FaceSide)> {
        if !self.is_boundary(p) {
            return None;
        }
        p.0.iter().enumerate().find_map(|(j, &c)| {
            if c == 0 {
                Some((j, FaceSide::Minus))
            } else if c == self.m + 1 {
                Some((j, FaceSide::Plus))
            } else {
                None
            }
        })
    }

    /// Boundary indices of the face `∂Ω_axis^±`, in boundary order.
    pub fn face(&self, axis: usize, side: FaceSide) -> Vec<usize> {
        let target = match side {
            FaceSide::Minus => 0,
            FaceSide::Plus => self.m + 1,
        };
        self.boundary
            .iter()
            .enumerate()
            .filter(|(_, p)| p.0[axis] == target)
            .map(|(i, _)| i)
            .collect()
    }

    /// The unique interior neighbour of a boundary vertex.
    pub fn interior_neighbor(&self, boundary_idx: usize) -> usize {
        let p = &self.boundary[boundary_idx];
        let (axis, side) = self.face_of(p).expect("boundary vertex has a face");
        let step = match side {
            FaceSide::Minus => 1,
            FaceSide::Plus => -1,
        };
        self.interior_index[&p.shifted(axis, step)]
    }

    /// Point reflection `n_j → M + 1 − n_j` in every coordinate.
    pub fn reflect(&self, p: &LatticePoint) -> LatticePoint {
        LatticePoint(p.0.iter().map(|&c| self.m + 1 - c).collect())
    }

    /// Grid function on `interior ∪ boundary` from vectors in domain order.
    pub fn grid_function(&self, interior: &[Complex64], boundary: &[Complex64]) -> GridFunction {
        let mut u = GridFunction::new();
        for (p, &v) in self.interior.iter().zip(interior) {
            u.set(p.clone(), v);
        }
        for (p, &v) in self.boundary.iter().zip(boundary) {
            u.set(p.clone(), v);
        }
        u
    }
}

/// Convenience constructor mirroring the domain-building operation.
pub fn build_domain(d: usize, m: i64) -> Result<RectDomain> {
    RectDomain::new(d, m)
}

/// A finitely supported complex function on lattice points.
///
/// Lookups outside the stored points are errors unless the caller
/// explicitly asks for zero extension with [`GridFunction::get_or_zero`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    values: BTreeMap<LatticePoint, Complex64>,
}

impl GridFunction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_fn<'a>(points: impl IntoIterator<Item = &'a LatticePoint>, mut f: impl FnMut(&LatticePoint) -> Complex64) -> Self {
        let values = points.into_iter().map(|p| (p.clone(), f(p))).collect();
        GridFunction { values }
    }

    pub fn set(&mut self, p: LatticePoint, v: Complex64) {
        self.values.insert(p, v);
    }

    pub fn get(&self, p: &LatticePoint) -> Result<Complex64> {
        self.values.get(p).copied().ok_or_else(|| Error::MissingValue(p.0.clone()))
    }

    pub fn get_or_zero(&self, p: &LatticePoint) -> Complex64 {
        self.values.get(p).copied().unwrap_or_default()
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.values.contains_key(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticePoint, &Complex64)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Degree of `n` in the domain graph. Edges join interior vertices to their
/// neighbours; two boundary vertices are never joined.
pub fn degree(domain: &RectDomain, n: &LatticePoint) -> Result<usize> {
    if !domain.contains(n) {
        return Err(Error::invalid(format!("{:?} is not a vertex of the domain", n.0)));
    }
    if domain.is_interior(n) {
        Ok(n.neighbors().filter(|m| domain.contains(m)).count())
    } else {
        Ok(n.neighbors().filter(|m| domain.is_interior(m)).count())
    }
}

/// `(Δu)(n) = ¼ Σ_{m∼n} (u(m) − u(n))`.
pub fn discrete_laplacian(u: &GridFunction, n: &LatticePoint) -> Result<Complex64> {
    let un = u.get(n)?;
    let mut acc = Complex64::default();
    for m in n.neighbors() {
        acc += u.get(&m)? - un;
    }
    Ok(acc * 0.25)
}

/// Outward normal derivative on the boundary,
/// `(∂_ν u)(n) = ¼ Σ_{m interior, m∼n} (u(n) − u(m))`.
pub fn normal_derivative(domain: &RectDomain, u: &GridFunction) -> Result<GridFunction> {
    let mut out = GridFunction::new();
    for (b, p) in domain.boundary().iter().enumerate() {
        let m = &domain.interior()[domain.interior_neighbor(b)];
        out.set(p.clone(), (u.get(p)? - u.get(m)?) * 0.25);
    }
    Ok(out)
}

/// `|Σ_int (Δu·v − u·Δv) − Σ_∂ (∂_ν u·v − u·∂_ν v)|`, which vanishes identically.
pub fn greens_identity_defect(domain: &RectDomain, u: &GridFunction, v: &GridFunction) -> Result<f64> {
    let mut volume = Complex64::default();
    for n in domain.interior() {
        volume += discrete_laplacian(u, n)? * v.get(n)? - u.get(n)? * discrete_laplacian(v, n)?;
    }
    let du = normal_derivative(domain, u)?;
    let dv = normal_derivative(domain, v)?;
    let mut surface = Complex64::default();
    for n in domain.boundary() {
        surface += du.get(n)? * v.get(n)? - u.get(n)? * dv.get(n)?;
    }
    Ok((volume - surface).norm())
}

/// Whether `m` lies on the face shell `∂D(R)` of the cube `[−R, R]^d`.
pub fn in_shell(m: &LatticePoint, r: i64) -> bool {
    let mut on_face = 0;
    for &c in &m.0 {
        let a = c.abs();
        if a == r + 1 {
            on_face += 1;
        } else if a > r + 1 {
            return false;
        }
    }
    on_face == 1
}

/// Neighbours of `k` lying on the shell `∂D(R(k))`.
pub fn shell_neighbors(k: &LatticePoint) -> Vec<LatticePoint> {
    let r = k.sup_norm();
    k.neighbors().filter(|m| in_shell(m, r)).collect()
}

/// `(∂_rad u)(k) = ¼ Σ_{m ∈ ∂D(R(k)), m∼k} (u(m) − u(k))`.
pub fn radial_derivative(u: &GridFunction, k: &LatticePoint) -> Result<Complex64> {
    let uk = u.get(k)?;
    let mut acc = Complex64::default();
    for m in shell_neighbors(k) {
        acc += u.get(&m)? - uk;
    }
    Ok(acc * 0.25)
}

/// Membership in the backward cone `C_1(n)`: `Σ_{k≠1} |m_k − n_k| ≤ −(m_1 − n_1)`.
pub fn in_cone(vertex: &LatticePoint, m: &LatticePoint) -> bool {
    let lateral: i64 = (1..vertex.dim()).map(|k| (m.0[k] - vertex.0[k]).abs()).sum();
    lateral <= vertex.0[0] - m.0[0]
}

/// Domain vertices in the cone `C_1(n)`, in domain order.
pub fn cone(n: &LatticePoint, domain: &RectDomain) -> Vec<LatticePoint> {
    domain
        .interior()
        .iter()
        .chain(domain.boundary())
        .filter(|m| in_cone(n, m))
        .cloned()
        .collect()
}

/// Discrete `B*` norm squared: `max_{1<R≤R_max} (1/R) Σ_{|n|<R} |u(n)|²`,
/// with `u` zero-extended outside its stored points.
pub fn bstar_norm(u: &GridFunction, r_max: i64) -> f64 {
    let mut best = 0.0f64;
    for r in 2..=r_max {
        let rf = r as f64;
        let s: f64 = u.iter().filter(|(p, _)| p.norm() < rf).map(|(_, v)| v.norm_sqr()).sum();
        best = best.max(s / rf);
    }
    best
}
