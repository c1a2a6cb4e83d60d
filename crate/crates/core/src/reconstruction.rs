//! Layer-stripping recovery of the potential from the interior D-N map.
//!
//! Levels are `n₁ + n_d`. For each level `p` from `2M` down to `M + 1` and
//! each middle index `r' = (n₂, …, n_{d−1})`, boundary data are synthesised
//! so that the solution vanishes below level `p`, alternates in sign along
//! one diagonal of level `p`, and vanishes elsewhere on that level. The
//! interior equation at each diagonal point then yields `V` there. The lower
//! levels are handled by reflecting the cube through its centre.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dn::{BoundaryKind, BoundaryOperator};
use crate::error::{Error, Result};
use crate::lattice::{FaceSide, GridFunction, LatticePoint, RectDomain};
use crate::matrix::{condition_number, CMatrix};
use crate::scattering::Potential;

/// Largest condition number accepted for the face block and sub-region solves.
pub const SWEEP_COND: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructOptions {
    /// Gate on `|Λf|` over `∂Ω₁⁻` for every synthesised `f`.
    pub synth_tol: f64,
    /// Gate on the deviation of the synthesised data from the predicted
    /// vanishing/alternating pattern on `∂Ω₁⁺`.
    pub consistency_tol: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            synth_tol: 1e-10,
            consistency_tol: 1e-6,
        }
    }
}

/// `u` on `Ω̊ ∪ ∂Ω₁⁺` from Dirichlet data `f` off `∂Ω₁⁺` and Neumann data `g`
/// on `∂Ω₁⁻`, marching plane by plane in `n₁`.
pub fn cauchy_march(v: &Potential, lambda: f64, f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    let dom = v.domain();
    let (d, m) = (dom.dim(), dom.side());
    let mut u = GridFunction::new();
    for p in dom.boundary() {
        if dom.face_of(p) != Some((0, FaceSide::Plus)) {
            u.set(p.clone(), f.get(p)?);
        }
    }
    for &b in &dom.face(0, FaceSide::Minus) {
        let p = &dom.boundary()[b];
        u.set(p.shifted(0, 1), -4.0 * g.get(p)? + f.get(p)?);
    }
    for k in 1..=m {
        for n in dom.interior().iter().filter(|n| n.coords()[0] == k) {
            let mut next = (d as f64 / 2.0 + v.get(n) - lambda) * 4.0 * u.get(n)? - u.get(&n.shifted(0, -1))?;
            for j in 1..d {
                for s in [-1, 1] {
                    next -= u.get(&n.shifted(j, s))?;
                }
            }
            u.set(n.shifted(0, 1), next);
        }
    }
    Ok(u)
}

/// Completes `f₂` (given off `∂Ω₁⁺`, boundary order) on `∂Ω₁⁺` so that
/// `Λf = g` on `∂Ω₁⁻` (`g` in the order of `domain.face(0, Minus)`).
pub fn synth_boundary_data(lam: &CMatrix, domain: &RectDomain, f2: &[Complex64], g: &[Complex64]) -> Result<Vec<Complex64>> {
    let minus = domain.face(0, FaceSide::Minus);
    let plus = domain.face(0, FaceSide::Plus);
    if f2.len() != domain.n_boundary() || g.len() != minus.len() {
        return Err(Error::invalid("boundary data length does not match the cube"));
    }
    let block = CMatrix::from_fn(minus.len(), plus.len(), |i, j| lam[(minus[i], plus[j])]);
    let cond = condition_number(&block);
    if !(cond <= SWEEP_COND) {
        return Err(Error::DirichletEigenvalue { cond });
    }
    let mut f = f2.to_vec();
    for &j in &plus {
        f[j] = Complex64::default();
    }
    let rhs = DVector::from_fn(minus.len(), |i, _| g[i] - (0..f.len()).map(|j| lam[(minus[i], j)] * f[j]).sum::<Complex64>());
    let f1 = block.lu().solve(&rhs).ok_or(Error::DirichletEigenvalue { cond: f64::INFINITY })?;
    for (k, &j) in plus.iter().enumerate() {
        f[j] = f1[k];
    }
    Ok(f)
}

/// Conjugates `Λ` by the boundary permutation of `n ↦ (M + 1) − n`.
pub fn reflect_problem(lam: &BoundaryOperator) -> Result<BoundaryOperator> {
    let dom = lam.validate()?;
    let perm: Vec<usize> = dom
        .boundary()
        .iter()
        .map(|b| dom.boundary_index(&dom.reflect(b)).expect("the cube is reflection invariant"))
        .collect();
    let nb = perm.len();
    let mut out = lam.clone();
    out.matrix = CMatrix::from_fn(nb, nb, |i, j| lam.matrix[(perm[i], perm[j])]);
    Ok(out)
}

pub fn level(n: &LatticePoint) -> i64 {
    n.coords()[0] + n.coords()[n.dim() - 1]
}

fn middle_indices(d: usize, m: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 2..d {
        out = out
            .into_iter()
            .flat_map(|r: Vec<i64>| {
                (1..=m).map(move |c| {
                    let mut q = r.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

fn point(n1: i64, r: &[i64], nd: i64) -> LatticePoint {
    let mut c = vec![n1];
    c.extend_from_slice(r);
    c.push(nd);
    LatticePoint(c)
}

/// Diagnostics of one level of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: i64,
    pub reflected: bool,
    /// Condition number of the sub-region Dirichlet system (1 when empty).
    pub subregion_cond: f64,
    pub max_synth_residual: f64,
    pub max_pattern_defect: f64,
    /// Largest `|Im V|` produced by the read-off.
    pub max_imag: f64,
}

/// Partially recovered potential during the downward sweep.
#[derive(Clone, Debug)]
pub struct SweepState {
    pub domain: RectDomain,
    pub lambda: f64,
    /// `V` on interior points, in interior order; known exactly above `level`.
    pub known: Vec<Option<Complex64>>,
    pub level: i64,
}

impl SweepState {
    pub fn new(domain: &RectDomain, lambda: f64) -> Self {
        SweepState {
            domain: domain.clone(),
            lambda,
            known: vec![None; domain.n_interior()],
            level: 2 * domain.side() + 1,
        }
    }

    fn v(&self, n: &LatticePoint) -> Result<Complex64> {
        let i = self.domain.interior_index(n).ok_or_else(|| Error::MissingValue(n.0.clone()))?;
        self.known[i].ok_or_else(|| Error::MissingValue(n.0.clone()))
    }
}

/// Value of the probe solution at a level-`p` interior point.
fn pattern(p: i64, m: i64, r: &[i64], n: &LatticePoint) -> Complex64 {
    let c = n.coords();
    let d = c.len();
    if level(n) != p || c[1..d - 1] != *r {
        return Complex64::default();
    }
    let i = if p == m + 1 { c[0] - 1 } else { c[0] - (p - m - 1) };
    Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
}

/// Recovers `V` on level `state.level − 1` and advances the state.
pub fn sweep_level(state: &mut SweepState, lam: &CMatrix, options: &ReconstructOptions) -> Result<LevelReport> {
    let dom = state.domain.clone();
    let (d, m) = (dom.dim(), dom.side());
    let p = state.level - 1;
    if p < m + 1 {
        return Err(Error::invalid(format!("level {p} is below the range covered by one sweep")));
    }
    let err = |r: &[i64], detail: String| Error::Sweep {
        level: p,
        section: r.to_vec(),
        detail,
    };

    // Dirichlet problem on the levels above p, shared by every section.
    let upper: Vec<LatticePoint> = dom.interior().iter().filter(|n| level(n) > p).cloned().collect();
    let upper_index = |q: &LatticePoint| upper.iter().position(|x| x == q);
    let nu = upper.len();
    let mut h = CMatrix::zeros(nu, nu);
    for (i, n) in upper.iter().enumerate() {
        h[(i, i)] = state.v(n)? + d as f64 / 2.0 - state.lambda;
        for q in n.neighbors() {
            if let Some(j) = upper_index(&q) {
                h[(i, j)] -= 0.25;
            }
        }
    }
    let subregion_cond = condition_number(&h);
    if !(subregion_cond <= SWEEP_COND) {
        return Err(err(&[], format!("sub-region Dirichlet problem is singular (condition number {subregion_cond:.3e})")));
    }
    let lu = h.lu();

    let minus = dom.face(0, FaceSide::Minus);
    let plus = dom.face(0, FaceSide::Plus);
    let mut report = LevelReport {
        level: p,
        reflected: false,
        subregion_cond,
        max_synth_residual: 0.0,
        max_pattern_defect: 0.0,
        max_imag: 0.0,
    };
    let mut recovered = Vec::new();
    for r in middle_indices(d, m) {
        let datum = if p == m + 1 { point(0, &r, m) } else { point(p - m - 1, &r, m + 1) };
        let mut f2 = vec![Complex64::default(); dom.n_boundary()];
        f2[dom.boundary_index(&datum).expect("datum lies on the boundary")] = Complex64::new(1.0, 0.0);
        let f = synth_boundary_data(lam, &dom, &f2, &vec![Complex64::default(); minus.len()]).map_err(|e| err(&r, e.to_string()))?;

        let resid = minus
            .iter()
            .map(|&i| (0..f.len()).map(|j| lam[(i, j)] * f[j]).sum::<Complex64>().norm())
            .fold(0.0, f64::max);
        report.max_synth_residual = report.max_synth_residual.max(resid);
        if !(resid <= options.synth_tol) {
            return Err(err(&r, format!("synthesised data leave a Neumann residual {resid:.3e}")));
        }
        // On ∂Ω₁⁺ the data are values of the probe solution, so at levels ≤ p
        // they must follow the predicted pattern.
        let mut defect: f64 = 0.0;
        for &j in &plus {
            let b = &dom.boundary()[j];
            if level(b) <= p {
                defect = defect.max((f[j] - pattern(p, m, &r, b)).norm());
            }
        }
        report.max_pattern_defect = report.max_pattern_defect.max(defect);
        if !(defect <= options.consistency_tol) {
            return Err(err(&r, format!("probe solution deviates from the alternating pattern by {defect:.3e}")));
        }

        let known_u = |q: &LatticePoint| -> Complex64 {
            match dom.boundary_index(q) {
                Some(j) => f[j],
                None => pattern(p, m, &r, q),
            }
        };
        let rhs = DVector::from_fn(nu, |i, _| {
            upper[i]
                .neighbors()
                .filter(|q| upper_index(q).is_none())
                .map(|q| known_u(&q) * 0.25)
                .sum::<Complex64>()
        });
        let w = if nu == 0 {
            rhs
        } else {
            lu.solve(&rhs).ok_or_else(|| err(&r, "sub-region solve failed".into()))?
        };
        let u = |q: &LatticePoint| -> Complex64 {
            match upper_index(q) {
                Some(i) => w[i],
                None => known_u(q),
            }
        };

        for n in dom.interior().iter().filter(|n| level(n) == p && n.coords()[1..d - 1] == *r) {
            let un = pattern(p, m, &r, n);
            let s: Complex64 = n.neighbors().map(|q| u(&q)).sum();
            let val = s * 0.25 / un + state.lambda - d as f64 / 2.0;
            report.max_imag = report.max_imag.max(val.im.abs());
            recovered.push((dom.interior_index(n).expect("interior point"), val));
        }
    }
    for (i, val) in recovered {
        state.known[i] = Some(val);
    }
    state.level = p;
    Ok(report)
}

/// A recovered potential with the per-level diagnostics.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub potential: Potential,
    pub levels: Vec<LevelReport>,
    /// Disagreement on level `M + 1`, which both half-sweeps recover.
    pub overlap_defect: f64,
}

fn half_sweep(lam: &BoundaryOperator, dom: &RectDomain, options: &ReconstructOptions, reflected: bool) -> Result<(SweepState, Vec<LevelReport>)> {
    let mut state = SweepState::new(dom, lam.lambda);
    let mut reports = Vec::new();
    while state.level > dom.side() + 1 {
        let mut rep = sweep_level(&mut state, &lam.matrix, options)?;
        rep.reflected = reflected;
        reports.push(rep);
    }
    Ok((state, reports))
}

/// Full recovery: levels `2M … M+1` directly, the rest after reflection.
pub fn reconstruct(lam: &BoundaryOperator, options: &ReconstructOptions) -> Result<Reconstruction> {
    if lam.kind != BoundaryKind::InteriorDn {
        return Err(Error::IndexMismatch(format!("expected an interior D-N map, got {:?}", lam.kind)));
    }
    let dom = lam.validate()?;
    let (upper, mut levels) = half_sweep(lam, &dom, options, false)?;
    let (lower, lower_levels) = half_sweep(&reflect_problem(lam)?, &dom, options, true)?;
    levels.extend(lower_levels);

    let mut values = vec![0.0; dom.n_interior()];
    let mut overlap_defect: f64 = 0.0;
    for (i, n) in dom.interior().iter().enumerate() {
        let mirrored = dom.interior_index(&dom.reflect(n)).expect("the cube is reflection invariant");
        let from_upper = upper.known[i];
        let from_lower = lower.known[mirrored];
        let v = match (from_upper, from_lower) {
            (Some(a), Some(b)) => {
                overlap_defect = overlap_defect.max((a - b).norm());
                a
            }
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => return Err(Error::MissingValue(n.0.clone())),
        };
        values[i] = v.re;
    }
    Ok(Reconstruction {
        potential: Potential::from_values(&dom, values)?,
        levels,
        overlap_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dn::{dirichlet_solve, interior_dn};
    use crate::lattice::normal_derivative;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn boundary_gf(dom: &RectDomain, f: &[Complex64]) -> GridFunction {
        GridFunction::from_fn(dom.boundary(), |p| f[dom.boundary_index(p).unwrap()])
    }

    #[test]
    fn march_reproduces_dirichlet_solution() {
        for (d, m) in [(2, 3), (3, 2)] {
            let dom = RectDomain::new(d, m).unwrap();
            let v = Potential::random(&dom, -0.5, 0.5, 11).unwrap();
            let f: Vec<Complex64> = (0..dom.n_boundary()).map(|i| Complex64::new((i as f64 * 0.37).sin(), 0.2)).collect();
            let u = dirichlet_solve(&v, 0.3, &f).unwrap();
            let g = normal_derivative(&dom, &u).unwrap();
            let marched = cauchy_march(&v, 0.3, &boundary_gf(&dom, &f), &g).unwrap();
            for p in dom.interior().iter().chain(dom.boundary()) {
                let diff = (marched.get(p).unwrap() - u.get(p).unwrap()).norm();
                assert!(diff <= 1e-10, "{p:?}: {diff:.3e}");
            }
        }
    }

    #[test]
    fn march_of_harmonic_and_zero_data() {
        let dom = RectDomain::new(2, 3).unwrap();
        let zero = Potential::zero(&dom);
        let lin = |p: &LatticePoint| c(p.coords()[0] as f64);
        let f = GridFunction::from_fn(dom.boundary(), lin);
        let g = GridFunction::from_fn(dom.boundary(), |p| if p.coords()[0] == 0 { c(-0.25) } else { c(0.0) });
        let u = cauchy_march(&zero, 0.0, &f, &g).unwrap();
        for p in dom.interior() {
            assert!((u.get(p).unwrap() - lin(p)).norm() < 1e-13);
        }
        let z = GridFunction::from_fn(dom.boundary(), |_| c(0.0));
        let v = Potential::random(&dom, -0.5, 0.5, 3).unwrap();
        let u = cauchy_march(&v, 0.3, &z, &z).unwrap();
        assert!(u.iter().all(|(_, x)| x.norm() == 0.0));
    }

    #[test]
    fn synthesis_m1_and_uniqueness() {
        let dom = RectDomain::new(2, 1).unwrap();
        let lam = interior_dn(&Potential::zero(&dom), 0.0).unwrap();
        let minus = dom.face(0, FaceSide::Minus)[0];
        let plus = dom.face(0, FaceSide::Plus)[0];
        assert!((lam.matrix[(minus, plus)] - c(-1.0 / 16.0)).norm() < 1e-15);
        let f = synth_boundary_data(&lam.matrix, &dom, &[c(0.0); 4], &[c(0.0)]).unwrap();
        assert!(f.iter().all(|z| z.norm() == 0.0));

        let dom = RectDomain::new(3, 2).unwrap();
        let v = Potential::random(&dom, -0.5, 0.5, 5).unwrap();
        let lam = interior_dn(&v, 0.4).unwrap();
        let f2: Vec<Complex64> = (0..dom.n_boundary()).map(|i| c(i as f64 / 10.0)).collect();
        let g: Vec<Complex64> = (0..4).map(|i| Complex64::new(0.0, i as f64)).collect();
        let f = synth_boundary_data(&lam.matrix, &dom, &f2, &g).unwrap();
        let lf = &lam.matrix * DVector::from_vec(f.clone());
        for (k, &i) in dom.face(0, FaceSide::Minus).iter().enumerate() {
            assert!((lf[i] - g[k]).norm() <= 1e-10);
        }
        for (j, b) in dom.boundary().iter().enumerate() {
            if dom.face_of(b) != Some((0, FaceSide::Plus)) {
                assert_eq!(f[j], f2[j]);
            }
        }
    }

    /// The probe solution implied by synthesised data vanishes below level
    /// `p` and alternates along the diagonal.
    #[test]
    fn probe_solution_pattern() {
        let dom = RectDomain::new(2, 3).unwrap();
        let v = Potential::random(&dom, -0.5, 0.5, 9).unwrap();
        let lam = interior_dn(&v, 0.3).unwrap();
        for p in 4..=6 {
            let datum = if p == 4 { point(0, &[], 3) } else { point(p - 4, &[], 4) };
            let mut f2 = vec![c(0.0); dom.n_boundary()];
            f2[dom.boundary_index(&datum).unwrap()] = c(1.0);
            let f = synth_boundary_data(&lam.matrix, &dom, &f2, &[c(0.0); 3]).unwrap();
            let u = dirichlet_solve(&v, 0.3, &f).unwrap();
            for n in dom.interior().iter().filter(|n| level(n) <= p) {
                assert!((u.get(n).unwrap() - pattern(p, 3, &[], n)).norm() <= 1e-9, "p = {p}, {n:?}");
            }
        }
    }

    #[test]
    fn single_site_top_level() {
        let dom = RectDomain::new(2, 2).unwrap();
        let v = Potential::from_entries(2, 2, &[(LatticePoint::from([2, 2]), 0.5)]).unwrap();
        let lam = interior_dn(&v, 0.3).unwrap();
        let mut state = SweepState::new(&dom, 0.3);
        sweep_level(&mut state, &lam.matrix, &ReconstructOptions::default()).unwrap();
        let i = dom.interior_index(&LatticePoint::from([2, 2])).unwrap();
        assert!((state.known[i].unwrap() - c(0.5)).norm() <= 1e-9);
        assert_eq!(state.known.iter().filter(|x| x.is_some()).count(), 1);
    }

    #[test]
    fn reflection() {
        let dom = RectDomain::new(3, 2).unwrap();
        let v = Potential::random(&dom, -0.5, 0.5, 13).unwrap();
        let lam = interior_dn(&v, 0.4).unwrap();
        let once = reflect_problem(&lam).unwrap();
        assert_eq!(reflect_problem(&once).unwrap(), lam);
        let direct = interior_dn(&v.reflect(), 0.4).unwrap();
        assert!((&once.matrix - &direct.matrix).camax() <= 1e-12);
        let sym = Potential::from_values(&dom, (0..dom.n_interior()).map(|i| v.values()[i] + v.reflect().values()[i]).collect()).unwrap();
        let ls = interior_dn(&sym, 0.4).unwrap();
        assert!((&reflect_problem(&ls).unwrap().matrix - &ls.matrix).camax() <= 1e-12);
    }

    #[test]
    fn zero_potential_round_trip() {
        let dom = RectDomain::new(2, 3).unwrap();
        let lam = interior_dn(&Potential::zero(&dom), 0.3).unwrap();
        let rec = reconstruct(&lam, &ReconstructOptions::default()).unwrap();
        assert!(rec.potential.values().iter().all(|x| x.abs() <= 1e-9));
    }

    #[test]
    fn round_trip_exact_data() {
        for (d, m, lambda, tol) in [(2, 2, 0.3, 1e-7), (2, 3, 0.3, 1e-7), (3, 2, 0.4, 1e-6)] {
            let dom = RectDomain::new(d, m).unwrap();
            for seed in 0..5 {
                let v = Potential::random(&dom, -0.5, 0.5, seed).unwrap();
                let lam = interior_dn(&v, lambda).unwrap();
                let rec = reconstruct(&lam, &ReconstructOptions::default()).unwrap();
                let err = rec.potential.max_abs_diff(&v);
                assert!(err <= tol, "d={d} M={m} seed={seed}: {err:.3e}");
                assert!(rec.overlap_defect <= tol);
                assert_eq!(rec.levels.len(), 2 * m as usize);
            }
        }
    }

    #[test]
    fn rejects_wrong_operator_kind() {
        let dom = RectDomain::new(2, 2).unwrap();
        let mut lam = interior_dn(&Potential::zero(&dom), 0.3).unwrap();
        lam.kind = BoundaryKind::Boundary;
        assert!(matches!(reconstruct(&lam, &ReconstructOptions::default()), Err(Error::IndexMismatch(_))));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_property(seed in 0u64..10_000, lambda in 0.05f64..0.95) {
            let dom = RectDomain::new(2, 2).unwrap();
            let v = Potential::random(&dom, -0.5, 0.5, seed).unwrap();
            if let Ok(lam) = interior_dn(&v, lambda) {
                if let Ok(rec) = reconstruct(&lam, &ReconstructOptions::default()) {
                    proptest::prop_assert!(rec.potential.max_abs_diff(&v) <= 1e-7);
                }
            }
        }
    }
}
