//! Dirichlet-to-Neumann maps of the cube and the boundary operators on its
//! face boundary `C`: the degree and adjacency operators `deg̃`, `S_C`, the
//! single layer `M = (R̂ δ_n)(m)|_{m,n∈C}`, its inverse `B`, and the exterior
//! D-N map.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LimitSign, SpectralParam};
use crate::green::{GreenOptions, GreenTable};
use crate::lattice::{GridFunction, LatticePoint, RectDomain};
use crate::matrix::{checked_inverse, serde_cmatrix, CMatrix};
use crate::scattering::{resolvent_matrix, Potential, ResolventSolver, EXCEPTIONAL_COND};

/// Condition number above which the interior block is treated as singular.
pub const DIRICHLET_COND: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    InteriorDn,
    ExteriorDn,
    Boundary,
    SingleLayer,
    Degree,
    Shift,
}

/// A matrix on `ℓ²(C)` together with the boundary vertex order it uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOperator {
    pub kind: BoundaryKind,
    pub d: usize,
    pub m: i64,
    pub lambda: f64,
    pub sign: Option<LimitSign>,
    pub vertices: Vec<LatticePoint>,
    #[serde(with = "serde_cmatrix")]
    pub matrix: CMatrix,
}

impl BoundaryOperator {
    pub fn new(kind: BoundaryKind, domain: &RectDomain, lambda: f64, sign: Option<LimitSign>, matrix: CMatrix) -> Self {
        BoundaryOperator {
            kind,
            d: domain.dim(),
            m: domain.side(),
            lambda,
            sign,
            vertices: domain.boundary().to_vec(),
            matrix,
        }
    }

    pub fn domain(&self) -> Result<RectDomain> {
        RectDomain::new(self.d, self.m)
    }

    /// Checks that the stored vertex order is the canonical one for the cube.
    pub fn validate(&self) -> Result<RectDomain> {
        let dom = self.domain()?;
        if self.vertices != dom.boundary() {
            return Err(Error::IndexMismatch("boundary vertex order differs from the canonical order".into()));
        }
        let n = dom.n_boundary();
        if self.matrix.nrows() != n || self.matrix.ncols() != n {
            return Err(Error::IndexMismatch(format!(
                "boundary operator is {}x{}, expected {n}x{n}",
                self.matrix.nrows(),
                self.matrix.ncols()
            )));
        }
        Ok(dom)
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).camax()
    }
}

/// Blocks of `H − λ` on interior (`0`) and boundary (`1`) vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianBlocks {
    pub h00: CMatrix,
    pub h01: CMatrix,
    pub h10: CMatrix,
    pub h11: CMatrix,
}

/// `H₀₀ = diag(d/2 + V − λ) − ¼·(interior adjacency)`, `H₀₁ = H₁₀ᵀ = −¼` on
/// interior–boundary edges, `H₁₁ = ¼ I`.
pub fn assemble_hamiltonian(v: &Potential, lambda: f64) -> HamiltonianBlocks {
    assemble_with(v.domain(), &v.values().iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>(), lambda)
}

pub(crate) fn assemble_with(domain: &RectDomain, v: &[Complex64], lambda: f64) -> HamiltonianBlocks {
    let d = domain.dim();
    let (ni, nb) = (domain.n_interior(), domain.n_boundary());
    let mut h00 = CMatrix::zeros(ni, ni);
    let mut h01 = CMatrix::zeros(ni, nb);
    for (i, p) in domain.interior().iter().enumerate() {
        h00[(i, i)] = v[i] + d as f64 / 2.0 - lambda;
        for q in p.neighbors() {
            if let Some(j) = domain.interior_index(&q) {
                h00[(i, j)] = Complex64::new(-0.25, 0.0);
            } else if let Some(j) = domain.boundary_index(&q) {
                h01[(i, j)] = Complex64::new(-0.25, 0.0);
            }
        }
    }
    let h10 = h01.transpose();
    let h11 = CMatrix::identity(nb, nb) * Complex64::new(0.25, 0.0);
    HamiltonianBlocks { h00, h01, h10, h11 }
}

/// `max(σ_max, 1) / σ_min`; the unit floor keeps small blocks honest.
fn dirichlet_condition(h00: &CMatrix) -> f64 {
    if h00.is_empty() {
        return 1.0;
    }
    let sv = h00.singular_values();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv.max().max(1.0) / min
    }
}

fn dirichlet_inverse(h00: &CMatrix) -> Result<CMatrix> {
    let cond = dirichlet_condition(h00);
    if !(cond <= DIRICHLET_COND) {
        return Err(Error::DirichletEigenvalue { cond });
    }
    checked_inverse(h00, f64::INFINITY, |cond| Error::DirichletEigenvalue { cond })
}

/// `Λ = H₁₁ − H₁₀ H₀₀⁻¹ H₀₁`.
pub fn interior_dn(v: &Potential, lambda: f64) -> Result<BoundaryOperator> {
    let h = assemble_hamiltonian(v, lambda);
    let inv = dirichlet_inverse(&h.h00)?;
    let lam = &h.h11 - &h.h10 * inv * &h.h01;
    Ok(BoundaryOperator::new(BoundaryKind::InteriorDn, v.domain(), lambda, None, lam))
}

/// Interior D-N map for a complex interior potential; used when the
/// potential is only known approximately.
pub fn interior_dn_complex(domain: &RectDomain, v: &[Complex64], lambda: f64) -> Result<CMatrix> {
    let h = assemble_with(domain, v, lambda);
    let inv = dirichlet_inverse(&h.h00)?;
    Ok(&h.h11 - &h.h10 * inv * &h.h01)
}

/// Solution of `(−Δ + V − λ) u = 0` in the interior with `u = f` on the
/// boundary (`f` in boundary order).
pub fn dirichlet_solve(v: &Potential, lambda: f64, f: &[Complex64]) -> Result<GridFunction> {
    let dom = v.domain();
    if f.len() != dom.n_boundary() {
        return Err(Error::invalid(format!("expected {} boundary values, got {}", dom.n_boundary(), f.len())));
    }
    let h = assemble_hamiltonian(v, lambda);
    let rhs = -(&h.h01 * nalgebra::DVector::from_column_slice(f));
    let cond = dirichlet_condition(&h.h00);
    if !(cond <= DIRICHLET_COND) {
        return Err(Error::DirichletEigenvalue { cond });
    }
    let u = h.h00.lu().solve(&rhs).ok_or(Error::DirichletEigenvalue { cond: f64::INFINITY })?;
    Ok(dom.grid_function(u.as_slice(), f))
}

/// `deg̃(n) = ¼ #{m ∈ C : m ∼ n}` on the diagonal.
pub fn deg_tilde(domain: &RectDomain) -> BoundaryOperator {
    let nb = domain.n_boundary();
    let mut m = CMatrix::zeros(nb, nb);
    for (i, p) in domain.boundary().iter().enumerate() {
        let c = p.neighbors().filter(|q| domain.is_boundary(q)).count();
        m[(i, i)] = Complex64::new(0.25 * c as f64, 0.0);
    }
    BoundaryOperator::new(BoundaryKind::Degree, domain, 0.0, None, m)
}

/// `S_C = ¼ Σ_j χ_C (S_j + S_j*) χ_C`: a quarter of the adjacency inside `C`.
pub fn shift_op(domain: &RectDomain) -> BoundaryOperator {
    let nb = domain.n_boundary();
    let mut m = CMatrix::zeros(nb, nb);
    for (i, p) in domain.boundary().iter().enumerate() {
        for q in p.neighbors() {
            if let Some(j) = domain.boundary_index(&q) {
                m[(i, j)] = Complex64::new(0.25, 0.0);
            }
        }
    }
    BoundaryOperator::new(BoundaryKind::Shift, domain, 0.0, None, m)
}

/// `M[m, n] = (R̂(λ ± i0) δ_n)(m)` for `m, n ∈ C`.
pub fn single_layer(solver: &mut ResolventSolver, domain: &RectDomain) -> Result<BoundaryOperator> {
    let param = solver.param();
    let pts = domain.boundary().to_vec();
    let m = resolvent_matrix(solver, &pts, &pts)?;
    Ok(BoundaryOperator::new(BoundaryKind::SingleLayer, domain, param.lambda, Some(param.sign), m))
}

/// `B = M⁻¹`.
pub fn boundary_op(single: &BoundaryOperator) -> Result<BoundaryOperator> {
    let inv = checked_inverse(&single.matrix, EXCEPTIONAL_COND, |cond| Error::ExceptionalEnergy {
        what: "single-layer operator".into(),
        cond,
    })?;
    let dom = single.domain()?;
    Ok(BoundaryOperator::new(BoundaryKind::Boundary, &dom, single.lambda, single.sign, inv))
}

/// Free-space quantities on the cube's face boundary at one energy and sign.
#[derive(Clone, Debug)]
pub struct FreeBoundaryData {
    pub lambda0: BoundaryOperator,
    pub m0: BoundaryOperator,
    pub b0: BoundaryOperator,
    pub exterior: BoundaryOperator,
}

/// `Λ_ext^{(±)} = Λ₀ − B₀^{(±)} − λ I + deg̃ − S_C`, together with the free
/// operators it is built from.
pub fn exterior_dn(domain: &RectDomain, param: &SpectralParam, options: GreenOptions) -> Result<FreeBoundaryData> {
    exterior_dn_with_table(domain, GreenTable::new(param, options)?)
}

/// [`exterior_dn`] reusing an existing Green table (its sign is used).
pub fn exterior_dn_with_table(domain: &RectDomain, table: GreenTable) -> Result<FreeBoundaryData> {
    let param = table.param();
    let zero = Potential::zero(domain);
    let lambda0 = interior_dn(&zero, param.lambda)?;
    let mut solver = ResolventSolver::new(&zero, table)?;
    let m0 = single_layer(&mut solver, domain)?;
    let b0 = boundary_op(&m0)?;
    let nb = domain.n_boundary();
    let ext = &lambda0.matrix - &b0.matrix - CMatrix::identity(nb, nb) * Complex64::new(param.lambda, 0.0) + deg_tilde(domain).matrix
        - shift_op(domain).matrix;
    let exterior = BoundaryOperator::new(BoundaryKind::ExteriorDn, domain, param.lambda, Some(param.sign), ext);
    Ok(FreeBoundaryData { lambda0, m0, b0, exterior })
}

/// `B^{(±)}` reassembled from an interior D-N map:
/// `Λ_V − Λ_ext − λ I + deg̃ − S_C`.
pub fn boundary_from_dn(lambda_v: &CMatrix, exterior: &BoundaryOperator, domain: &RectDomain) -> CMatrix {
    let nb = domain.n_boundary();
    lambda_v - &exterior.matrix - CMatrix::identity(nb, nb) * Complex64::new(exterior.lambda, 0.0) + deg_tilde(domain).matrix
        - shift_op(domain).matrix
}

/// `Λ_V = B + Λ_ext + λ I − deg̃ + S_C`.
pub fn dn_from_boundary(b: &CMatrix, exterior: &BoundaryOperator, domain: &RectDomain) -> CMatrix {
    let nb = domain.n_boundary();
    b + &exterior.matrix + CMatrix::identity(nb, nb) * Complex64::new(exterior.lambda, 0.0) - deg_tilde(domain).matrix
        + shift_op(domain).matrix
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::normal_derivative;
    use crate::matrix::frobenius;
    use crate::scattering::cube_points;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn hamiltonian_m1() {
        let dom = RectDomain::new(2, 1).unwrap();
        let h = assemble_hamiltonian(&Potential::zero(&dom), 0.0);
        assert_eq!(h.h00, CMatrix::from_element(1, 1, c(1.0)));
        assert_eq!(h.h10, CMatrix::from_element(4, 1, c(-0.25)));
        assert_eq!(h.h11, CMatrix::identity(4, 4) * c(0.25));
    }

    /// Edge-list assembly as an independent oracle for the block structure.
    #[test]
    fn hamiltonian_matches_edge_enumeration() {
        let dom = RectDomain::new(3, 2).unwrap();
        let v = Potential::random(&dom, -0.5, 0.5, 2).unwrap();
        let lambda = 0.3;
        let h = assemble_hamiltonian(&v, lambda);
        let all: Vec<LatticePoint> = dom.interior().iter().chain(dom.boundary()).cloned().collect();
        let ni = dom.n_interior();
        let n = all.len();
        let mut full = CMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let interior_edge = a < ni || b < ni;
                if all[a].is_adjacent(&all[b]) && interior_edge {
                    full[(a, b)] -= c(0.25);
                    full[(a, a)] += c(0.25);
                }
            }
        }
        for i in 0..ni {
            full[(i, i)] += c(v.values()[i] - lambda);
        }
        let mut blocks = CMatrix::zeros(n, n);
        blocks.view_mut((0, 0), (ni, ni)).copy_from(&h.h00);
        blocks.view_mut((0, ni), (ni, n - ni)).copy_from(&h.h01);
        blocks.view_mut((ni, 0), (n - ni, ni)).copy_from(&h.h10);
        blocks.view_mut((ni, ni), (n - ni, n - ni)).copy_from(&h.h11);
        assert_eq!(blocks, full);
        assert_eq!(blocks, blocks.transpose());
        for i in 0..ni {
            let row: Complex64 = h.h00.row(i).sum() + h.h01.row(i).sum();
            assert!((row - c(v.values()[i] - lambda)).norm() < 1e-15);
        }
    }

    #[test]
    fn dn_golden_m1() {
        let dom = RectDomain::new(2, 1).unwrap();
        let lam = interior_dn(&Potential::zero(&dom), 0.0).unwrap();
        let expect = CMatrix::from_fn(4, 4, |i, j| c(if i == j { 0.25 } else { 0.0 } - 1.0 / 16.0));
        assert!((&lam.matrix - &expect).camax() <= 1e-14);
        for i in 0..4 {
            assert!(lam.matrix.row(i).sum().norm() < 1e-15);
        }
    }

    #[test]
    fn schur_matches_direct_solve() {
        for (d, m) in [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)] {
            let dom = RectDomain::new(d, m).unwrap();
            let v = Potential::random(&dom, -0.5, 0.5, 7 + m as u64).unwrap();
            let lam = interior_dn(&v, 0.3).unwrap();
            assert!(lam.symmetry_defect() <= 1e-12);
            for j in 0..dom.n_boundary() {
                let mut f = vec![c(0.0); dom.n_boundary()];
                f[j] = c(1.0);
                let u = dirichlet_solve(&v, 0.3, &f).unwrap();
                let nd = normal_derivative(&dom, &u).unwrap();
                for (i, p) in dom.boundary().iter().enumerate() {
                    assert!((nd.get(p).unwrap() - lam.matrix[(i, j)]).norm() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn dirichlet_solution_properties() {
        let dom = RectDomain::new(2, 3).unwrap();
        let zero = Potential::zero(&dom);
        let u = dirichlet_solve(&zero, 0.0, &vec![c(2.0); dom.n_boundary()]).unwrap();
        for p in dom.interior() {
            assert!((u.get(p).unwrap() - c(2.0)).norm() < 1e-12);
        }
        let v = Potential::random(&dom, -0.5, 0.5, 4).unwrap();
        let f: Vec<Complex64> = (0..dom.n_boundary()).map(|i| Complex64::new(i as f64 * 0.1, 1.0)).collect();
        let u = dirichlet_solve(&v, 0.3, &f).unwrap();
        for p in dom.interior() {
            let resid = -crate::lattice::discrete_laplacian(&u, p).unwrap() + (v.get(p) - 0.3) * u.get(p).unwrap();
            assert!(resid.norm() <= 1e-12);
        }
    }

    #[test]
    fn dn_depends_on_v_minus_lambda() {
        let dom = RectDomain::new(2, 3).unwrap();
        let v = Potential::random(&dom, -0.5, 0.5, 8).unwrap();
        let shifted = Potential::from_values(&dom, v.values().iter().map(|x| x - 0.1).collect()).unwrap();
        let a = interior_dn(&v, 0.4).unwrap();
        let b = interior_dn(&shifted, 0.3).unwrap();
        assert!((&a.matrix - &b.matrix).camax() < 1e-13);
    }

    #[test]
    fn dirichlet_eigenvalue_is_reported() {
        // M = 1: the single interior equation is d/2 + V − λ = 0.
        let dom = RectDomain::new(2, 1).unwrap();
        let v = Potential::from_values(&dom, vec![-0.5]).unwrap();
        assert!(matches!(interior_dn(&v, 0.5), Err(Error::DirichletEigenvalue { .. })));
        assert!(dirichlet_solve(&v, 0.5, &[Complex64::new(1.0, 0.0); 4]).is_err());
        // M = 2, V = 0: the Dirichlet eigenvalues are 1 − ½(cos(πa/3) + cos(πb/3)).
        let dom = RectDomain::new(2, 2).unwrap();
        assert!(matches!(interior_dn(&Potential::zero(&dom), 0.5), Err(Error::DirichletEigenvalue { .. })));
        assert!(interior_dn(&Potential::zero(&dom), 0.3).is_ok());
    }

    #[test]
    fn degree_and_shift() {
        let d1 = RectDomain::new(2, 1).unwrap();
        assert_eq!(deg_tilde(&d1).matrix, CMatrix::zeros(4, 4));
        assert_eq!(shift_op(&d1).matrix, CMatrix::zeros(4, 4));
        let d3 = RectDomain::new(2, 3).unwrap();
        let a = d3.boundary_index(&LatticePoint::from([0, 1])).unwrap();
        let b = d3.boundary_index(&LatticePoint::from([0, 2])).unwrap();
        let s = shift_op(&d3);
        assert_eq!(s.matrix[(a, b)], c(0.25));
        assert_eq!(s.matrix, s.matrix.transpose());
        assert!(deg_tilde(&d3).matrix[(a, a)].re >= 0.25);
        // Row sums of S_C equal deg̃.
        let g = deg_tilde(&d3);
        for i in 0..d3.n_boundary() {
            assert_eq!(s.matrix.row(i).sum(), g.matrix[(i, i)]);
        }
    }

    fn setup(m: i64, seed: u64) -> (RectDomain, Potential, SpectralParam) {
        let dom = RectDomain::new(2, m).unwrap();
        let v = Potential::random(&dom, -0.5, 0.5, seed).unwrap();
        (dom, v, SpectralParam::plus(2, 0.3).unwrap())
    }

    #[test]
    fn single_layer_symmetry_and_conjugation() {
        let (dom, v, p) = setup(2, 21);
        let mut sp = ResolventSolver::build(&v, &p, GreenOptions::default_for(2)).unwrap();
        let mp = single_layer(&mut sp, &dom).unwrap();
        assert!(mp.symmetry_defect() <= 1e-8);
        let mut sm = sp.with_sign(LimitSign::Minus).unwrap();
        let mm = single_layer(&mut sm, &dom).unwrap();
        assert!((&mm.matrix - mp.matrix.conjugate()).camax() <= 1e-12);
        let zero = Potential::zero(&dom);
        let mut s0 = ResolventSolver::build(&zero, &p, GreenOptions::default_for(2)).unwrap();
        let m0 = single_layer(&mut s0, &dom).unwrap();
        let t = s0.table();
        for (i, a) in dom.boundary().iter().enumerate() {
            for (j, b) in dom.boundary().iter().enumerate() {
                assert_eq!(m0.matrix[(i, j)], t.get(&a.sub(b)).unwrap());
            }
        }
    }

    #[test]
    fn boundary_operator_identities() {
        for m in [1, 2, 3] {
            let (dom, v, p) = setup(m, 30 + m as u64);
            let opts = GreenOptions::default_for(2);
            let mut sp = ResolventSolver::build(&v, &p, opts).unwrap();
            let mp = single_layer(&mut sp, &dom).unwrap();
            let bp = boundary_op(&mp).unwrap();
            let nb = dom.n_boundary();
            assert!((&mp.matrix * &bp.matrix - CMatrix::identity(nb, nb)).camax() <= 1e-8);

            let mut sm = sp.with_sign(LimitSign::Minus).unwrap();
            let bm = boundary_op(&single_layer(&mut sm, &dom).unwrap()).unwrap();
            assert!((bp.matrix.adjoint() - &bm.matrix).camax() <= 1e-8);

            let free = exterior_dn(&dom, &p, opts).unwrap();
            let lv = interior_dn(&v, 0.3).unwrap();
            let lhs = &bp.matrix - &free.b0.matrix;
            let rhs = &lv.matrix - &free.lambda0.matrix;
            assert!((&lhs - &rhs).camax() <= 1e-7, "M = {m}: {:.3e}", (&lhs - &rhs).camax());

            // Closure: Λ_ext from free data reassembles B for this V.
            let b_again = boundary_from_dn(&lv.matrix, &free.exterior, &dom);
            assert!((&b_again - &bp.matrix).camax() <= 1e-7);
        }
    }

    /// Exterior D-N map from the radiating extension `u = R̂₀ χ_C B₀ f`:
    /// `Λ_ext f(n) = −¼ Σ_{m ∉ Ω ∪ C, m ∼ n} (f(n) − u(m))`.
    #[test]
    fn exterior_dn_matches_radiating_extension() {
        for m in [1, 2, 3] {
            let (dom, _, p) = setup(m, 0);
            let opts = GreenOptions::default_for(2);
            let free = exterior_dn(&dom, &p, opts).unwrap();
            let mut table = crate::green::GreenTable::new(&p, opts).unwrap();
            table.ensure(cube_points(2, m + 3)).unwrap();
            let nb = dom.n_boundary();
            let mut direct = CMatrix::zeros(nb, nb);
            for j in 0..nb {
                let density = free.b0.matrix.column(j).clone_owned();
                let u = |q: &LatticePoint| -> Complex64 {
                    dom.boundary().iter().enumerate().map(|(k, cpt)| table.get(&q.sub(cpt)).unwrap() * density[k]).sum()
                };
                for (i, n) in dom.boundary().iter().enumerate() {
                    let fn_ = if i == j { c(1.0) } else { c(0.0) };
                    for q in n.neighbors() {
                        if !dom.contains(&q) {
                            direct[(i, j)] -= (fn_ - u(&q)) * 0.25;
                        }
                    }
                }
            }
            let diff = (&direct - &free.exterior.matrix).camax();
            assert!(diff <= 1e-9, "M = {m}: {diff:.3e}");
            assert!(free.exterior.matrix.iter().any(|z| z.im.abs() > 1e-6));
            let minus = exterior_dn(&dom, &p.with_sign(LimitSign::Minus), opts).unwrap();
            assert!((free.exterior.matrix.adjoint() - &minus.exterior.matrix).camax() <= 1e-9);
            assert!(frobenius(&free.exterior.matrix) > 0.0);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn dn_is_real_symmetric(seed in 0u64..1000, m in 1i64..4, lambda in 0.05f64..0.95) {
            let dom = RectDomain::new(2, m).unwrap();
            let v = Potential::random(&dom, -0.5, 0.5, seed).unwrap();
            if let Ok(lam) = interior_dn(&v, lambda) {
                proptest::prop_assert!(lam.symmetry_defect() <= 1e-12);
                proptest::prop_assert!(lam.matrix.iter().all(|z| z.im == 0.0));
            }
        }
    }

    #[test]
    fn boundary_operator_serde() {
        let dom = RectDomain::new(2, 2).unwrap();
        let lam = interior_dn(&Potential::zero(&dom), 0.3).unwrap();
        let s = serde_json::to_string(&lam).unwrap();
        let back: BoundaryOperator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, lam);
        back.validate().unwrap();
    }
}
