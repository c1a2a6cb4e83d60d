//! Near-to-far operators `Γ^{(±)}`, the amplitude of the cube as an
//! obstacle, the factorization `A_ext − A = Γ⁺ M⁺ Γ⁻*`, and the recovery of
//! the interior D-N map from scattering data.
//!
//! Angular matrices follow the kernel convention of [`crate::scattering`]:
//! adjoints on `L²(M_λ)` are `X* = X^H W` with `W = diag μ`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dn::{boundary_op, dn_from_boundary, exterior_dn_with_table, single_layer, BoundaryKind, BoundaryOperator, FreeBoundaryData};
use crate::error::{Error, Result};
use crate::geometry::{LimitSign, SpectralParam};
use crate::green::{GreenOptions, GreenTable};
use crate::lattice::{LatticePoint, RectDomain};
use crate::matrix::{checked_inverse, frobenius, CMatrix, IndexKind, OperatorMatrix};
use crate::scattering::{amplitude, AngularGrid, Potential, ResolventSolver, EXCEPTIONAL_COND};

/// Smallest admissible `σ_min/σ_max` of `W^{1/2} Γ^{(±)}`.
pub const GAMMA_RANK_RATIO: f64 = 1e-8;

/// `P[i, n] = (2π)^{−d/2} e^{−in·x_i}`: the free Fourier map sampled on the grid.
pub fn free_fourier(grid: &AngularGrid, points: &[LatticePoint]) -> CMatrix {
    let scale = (2.0 * PI).powf(-(grid.param.d as f64) / 2.0);
    grid.plane_waves(points).adjoint() * Complex64::new(scale, 0.0)
}

/// `Γ^{(±)} = Ĝ₀ χ_C B₀^{(±)}`, columns indexed by boundary vertices.
pub fn gamma_matrix(free: &FreeBoundaryData, domain: &RectDomain, grid: &AngularGrid) -> OperatorMatrix {
    let p = free_fourier(grid, domain.boundary());
    OperatorMatrix::new(p * &free.b0.matrix, IndexKind::Angular, IndexKind::Boundary, free.b0.lambda, free.b0.sign)
}

/// `Γ^{(±)}` through the perturbed operators, `Ĝ^{(±)} χ_C B^{(±)}`.
pub fn gamma_matrix_with_potential(v: &Potential, param: &SpectralParam, grid: &AngularGrid, options: GreenOptions) -> Result<OperatorMatrix> {
    let dom = v.domain();
    let mut solver = ResolventSolver::build(v, param, options)?;
    let b = boundary_op(&single_layer(&mut solver, dom)?)?;
    let nb = dom.n_boundary();
    let mut out = CMatrix::zeros(grid.len(), nb);
    for j in 0..nb {
        let f: Vec<(LatticePoint, Complex64)> = dom.boundary().iter().enumerate().map(|(i, p)| (p.clone(), b.matrix[(i, j)])).collect();
        let col = solver.generalized_fourier(&f, &grid.theta)?;
        for (i, z) in col.into_iter().enumerate() {
            out[(i, j)] = z;
        }
    }
    Ok(OperatorMatrix::new(out, IndexKind::Angular, IndexKind::Boundary, param.lambda, Some(param.sign)))
}

/// Kernel of `A_ext = Ĝ₀ χ B₀⁺ χ Ĝ₀*`.
pub fn exterior_amplitude(free_plus: &FreeBoundaryData, domain: &RectDomain, grid: &AngularGrid) -> Result<OperatorMatrix> {
    if free_plus.b0.sign != Some(LimitSign::Plus) {
        return Err(Error::invalid("the exterior amplitude uses the outgoing boundary operator"));
    }
    let p = free_fourier(grid, domain.boundary());
    let k = &p * &free_plus.b0.matrix * p.adjoint();
    Ok(OperatorMatrix::new(k, IndexKind::Angular, IndexKind::Angular, free_plus.b0.lambda, Some(LimitSign::Plus)))
}

/// Everything about the cube that scattering data is compared against.
#[derive(Clone, Debug)]
pub struct EquivalenceBundle {
    pub domain: RectDomain,
    pub grid: AngularGrid,
    pub lambda: f64,
    pub free_plus: FreeBoundaryData,
    pub free_minus: FreeBoundaryData,
    pub gamma_plus: OperatorMatrix,
    pub gamma_minus: OperatorMatrix,
    pub a_ext: OperatorMatrix,
    /// Outgoing Green table the free quantities were built from.
    pub table: GreenTable,
}

impl EquivalenceBundle {
    pub fn new(domain: &RectDomain, grid: &AngularGrid, options: GreenOptions) -> Result<Self> {
        let param = SpectralParam::new(domain.dim(), grid.param.lambda, LimitSign::Plus)?;
        Self::with_table(domain, grid, GreenTable::new(&param, options)?)
    }

    /// Builds the bundle from a Green table at the grid's energy.
    pub fn with_table(domain: &RectDomain, grid: &AngularGrid, table: GreenTable) -> Result<Self> {
        let param = table.param().with_sign(LimitSign::Plus);
        param.require_low_band()?;
        if grid.param.d != domain.dim() || table.dim() != domain.dim() {
            return Err(Error::IndexMismatch("angular grid, Green table and domain dimensions differ".into()));
        }
        if (grid.param.lambda - param.lambda).abs() > 1e-14 {
            return Err(Error::IndexMismatch("Green table and angular grid energies differ".into()));
        }
        let table = table.with_sign(LimitSign::Plus);
        let free_plus = exterior_dn_with_table(domain, table.clone())?;
        let free_minus = exterior_dn_with_table(domain, table.with_sign(LimitSign::Minus))?;
        let gamma_plus = gamma_matrix(&free_plus, domain, grid);
        let gamma_minus = gamma_matrix(&free_minus, domain, grid);
        let a_ext = exterior_amplitude(&free_plus, domain, grid)?;
        Ok(EquivalenceBundle {
            domain: domain.clone(),
            grid: grid.clone(),
            lambda: param.lambda,
            free_plus,
            free_minus,
            gamma_plus,
            gamma_minus,
            a_ext,
            table,
        })
    }

    /// `σ_min/σ_max` of `W^{1/2} Γ^{(+)}` and `W^{1/2} Γ^{(−)}`.
    pub fn gamma_rank_ratios(&self) -> (f64, f64) {
        let r = |g: &OperatorMatrix| {
            let sv = self.weighted(&g.data).singular_values();
            sv.min() / sv.max()
        };
        (r(&self.gamma_plus), r(&self.gamma_minus))
    }

    fn weighted(&self, m: &CMatrix) -> CMatrix {
        let mut out = m.clone();
        for (i, &mu) in self.grid.mu.iter().enumerate() {
            out.row_mut(i).scale_mut(mu.sqrt());
        }
        out
    }

    /// `Γ⁺ M Γ⁻*` as a kernel, i.e. `Γ⁺ M (Γ⁻)^H`.
    pub fn sandwich(&self, m: &CMatrix) -> CMatrix {
        &self.gamma_plus.data * m * self.gamma_minus.data.adjoint()
    }

    /// Weighted least-squares solution of `Γ⁺ M Γ⁻* = A_ext − A`.
    pub fn recover_single_layer(&self, a: &OperatorMatrix) -> Result<BoundaryOperator> {
        check_amplitude(a, &self.grid)?;
        let pinv = |g: &OperatorMatrix, what: &str| -> Result<CMatrix> {
            let svd = self.weighted(&g.data).svd(true, true);
            let ratio = svd.singular_values.min() / svd.singular_values.max();
            if !(ratio > GAMMA_RANK_RATIO) {
                return Err(Error::RankDeficient { what: what.into(), ratio });
            }
            svd.pseudo_inverse(0.0).map_err(|e| Error::invalid(e.to_string()))
        };
        let gp = pinv(&self.gamma_plus, "Gamma+")?;
        let gm = pinv(&self.gamma_minus, "Gamma-")?;
        let rhs = self.weighted(&self.weighted(&(&self.a_ext.data - &a.data)).transpose()).transpose();
        let m = gp * rhs * gm.adjoint();
        Ok(BoundaryOperator::new(BoundaryKind::SingleLayer, &self.domain, self.lambda, Some(LimitSign::Plus), m))
    }

    /// `Λ_V = (M⁺)^{−1} + Λ_ext⁺ + λ I − deg̃ + S_C` with `M⁺` recovered from `A`.
    pub fn smatrix_to_dn(&self, a: &OperatorMatrix) -> Result<BoundaryOperator> {
        let m = self.recover_single_layer(a)?;
        let b = checked_inverse(&m.matrix, EXCEPTIONAL_COND, |cond| Error::ExceptionalEnergy {
            what: "recovered single-layer operator".into(),
            cond,
        })?;
        let lam = dn_from_boundary(&b, &self.free_plus.exterior, &self.domain);
        Ok(BoundaryOperator::new(BoundaryKind::InteriorDn, &self.domain, self.lambda, None, lam))
    }

    /// `‖A_ext − A − Γ⁺M⁺Γ⁻*‖_F / ‖A_ext − A‖_F` for the potential `v`.
    pub fn factorization_defect(&self, v: &Potential) -> Result<f64> {
        if v.domain() != &self.domain {
            return Err(Error::IndexMismatch("potential lives on a different cube".into()));
        }
        let mut solver = ResolventSolver::new(v, self.table.clone())?;
        let a = amplitude(&solver, &self.grid)?;
        let m = single_layer(&mut solver, &self.domain)?;
        let lhs = &self.a_ext.data - &a.data;
        let norm = frobenius(&lhs);
        if norm == 0.0 {
            return Ok(0.0);
        }
        Ok(frobenius(&(lhs - self.sandwich(&m.matrix))) / norm)
    }
}

fn check_amplitude(a: &OperatorMatrix, grid: &AngularGrid) -> Result<()> {
    if a.rows != IndexKind::Angular || a.cols != IndexKind::Angular {
        return Err(Error::IndexMismatch("expected an angular x angular amplitude".into()));
    }
    if a.nrows() != grid.len() || a.ncols() != grid.len() {
        return Err(Error::IndexMismatch(format!("amplitude is {}x{}, grid has {} nodes", a.nrows(), a.ncols(), grid.len())));
    }
    if (a.lambda - grid.param.lambda).abs() > 1e-14 {
        return Err(Error::IndexMismatch("amplitude and grid energies differ".into()));
    }
    Ok(())
}

/// One-shot conversion of an amplitude kernel into the interior D-N map.
pub fn smatrix_to_dn(a: &OperatorMatrix, domain: &RectDomain, grid: &AngularGrid, options: GreenOptions) -> Result<BoundaryOperator> {
    EquivalenceBundle::new(domain, grid, options)?.smatrix_to_dn(a)
}
