//! The `latinv` subcommands. Each writes one or more envelopes under the
//! output directory and reports the gates it evaluated.

use std::path::{Path, PathBuf};

use latinv_core::dn::{boundary_op, exterior_dn_with_table, interior_dn, single_layer, BoundaryOperator, dirichlet_solve};
use latinv_core::equivalence::EquivalenceBundle;
use latinv_core::geometry::{convexity_check, principal_curvatures, sample_surface, symbol_h, ConvexityReport, LimitSign, SpectralParam};
use latinv_core::green::{box_offsets, r0_defect, GreenTable};
use latinv_core::lattice::{normal_derivative, RectDomain};
use latinv_core::matrix::{CMatrix, OperatorMatrix};
use latinv_core::reconstruction::{reconstruct, LevelReport, ReconstructOptions};
use latinv_core::scattering::{amplitude, s_matrix, unitarity_defect, AngularGrid, Potential, ResolventSolver};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cache::{load_or_build, CacheStatus};
use crate::config::RunConfig;
use crate::output::{read_payload, write_json, Envelope, GateResult};
use crate::CliError;

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
}

/// Files written and gates evaluated by one command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub gates: Vec<GateResult>,
    pub cache: Option<CacheStatus>,
}

impl Outcome {
    pub fn failed(&self) -> Vec<String> {
        self.gates.iter().filter(|g| !g.passed).map(|g| g.name.clone()).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmplitudeFile {
    pub grid: AngularGrid,
    pub amplitude: OperatorMatrix,
    pub lippmann_schwinger_cond: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SMatrixFile {
    pub grid: AngularGrid,
    pub smatrix: OperatorMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InversionFile {
    pub potential: Potential,
    pub levels: Vec<LevelReport>,
    pub overlap_defect: f64,
    /// Max abs deviation from the configured potential, when one is given.
    pub reference_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub x: Vec<f64>,
    pub h: f64,
    pub curvatures: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub in_convex_band: bool,
    pub samples: Vec<SurfaceSample>,
    pub convexity: ConvexityReport,
}

fn green_table(ctx: &Context, param: &SpectralParam, radius: i64) -> Result<(GreenTable, CacheStatus), CliError> {
    let cfg = &ctx.config;
    load_or_build(ctx.cache.as_deref(), param, cfg.green_options(), radius, cfg.green_defect_tol())
}

fn emit<T: Serialize>(ctx: &Context, outcome: &mut Outcome, name: &str, command: &str, gates: Vec<GateResult>, data: T) -> Result<(), CliError> {
    let path = ctx.out.join(name);
    write_json(&path, &Envelope::new(command, &ctx.config, gates, data))?;
    outcome.files.push(path);
    Ok(())
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn outgoing(cfg: &RunConfig) -> Result<SpectralParam, CliError> {
    Ok(cfg.spectral()?.with_sign(LimitSign::Plus))
}

pub fn forward(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let param = outgoing(cfg)?;
    let v = cfg.potential()?;
    let (table, status) = green_table(ctx, &param, cfg.m + 1)?;
    let solver = ResolventSolver::new(&v, table)?;
    let grid = AngularGrid::new(&param, cfg.n_theta())?;
    let a = amplitude(&solver, &grid)?;
    let s = s_matrix(&a, &grid)?;
    let defect = unitarity_defect(&s, &grid);
    let gates = vec![GateResult::at_most("unitarity", defect, cfg.tolerances.unitarity)];
    let mut out = Outcome {
        cache: Some(status),
        gates: gates.clone(),
        ..Outcome::default()
    };
    let amp = AmplitudeFile {
        grid: grid.clone(),
        amplitude: a,
        lippmann_schwinger_cond: solver.condition(),
    };
    emit(ctx, &mut out, "amplitude.json", "forward", gates.clone(), amp)?;
    emit(ctx, &mut out, "smatrix.json", "forward", gates, SMatrixFile { grid, smatrix: s })?;
    Ok(out)
}

pub fn dnmap(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let lam = interior_dn(&cfg.potential()?, cfg.lambda)?;
    let gates = vec![GateResult::at_most("symmetry", lam.symmetry_defect(), cfg.tolerances.symmetry)];
    let mut out = Outcome {
        gates: gates.clone(),
        ..Outcome::default()
    };
    emit(ctx, &mut out, "dnmap.json", "dnmap", gates, lam)?;
    Ok(out)
}

fn check_operator(cfg: &RunConfig, lam: &BoundaryOperator) -> Result<RectDomain, CliError> {
    let dom = lam.validate()?;
    if lam.d != cfg.d || lam.m != cfg.m || (lam.lambda - cfg.lambda).abs() > 1e-14 {
        return Err(CliError::Config(format!(
            "input operator is for d = {}, M = {}, lambda = {}; config says d = {}, M = {}, lambda = {}",
            lam.d, lam.m, lam.lambda, cfg.d, cfg.m, cfg.lambda
        )));
    }
    Ok(dom)
}

fn invert(cfg: &RunConfig, lam: &BoundaryOperator) -> Result<(InversionFile, Vec<GateResult>), CliError> {
    let opts = ReconstructOptions {
        synth_tol: cfg.tolerances.synth,
        consistency_tol: cfg.tolerances.consistency,
    };
    let rec = reconstruct(lam, &opts)?;
    let synth = rec.levels.iter().map(|l| l.max_synth_residual).fold(0.0, f64::max);
    let pattern = rec.levels.iter().map(|l| l.max_pattern_defect).fold(0.0, f64::max);
    let gates = vec![
        GateResult::at_most("synth_residual", synth, opts.synth_tol),
        GateResult::at_most("pattern_consistency", pattern, opts.consistency_tol),
    ];
    let reference_error = match cfg.potential {
        Some(_) => Some(rec.potential.max_abs_diff(&cfg.potential()?)),
        None => None,
    };
    Ok((
        InversionFile {
            potential: rec.potential,
            levels: rec.levels,
            overlap_defect: rec.overlap_defect,
            reference_error,
        },
        gates,
    ))
}

pub fn invert_dn(ctx: &Context, input: &Path) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let lam: BoundaryOperator = read_payload(input)?;
    check_operator(cfg, &lam)?;
    let (data, gates) = invert(cfg, &lam)?;
    let mut out = Outcome {
        gates: gates.clone(),
        ..Outcome::default()
    };
    emit(ctx, &mut out, "potential.json", "invert-dn", gates, data)?;
    Ok(out)
}

pub fn invert_smatrix(ctx: &Context, input: &Path) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let amp: AmplitudeFile = read_payload(input)?;
    let param = outgoing(cfg)?;
    if amp.grid.param.d != cfg.d || (amp.grid.param.lambda - cfg.lambda).abs() > 1e-14 {
        return Err(CliError::Config("amplitude file was produced for a different dimension or energy".into()));
    }
    let grid = AngularGrid::from_nodes(&param, amp.grid.theta.clone(), amp.grid.weights.clone())?;
    let dom = cfg.domain()?;
    let (table, status) = green_table(ctx, &param, cfg.m + 1)?;
    let bundle = EquivalenceBundle::with_table(&dom, &grid, table)?;
    let (rp, rm) = bundle.gamma_rank_ratios();
    let lam = bundle.smatrix_to_dn(&amp.amplitude)?;
    let mut gates = vec![
        GateResult::above("gamma_plus_rank", rp, latinv_core::equivalence::GAMMA_RANK_RATIO),
        GateResult::above("gamma_minus_rank", rm, latinv_core::equivalence::GAMMA_RANK_RATIO),
        GateResult::at_most("recovered_symmetry", lam.symmetry_defect(), cfg.tolerances.recovered_symmetry),
    ];
    let mut out = Outcome {
        cache: Some(status),
        ..Outcome::default()
    };
    emit(ctx, &mut out, "dnmap_recovered.json", "invert-smatrix", gates.clone(), lam.clone())?;
    let (data, inv_gates) = invert(cfg, &lam)?;
    gates.extend(inv_gates);
    emit(ctx, &mut out, "potential.json", "invert-smatrix", gates.clone(), data)?;
    out.gates = gates;
    Ok(out)
}

pub fn green(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let param = cfg.spectral()?;
    let radius = cfg.green_radius.unwrap_or(6);
    if radius < 1 {
        return Err(CliError::Config("green_radius must be at least 1".into()));
    }
    let (table, status) = green_table(ctx, &param, radius)?;
    let defect = r0_defect(&table, &box_offsets(cfg.d, radius - 1))?;
    let gates = vec![GateResult::at_most("r0_defect", defect, cfg.green_defect_tol())];
    let mut out = Outcome {
        cache: Some(status),
        gates: gates.clone(),
        ..Outcome::default()
    };
    emit(ctx, &mut out, "green.json", "green", gates, table)?;
    Ok(out)
}

pub fn surface(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let param = cfg.spectral_any_band()?;
    let n = cfg.surface_samples.unwrap_or(200);
    let seed = cfg.seed().unwrap_or(0x5eed);
    let band = param.band();
    let samples = sample_surface(cfg.d, cfg.lambda, n, seed)?
        .into_iter()
        .map(|x| {
            Ok(SurfaceSample {
                h: symbol_h(&x),
                curvatures: principal_curvatures(&x, band)?,
                x,
            })
        })
        .collect::<Result<Vec<_>, latinv_core::Error>>()?;
    let convexity = convexity_check(&param, n)?;
    let in_band = param.in_i_d();
    let mut gates = Vec::new();
    if in_band {
        gates.push(GateResult::above("min_curvature", convexity.min_curvature, 0.0));
    }
    let mut out = Outcome::default();
    let data = SurfaceFile {
        in_convex_band: in_band,
        samples,
        convexity,
    };
    out.gates = gates.clone();
    emit(ctx, &mut out, "surface.json", "surface", gates, data)?;
    Ok(out)
}

/// Runs the invariant suite on the configured cube, energy and potential.
pub fn selftest(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let tol = &cfg.tolerances;
    let param = outgoing(cfg)?;
    let dom = cfg.domain()?;
    let v = cfg.potential()?;
    let mut gates = Vec::new();

    let one = RectDomain::new(2, 1)?;
    let golden = interior_dn(&Potential::zero(&one), 0.0)?;
    let expect = CMatrix::from_fn(4, 4, |i, j| Complex64::new(if i == j { 0.25 } else { 0.0 } - 1.0 / 16.0, 0.0));
    gates.push(GateResult::at_most("dn_golden_m1", max_abs(&(&golden.matrix - expect)), 1e-14));

    let lam = interior_dn(&v, cfg.lambda)?;
    let mut schur: f64 = 0.0;
    for j in 0..dom.n_boundary() {
        let mut f = vec![Complex64::default(); dom.n_boundary()];
        f[j] = Complex64::new(1.0, 0.0);
        let nd = normal_derivative(&dom, &dirichlet_solve(&v, cfg.lambda, &f)?)?;
        for (i, p) in dom.boundary().iter().enumerate() {
            schur = schur.max((nd.get(p)? - lam.matrix[(i, j)]).norm());
        }
    }
    gates.push(GateResult::at_most("dn_schur_vs_direct", schur, 1e-10));
    gates.push(GateResult::at_most("dn_symmetry", lam.symmetry_defect(), tol.symmetry));

    let (table, status) = green_table(ctx, &param, cfg.m + 1)?;
    let defect = r0_defect(&table, &box_offsets(cfg.d, cfg.m))?;
    gates.push(GateResult::at_most("r0_defect", defect, cfg.green_defect_tol()));

    let mut sp = ResolventSolver::new(&v, table.clone())?;
    let mp = single_layer(&mut sp, &dom)?;
    let bp = boundary_op(&mp)?;
    let nb = dom.n_boundary();
    gates.push(GateResult::at_most("single_layer_inverse", max_abs(&(&mp.matrix * &bp.matrix - CMatrix::identity(nb, nb))), 1e-8));
    let mut sm = sp.with_sign(LimitSign::Minus)?;
    let bm = boundary_op(&single_layer(&mut sm, &dom)?)?;
    gates.push(GateResult::at_most("boundary_adjoint", max_abs(&(bp.matrix.adjoint() - &bm.matrix)), 1e-8));
    let free = exterior_dn_with_table(&dom, table.clone())?;
    let diff = &bp.matrix - &free.b0.matrix - (&lam.matrix - &free.lambda0.matrix);
    gates.push(GateResult::at_most("boundary_vs_dn", max_abs(&diff), 1e-7));

    let grid = AngularGrid::new(&param, cfg.n_theta())?;
    let a = amplitude(&sp, &grid)?;
    gates.push(GateResult::at_most("unitarity", unitarity_defect(&s_matrix(&a, &grid)?, &grid), tol.unitarity));
    let bundle = EquivalenceBundle::with_table(&dom, &grid, table)?;
    gates.push(GateResult::at_most("factorization", bundle.factorization_defect(&v)?, tol.factorization));

    let exact_tol = if cfg.d == 2 { 1e-7 } else { 1e-6 };
    let opts = ReconstructOptions {
        synth_tol: tol.synth,
        consistency_tol: tol.consistency,
    };
    let rec = reconstruct(&lam, &opts)?;
    gates.push(GateResult::at_most("round_trip_exact", rec.potential.max_abs_diff(&v), exact_tol));
    let recovered = bundle.smatrix_to_dn(&a)?;
    let e2e = reconstruct(&recovered, &opts)?;
    gates.push(GateResult::at_most("round_trip_smatrix", e2e.potential.max_abs_diff(&v), 1e-3));

    let mut out = Outcome {
        cache: Some(status),
        gates: gates.clone(),
        ..Outcome::default()
    };
    emit(ctx, &mut out, "selftest.json", "selftest", gates.clone(), gates)?;
    Ok(out)
}
