//! Max-min SINR relay design.
//!
//! The pipeline for one realization is:
//!
//! 1. [`upper_bound`]: for each user, the single-user SINR maximum of the
//!    relaxed problem, obtained as a linear SDP after a Charnes–Cooper change
//!    of variables. The larger of the two bounds the max-min value.
//! 2. [`bisection`]: halving search on the common SINR target `j`, each step
//!    deciding feasibility of the relaxed constraint system.
//! 3. [`recover_beamformer`]: a rank-one beamformer extracted from the last
//!    feasible relaxed matrix, giving an achievable value.
//!
//! In strict zero-forcing mode the problem is restricted to the null space of
//! `w ↦ (I ⊗ H_RR^H) w` before it reaches the solver, so the relaxed variable
//! lives on that face and the solver sees a problem with an interior.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{complex_gaussian, trial_rng, ChannelRealization, ConfigError, NetworkConfig, ZfcMode};
use crate::lift::{self, build_lifted, LiftError, LiftedProblem, User};
use crate::linalg::{herm_eig, kron, null_space, psd_sqrt, ComplexMatrix, ComplexVector, HermitianMatrix, LinalgError};
use crate::sdp::{InteriorPoint, Relation, SdpBackend, SdpError, SdpProblem, SdpSettings, SdpSolution, SdpStatus, TraceConstraint};

/// Lower bound used for the Charnes–Cooper scale `ω > 0`.
pub const OMEGA_MIN: f64 = 1e-10;
/// Relative singular-value cutoff for the strict-mode null space.
const NULL_SPACE_REL: f64 = 1e-9;
/// Eigenvalue ratio below which the relaxed matrix is treated as rank one.
pub const RANK_ONE_RATIO: f64 = 1e-6;
/// Stream offset separating recovery randomness from channel draws.
const RECOVERY_STREAM: u64 = 0x5245_434f_5645_5259;

#[derive(Debug, Error)]
pub enum MaxMinError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("sdp error during {stage}: {source}")]
    Sdp {
        stage: &'static str,
        #[source]
        source: SdpError,
    },
    #[error("upper bound failed for both users ({0:?}, {1:?})")]
    UpperBoundFailed(SdpStatus, SdpStatus),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn sdp_err(stage: &'static str) -> impl Fn(SdpError) -> MaxMinError {
    move |source| MaxMinError::Sdp { stage, source }
}

/// The problem as handed to the SDP solver: either the full `w` space with
/// the two real zero-forcing equalities, or the strict-mode null space.
#[derive(Debug, Clone)]
pub struct SolverView {
    pub mode: ZfcMode,
    /// Orthonormal basis of the admissible subspace (strict mode only).
    pub basis: Option<ComplexMatrix>,
    pub dim: usize,
    h: [HermitianMatrix; 2],
    f: [HermitianMatrix; 2],
    c1: HermitianMatrix,
    zfc: Vec<HermitianMatrix>,
    phi: [f64; 2],
    relay_power: f64,
}

impl SolverView {
    pub fn new(lp: &LiftedProblem, mode: ZfcMode) -> Result<Self, MaxMinError> {
        match mode {
            ZfcMode::Scalar => Ok(Self {
                mode,
                basis: None,
                dim: lp.n_w,
                h: [lp.h[0].scale(lp.gain[0]), lp.h[1].scale(lp.gain[1])],
                f: lp.f.clone(),
                c1: lp.c1.clone(),
                zfc: vec![lp.c2_herm.clone(), lp.c2_skew.clone()],
                phi: lp.phi,
                relay_power: lp.relay_power,
            }),
            ZfcMode::Strict => {
                // null(I ⊗ H_RR^H) = I ⊗ null(H_RR^H)
                let inner = null_space(&lp.h_rr.adjoint(), NULL_SPACE_REL)?;
                let basis = if inner.ncols() == 0 {
                    ComplexMatrix::zeros(lp.n_w, 0)
                } else {
                    kron(&ComplexMatrix::identity(lp.n, lp.n), &inner)?
                };
                let c = |m: &HermitianMatrix| m.congruence(&basis);
                Ok(Self {
                    mode,
                    dim: basis.ncols(),
                    h: [c(&lp.h[0]).scale(lp.gain[0]), c(&lp.h[1]).scale(lp.gain[1])],
                    f: [c(&lp.f[0]), c(&lp.f[1])],
                    c1: c(&lp.c1),
                    zfc: Vec::new(),
                    phi: lp.phi,
                    relay_power: lp.relay_power,
                    basis: Some(basis),
                })
            }
        }
    }

    /// Maps a matrix in solver coordinates back to the full `w` space.
    pub fn lift_matrix(&self, g: &HermitianMatrix) -> HermitianMatrix {
        match &self.basis {
            None => g.clone(),
            Some(b) => HermitianMatrix::symmetrized(b * g.matrix() * b.adjoint()),
        }
    }

    /// Orthogonal projection onto the admissible subspace (identity in scalar mode).
    pub fn project(&self, w: &ComplexVector) -> ComplexVector {
        match &self.basis {
            None => w.clone(),
            Some(b) => b * (b.adjoint() * w),
        }
    }

    /// Relaxed feasibility system at SINR level `j`, in solver coordinates.
    pub fn feasibility_problem(&self, j: f64) -> SdpProblem {
        let mut p = SdpProblem::feasibility(self.dim);
        for i in 0..2 {
            p.push(TraceConstraint::new(self.h[i].add_scaled(-j, &self.f[i]), Relation::Ge, j * self.phi[i]));
        }
        p.push(TraceConstraint::new(self.c1.clone(), Relation::Le, self.relay_power));
        for z in &self.zfc {
            p.push(TraceConstraint::new(z.clone(), Relation::Eq, 0.0));
        }
        p
    }

    /// Charnes–Cooper form of the single-user bound for `user`.
    pub fn upper_bound_problem(&self, user: User) -> SdpProblem {
        let i = user.index();
        let mut p = SdpProblem::maximize(self.h[i].clone()).with_aux(OMEGA_MIN);
        p.push(TraceConstraint::new(self.c1.clone(), Relation::Le, 0.0).with_aux(-self.relay_power));
        for z in &self.zfc {
            p.push(TraceConstraint::new(z.clone(), Relation::Eq, 0.0));
        }
        p.push(TraceConstraint::new(self.f[i].clone(), Relation::Eq, 1.0).with_aux(self.phi[i]));
        p
    }
}

// ---------------------------------------------------------------------------
// upper bound

#[derive(Debug, Clone, Serialize)]
pub struct UserBound {
    pub status: SdpStatus,
    pub value: f64,
    pub omega: f64,
    /// `|Tr(F_i Y_i) + ω φ_i - 1|`.
    pub denominator_residual: f64,
    pub max_constraint_violation: f64,
    pub min_eigenvalue: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub y: Option<HermitianMatrix>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UpperBound {
    pub j_up: f64,
    pub j_star: [f64; 2],
    pub users: [UserBound; 2],
    /// Set when one user's bound failed and the other was used alone.
    pub partial: bool,
}

fn zero_bound() -> UserBound {
    UserBound {
        status: SdpStatus::Optimal,
        value: 0.0,
        omega: 0.0,
        denominator_residual: 0.0,
        max_constraint_violation: 0.0,
        min_eigenvalue: 0.0,
        iterations: 0,
        y: None,
    }
}

fn solve_user_bound(view: &SolverView, user: User, backend: &dyn SdpBackend, settings: &SdpSettings) -> Result<UserBound, MaxMinError> {
    let i = user.index();
    if view.dim == 0 || view.h[i].frobenius_norm() == 0.0 {
        return Ok(zero_bound());
    }
    let p = view.upper_bound_problem(user);
    let mut sol = backend.solve_linear(&p, settings).map_err(sdp_err("upper bound"))?;
    if sol.status == SdpStatus::NumericalFailure {
        sol = backend.solve_linear(&p, &settings.relaxed()).map_err(sdp_err("upper bound"))?;
    }
    let denominator = view.f[i].trace_product(&sol.g) + sol.aux_scalar * view.phi[i];
    Ok(UserBound {
        status: sol.status,
        value: sol.objective_value.max(0.0),
        omega: sol.aux_scalar,
        denominator_residual: (denominator - 1.0).abs(),
        max_constraint_violation: sol.max_constraint_violation,
        min_eigenvalue: sol.min_eigenvalue,
        iterations: sol.iterations,
        y: Some(view.lift_matrix(&sol.g)),
    })
}

/// Single-user relaxed bounds; `j_up` is the larger of the two.
pub fn upper_bound(lp: &LiftedProblem, mode: ZfcMode, settings: &SdpSettings) -> Result<UpperBound, MaxMinError> {
    upper_bound_with(&SolverView::new(lp, mode)?, &InteriorPoint, settings)
}

pub fn upper_bound_with(view: &SolverView, backend: &dyn SdpBackend, settings: &SdpSettings) -> Result<UpperBound, MaxMinError> {
    let b1 = solve_user_bound(view, User::S1, backend, settings)?;
    let b2 = solve_user_bound(view, User::S2, backend, settings)?;
    let ok1 = b1.status.is_success();
    let ok2 = b2.status.is_success();
    let (j_up, partial) = match (ok1, ok2) {
        (true, true) => (b1.value.max(b2.value), false),
        // min over users is bounded by either single-user value
        (true, false) => (b1.value, true),
        (false, true) => (b2.value, true),
        (false, false) => return Err(MaxMinError::UpperBoundFailed(b1.status, b2.status)),
    };
    if partial {
        log::warn!("upper bound solved for one user only; using it alone");
    }
    Ok(UpperBound { j_up, j_star: [b1.value, b2.value], users: [b1, b2], partial })
}

// ---------------------------------------------------------------------------
// bisection

#[derive(Debug, Clone)]
pub struct BisectionOutcome {
    /// Largest level certified feasible.
    pub j_max: f64,
    /// Smallest level found infeasible (or `j_up`).
    pub j_upper: f64,
    /// Last feasible relaxed matrix, in the full `w` space.
    pub g_star: HermitianMatrix,
    /// Number of feasibility decisions (retries not counted).
    pub iterations: usize,
    pub solver_failures: usize,
    pub warnings: Vec<String>,
}

/// Solves the relaxed feasibility system at level `j`; `G` is returned in the full space.
pub fn feasibility_at(view: &SolverView, j: f64, backend: &dyn SdpBackend, settings: &SdpSettings) -> Result<SdpSolution, MaxMinError> {
    if view.dim == 0 {
        // only w = 0 is admissible: feasible exactly when j = 0
        let status = if j <= 0.0 { SdpStatus::Feasible } else { SdpStatus::Infeasible };
        return Ok(SdpSolution {
            status,
            g: HermitianMatrix::zeros(view.basis.as_ref().map_or(0, |b| b.nrows())),
            aux_scalar: 0.0,
            objective_value: 0.0,
            dual_bound: 0.0,
            max_constraint_violation: 0.0,
            min_eigenvalue: 0.0,
            iterations: 0,
        });
    }
    let p = view.feasibility_problem(j);
    let mut sol = backend.solve_feasibility(&p, settings).map_err(sdp_err("feasibility"))?;
    sol.g = view.lift_matrix(&sol.g);
    Ok(sol)
}

/// Bisection on `[0, j_up]` until the bracket is narrower than `tol`.
pub fn bisection(view: &SolverView, j_up: f64, tol: f64, backend: &dyn SdpBackend, settings: &SdpSettings) -> Result<BisectionOutcome, MaxMinError> {
    if !(tol > 0.0) || !(j_up >= 0.0) || !j_up.is_finite() {
        return Err(MaxMinError::InvalidArgument(format!("bisection needs j_up >= 0 and tol > 0 (got {j_up}, {tol})")));
    }
    let full_dim = view.basis.as_ref().map_or(view.dim, |b| b.nrows());
    let mut lo = 0.0;
    let mut hi = j_up;
    let mut g_star = HermitianMatrix::zeros(full_dim);
    let mut iterations = 0;
    let mut solver_failures = 0;
    let mut warnings = Vec::new();
    while hi - lo >= tol {
        let j = 0.5 * (lo + hi);
        iterations += 1;
        let mut sol = feasibility_at(view, j, backend, settings)?;
        if sol.status == SdpStatus::NumericalFailure {
            sol = feasibility_at(view, j, backend, &settings.relaxed())?;
        }
        match sol.status {
            SdpStatus::Feasible | SdpStatus::Optimal => {
                lo = j;
                g_star = sol.g;
            }
            SdpStatus::Infeasible => hi = j,
            SdpStatus::NumericalFailure => {
                solver_failures += 1;
                warnings.push(format!("solver failure at j = {j:.6e}; treated as infeasible"));
                hi = j;
            }
        }
    }
    Ok(BisectionOutcome { j_max: lo, j_upper: hi, g_star, iterations, solver_failures, warnings })
}

// ---------------------------------------------------------------------------
// recovery

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMethod {
    /// Principal eigenvector of the relaxed matrix.
    Principal,
    /// A Gaussian randomization candidate beat the principal eigenvector.
    Randomized,
    /// No candidate passed the zero-forcing screen.
    RecoveryDegraded,
    /// The relaxed matrix was numerically zero.
    Zero,
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub w: ComplexVector,
    pub j_lower: f64,
    pub method: RecoveryMethod,
    pub candidates: usize,
    pub accepted: usize,
}

/// Builds a beamformer from the relaxed solution.
///
/// Candidates are the principal eigenvector and `n_randomizations` draws
/// `G^{1/2} z`, `z ~ CN(0, I)`. Each candidate is made zero-forcing (strict:
/// projected; scalar: screened), scaled to the relay power budget and scored
/// by its smaller SINR.
pub fn recover_beamformer<R: Rng + ?Sized>(
    g_star: &HermitianMatrix,
    lp: &LiftedProblem,
    view: &SolverView,
    n_randomizations: usize,
    rng: &mut R,
) -> Result<Recovery, MaxMinError> {
    let n_w = lp.n_w;
    let eig = herm_eig(g_star)?;
    if !(eig.max() > 1e-14 * (1.0 + g_star.frobenius_norm())) || eig.max() <= 0.0 {
        return Ok(Recovery { w: ComplexVector::zeros(n_w), j_lower: 0.0, method: RecoveryMethod::Zero, candidates: 0, accepted: 0 });
    }
    let principal = eig.vector(0);
    let root = psd_sqrt(g_star)?;
    let mut candidates = Vec::with_capacity(1 + n_randomizations);
    candidates.push(principal.clone());
    for _ in 0..n_randomizations {
        let z = ComplexVector::from_fn(n_w, |_, _| complex_gaussian(rng, 1.0));
        candidates.push(&root * z);
    }

    let mut best: Option<(f64, ComplexVector, usize)> = None;
    let mut accepted = 0;
    for (k, cand) in candidates.iter().enumerate() {
        let Some(w) = admissible(cand, lp, view) else { continue };
        accepted += 1;
        let score = lift::min_sinr(&w, lp);
        // a later candidate must win by more than rounding
        if best.as_ref().is_none_or(|(s, _, _)| score > *s + 1e-12 * s.abs()) {
            best = Some((score, w, k));
        }
    }
    let total = candidates.len();
    match best {
        Some((score, w, k)) => Ok(Recovery {
            w,
            j_lower: score,
            method: if k == 0 { RecoveryMethod::Principal } else { RecoveryMethod::Randomized },
            candidates: total,
            accepted,
        }),
        None => {
            let w = lift::scale_to_power(&principal, lp).unwrap_or_else(|| ComplexVector::zeros(n_w));
            let j_lower = lift::min_sinr(&w, lp);
            Ok(Recovery { w, j_lower, method: RecoveryMethod::RecoveryDegraded, candidates: total, accepted: 0 })
        }
    }
}

/// Zero-forcing processing followed by scaling to the power boundary.
fn admissible(cand: &ComplexVector, lp: &LiftedProblem, view: &SolverView) -> Option<ComplexVector> {
    let mut w = view.project(cand);
    if w.norm() <= 1e-14 * cand.norm().max(f64::MIN_POSITIVE) {
        return None;
    }
    if view.mode == ZfcMode::Scalar {
        w = polish_scalar_zfc(&w, lp)?;
    }
    if !lift::satisfies_zfc(&w, lp, view.mode) {
        return None;
    }
    lift::scale_to_power(&w, lp)
}

/// Newton iteration towards a nearby root of `w^H C_2 w = 0`.
///
/// The map `x ↦ x^H C_2 w + w^H C_2 x` is real-linear from `C^n` to `C`, so
/// each step takes the minimum-norm correction in the span of its two real
/// gradients `a + b` and `i (b - a)`, with `a = C_2 w`, `b = C_2^H w`.
/// Returns `None` if the iteration stalls or the candidate collapses.
pub fn polish_scalar_zfc(w: &ComplexVector, lp: &LiftedProblem) -> Option<ComplexVector> {
    let scale = w.norm();
    let mut w = w.clone();
    for _ in 0..50 {
        let a = &lp.c2 * &w;
        let q = w.dotc(&a);
        if q.norm() <= 1e-3 * lift::zfc_threshold(&w, lp, ZfcMode::Scalar) {
            return (w.norm() > 1e-6 * scale).then_some(w);
        }
        let b = lp.c2.adjoint() * &w;
        let g1 = &a + &b;
        let g2 = (&b - &a) * Complex64::new(0.0, 1.0);
        let m11 = g1.norm_squared();
        let m22 = g2.norm_squared();
        let m12 = g1.dotc(&g2).re;
        let det = m11 * m22 - m12 * m12;
        if !(det > 1e-300) || !(det > 1e-14 * m11 * m22) {
            return None;
        }
        let (r1, r2) = (-q.re, -q.im);
        let a1 = (m22 * r1 - m12 * r2) / det;
        let a2 = (m11 * r2 - m12 * r1) / det;
        w += g1 * Complex64::new(a1, 0.0) + g2 * Complex64::new(a2, 0.0);
        if !w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return None;
        }
    }
    None
}

// ---------------------------------------------------------------------------
// full pipeline

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub bisection_iterations: usize,
    pub bisection_solver_failures: usize,
    pub bisection_upper_bracket: f64,
    pub upper_bound: UpperBound,
    pub recovery_method: RecoveryMethod,
    pub recovery_candidates: usize,
    pub recovery_accepted: usize,
    /// The recovered beamformer certified a level above the bisection's
    /// last feasible midpoint, and `j_max` was raised to it.
    pub j_max_raised: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct MaxMinResult {
    pub j_up: f64,
    pub j_max: f64,
    pub j_lower: f64,
    pub w: ComplexVector,
    pub g_star: HermitianMatrix,
    /// `λ_2 / λ_1` of `g_star` (0 when `g_star` has rank at most one).
    pub rank_ratio: f64,
    pub rate_upper_bits: f64,
    pub rate_lower_bits: f64,
    pub per_user_sinr: [f64; 2],
    pub relay_power_used: f64,
    pub zfc_residual: f64,
    pub diagnostics: Diagnostics,
}

impl MaxMinResult {
    /// True when the run needed a fallback somewhere.
    pub fn degraded(&self) -> bool {
        self.diagnostics.recovery_method == RecoveryMethod::RecoveryDegraded
            || self.diagnostics.bisection_solver_failures > 0
            || self.diagnostics.upper_bound.partial
    }
}

fn rank_ratio(g: &HermitianMatrix) -> Result<f64, LinalgError> {
    let e = herm_eig(g)?;
    if e.values.len() < 2 || e.max() <= 0.0 {
        return Ok(0.0);
    }
    Ok((e.values[1] / e.values[0]).max(0.0))
}

/// Runs the full pipeline on one realization with the built-in solver.
pub fn solve_maxmin(cfg: &NetworkConfig, ch: &ChannelRealization) -> Result<MaxMinResult, MaxMinError> {
    solve_maxmin_with(cfg, ch, &InteriorPoint, &mut None)
}

/// Wall-clock seconds spent in each stage of one solve.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StageTimes {
    pub lift: f64,
    pub upper_bound: f64,
    pub bisection: f64,
    pub recovery: f64,
}

pub fn solve_maxmin_with(
    cfg: &NetworkConfig,
    ch: &ChannelRealization,
    backend: &dyn SdpBackend,
    times: &mut Option<StageTimes>,
) -> Result<MaxMinResult, MaxMinError> {
    use std::time::Instant;
    cfg.validate()?;
    let settings = SdpSettings::with_feas_tol(cfg.feas_tol);
    let mode = cfg.zfc_mode;

    let t0 = Instant::now();
    let lp = build_lifted(cfg, ch)?;
    let view = SolverView::new(&lp, mode)?;
    let t1 = Instant::now();
    let ub = upper_bound_with(&view, backend, &settings)?;
    let t2 = Instant::now();
    let bis = bisection(&view, ub.j_up, cfg.bisection_tol, backend, &settings)?;
    let t3 = Instant::now();
    let mut rng = trial_rng(cfg.seed ^ RECOVERY_STREAM, ch.trial_index);
    let rec = recover_beamformer(&bis.g_star, &lp, &view, cfg.n_randomizations, &mut rng)?;
    let t4 = Instant::now();
    if let Some(t) = times.as_mut() {
        t.lift += (t1 - t0).as_secs_f64();
        t.upper_bound += (t2 - t1).as_secs_f64();
        t.bisection += (t3 - t2).as_secs_f64();
        t.recovery += (t4 - t3).as_secs_f64();
    }

    let mut warnings = bis.warnings.clone();
    let mut j_max = bis.j_max;
    let mut raised = false;
    let feasible_point = rec.method != RecoveryMethod::RecoveryDegraded;
    if feasible_point && rec.j_lower > j_max {
        // w w^H is itself feasible for the relaxed system at level j_lower
        if rec.j_lower > bis.j_upper {
            warnings.push(format!(
                "recovered beamformer reaches {:.6e}, above the level {:.6e} the solver reported infeasible",
                rec.j_lower, bis.j_upper
            ));
        }
        j_max = rec.j_lower;
        raised = true;
    }

    let per_user_sinr = [lift::sinr(&rec.w, &lp, User::S1), lift::sinr(&rec.w, &lp, User::S2)];
    Ok(MaxMinResult {
        j_up: ub.j_up,
        j_max,
        j_lower: rec.j_lower,
        rank_ratio: rank_ratio(&bis.g_star)?,
        rate_upper_bits: lift::sinr_to_rate(j_max),
        rate_lower_bits: lift::sinr_to_rate(rec.j_lower),
        per_user_sinr,
        relay_power_used: lift::relay_power(&rec.w, &lp),
        zfc_residual: lift::zfc_residual(&rec.w, &lp, mode),
        g_star: bis.g_star,
        w: rec.w,
        diagnostics: Diagnostics {
            bisection_iterations: bis.iterations,
            bisection_solver_failures: bis.solver_failures,
            bisection_upper_bracket: bis.j_upper,
            upper_bound: ub,
            recovery_method: rec.method,
            recovery_candidates: rec.candidates,
            recovery_accepted: rec.accepted,
            j_max_raised: raised,
            warnings,
        },
    })
}

/// Convenience: lifted problem and solver view for a config/realization pair.
pub fn prepare(cfg: &NetworkConfig, ch: &ChannelRealization) -> Result<(LiftedProblem, SolverView), MaxMinError> {
    let lp = build_lifted(cfg, ch)?;
    let view = SolverView::new(&lp, cfg.zfc_mode)?;
    Ok((lp, view))
}
