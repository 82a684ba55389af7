//! Small dense semidefinite programs over Hermitian PSD matrices.
//!
//! Problems are stated over a complex Hermitian variable `G ⪰ 0` with real
//! trace constraints `Tr(A_k G) + a_k ω  {≥, ≤, =}  b_k`, where `ω ≥ ω_min` is
//! an optional scalar. They are solved by mapping `G` to its real symmetric
//! embedding and running an infeasible-start primal-dual path-following
//! method (HKM direction, Mehrotra predictor-corrector) on the standard form
//!
//! ```text
//!   min <C, X>   s.t.  <A_k, X> = b_k,   X = (X_psd, x_lp) ⪰ 0
//! ```
//!
//! where `x_lp` collects inequality slacks, the shifted `ω`, and for
//! feasibility problems the bounded margin variable.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{embed_real, herm_eig, unembed_real, HermitianMatrix, LinalgError, RealMatrix};

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("objective is unbounded over the feasible set")]
    Unbounded,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Ge,
    Le,
    Eq,
}

/// `Tr(matrix · G) + aux_coeff · ω  (relation)  rhs`.
#[derive(Debug, Clone)]
pub struct TraceConstraint {
    pub matrix: HermitianMatrix,
    pub relation: Relation,
    pub rhs: f64,
    pub aux_coeff: f64,
}

impl TraceConstraint {
    pub fn new(matrix: HermitianMatrix, relation: Relation, rhs: f64) -> Self {
        Self { matrix, relation, rhs, aux_coeff: 0.0 }
    }

    pub fn with_aux(mut self, coeff: f64) -> Self {
        self.aux_coeff = coeff;
        self
    }

    fn lhs(&self, g: &HermitianMatrix, aux: f64) -> f64 {
        self.matrix.trace_product(g) + self.aux_coeff * aux
    }
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub dim: usize,
    /// Maximized when present; absent for feasibility problems.
    pub objective: Option<HermitianMatrix>,
    pub constraints: Vec<TraceConstraint>,
    /// Lower bound of the auxiliary scalar, when the problem has one.
    pub aux_lower_bound: Option<f64>,
}

impl SdpProblem {
    pub fn feasibility(dim: usize) -> Self {
        Self { dim, objective: None, constraints: Vec::new(), aux_lower_bound: None }
    }

    pub fn maximize(objective: HermitianMatrix) -> Self {
        Self { dim: objective.dim(), objective: Some(objective), constraints: Vec::new(), aux_lower_bound: None }
    }

    pub fn with_aux(mut self, lower_bound: f64) -> Self {
        self.aux_lower_bound = Some(lower_bound);
        self
    }

    pub fn push(&mut self, c: TraceConstraint) -> &mut Self {
        self.constraints.push(c);
        self
    }

    pub fn constrain(mut self, c: TraceConstraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.dim == 0 {
            return Err(SdpError::Malformed("dimension must be positive".into()));
        }
        if self.constraints.is_empty() {
            return Err(SdpError::Malformed("at least one constraint is required".into()));
        }
        if let Some(obj) = &self.objective {
            if obj.dim() != self.dim {
                return Err(SdpError::Malformed(format!("objective has dim {} but problem has dim {}", obj.dim(), self.dim)));
            }
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.matrix.dim() != self.dim {
                return Err(SdpError::Malformed(format!("constraint {k} has dim {} but problem has dim {}", c.matrix.dim(), self.dim)));
            }
            if !c.rhs.is_finite() || !c.aux_coeff.is_finite() {
                return Err(SdpError::Malformed(format!("constraint {k} has a non-finite coefficient")));
            }
            if c.aux_coeff != 0.0 && self.aux_lower_bound.is_none() {
                return Err(SdpError::Malformed(format!("constraint {k} uses the auxiliary scalar but none is declared")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Feasible,
    Infeasible,
    NumericalFailure,
}

impl SdpStatus {
    pub fn is_success(self) -> bool {
        matches!(self, SdpStatus::Optimal | SdpStatus::Feasible)
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub g: HermitianMatrix,
    /// Value of `ω` (zero when the problem has no auxiliary scalar).
    pub aux_scalar: f64,
    /// `Tr(C G)` for linear problems; the achieved margin for feasibility.
    pub objective_value: f64,
    /// Upper bound on the optimum implied by the dual iterate.
    pub dual_bound: f64,
    pub max_constraint_violation: f64,
    pub min_eigenvalue: f64,
    pub iterations: usize,
}

/// Solver knobs.
#[derive(Debug, Clone, Serialize)]
pub struct SdpSettings {
    /// Feasibility margin and certificate tolerance.
    pub feas_tol: f64,
    /// Relative residual and gap target of the interior-point iterations.
    pub ipm_tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
    /// Lower clamp on the centering parameter.
    pub min_centering: f64,
    /// Upper bound on the feasibility margin (in normalized constraint units).
    pub margin_cap: f64,
    /// Lower bound on the feasibility margin.
    pub margin_floor: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            ipm_tol: 1e-10,
            max_iter: 120,
            step_fraction: 0.98,
            min_centering: 0.0,
            margin_cap: 1.0,
            margin_floor: 100.0,
        }
    }
}

impl SdpSettings {
    pub fn with_feas_tol(feas_tol: f64) -> Self {
        Self { feas_tol, ..Self::default() }
    }

    /// More conservative steps with a centering floor, used for retries.
    pub fn relaxed(&self) -> Self {
        Self { min_centering: 0.2, step_fraction: 0.9, max_iter: self.max_iter * 2, ..self.clone() }
    }
}

/// Pluggable solver boundary.
pub trait SdpBackend: Sync {
    fn solve_feasibility(&self, p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError>;
    fn solve_linear(&self, p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError>;
}

/// The built-in dense interior-point backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl SdpBackend for InteriorPoint {
    fn solve_feasibility(&self, p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError> {
        p.validate()?;
        if p.objective.is_some() {
            return Err(SdpError::Malformed("feasibility problem must not carry an objective".into()));
        }
        solve_feasibility_ipm(p, settings)
    }

    fn solve_linear(&self, p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError> {
        p.validate()?;
        if p.objective.is_none() {
            return Err(SdpError::Malformed("linear problem needs an objective".into()));
        }
        solve_linear_ipm(p, settings)
    }
}

/// Decides feasibility of `p` with the default backend.
pub fn solve_feasibility(p: &SdpProblem, feas_tol: f64) -> Result<SdpSolution, SdpError> {
    InteriorPoint.solve_feasibility(p, &SdpSettings::with_feas_tol(feas_tol))
}

/// Maximizes the objective of `p` with the default backend.
pub fn solve_linear(p: &SdpProblem) -> Result<SdpSolution, SdpError> {
    InteriorPoint.solve_linear(p, &SdpSettings::default())
}

/// Independent recomputation of constraint satisfaction.
#[derive(Debug, Clone, Serialize)]
pub struct ViolationReport {
    /// Positive means violated; negative is slack on an inequality.
    pub signed_violations: Vec<f64>,
    /// Violations divided by `1 + |b_k| + ||A_k||_F ||G||_F + |a_k ω|`.
    pub relative_violations: Vec<f64>,
    pub max_violation: f64,
    pub max_relative_violation: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl ViolationReport {
    /// Constraints within `tol` (relative) and `G` PSD within `tol (1 + λ_max)`.
    pub fn passes(&self, tol: f64) -> bool {
        self.max_relative_violation <= tol && self.min_eigenvalue >= -tol * (1.0 + self.max_eigenvalue.max(0.0))
    }
}

pub fn check_solution(g: &HermitianMatrix, aux: f64, constraints: &[TraceConstraint]) -> Result<ViolationReport, SdpError> {
    let g_norm = g.frobenius_norm();
    let mut signed = Vec::with_capacity(constraints.len());
    let mut relative = Vec::with_capacity(constraints.len());
    for (k, c) in constraints.iter().enumerate() {
        if c.matrix.dim() != g.dim() {
            return Err(SdpError::Malformed(format!("constraint {k} has dim {} but G has dim {}", c.matrix.dim(), g.dim())));
        }
        let lhs = c.lhs(g, aux);
        let v = match c.relation {
            Relation::Ge => c.rhs - lhs,
            Relation::Le => lhs - c.rhs,
            Relation::Eq => (lhs - c.rhs).abs(),
        };
        let scale = 1.0 + c.rhs.abs() + c.matrix.frobenius_norm() * g_norm + (c.aux_coeff * aux).abs();
        signed.push(v);
        relative.push(v / scale);
    }
    let eig = herm_eig(g)?;
    Ok(ViolationReport {
        max_violation: signed.iter().copied().fold(0.0, f64::max),
        max_relative_violation: relative.iter().copied().fold(0.0, f64::max),
        signed_violations: signed,
        relative_violations: relative,
        min_eigenvalue: eig.min(),
        max_eigenvalue: eig.max(),
    })
}

// ---------------------------------------------------------------------------
// standard form

struct StdForm {
    ns: usize,
    nl: usize,
    a_s: Vec<RealMatrix>,
    a_l: DMatrix<f64>,
    b: DVector<f64>,
    c_s: RealMatrix,
    c_l: DVector<f64>,
}

/// Where the problem quantities live inside the standard-form variable.
struct Layout {
    aux: Option<usize>,
    margin: Option<usize>,
    aux_lb: f64,
    /// Scale applied to the objective row.
    obj_scale: f64,
}

fn frob(m: &RealMatrix) -> f64 {
    m.norm()
}

fn build_std_form(p: &SdpProblem, feasibility: bool, settings: &SdpSettings) -> (StdForm, Layout) {
    let ns = 2 * p.dim;
    let n_ineq = p.constraints.iter().filter(|c| c.relation != Relation::Eq).count();
    let mut nl = n_ineq;
    let aux = p.aux_lower_bound.map(|_| {
        nl += 1;
        nl - 1
    });
    let margin = if feasibility {
        nl += 2; // margin variable and its cap slack
        Some(nl - 2)
    } else {
        None
    };
    let aux_lb = p.aux_lower_bound.unwrap_or(0.0);
    let m = p.constraints.len() + usize::from(feasibility);
    let mut a_s = Vec::with_capacity(m);
    let mut a_l = DMatrix::zeros(m, nl);
    let mut b = DVector::zeros(m);
    let mut slack = 0;
    let floor = settings.margin_floor;
    for (k, c) in p.constraints.iter().enumerate() {
        // Tr(A G) = <embed(A), embed(G)> / 2, so rows are stated with the
        // embedded matrix and a doubled right-hand side.
        let emb = embed_real(&c.matrix);
        let scale = (frob(&emb) / 2.0).max(c.rhs.abs()).max(c.aux_coeff.abs()).max(1e-300);
        let row_scale = 1.0 / (2.0 * scale);
        a_s.push(emb * row_scale);
        let mut rhs = 2.0 * (c.rhs - c.aux_coeff * aux_lb) * row_scale;
        if let Some(ai) = aux {
            a_l[(k, ai)] = 2.0 * c.aux_coeff * row_scale;
        }
        let sign = match c.relation {
            Relation::Ge => -1.0,
            Relation::Le => 1.0,
            Relation::Eq => 0.0,
        };
        if c.relation != Relation::Eq {
            a_l[(k, slack)] = sign;
            slack += 1;
            if let Some(t) = margin {
                // margin t = τ - floor enters as -t (Ge) or +t (Le)
                a_l[(k, t)] = sign;
                rhs += sign * floor;
            }
        }
        b[k] = rhs;
    }
    if let Some(t) = margin {
        let row = m - 1;
        a_s.push(RealMatrix::zeros(ns, ns));
        a_l[(row, t)] = 1.0;
        a_l[(row, t + 1)] = 1.0;
        b[row] = settings.margin_cap + floor;
    }
    let mut c_s = RealMatrix::zeros(ns, ns);
    let mut c_l = DVector::zeros(nl);
    let mut obj_scale = 1.0;
    if let Some(obj) = &p.objective {
        let emb = embed_real(obj);
        let nrm = frob(&emb) / 2.0;
        obj_scale = if nrm > 0.0 { nrm } else { 1.0 };
        c_s = emb * (-0.5 / obj_scale);
    }
    if let Some(t) = margin {
        c_l[t] = -1.0;
    }
    (StdForm { ns, nl, a_s, a_l, b, c_s, c_l }, Layout { aux, margin, aux_lb, obj_scale })
}

// ---------------------------------------------------------------------------
// interior-point iterations

#[derive(Clone)]
struct Iterate {
    xs: RealMatrix,
    xl: DVector<f64>,
    y: DVector<f64>,
    zs: RealMatrix,
    zl: DVector<f64>,
}

struct Residuals {
    rel_primal: f64,
    rel_dual: f64,
    rel_gap: f64,
    pobj: f64,
    dobj: f64,
}

enum Verdict {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Exit {
    Converged,
    Early,
    MaxIter,
    Diverged,
    Stalled,
    Breakdown,
}

fn inner(a: &RealMatrix, b: &RealMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(m: RealMatrix) -> RealMatrix {
    (&m + m.transpose()) * 0.5
}

impl StdForm {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, xs: &RealMatrix, xl: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.m(), |k, _| inner(&self.a_s[k], xs)) + &self.a_l * xl
    }

    fn adjoint(&self, y: &DVector<f64>) -> (RealMatrix, DVector<f64>) {
        let mut s = RealMatrix::zeros(self.ns, self.ns);
        for (k, a) in self.a_s.iter().enumerate() {
            if y[k] != 0.0 {
                s += a * y[k];
            }
        }
        (s, self.a_l.transpose() * y)
    }

    fn residuals(&self, it: &Iterate) -> (DVector<f64>, RealMatrix, DVector<f64>, Residuals) {
        let rp = &self.b - self.apply(&it.xs, &it.xl);
        let (ats, atl) = self.adjoint(&it.y);
        let rds = &self.c_s - ats - &it.zs;
        let rdl = &self.c_l - atl - &it.zl;
        let pobj = inner(&self.c_s, &it.xs) + self.c_l.dot(&it.xl);
        let dobj = self.b.dot(&it.y);
        let c_norm = (frob(&self.c_s).powi(2) + self.c_l.norm_squared()).sqrt();
        let gap = inner(&it.xs, &it.zs) + it.xl.dot(&it.zl);
        let res = Residuals {
            rel_primal: rp.norm() / (1.0 + self.b.norm()),
            rel_dual: (frob(&rds).powi(2) + rdl.norm_squared()).sqrt() / (1.0 + c_norm),
            rel_gap: gap.abs() / (1.0 + pobj.abs() + dobj.abs()),
            pobj,
            dobj,
        };
        (rp, rds, rdl, res)
    }
}

/// Largest `α` with `x + α dx ⪰ 0` (infinite when unbounded).
fn max_step_psd(x: &RealMatrix, dx: &RealMatrix) -> f64 {
    if x.nrows() == 0 {
        return f64::INFINITY;
    }
    let Some(ch) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = ch.l();
    let Some(t) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(w) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let lam = sym(w).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter().zip(dx.iter()).filter(|(_, d)| **d < 0.0).map(|(v, d)| -v / d).fold(f64::INFINITY, f64::min)
}

fn spd_inverse(m: &RealMatrix) -> Option<RealMatrix> {
    Cholesky::new(m.clone()).map(|c| sym(c.inverse()))
}

struct Direction {
    dxs: RealMatrix,
    dxl: DVector<f64>,
    dy: DVector<f64>,
    dzs: RealMatrix,
    dzl: DVector<f64>,
}

fn solve_schur(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = Cholesky::<f64, Dyn>::new(m.clone()) {
        return Some(ch.solve(rhs));
    }
    let diag_scale = m.diagonal().iter().fold(0.0_f64, |a, b| a.max(b.abs())).max(1e-300);
    for k in [1e-14, 1e-12, 1e-10] {
        let reg = m + DMatrix::identity(m.nrows(), m.ncols()) * (k * diag_scale);
        if let Some(ch) = Cholesky::<f64, Dyn>::new(reg) {
            return Some(ch.solve(rhs));
        }
    }
    m.clone().lu().solve(rhs)
}

fn run_ipm<F>(sf: &StdForm, settings: &SdpSettings, mut monitor: F) -> (Iterate, usize, Exit)
where
    F: FnMut(&Iterate, &Residuals) -> Verdict,
{
    let ns = sf.ns;
    let nl = sf.nl;
    let n_total = (ns + nl) as f64;
    let m = sf.m();

    let a_norms: Vec<f64> = (0..m).map(|k| (frob(&sf.a_s[k]).powi(2) + sf.a_l.row(k).norm_squared()).sqrt()).collect();
    let c_norm = (frob(&sf.c_s).powi(2) + sf.c_l.norm_squared()).sqrt();
    let xi = (0..m)
        .map(|k| n_total * (1.0 + sf.b[k].abs()) / (1.0 + a_norms[k]))
        .fold(10f64.max(n_total.sqrt()), f64::max);
    let eta = a_norms.iter().copied().fold(c_norm, f64::max).max(10f64.max(n_total.sqrt()));

    let mut it = Iterate {
        xs: RealMatrix::identity(ns, ns) * xi,
        xl: DVector::from_element(nl, xi),
        y: DVector::zeros(m),
        zs: RealMatrix::identity(ns, ns) * eta,
        zl: DVector::from_element(nl, eta),
    };
    let start_scale = xi.max(eta);
    let mut small_steps = 0;

    for iter in 0..settings.max_iter {
        let (rp, rds, rdl, res) = sf.residuals(&it);
        if let Verdict::Stop = monitor(&it, &res) {
            return (it, iter, Exit::Early);
        }
        if res.rel_primal <= settings.ipm_tol && res.rel_dual <= settings.ipm_tol && res.rel_gap <= settings.ipm_tol {
            return (it, iter, Exit::Converged);
        }
        let size = frob(&it.xs) + it.xl.norm() + frob(&it.zs) + it.zl.norm() + it.y.norm();
        if !size.is_finite() || size > 1e13 * start_scale {
            return (it, iter, Exit::Diverged);
        }
        let mu = (inner(&it.xs, &it.zs) + it.xl.dot(&it.zl)) / n_total;

        let Some(zinv) = spd_inverse(&it.zs) else {
            return (it, iter, Exit::Breakdown);
        };
        let x_over_z = it.xl.component_div(&it.zl);

        // Schur complement M_ij = <A_i, X A_j Z^-1> + sum_l a_il a_jl x_l / z_l
        let xa_zinv: Vec<RealMatrix> = sf.a_s.iter().map(|a| &it.xs * a * &zinv).collect();
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut v = inner(&sf.a_s[i], &xa_zinv[j]);
                for l in 0..nl {
                    v += sf.a_l[(i, l)] * sf.a_l[(j, l)] * x_over_z[l];
                }
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let x_rd_zinv = &it.xs * &rds * &zinv;

        let direction = |sigma_mu: f64, corr: Option<&Direction>| -> Option<Direction> {
            // P = (σμ I - dXa dZa) Z^-1 - X - X R_d Z^-1
            let mut ps = &zinv * sigma_mu - &it.xs - &x_rd_zinv;
            let mut pl = DVector::from_fn(nl, |l, _| sigma_mu / it.zl[l] - it.xl[l] - it.xl[l] * rdl[l] / it.zl[l]);
            if let Some(c) = corr {
                ps -= &c.dxs * &c.dzs * &zinv;
                for l in 0..nl {
                    pl[l] -= c.dxl[l] * c.dzl[l] / it.zl[l];
                }
            }
            let rhs = &rp - sf.apply(&ps, &pl);
            let dy = solve_schur(&schur, &rhs)?;
            let (ats, atl) = sf.adjoint(&dy);
            let dzs = &rds - &ats;
            let dzl = &rdl - &atl;
            let dxs = sym(ps + &it.xs * &ats * &zinv);
            let dxl = pl + x_over_z.component_mul(&atl);
            Some(Direction { dxs, dxl, dy, dzs: sym(dzs), dzl })
        };

        let step_lengths = |d: &Direction, frac: f64| -> (f64, f64) {
            let ap = max_step_psd(&it.xs, &d.dxs).min(max_step_lp(&it.xl, &d.dxl));
            let ad = max_step_psd(&it.zs, &d.dzs).min(max_step_lp(&it.zl, &d.dzl));
            ((frac * ap).min(1.0), (frac * ad).min(1.0))
        };

        let Some(pred) = direction(0.0, None) else {
            return (it, iter, Exit::Breakdown);
        };
        let (ap, ad) = step_lengths(&pred, 1.0);
        let mu_aff = (inner(&(&it.xs + &pred.dxs * ap), &(&it.zs + &pred.dzs * ad))
            + (&it.xl + &pred.dxl * ap).dot(&(&it.zl + &pred.dzl * ad)))
            / n_total;
        let sigma = (mu_aff / mu).max(0.0).powi(3).clamp(settings.min_centering, 1.0);
        let Some(corr) = direction(sigma * mu, Some(&pred)) else {
            return (it, iter, Exit::Breakdown);
        };
        let (ap, ad) = step_lengths(&corr, settings.step_fraction);
        if !(ap.is_finite() && ad.is_finite()) {
            return (it, iter, Exit::Breakdown);
        }
        if ap.max(ad) < 1e-10 {
            small_steps += 1;
            if small_steps >= 3 {
                return (it, iter, Exit::Stalled);
            }
        } else {
            small_steps = 0;
        }
        it.xs = sym(&it.xs + &corr.dxs * ap);
        it.xl += &corr.dxl * ap;
        it.y += &corr.dy * ad;
        it.zs = sym(&it.zs + &corr.dzs * ad);
        it.zl += &corr.dzl * ad;
    }
    (it, settings.max_iter, Exit::MaxIter)
}

// ---------------------------------------------------------------------------
// problem drivers

fn recover(it: &Iterate, layout: &Layout) -> Result<(HermitianMatrix, f64), SdpError> {
    let g = unembed_real(&it.xs)?;
    let aux = layout.aux.map(|i| it.xl[i] + layout.aux_lb).unwrap_or(0.0);
    Ok((g, aux))
}

fn solve_feasibility_ipm(p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError> {
    let sol = feasibility_pass(p, settings)?;
    if sol.status != SdpStatus::NumericalFailure {
        return Ok(sol);
    }
    // Near the boundary the primal margin and the dual bound can straddle
    // -feas_tol by the duality gap; a tighter gap usually separates them.
    let tight = SdpSettings { ipm_tol: settings.ipm_tol * 1e-2, max_iter: settings.max_iter * 2, ..settings.clone() };
    let mut second = feasibility_pass(p, &tight)?;
    second.iterations += sol.iterations;
    Ok(second)
}

fn feasibility_pass(p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError> {
    let (sf, layout) = build_std_form(p, true, settings);
    let t_idx = layout.margin.expect("feasibility layout has a margin");
    let floor = settings.margin_floor;
    let tol = settings.feas_tol;
    let cert_tol = settings.ipm_tol.max(1e-9);

    let mut early: Option<SdpStatus> = None;
    let (it, iterations, exit) = run_ipm(&sf, settings, |it, res| {
        let margin = it.xl[t_idx] - floor;
        // dual bound: τ* <= -b^T y when the dual residual vanishes
        let margin_ub = -res.dobj - floor;
        if res.rel_dual <= cert_tol && margin_ub < -tol {
            early = Some(SdpStatus::Infeasible);
            return Verdict::Stop;
        }
        if res.rel_primal <= cert_tol && margin > 10.0 * tol {
            early = Some(SdpStatus::Feasible);
            return Verdict::Stop;
        }
        Verdict::Continue
    });
    let (_, _, _, res) = sf.residuals(&it);
    let (g, aux) = recover(&it, &layout)?;
    let margin = it.xl[t_idx] - floor;
    let margin_ub = -res.dobj - floor;
    let report = check_solution(&g, aux, &p.constraints)?;

    let status = match (exit, early) {
        (Exit::Early, Some(SdpStatus::Infeasible)) => SdpStatus::Infeasible,
        (Exit::Early, Some(_)) | (Exit::Converged, _) if margin >= -tol => {
            if report.passes(10.0 * tol) {
                SdpStatus::Feasible
            } else {
                SdpStatus::NumericalFailure
            }
        }
        (Exit::Converged | Exit::Stalled | Exit::MaxIter, _) if res.rel_dual <= cert_tol && margin_ub < -tol => SdpStatus::Infeasible,
        (Exit::Stalled | Exit::MaxIter, _) if res.rel_primal <= cert_tol && margin >= -tol && report.passes(10.0 * tol) => SdpStatus::Feasible,
        _ => SdpStatus::NumericalFailure,
    };
    log::trace!("feasibility: {status:?} after {iterations} iterations ({exit:?}), margin {margin:e}, bound {margin_ub:e}");
    Ok(SdpSolution {
        status,
        g,
        aux_scalar: aux,
        objective_value: margin,
        dual_bound: margin_ub,
        max_constraint_violation: report.max_relative_violation,
        min_eigenvalue: report.min_eigenvalue,
        iterations,
    })
}

fn solve_linear_ipm(p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError> {
    let (sf, layout) = build_std_form(p, false, settings);
    let (it, iterations, exit) = run_ipm(&sf, settings, |_, _| Verdict::Continue);
    let (_, _, _, res) = sf.residuals(&it);
    let (g, aux) = recover(&it, &layout)?;
    let objective = p.objective.as_ref().expect("linear problem has an objective");
    let value = objective.trace_product(&g);
    if exit == Exit::Diverged && res.rel_primal < 1e-6 && res.pobj < -1e8 {
        return Err(SdpError::Unbounded);
    }
    let report = check_solution(&g, aux, &p.constraints)?;
    let status = if exit == Exit::Converged && report.passes(10.0 * settings.feas_tol) {
        SdpStatus::Optimal
    } else {
        SdpStatus::NumericalFailure
    };
    log::trace!("linear: {status:?} after {iterations} iterations ({exit:?}), value {value:e}");
    Ok(SdpSolution {
        status,
        g,
        aux_scalar: aux,
        objective_value: value,
        dual_bound: -res.dobj * layout.obj_scale,
        max_constraint_violation: report.max_relative_violation,
        min_eigenvalue: report.min_eigenvalue,
        iterations,
    })
}
