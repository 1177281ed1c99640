//! Small dense semidefinite programs over Hermitian matrices.
//!
//! A problem reads
//!
//! ```text
//! max or min  tr(C X)
//! s.t.        tr(A_k X) == b_k
//!             tr(G_j X) <= c_j
//!             X Hermitian PSD
//! ```
//!
//! It is mapped to a real problem through the embedding
//! `X -> [[Re X, -Im X], [Im X, Re X]]`, which doubles every trace, and
//! inequality slacks become a nonnegative-orthant block. The real problem is
//! solved by an infeasible-start primal-dual path-following method with
//! Nesterov-Todd scaling and Mehrotra's predictor-corrector.
//!
//! Dual conventions for reported multipliers:
//!
//! - Minimize: `G* = C - sum_k y_k A_k + sum_j v_j G_j`, dual objective
//!   `sum_k y_k b_k - sum_j v_j c_j`.
//! - Maximize: `G* = sum_k y_k A_k + sum_j v_j G_j - C`, dual objective
//!   `sum_k y_k b_k + sum_j v_j c_j`.
//!
//! In both cases `v >= 0` and `G*` is PSD at optimality.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use crate::linalg::real::{self, RealError};
use crate::linalg::{herm_eig, CMatrix, HermitianMatrix};

/// Thresholds an optimal solution is certified against.
pub const FEASIBILITY_TOL: f64 = 1e-7;
pub const PSD_TOL: f64 = 1e-8;
pub const GAP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SdpError {
    #[error("constraint {index} has dimension {actual}, the objective has {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("right-hand side of constraint {0} is not finite")]
    NonFiniteRhs(usize),
    #[error("initial point has dimension {actual}, the objective has {expected}")]
    InitialPointDimension { expected: usize, actual: usize },
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub objective: HermitianMatrix,
    pub sense: Sense,
    /// `(A_k, b_k)` meaning `tr(A_k X) == b_k`.
    pub eq_constraints: Vec<(HermitianMatrix, f64)>,
    /// `(G_j, c_j)` meaning `tr(G_j X) <= c_j`.
    pub ineq_constraints: Vec<(HermitianMatrix, f64)>,
    /// Optional strictly feasible primal point used to start the iteration.
    pub initial_point: Option<HermitianMatrix>,
}

impl SdpProblem {
    pub fn new(objective: HermitianMatrix, sense: Sense) -> Self {
        Self {
            objective,
            sense,
            eq_constraints: Vec::new(),
            ineq_constraints: Vec::new(),
            initial_point: None,
        }
    }

    pub fn with_eq(mut self, a: HermitianMatrix, b: f64) -> Self {
        self.eq_constraints.push((a, b));
        self
    }

    pub fn with_ineq(mut self, g: HermitianMatrix, c: f64) -> Self {
        self.ineq_constraints.push((g, c));
        self
    }

    pub fn with_initial_point(mut self, x: HermitianMatrix) -> Self {
        self.initial_point = Some(x);
        self
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn num_constraints(&self) -> usize {
        self.eq_constraints.len() + self.ineq_constraints.len()
    }

    fn constraints(&self) -> impl Iterator<Item = &(HermitianMatrix, f64)> {
        self.eq_constraints.iter().chain(self.ineq_constraints.iter())
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let n = self.dim();
        for (index, (a, b)) in self.constraints().enumerate() {
            if a.dim() != n {
                return Err(SdpError::DimensionMismatch {
                    index,
                    expected: n,
                    actual: a.dim(),
                });
            }
            if !b.is_finite() {
                return Err(SdpError::NonFiniteRhs(index));
            }
        }
        if let Some(x) = &self.initial_point {
            if x.dim() != n {
                return Err(SdpError::InitialPointDimension {
                    expected: n,
                    actual: x.dim(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: HermitianMatrix,
    /// Equality multipliers followed by inequality multipliers (`>= 0`).
    pub duals: Vec<f64>,
    pub objective_value: f64,
    pub dual_objective: f64,
    /// `|objective_value - dual_objective|`.
    pub gap: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    /// `G*` under the sign convention in the module docs.
    pub dual_slack: HermitianMatrix,
    /// Relative residuals of the scaled internal problem at exit.
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSettings {
    /// Relative stopping tolerance on the scaled residuals and gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the step to the cone boundary.
    pub step_fraction: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            step_fraction: 0.98,
        }
    }
}

/// One interior-point iterate, in the caller's objective scale and sense.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub mu: f64,
}

pub fn solve(problem: &SdpProblem) -> Result<SdpSolution, SdpError> {
    solve_with(problem, &SdpSettings::default(), None)
}

/// Solves with explicit settings, optionally recording every iterate.
pub fn solve_with(
    problem: &SdpProblem,
    settings: &SdpSettings,
    trace: Option<&mut Vec<IterateRecord>>,
) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let std = StandardForm::build(problem);
    let start = problem
        .initial_point
        .as_ref()
        .and_then(|x0| std.initial_from(problem, x0));
    let out = interior_point(&std, start, settings, trace);
    Ok(std.finish(problem, out))
}

// ---------------------------------------------------------------------------
// Embedding

/// Real symmetric embedding `[[Re A, -Im A], [Im A, Re A]]`, row-major.
pub fn embed(a: &HermitianMatrix) -> Vec<f64> {
    let n = a.dim();
    let s = 2 * n;
    let mut out = vec![0.0; s * s];
    for (p, q, v) in embed_entries(a) {
        out[p * s + q] = v;
    }
    out
}

/// Inverse of [`embed`] for a general symmetric `2n x 2n` matrix: averages the
/// two copies of the real and imaginary parts.
pub fn unembed(x: &[f64], n: usize) -> HermitianMatrix {
    let s = 2 * n;
    let m = CMatrix::from_fn(n, n, |p, q| {
        let re = 0.5 * (x[p * s + q] + x[(p + n) * s + q + n]);
        let im = 0.5 * (x[(p + n) * s + q] - x[p * s + q + n]);
        Complex64::new(re, im)
    });
    HermitianMatrix::from_hermitian_part(&m)
}

fn embed_entries(a: &HermitianMatrix) -> Vec<(usize, usize, f64)> {
    let n = a.dim();
    let mut out = Vec::new();
    for p in 0..n {
        for q in 0..n {
            let z = a.get(p, q);
            if z.re != 0.0 {
                out.push((p, q, z.re));
                out.push((p + n, q + n, z.re));
            }
            if z.im != 0.0 && p != q {
                out.push((p + n, q, z.im));
                out.push((p, q + n, -z.im));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Internal real standard form: min <C, X> s.t. <A_i, X> = b_i, X in K.

#[derive(Debug, Clone)]
enum Block {
    /// Full symmetric triplets (both triangles present).
    Sparse(Vec<(usize, usize, f64)>),
    Dense(Vec<f64>),
}

impl Block {
    fn from_entries(entries: Vec<(usize, usize, f64)>, s: usize) -> Self {
        if entries.len() * 4 <= s * s {
            Block::Sparse(entries)
        } else {
            let mut d = vec![0.0; s * s];
            for (p, q, v) in entries {
                d[p * s + q] += v;
            }
            Block::Dense(d)
        }
    }

    fn dot(&self, x: &[f64], s: usize) -> f64 {
        match self {
            Block::Sparse(t) => t.iter().map(|&(p, q, v)| v * x[p * s + q]).sum(),
            Block::Dense(d) => real::frob_dot(d, x),
        }
    }

    fn add_scaled_to(&self, alpha: f64, out: &mut [f64], s: usize) {
        match self {
            Block::Sparse(t) => {
                for &(p, q, v) in t {
                    out[p * s + q] += alpha * v;
                }
            }
            Block::Dense(d) => {
                for (o, v) in out.iter_mut().zip(d) {
                    *o += alpha * v;
                }
            }
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            Block::Sparse(t) => t.iter().map(|e| e.2 * e.2).sum(),
            Block::Dense(d) => d.iter().map(|v| v * v).sum(),
        }
    }

    fn scale(&mut self, f: f64) {
        match self {
            Block::Sparse(t) => t.iter_mut().for_each(|e| e.2 *= f),
            Block::Dense(d) => d.iter_mut().for_each(|v| *v *= f),
        }
    }

    /// `W A W` densely.
    fn congruence(&self, w: &[f64], s: usize) -> Vec<f64> {
        match self {
            Block::Dense(d) => real::matmul(&real::matmul(w, d, s), w, s),
            Block::Sparse(t) => {
                let mut out = vec![0.0; s * s];
                for &(r, c, v) in t {
                    for p in 0..s {
                        let wpr = v * w[p * s + r];
                        if wpr == 0.0 {
                            continue;
                        }
                        let row = &mut out[p * s..(p + 1) * s];
                        let wc = &w[c * s..(c + 1) * s];
                        for (o, x) in row.iter_mut().zip(wc) {
                            *o += wpr * x;
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Constraint {
    psd: Block,
    /// Orthant coefficients `(index, value)`.
    lp: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
struct StandardForm {
    n: usize,
    s: usize,
    l: usize,
    cons: Vec<Constraint>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Row scale: scaled row `i` = original row `i` / `row_scale[i]`.
    row_scale: Vec<f64>,
    obj_scale: f64,
    /// `X_internal = X_real / primal_scale`.
    primal_scale: f64,
    sign: f64,
}

struct Snapshot {
    merit: f64,
    iteration: usize,
    pinf: f64,
    dinf: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

struct IpmOutput {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    iterations: usize,
    pinf: f64,
    dinf: f64,
    infeasible: bool,
}

impl StandardForm {
    fn build(p: &SdpProblem) -> Self {
        let n = p.dim();
        let s = 2 * n;
        let m_eq = p.eq_constraints.len();
        let l = p.ineq_constraints.len();
        let mut cons = Vec::with_capacity(m_eq + l);
        let mut b = Vec::with_capacity(m_eq + l);
        for (a, rhs) in &p.eq_constraints {
            cons.push(Constraint {
                psd: Block::from_entries(embed_entries(a), s),
                lp: Vec::new(),
            });
            b.push(2.0 * rhs);
        }
        for (j, (g, rhs)) in p.ineq_constraints.iter().enumerate() {
            cons.push(Constraint {
                psd: Block::from_entries(embed_entries(g), s),
                lp: vec![(j, 1.0)],
            });
            b.push(2.0 * rhs);
        }
        let mut row_scale = Vec::with_capacity(cons.len());
        for (con, bi) in cons.iter_mut().zip(b.iter_mut()) {
            let norm = (con.psd.norm_sq() + con.lp.iter().map(|e| e.1 * e.1).sum::<f64>()).sqrt();
            let r = if norm > 0.0 { norm } else { 1.0 };
            con.psd.scale(1.0 / r);
            con.lp.iter_mut().for_each(|e| e.1 /= r);
            *bi /= r;
            row_scale.push(r);
        }
        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut c = embed(&p.objective);
        let cn = real::frob_norm(&c);
        let obj_scale = if cn > 0.0 { cn } else { 1.0 };
        c.iter_mut().for_each(|v| *v *= sign / obj_scale);
        let bmax = b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let primal_scale = bmax.max(1.0);
        b.iter_mut().for_each(|v| *v /= primal_scale);
        Self {
            n,
            s,
            l,
            cons,
            b,
            c,
            row_scale,
            obj_scale,
            primal_scale,
            sign,
        }
    }

    fn m(&self) -> usize {
        self.cons.len()
    }

    fn apply(&self, x: &[f64], xl: &[f64]) -> Vec<f64> {
        self.cons
            .iter()
            .map(|con| con.psd.dot(x, self.s) + con.lp.iter().map(|&(j, v)| v * xl[j]).sum::<f64>())
            .collect()
    }

    fn adjoint(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut out = vec![0.0; self.s * self.s];
        let mut outl = vec![0.0; self.l];
        for (con, &yi) in self.cons.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            con.psd.add_scaled_to(yi, &mut out, self.s);
            for &(j, v) in &con.lp {
                outl[j] += yi * v;
            }
        }
        (out, outl)
    }

    /// Schur complement `M_ij = <A_i, W A_j W> + sum_l a_il a_jl wl2_l`.
    fn schur(&self, w: &[f64], wl2: &[f64]) -> Vec<f64> {
        let m = self.m();
        let s = self.s;
        let mut out = vec![0.0; m * m];
        for j in 0..m {
            let mut waw: Option<Vec<f64>> = None;
            for i in 0..=j {
                let v = match (&self.cons[i].psd, &self.cons[j].psd) {
                    (Block::Sparse(ti), Block::Sparse(tj)) if ti.len() * tj.len() <= s * s => {
                        let mut acc = 0.0;
                        for &(p, q, a) in ti {
                            for &(r, t, bv) in tj {
                                acc += a * bv * w[p * s + r] * w[t * s + q];
                            }
                        }
                        acc
                    }
                    (bi, bj) => {
                        let waw = waw.get_or_insert_with(|| bj.congruence(w, s));
                        bi.dot(waw, s)
                    }
                };
                let mut lp = 0.0;
                for &(li, ai) in &self.cons[i].lp {
                    for &(lj, aj) in &self.cons[j].lp {
                        if li == lj {
                            lp += ai * aj * wl2[li];
                        }
                    }
                }
                out[i * m + j] = v + lp;
                out[j * m + i] = v + lp;
            }
        }
        out
    }

    fn default_start(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let s = self.s as f64;
        let l = self.l as f64;
        let mut ratio_s: f64 = 0.0;
        let mut ratio_l: f64 = 0.0;
        for (con, bi) in self.cons.iter().zip(&self.b) {
            let ns = con.psd.norm_sq().sqrt();
            let nl = con.lp.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
            ratio_s = ratio_s.max((1.0 + bi.abs()) / (1.0 + ns));
            ratio_l = ratio_l.max((1.0 + bi.abs()) / (1.0 + nl));
        }
        let xi_s = 10.0f64.max(s.sqrt()).max(s * ratio_s);
        let eta_s = 10.0f64.max(s.sqrt());
        let xi_l = 10.0f64.max(l.sqrt()).max(l * ratio_l);
        let eta_l = 10.0f64.max(l.sqrt());
        let mut x = vec![0.0; self.s * self.s];
        let mut z = vec![0.0; self.s * self.s];
        for i in 0..self.s {
            x[i * self.s + i] = xi_s;
            z[i * self.s + i] = eta_s;
        }
        (x, vec![xi_l; self.l], z, vec![eta_l; self.l])
    }

    /// Internal primal start from a caller's point, if it is strictly
    /// feasible for the cone and the inequalities.
    fn initial_from(&self, p: &SdpProblem, x0: &HermitianMatrix) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut x = embed(x0);
        x.iter_mut().for_each(|v| *v /= self.primal_scale);
        let mut chol = x.clone();
        real::cholesky(&mut chol, self.s).ok()?;
        let mut xl = Vec::with_capacity(self.l);
        for (g, c) in &p.ineq_constraints {
            let slack = 2.0 * (c - g.trace_product(x0)) / self.primal_scale;
            if !(slack > 0.0) {
                return None;
            }
            xl.push(slack);
        }
        Some((x, xl))
    }

    fn finish(&self, p: &SdpProblem, out: IpmOutput) -> SdpSolution {
        let n = self.n;
        let mut xr = out.x;
        xr.iter_mut().for_each(|v| *v *= self.primal_scale);
        let x = unembed(&xr, n);
        let m_eq = p.eq_constraints.len();
        // Internal y relates to the complex multipliers through the row and
        // objective scales; the sign flips for maximization.
        let y: Vec<f64> = out
            .y
            .iter()
            .zip(&self.row_scale)
            .map(|(yi, r)| yi * self.obj_scale / r)
            .collect();
        let duals: Vec<f64> = y
            .iter()
            .enumerate()
            .map(|(i, yi)| if i < m_eq { self.sign * yi } else { -yi })
            .collect();
        let mut zr = out.z;
        zr.iter_mut().for_each(|v| *v *= self.obj_scale);
        let dual_slack = unembed(&zr, n);
        let objective_value = p.objective.trace_product(&x);
        let dual_objective = dual_objective(p, &duals);
        let mut sol = SdpSolution {
            x,
            duals,
            objective_value,
            dual_objective,
            gap: (objective_value - dual_objective).abs(),
            status: SdpStatus::NumericalFailure,
            iterations: out.iterations,
            dual_slack,
            primal_infeasibility: out.pinf,
            dual_infeasibility: out.dinf,
        };
        sol.status = if out.infeasible {
            SdpStatus::Infeasible
        } else if check_certificate(p, &sol).certified() {
            SdpStatus::Optimal
        } else {
            SdpStatus::NumericalFailure
        };
        sol
    }
}

fn dual_objective(p: &SdpProblem, duals: &[f64]) -> f64 {
    let m_eq = p.eq_constraints.len();
    let eq: f64 = p.eq_constraints.iter().zip(duals).map(|((_, b), y)| b * y).sum();
    let ineq: f64 = p
        .ineq_constraints
        .iter()
        .zip(&duals[m_eq..])
        .map(|((_, c), v)| c * v)
        .sum();
    match p.sense {
        Sense::Minimize => eq - ineq,
        Sense::Maximize => eq + ineq,
    }
}

// ---------------------------------------------------------------------------
// Interior-point core

struct Scaling {
    g: Vec<f64>,
    g_inv: Vec<f64>,
    w: Vec<f64>,
    lambda: Vec<f64>,
    /// Orthant: `x/z`, `sqrt(x z)`.
    wl2: Vec<f64>,
    lambda_l: Vec<f64>,
}

fn nt_scaling(x: &[f64], z: &[f64], xl: &[f64], zl: &[f64], s: usize) -> Result<Scaling, RealError> {
    let mut lx = x.to_vec();
    real::cholesky(&mut lx, s)?;
    let mut lz = z.to_vec();
    real::cholesky(&mut lz, s)?;
    let k = real::matmul_tn(&lz, &lx, s);
    let mut ktk = real::matmul_tn(&k, &k, s);
    real::symmetrize(&mut ktk, s);
    let eig = real::sym_eig(&ktk, s)?;
    let mut lambda = Vec::with_capacity(s);
    for &v in &eig.values {
        if !(v > 0.0) {
            return Err(RealError::NotPositiveDefinite { pivot: 0, value: v });
        }
        lambda.push(v.sqrt());
    }
    // G = L_x V diag(lambda^{-1/2})
    let mut g = real::matmul(&lx, &eig.vectors, s);
    for i in 0..s {
        for j in 0..s {
            g[i * s + j] /= lambda[j].sqrt();
        }
    }
    // G^{-1} = diag(lambda^{-3/2}) V^T L_x^T Z
    let lxt_z = real::matmul_tn(&lx, z, s);
    let mut g_inv = real::matmul_tn(&eig.vectors, &lxt_z, s);
    for i in 0..s {
        let f = lambda[i].powf(-1.5);
        for j in 0..s {
            g_inv[i * s + j] *= f;
        }
    }
    let mut w = real::matmul_nt(&g, &g, s);
    real::symmetrize(&mut w, s);
    let wl2 = xl.iter().zip(zl).map(|(a, b)| a / b).collect();
    let lambda_l = xl.iter().zip(zl).map(|(a, b)| (a * b).sqrt()).collect();
    Ok(Scaling {
        g,
        g_inv,
        w,
        lambda,
        wl2,
        lambda_l,
    })
}

struct Direction {
    dx: Vec<f64>,
    dxl: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    dzl: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn direction(
    std: &StandardForm,
    sc: &Scaling,
    m_chol: &[f64],
    rp: &[f64],
    rd: &[f64],
    rdl: &[f64],
    rc: &[f64],
    rcl: &[f64],
    zl: &[f64],
) -> Direction {
    let s = std.s;
    // Solve Lambda T + T Lambda = 2 Rc in the scaled frame, then map back.
    let mut t = vec![0.0; s * s];
    for i in 0..s {
        for j in 0..s {
            t[i * s + j] = 2.0 * rc[i * s + j] / (sc.lambda[i] + sc.lambda[j]);
        }
    }
    let mut r_hat = real::matmul_nt(&real::matmul(&sc.g, &t, s), &sc.g, s);
    real::symmetrize(&mut r_hat, s);
    let r_hat_l: Vec<f64> = rcl.iter().zip(zl).map(|(r, z)| r / z).collect();

    let mut wrdw = real::matmul(&real::matmul(&sc.w, rd, s), &sc.w, s);
    real::symmetrize(&mut wrdw, s);
    let wrdw_l: Vec<f64> = rdl.iter().zip(&sc.wl2).map(|(r, w)| r * w).collect();

    let a_rhat = std.apply(&r_hat, &r_hat_l);
    let a_wrdw = std.apply(&wrdw, &wrdw_l);
    let mut dy: Vec<f64> = (0..std.m()).map(|i| rp[i] - a_rhat[i] + a_wrdw[i]).collect();
    real::cholesky_solve(m_chol, std.m(), &mut dy);

    let (aty, atyl) = std.adjoint(&dy);
    let dz: Vec<f64> = rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
    let dzl: Vec<f64> = rdl.iter().zip(&atyl).map(|(r, a)| r - a).collect();
    let wdzw = real::matmul(&real::matmul(&sc.w, &dz, s), &sc.w, s);
    let mut dx: Vec<f64> = r_hat.iter().zip(&wdzw).map(|(r, v)| r - v).collect();
    real::symmetrize(&mut dx, s);
    let dxl = r_hat_l
        .iter()
        .zip(&dzl)
        .zip(&sc.wl2)
        .map(|((r, d), w)| r - w * d)
        .collect();
    Direction { dx, dxl, dy, dz, dzl }
}

/// Largest `alpha` keeping `Lambda + alpha D` PSD, given `D` in the scaled frame.
fn max_step_psd(lambda: &[f64], d_scaled: &[f64], s: usize) -> Result<f64, RealError> {
    if s == 0 {
        return Ok(f64::INFINITY);
    }
    let mut m = d_scaled.to_vec();
    for i in 0..s {
        for j in 0..s {
            m[i * s + j] /= (lambda[i] * lambda[j]).sqrt();
        }
    }
    real::symmetrize(&mut m, s);
    let ev = real::sym_eigvals(&m, s)?;
    let min = ev[0];
    Ok(if min >= 0.0 { f64::INFINITY } else { -1.0 / min })
}

fn max_step_lp(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

fn scaled_primal(sc: &Scaling, d: &[f64], s: usize) -> Vec<f64> {
    let mut out = real::matmul_nt(&real::matmul(&sc.g_inv, d, s), &sc.g_inv, s);
    real::symmetrize(&mut out, s);
    out
}

fn scaled_dual(sc: &Scaling, d: &[f64], s: usize) -> Vec<f64> {
    let mut out = real::matmul(&real::matmul_tn(&sc.g, d, s), &sc.g, s);
    real::symmetrize(&mut out, s);
    out
}

struct StepLengths {
    primal: f64,
    dual: f64,
}

fn step_lengths(
    sc: &Scaling,
    dir: &Direction,
    xl: &[f64],
    zl: &[f64],
    s: usize,
) -> Result<(StepLengths, Vec<f64>, Vec<f64>), RealError> {
    let dxs = scaled_primal(sc, &dir.dx, s);
    let dzs = scaled_dual(sc, &dir.dz, s);
    let ap = max_step_psd(&sc.lambda, &dxs, s)?.min(max_step_lp(xl, &dir.dxl));
    let ad = max_step_psd(&sc.lambda, &dzs, s)?.min(max_step_lp(zl, &dir.dzl));
    Ok((StepLengths { primal: ap, dual: ad }, dxs, dzs))
}

fn interior_point(
    std: &StandardForm,
    start: Option<(Vec<f64>, Vec<f64>)>,
    settings: &SdpSettings,
    mut trace: Option<&mut Vec<IterateRecord>>,
) -> IpmOutput {
    let s = std.s;
    let m = std.m();
    let (mut x, mut xl, mut z, mut zl) = std.default_start();
    if let Some((x0, xl0)) = start {
        x = x0;
        xl = xl0;
    }
    let mut y = vec![0.0; m];
    let nu = (s + std.l) as f64;
    let norm_b = real::frob_norm(&std.b);
    let norm_c = real::frob_norm(&std.c);
    let user_scale = 0.5 * std.sign * std.obj_scale * std.primal_scale;

    let mut iterations = 0;
    let mut pinf = f64::INFINITY;
    let mut dinf = f64::INFINITY;
    let mut infeasible = false;
    // Best iterate by worst scaled residual, restored if later steps only
    // lose accuracy to rounding.
    let mut best: Option<Snapshot> = None;
    let mut merit = f64::INFINITY;

    for iter in 0..=settings.max_iter {
        let ax = std.apply(&x, &xl);
        let rp: Vec<f64> = std.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let (aty, atyl) = std.adjoint(&y);
        let rd: Vec<f64> = std.c.iter().zip(&z).zip(&aty).map(|((c, z), a)| c - z - a).collect();
        let rdl: Vec<f64> = zl.iter().zip(&atyl).map(|(z, a)| -z - a).collect();
        let pobj = real::frob_dot(&std.c, &x);
        let dobj: f64 = std.b.iter().zip(&y).map(|(b, y)| b * y).sum();
        let xz = real::frob_dot(&x, &z) + real::frob_dot(&xl, &zl);
        let mu = xz / nu;
        pinf = real::frob_norm(&rp) / (1.0 + norm_b);
        dinf = (real::frob_dot(&rd, &rd) + real::frob_dot(&rdl, &rdl)).sqrt() / (1.0 + norm_c);
        let relgap = xz / (1.0 + pobj.abs() + dobj.abs());
        if let Some(t) = trace.as_deref_mut() {
            t.push(IterateRecord {
                iteration: iter,
                primal_objective: user_scale * pobj,
                dual_objective: user_scale * dobj,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                mu,
            });
        }
        iterations = iter;
        if pinf < settings.tol && dinf < settings.tol && relgap < settings.tol {
            best = None;
            break;
        }
        merit = pinf.max(dinf).max(relgap);
        if best.as_ref().is_none_or(|b| merit < b.merit) {
            best = Some(Snapshot {
                merit,
                iteration: iter,
                pinf,
                dinf,
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
            });
        }
        if iter == settings.max_iter {
            log::debug!("sdp: iteration cap reached (pinf {pinf:e}, dinf {dinf:e}, gap {relgap:e})");
            break;
        }
        // Farkas-type certificates: the dual objective diverging with a
        // bounded dual residual, or the primal one with bounded A(X).
        let c_minus_rd: Vec<f64> = std.c.iter().zip(&rd).map(|(c, r)| c - r).collect();
        if dobj > 0.0 && real::frob_norm(&c_minus_rd) / dobj < 1e-8 && dobj > 1e8 {
            log::debug!("sdp: primal infeasibility certificate");
            infeasible = true;
            break;
        }
        if pobj < 0.0 && real::frob_norm(&ax) / -pobj < 1e-8 && -pobj > 1e8 {
            log::debug!("sdp: dual infeasibility certificate");
            infeasible = true;
            break;
        }

        let sc = match nt_scaling(&x, &z, &xl, &zl, s) {
            Ok(sc) => sc,
            Err(e) => {
                log::debug!("sdp: scaling failed at iteration {iter}: {e:?}");
                break;
            }
        };
        let mut schur = std.schur(&sc.w, &sc.wl2);
        if real::cholesky(&mut schur.clone(), m).is_err() {
            let max_diag = (0..m).map(|i| schur[i * m + i]).fold(0.0, f64::max);
            for i in 0..m {
                schur[i * m + i] += 1e-13 * max_diag.max(1e-300);
            }
        }
        if m > 0 && real::cholesky(&mut schur, m).is_err() {
            log::debug!("sdp: Schur complement lost definiteness at iteration {iter}");
            break;
        }

        // Predictor.
        let mut rc = vec![0.0; s * s];
        for i in 0..s {
            rc[i * s + i] = -sc.lambda[i] * sc.lambda[i];
        }
        let rcl: Vec<f64> = sc.lambda_l.iter().map(|v| -v * v).collect();
        let pred = direction(std, &sc, &schur, &rp, &rd, &rdl, &rc, &rcl, &zl);
        let (steps, dxs_a, dzs_a) = match step_lengths(&sc, &pred, &xl, &zl, s) {
            Ok(v) => v,
            Err(_) => break,
        };
        let ap = steps.primal.min(1.0);
        let ad = steps.dual.min(1.0);
        let mut xz_aff = 0.0;
        for i in 0..s * s {
            xz_aff += (x[i] + ap * pred.dx[i]) * (z[i] + ad * pred.dz[i]);
        }
        for j in 0..std.l {
            xz_aff += (xl[j] + ap * pred.dxl[j]) * (zl[j] + ad * pred.dzl[j]);
        }
        let mu_aff = (xz_aff / nu).max(0.0);
        let sigma = (mu_aff / mu).powi(3).min(1.0);

        // Corrector: target sigma*mu and remove the second-order term.
        let jordan = {
            let a = real::matmul(&dxs_a, &dzs_a, s);
            let mut j = vec![0.0; s * s];
            for p in 0..s {
                for q in 0..s {
                    j[p * s + q] = 0.5 * (a[p * s + q] + a[q * s + p]);
                }
            }
            j
        };
        for i in 0..s {
            for k in 0..s {
                let target = if i == k {
                    sigma * mu - sc.lambda[i] * sc.lambda[i]
                } else {
                    0.0
                };
                rc[i * s + k] = target - jordan[i * s + k];
            }
        }
        let rcl: Vec<f64> = (0..std.l)
            .map(|j| {
                let dxs = pred.dxl[j] / sc.wl2[j].sqrt();
                let dzs = pred.dzl[j] * sc.wl2[j].sqrt();
                sigma * mu - sc.lambda_l[j] * sc.lambda_l[j] - dxs * dzs
            })
            .collect();
        let corr = direction(std, &sc, &schur, &rp, &rd, &rdl, &rc, &rcl, &zl);
        let (steps, _, _) = match step_lengths(&sc, &corr, &xl, &zl, s) {
            Ok(v) => v,
            Err(_) => break,
        };
        let ap = (settings.step_fraction * steps.primal).min(1.0);
        let ad = (settings.step_fraction * steps.dual).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            log::debug!("sdp: step lengths collapsed at iteration {iter}");
            break;
        }
        for i in 0..s * s {
            x[i] += ap * corr.dx[i];
            z[i] += ad * corr.dz[i];
        }
        for j in 0..std.l {
            xl[j] += ap * corr.dxl[j];
            zl[j] += ad * corr.dzl[j];
        }
        for i in 0..m {
            y[i] += ad * corr.dy[i];
        }
        real::symmetrize(&mut x, s);
        real::symmetrize(&mut z, s);
    }

    if let Some(b) = best.filter(|b| !infeasible && b.merit < merit) {
        log::debug!("sdp: restoring iterate {} (residual {:e})", b.iteration, b.merit);
        x = b.x;
        y = b.y;
        z = b.z;
        pinf = b.pinf;
        dinf = b.dinf;
    }

    IpmOutput {
        x,
        y,
        z,
        iterations,
        pinf,
        dinf,
        infeasible,
    }
}

// ---------------------------------------------------------------------------
// Certificates

/// Optimality evidence for a candidate primal-dual pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    /// `max_k |tr(A_k X) - b_k|`.
    pub eq_residual: f64,
    /// `max_j max(0, tr(G_j X) - c_j)`.
    pub ineq_violation: f64,
    pub primal_min_eig: f64,
    /// Smallest eigenvalue of `G*` rebuilt from the multipliers.
    pub dual_min_eig: f64,
    /// Most negative inequality multiplier (0 if none is negative).
    pub dual_sign_violation: f64,
    /// `tr(X G*)`.
    pub complementarity: f64,
    /// `sum_j v_j (c_j - tr(G_j X))`.
    pub ineq_complementarity: f64,
    pub gap: f64,
    /// `1 + |objective|`, the scale of the gap tests.
    pub scale: f64,
}

impl CertificateReport {
    pub fn primal_feasible(&self) -> bool {
        self.eq_residual <= FEASIBILITY_TOL && self.ineq_violation <= FEASIBILITY_TOL && self.primal_min_eig >= -PSD_TOL
    }

    pub fn dual_feasible(&self) -> bool {
        self.dual_min_eig >= -FEASIBILITY_TOL * self.scale && self.dual_sign_violation <= FEASIBILITY_TOL
    }

    pub fn complementary(&self) -> bool {
        self.complementarity.abs() <= GAP_TOL * self.scale && self.ineq_complementarity.abs() <= GAP_TOL * self.scale
    }

    pub fn certified(&self) -> bool {
        self.primal_feasible() && self.dual_feasible() && self.complementary() && self.gap <= GAP_TOL * self.scale
    }
}

/// Rebuilds `G*` from the multipliers under the module's sign convention.
pub fn dual_slack_from_duals(problem: &SdpProblem, duals: &[f64]) -> HermitianMatrix {
    let m_eq = problem.eq_constraints.len();
    let mut acc = problem.objective.scale(match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    });
    let eq_sign = match problem.sense {
        Sense::Minimize => -1.0,
        Sense::Maximize => 1.0,
    };
    for ((a, _), y) in problem.eq_constraints.iter().zip(duals) {
        acc = acc.add(&a.scale(eq_sign * y)).expect("dimensions validated");
    }
    for ((g, _), v) in problem.ineq_constraints.iter().zip(&duals[m_eq..]) {
        acc = acc.add(&g.scale(*v)).expect("dimensions validated");
    }
    acc
}

pub fn check_certificate(problem: &SdpProblem, solution: &SdpSolution) -> CertificateReport {
    let x = &solution.x;
    let m_eq = problem.eq_constraints.len();
    let eq_residual = problem
        .eq_constraints
        .iter()
        .map(|(a, b)| (a.trace_product(x) - b).abs())
        .fold(0.0, f64::max);
    let slacks: Vec<f64> = problem
        .ineq_constraints
        .iter()
        .map(|(g, c)| c - g.trace_product(x))
        .collect();
    let ineq_violation = slacks.iter().map(|s| (-s).max(0.0)).fold(0.0, f64::max);
    let primal_min_eig = min_eig(x);
    let g_star = dual_slack_from_duals(problem, &solution.duals);
    let dual_min_eig = min_eig(&g_star);
    let dual_sign_violation = solution.duals[m_eq..].iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
    let complementarity = x.trace_product(&g_star);
    let ineq_complementarity = slacks.iter().zip(&solution.duals[m_eq..]).map(|(s, v)| s * v).sum();
    let primal = problem.objective.trace_product(x);
    let dual = dual_objective(problem, &solution.duals);
    CertificateReport {
        eq_residual,
        ineq_violation,
        primal_min_eig,
        dual_min_eig,
        dual_sign_violation,
        complementarity,
        ineq_complementarity,
        gap: (primal - dual).abs(),
        scale: 1.0 + primal.abs(),
    }
}

fn min_eig(a: &HermitianMatrix) -> f64 {
    match herm_eig(a) {
        Ok(e) => *e.values.last().expect("nonempty"),
        Err(_) => f64::NAN,
    }
}
