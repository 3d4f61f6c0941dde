//! Primal-dual interior-point solver for [`SdpProblem`]s.
//!
//! Equalities are eliminated first (reduced row echelon form on `E`), which
//! leaves a pure LMI in the free variables `u`:
//!
//! ```text
//! (D)  max b'u   s.t.  S = C - sum_k u_k A_k  PSD
//! (P)  min <C,X> s.t.  <A_k, X> = b_k,  X PSD
//! ```
//!
//! The pair is solved by an infeasible-start method with the Nesterov–Todd
//! search direction and Mehrotra predictor-corrector steps. Multipliers of the
//! original equalities are recovered from `X` afterwards.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sdp::{SdpError, SdpProblem};

/// Environment variable naming an external solver command.
pub const SOLVER_ENV: &str = "QCERT_SOLVER";

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Problem(#[from] SdpError),
    #[error("external solver: {0}")]
    External(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_usable(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub feasibility_tol: f64,
    pub gap_tol: f64,
    pub max_iterations: usize,
    /// Residual multiple still accepted as near-optimal.
    pub near_optimal_factor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-8,
            gap_tol: 1e-7,
            max_iterations: 120,
            near_optimal_factor: 1e3,
        }
    }
}

/// Result of a solve, in terms of the original problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub status: SolveStatus,
    /// `c'y + c0` at the returned moment vector.
    pub primal_objective: f64,
    /// Bound certified by the multipliers (upper bound when maximizing).
    pub dual_objective: f64,
    /// `dual - primal` for maximization, `primal - dual` for minimization.
    pub gap: f64,
    pub y: Vec<f64>,
    /// One multiplier per equality, in problem order.
    pub equality_multipliers: Vec<f64>,
    /// Dual bound with every equality right-hand side set to 0.
    pub bound_constant: f64,
    /// Dual PSD matrices, row-major, one per block.
    pub block_duals: Vec<Vec<f64>>,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub stationarity_residual: f64,
    pub iterations: usize,
    pub solve_time_seconds: f64,
}

impl DualSolution {
    /// Dual bound as an affine function of the equality right-hand sides.
    pub fn bound_at(&self, rhs: &[f64]) -> f64 {
        self.bound_constant
            + self
                .equality_multipliers
                .iter()
                .zip(rhs)
                .map(|(l, e)| l * e)
                .sum::<f64>()
    }

    fn infeasible(num_vars: usize, num_eq: usize, elapsed: f64) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            gap: f64::NAN,
            y: vec![0.0; num_vars],
            equality_multipliers: vec![0.0; num_eq],
            bound_constant: f64::NAN,
            block_duals: Vec::new(),
            primal_infeasibility: f64::INFINITY,
            dual_infeasibility: f64::NAN,
            stationarity_residual: f64::NAN,
            iterations: 0,
            solve_time_seconds: elapsed,
        }
    }
}

pub trait SdpSolver: Send + Sync {
    fn solve(&self, problem: &SdpProblem) -> Result<DualSolution, SolverError>;

    fn name(&self) -> String;
}

#[derive(Debug, Clone, Default)]
pub struct InteriorPointSolver {
    pub settings: SolverSettings,
}

impl InteriorPointSolver {
    pub fn new(settings: SolverSettings) -> Self {
        Self { settings }
    }
}

impl SdpSolver for InteriorPointSolver {
    fn solve(&self, problem: &SdpProblem) -> Result<DualSolution, SolverError> {
        solve_with(problem, &self.settings)
    }

    fn name(&self) -> String {
        "interior-point".into()
    }
}

/// Solver chosen by `QCERT_SOLVER`, falling back to the built-in method.
pub fn default_solver() -> Box<dyn SdpSolver> {
    match std::env::var(SOLVER_ENV) {
        Ok(cmd) if !cmd.trim().is_empty() && cmd != "builtin" => Box::new(ExternalSolver::new(cmd)),
        _ => Box::new(InteriorPointSolver::default()),
    }
}

pub fn solve(problem: &SdpProblem) -> Result<DualSolution, SolverError> {
    solve_with(problem, &SolverSettings::default())
}

/// An entry of a sparse symmetric matrix, stored in both triangles.
#[derive(Debug, Clone, Copy)]
struct Entry {
    p: usize,
    q: usize,
    v: f64,
}

struct Reduced {
    dims: Vec<usize>,
    c: Vec<DMatrix<f64>>,
    /// `a[k][blk]` lists the entries of `A_k` inside block `blk`.
    a: Vec<Vec<Vec<Entry>>>,
    b: DVector<f64>,
    /// Original index of each reduced variable.
    free_vars: Vec<usize>,
    /// `(pivot var, rhs, [(free var, coef)])`: `y_piv = rhs - sum coef * y_free`.
    pivots: Vec<(usize, f64, Vec<(usize, f64)>)>,
}

enum Reduction {
    Ok(Reduced),
    Infeasible,
    Unbounded,
}

fn reduce(problem: &SdpProblem) -> Reduction {
    let m = problem.num_vars;
    let p = problem.equalities.len();
    let mut e = DMatrix::<f64>::zeros(p, m);
    let mut rhs = DVector::<f64>::zeros(p);
    for (i, eq) in problem.equalities.iter().enumerate() {
        for &(k, c) in &eq.terms {
            e[(i, k)] += c;
        }
        rhs[i] = eq.rhs;
    }
    let rhs_scale = 1.0 + rhs.amax();
    let mut is_pivot = vec![false; m];
    let mut pivot_rows: Vec<(usize, usize)> = Vec::new();
    for i in 0..p {
        let row_scale = problem.equalities[i]
            .terms
            .iter()
            .map(|t| t.1.abs())
            .fold(0.0, f64::max)
            .max(1e-300);
        let mut best = (0usize, 0.0f64);
        for k in 0..m {
            if !is_pivot[k] && e[(i, k)].abs() > best.1 {
                best = (k, e[(i, k)].abs());
            }
        }
        if best.1 <= 1e-10 * row_scale {
            if rhs[i].abs() > 1e-9 * rhs_scale {
                return Reduction::Infeasible;
            }
            continue;
        }
        let col = best.0;
        let piv = e[(i, col)];
        for k in 0..m {
            e[(i, k)] /= piv;
        }
        rhs[i] /= piv;
        for r in 0..p {
            if r != i && e[(r, col)] != 0.0 {
                let f = e[(r, col)];
                for k in 0..m {
                    let v = e[(i, k)];
                    if v != 0.0 {
                        e[(r, k)] -= f * v;
                    }
                }
                rhs[r] -= f * rhs[i];
                e[(r, col)] = 0.0;
            }
        }
        is_pivot[col] = true;
        pivot_rows.push((i, col));
    }

    let pivots: Vec<(usize, f64, Vec<(usize, f64)>)> = pivot_rows
        .iter()
        .map(|&(i, col)| {
            let deps = (0..m)
                .filter(|&k| !is_pivot[k] && e[(i, k)] != 0.0)
                .map(|k| (k, e[(i, k)]))
                .collect();
            (col, rhs[i], deps)
        })
        .collect();

    // Entries of each F_k (upper triangle) and of F0.
    let nblk = problem.blocks.len();
    let mut var_entries: Vec<Vec<(usize, usize, usize, f64)>> = vec![Vec::new(); m];
    let mut c_blocks: Vec<DMatrix<f64>> = problem.blocks.iter().map(|b| DMatrix::zeros(b.dim, b.dim)).collect();
    for (j, blk) in problem.blocks.iter().enumerate() {
        for en in &blk.entries {
            match en.var {
                Some(k) => var_entries[k].push((j, en.row, en.col, en.coef)),
                None => add_sym(&mut c_blocks[j], en.row, en.col, en.coef),
            }
        }
    }
    let mut obj = vec![0.0; m];
    for &(k, c) in &problem.objective {
        obj[k] += c;
    }
    for (col, r, _) in &pivots {
        for &(j, row, cc, coef) in &var_entries[*col] {
            add_sym(&mut c_blocks[j], row, cc, coef * r);
        }
    }

    // Coefficient of free var k inside each pivot expression.
    let mut free_in_pivot: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (pi, (_, _, deps)) in pivots.iter().enumerate() {
        for &(k, coef) in deps {
            free_in_pivot.entry(k).or_default().push((pi, coef));
        }
    }

    let sign = problem.sense.sign();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut free_vars = Vec::new();
    for k in 0..m {
        if is_pivot[k] {
            continue;
        }
        let mut acc: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for &(j, row, col, coef) in &var_entries[k] {
            *acc.entry((j, row, col)).or_default() += coef;
        }
        let mut bk = obj[k];
        if let Some(list) = free_in_pivot.get(&k) {
            for &(pi, coef) in list {
                let pv = pivots[pi].0;
                for &(j, row, col, fc) in &var_entries[pv] {
                    *acc.entry((j, row, col)).or_default() -= coef * fc;
                }
                bk -= coef * obj[pv];
            }
        }
        let bk = sign * bk;
        let mut per_block: Vec<Vec<Entry>> = vec![Vec::new(); nblk];
        let mut any = false;
        for ((j, row, col), v) in acc {
            if v.abs() <= 1e-15 {
                continue;
            }
            any = true;
            // A_k = -G_k so that S = C - sum u_k A_k.
            per_block[j].push(Entry { p: row, q: col, v: -v });
            if row != col {
                per_block[j].push(Entry { p: col, q: row, v: -v });
            }
        }
        if !any {
            if bk.abs() > 1e-12 {
                return Reduction::Unbounded;
            }
            continue;
        }
        a.push(per_block);
        b.push(bk);
        free_vars.push(k);
    }

    Reduction::Ok(Reduced {
        dims: problem.blocks.iter().map(|b| b.dim).collect(),
        c: c_blocks,
        a,
        b: DVector::from_vec(b),
        free_vars,
        pivots,
    })
}

fn add_sym(m: &mut DMatrix<f64>, row: usize, col: usize, v: f64) {
    m[(row, col)] += v;
    if row != col {
        m[(col, row)] += v;
    }
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

impl Reduced {
    fn nvars(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, w: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.nvars(),
            self.a.iter().map(|ak| {
                ak.iter()
                    .enumerate()
                    .map(|(j, es)| es.iter().map(|e| e.v * w[j][(e.p, e.q)]).sum::<f64>())
                    .sum()
            }),
        )
    }

    fn combine(&self, z: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (k, ak) in self.a.iter().enumerate() {
            let zk = z[k];
            if zk == 0.0 {
                continue;
            }
            for (j, es) in ak.iter().enumerate() {
                for e in es {
                    out[j][(e.p, e.q)] += zk * e.v;
                }
            }
        }
        out
    }

    /// Gram matrix `<A_k, A_l>`.
    fn gram(&self, by_block: &[Vec<usize>]) -> DMatrix<f64> {
        let nv = self.nvars();
        let mut g = DMatrix::<f64>::zeros(nv, nv);
        for (j, vars) in by_block.iter().enumerate() {
            let dim = self.dims[j];
            let mut dense: Vec<Vec<(usize, f64)>> = Vec::with_capacity(vars.len());
            for &k in vars {
                let mut d: Vec<(usize, f64)> = self.a[k][j].iter().map(|e| (e.p * dim + e.q, e.v)).collect();
                d.sort_unstable_by_key(|t| t.0);
                dense.push(d);
            }
            for (ii, &k) in vars.iter().enumerate() {
                for (jj, &l) in vars.iter().enumerate().skip(ii) {
                    let (x, y) = (&dense[ii], &dense[jj]);
                    let (mut p, mut q, mut acc) = (0, 0, 0.0);
                    while p < x.len() && q < y.len() {
                        match x[p].0.cmp(&y[q].0) {
                            std::cmp::Ordering::Less => p += 1,
                            std::cmp::Ordering::Greater => q += 1,
                            std::cmp::Ordering::Equal => {
                                acc += x[p].1 * y[q].1;
                                p += 1;
                                q += 1;
                            }
                        }
                    }
                    g[(k, l)] += acc;
                    if k != l {
                        g[(l, k)] += acc;
                    }
                }
            }
        }
        g
    }

    fn schur(&self, x: &[DMatrix<f64>], sinv: &[DMatrix<f64>], by_block: &[Vec<usize>]) -> DMatrix<f64> {
        let nv = self.nvars();
        let mut m = DMatrix::<f64>::zeros(nv, nv);
        for (j, vars) in by_block.iter().enumerate() {
            let xj = &x[j];
            let sj = &sinv[j];
            for (ii, &k) in vars.iter().enumerate() {
                let ek = &self.a[k][j];
                for &l in &vars[ii..] {
                    let el = &self.a[l][j];
                    let mut acc = 0.0;
                    for e in ek {
                        let mut inner_acc = 0.0;
                        for f in el {
                            inner_acc += f.v * xj[(e.p, f.p)] * sj[(f.q, e.q)];
                        }
                        acc += e.v * inner_acc;
                    }
                    m[(k, l)] += acc;
                    if k != l {
                        m[(l, k)] += acc;
                    }
                }
            }
        }
        m
    }
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
    z: DVector<f64>,
}

struct Progress {
    status: SolveStatus,
    iterations: usize,
    pinf: f64,
    dinf: f64,
}

/// Nesterov–Todd scaling of one block: `X = G D G'`, `S = G^{-T} D G^{-1}`.
struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: DVector<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Scaling> {
    let n = x.nrows();
    let lx = x.clone().cholesky()?.l();
    let ls = s.clone().cholesky()?.l();
    let svd = (ls.transpose() * &lx).svd(false, true);
    let v = svd.v_t?.transpose();
    let d = svd.singular_values;
    if d.iter().any(|&di| !(di > 0.0)) {
        return None;
    }
    let mut g = &lx * &v;
    for (i, mut col) in g.column_iter_mut().enumerate() {
        col /= d[i].sqrt();
    }
    let lx_inv = lx.solve_lower_triangular(&DMatrix::identity(n, n))?;
    let mut g_inv = v.transpose() * lx_inv;
    for (i, mut row) in g_inv.row_iter_mut().enumerate() {
        row *= d[i].sqrt();
    }
    let w = &g * g.transpose();
    Some(Scaling { g, g_inv, w, d })
}

/// Largest `alpha` keeping `D + alpha * dm` PSD for diagonal `D`.
fn scaled_step(d: &DVector<f64>, dm: &DMatrix<f64>) -> f64 {
    let n = d.len();
    let mut m = dm.clone();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] /= (d[i] * d[j]).sqrt();
        }
    }
    symmetrize(&mut m);
    let lmin = SymmetricEigen::new(m).eigenvalues.min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

enum Factor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        match self {
            Factor::Cholesky(c) => c.solve(r),
            Factor::Lu(lu) => lu.solve(r).unwrap_or_else(|| DVector::zeros(r.len())),
        }
    }
}

fn ipm(red: &Reduced, settings: &SolverSettings) -> (Iterate, Progress) {
    let nv = red.nvars();
    let nblk = red.dims.len();
    let ntot: usize = red.dims.iter().sum();
    let by_block: Vec<Vec<usize>> = (0..nblk)
        .map(|j| (0..nv).filter(|&k| !red.a[k][j].is_empty()).collect())
        .collect();

    let a_norms: Vec<f64> = red
        .a
        .iter()
        .map(|ak| ak.iter().flatten().map(|e| e.v * e.v).sum::<f64>().sqrt())
        .collect();
    let c_norm = red.c.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt();
    let b_norm = red.b.norm();
    let nf = ntot as f64;
    let mut xi = 10.0f64.max(nf.sqrt());
    let mut eta = 10.0f64.max(nf.sqrt()).max(c_norm);
    for (k, an) in a_norms.iter().enumerate() {
        xi = xi.max(nf * (1.0 + red.b[k].abs()) / (1.0 + an));
        eta = eta.max(*an);
    }
    let mut it = Iterate {
        x: red.dims.iter().map(|&d| DMatrix::identity(d, d) * xi).collect(),
        s: red.dims.iter().map(|&d| DMatrix::identity(d, d) * eta).collect(),
        z: DVector::zeros(nv),
    };

    let gram = red.gram(&by_block).cholesky();
    let mut step_factor = 0.9;
    let mut best: Option<(f64, Iterate, Progress)> = None;
    // Feasible multiplier with the lowest objective: the tightest certificate.
    let mut tightest: Option<(f64, Vec<DMatrix<f64>>)> = None;
    let mut status = SolveStatus::NumericalFailure;
    let mut iterations = 0;
    let mut pinf = f64::INFINITY;
    let mut dinf = f64::INFINITY;
    let mut stalls = 0;

    for iter in 0..=settings.max_iterations {
        iterations = iter;
        let ax = red.apply(&it.x);
        let rp = &red.b - &ax;
        let az = red.combine(&it.z);
        let rd: Vec<DMatrix<f64>> = (0..nblk).map(|j| &red.c[j] - &az[j] - &it.s[j]).collect();
        let pobj: f64 = (0..nblk).map(|j| inner(&red.c[j], &it.x[j])).sum();
        let dobj = red.b.dot(&it.z);
        let xs: f64 = (0..nblk).map(|j| inner(&it.x[j], &it.s[j])).sum();
        let mu = xs / nf;
        pinf = rp.norm() / (1.0 + b_norm);
        dinf = rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let merit = pinf.max(dinf).max(gap);
        log::trace!("iter {iter}: pobj {pobj:.10e} dobj {dobj:.10e} pinf {pinf:.2e} dinf {dinf:.2e} gap {gap:.2e} mu {mu:.2e}");
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((
                merit,
                Iterate {
                    x: it.x.clone(),
                    s: it.s.clone(),
                    z: it.z.clone(),
                },
                Progress {
                    status: SolveStatus::NumericalFailure,
                    iterations: iter,
                    pinf,
                    dinf,
                },
            ));
        }

        if pinf <= settings.feasibility_tol && tightest.as_ref().is_none_or(|t| pobj < t.0) {
            tightest = Some((pobj, it.x.clone()));
        }

        if pinf <= settings.feasibility_tol && dinf <= settings.feasibility_tol && gap <= settings.gap_tol {
            status = SolveStatus::Optimal;
            break;
        }
        // Certificates of infeasibility: an improving ray of (P) or (D).
        let x_norm = it.x.iter().map(|x| x.norm()).sum::<f64>();
        if pobj < 0.0 && x_norm > 1e6 && ax.norm() / -pobj < 1e-9 {
            status = SolveStatus::Infeasible;
            break;
        }
        let ray_res = (0..nblk).map(|j| (&az[j] + &it.s[j]).norm_squared()).sum::<f64>().sqrt();
        if dobj > 0.0 && it.z.norm() > 1e6 && ray_res / dobj < 1e-9 {
            status = SolveStatus::Unbounded;
            break;
        }
        if iter == settings.max_iterations {
            break;
        }

        let scalings: Option<Vec<Scaling>> = (0..nblk).map(|j| nt_scaling(&it.x[j], &it.s[j])).collect();
        let Some(sc) = scalings else { break };
        let ws: Vec<DMatrix<f64>> = sc.iter().map(|s| s.w.clone()).collect();
        let mut schur = red.schur(&ws, &ws, &by_block);
        symmetrize(&mut schur);
        // Near the optimum the Schur matrix is too ill-conditioned for
        // Cholesky; pivoted LU with refinement still gives usable steps.
        let scale = DVector::from_iterator(nv, (0..nv).map(|k| 1.0 / schur[(k, k)].max(1e-300).sqrt()));
        let scaled = DMatrix::from_fn(nv, nv, |k, l| schur[(k, l)] * scale[k] * scale[l]);
        let factor = match scaled.clone().cholesky() {
            Some(c) => Factor::Cholesky(c),
            None => Factor::Lu(scaled.lu()),
        };
        let lu = matches!(factor, Factor::Lu(_));
        let solve_schur = |r: &DVector<f64>| -> DVector<f64> {
            let scaled_solve = |v: &DVector<f64>| factor.solve(&v.component_mul(&scale)).component_mul(&scale);
            let mut z = scaled_solve(r);
            for _ in 0..2 {
                let res = r - &schur * &z;
                z += scaled_solve(&res);
            }
            z
        };
        let wrdw: Vec<DMatrix<f64>> = (0..nblk).map(|j| &sc[j].w * &rd[j] * &sc[j].w).collect();

        // Solves for a scaled complementarity residual `r`; returns the step and
        // its scaled parts.
        type Dir = (DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);
        let direction = |r: &[DMatrix<f64>]| -> Dir {
            let h: Vec<DMatrix<f64>> = (0..nblk)
                .map(|j| {
                    let d = &sc[j].d;
                    DMatrix::from_fn(d.len(), d.len(), |p, q| 2.0 * r[j][(p, q)] / (d[p] + d[q]))
                })
                .collect();
            let ghg: Vec<DMatrix<f64>> = (0..nblk).map(|j| &sc[j].g * &h[j] * sc[j].g.transpose()).collect();
            let t: Vec<DMatrix<f64>> = (0..nblk).map(|j| &ghg[j] - &wrdw[j]).collect();
            let dz = solve_schur(&(&rp - red.apply(&t)));
            let adz = red.combine(&dz);
            let ds: Vec<DMatrix<f64>> = (0..nblk).map(|j| &rd[j] - &adz[j]).collect();
            let mut dx: Vec<DMatrix<f64>> = (0..nblk)
                .map(|j| {
                    let mut m = &ghg[j] - &sc[j].w * &ds[j] * &sc[j].w;
                    symmetrize(&mut m);
                    m
                })
                .collect();
            // Rounding in the Schur solve leaves A(dX) != rp; project it back.
            if let Some(g) = &gram {
                let miss = &rp - red.apply(&dx);
                let fix = red.combine(&g.solve(&miss));
                for j in 0..nblk {
                    dx[j] += &fix[j];
                }
            }
            let dxs: Vec<DMatrix<f64>> = (0..nblk).map(|j| &sc[j].g_inv * &dx[j] * sc[j].g_inv.transpose()).collect();
            let dss: Vec<DMatrix<f64>> = (0..nblk).map(|j| sc[j].g.transpose() * &ds[j] * &sc[j].g).collect();
            (dz, dx, ds, dxs, dss)
        };
        let steps = |dxs: &[DMatrix<f64>], dss: &[DMatrix<f64>]| -> (f64, f64) {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for j in 0..nblk {
                ap = ap.min(scaled_step(&sc[j].d, &dxs[j]));
                ad = ad.min(scaled_step(&sc[j].d, &dss[j]));
            }
            (ap, ad)
        };

        let r_pred: Vec<DMatrix<f64>> = sc
            .iter()
            .map(|s| DMatrix::from_diagonal(&s.d.map(|v| -v * v)))
            .collect();
        let (_, _, _, dxs_a, dss_a) = direction(&r_pred);
        let (ap_a, ad_a) = steps(&dxs_a, &dss_a);
        let ap_a = ap_a.min(1.0);
        let ad_a = ad_a.min(1.0);
        let xs_aff: f64 = (0..nblk)
            .map(|j| {
                let dm = DMatrix::from_diagonal(&sc[j].d);
                inner(&(&dm + &dxs_a[j] * ap_a), &(&dm + &dss_a[j] * ad_a))
            })
            .sum();
        let sigma = (xs_aff / xs).clamp(0.0, 1.0).powi(3);
        let r_corr: Vec<DMatrix<f64>> = (0..nblk)
            .map(|j| {
                let n = red.dims[j];
                let cross = &dxs_a[j] * &dss_a[j];
                let sym = (&cross + cross.transpose()) * 0.5;
                DMatrix::identity(n, n) * (sigma * mu) - DMatrix::from_diagonal(&sc[j].d.map(|v| v * v)) - sym
            })
            .collect();
        let (dz, dx, ds, dxs, dss) = direction(&r_corr);
        let (ap, ad) = steps(&dxs, &dss);
        let ap = (step_factor * ap).min(1.0);
        let ad = (step_factor * ad).min(1.0);
        log::trace!("sigma {sigma:.2e} ap_a {ap_a:.2e} ad_a {ad_a:.2e} ap {ap:.2e} ad {ad:.2e} lu {lu}");
        for j in 0..nblk {
            it.x[j] += &dx[j] * ap;
            symmetrize(&mut it.x[j]);
            it.s[j] += &ds[j] * ad;
            symmetrize(&mut it.s[j]);
        }
        it.z += dz * ad;
        step_factor = 0.9 + 0.09 * ap.min(ad);
        if ap.max(ad) < 1e-10 {
            stalls += 1;
            if stalls > 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }

    if status == SolveStatus::Optimal || matches!(status, SolveStatus::Infeasible | SolveStatus::Unbounded) {
        return (
            it,
            Progress {
                status,
                iterations,
                pinf,
                dinf,
            },
        );
    }
    let (merit, mut it, mut progress) = best.expect("at least one iterate");
    if let Some((_, x)) = tightest {
        it.x = x;
    }
    let loose = settings.near_optimal_factor;
    progress.status = if merit <= loose * settings.feasibility_tol.max(settings.gap_tol) {
        SolveStatus::NearOptimal
    } else {
        SolveStatus::NumericalFailure
    };
    let pobj: f64 = (0..nblk).map(|j| inner(&red.c[j], &it.x[j])).sum();
    let ax = red.apply(&it.x);
    if progress.status == SolveStatus::NumericalFailure && pobj < 0.0 && ax.norm() / -pobj < 1e-6 {
        progress.status = SolveStatus::Infeasible;
    }
    (it, progress)
}

/// Solves `problem` with the built-in interior-point method.
pub fn solve_with(problem: &SdpProblem, settings: &SolverSettings) -> Result<DualSolution, SolverError> {
    problem.validate()?;
    let start = Instant::now();
    let red = match reduce(problem) {
        Reduction::Ok(r) => r,
        Reduction::Infeasible => {
            return Ok(DualSolution::infeasible(
                problem.num_vars,
                problem.equalities.len(),
                start.elapsed().as_secs_f64(),
            ))
        }
        Reduction::Unbounded => {
            let mut d = DualSolution::infeasible(
                problem.num_vars,
                problem.equalities.len(),
                start.elapsed().as_secs_f64(),
            );
            d.status = SolveStatus::Unbounded;
            return Ok(d);
        }
    };
    let (it, progress) = if red.nvars() == 0 && red.dims.iter().all(|&d| d == 0) {
        (
            Iterate {
                x: Vec::new(),
                s: Vec::new(),
                z: DVector::zeros(0),
            },
            Progress {
                status: SolveStatus::Optimal,
                iterations: 0,
                pinf: 0.0,
                dinf: 0.0,
            },
        )
    } else {
        ipm(&red, settings)
    };

    let mut y = vec![0.0; problem.num_vars];
    for (k, &var) in red.free_vars.iter().enumerate() {
        y[var] = it.z[k];
    }
    for (pv, r, deps) in &red.pivots {
        y[*pv] = r - deps.iter().map(|&(k, c)| c * y[k]).sum::<f64>();
    }
    let mut sol = finish(problem, y, &it.x, start.elapsed().as_secs_f64());
    sol.status = progress.status;
    sol.iterations = progress.iterations;
    sol.primal_infeasibility = progress.pinf;
    sol.dual_infeasibility = progress.dinf;
    if progress.status == SolveStatus::Infeasible {
        sol.primal_objective = f64::NAN;
    }
    Ok(sol)
}

/// Builds a [`DualSolution`] from a moment vector and dual block matrices.
///
/// Used by both the built-in solver and the external bridge.
fn finish(problem: &SdpProblem, y: Vec<f64>, x: &[DMatrix<f64>], elapsed: f64) -> DualSolution {
    let m = problem.num_vars;
    let sign = problem.sense.sign();
    let mut fstar = vec![0.0; m];
    let mut f0x = 0.0;
    for (j, blk) in problem.blocks.iter().enumerate() {
        let Some(xj) = x.get(j) else { continue };
        for e in &blk.entries {
            let mult = if e.row == e.col { 1.0 } else { 2.0 };
            let v = e.coef * mult * xj[(e.row, e.col)];
            match e.var {
                Some(k) => fstar[k] += v,
                None => f0x += v,
            }
        }
    }
    let mut target = DVector::<f64>::zeros(m);
    for &(k, c) in &problem.objective {
        target[k] += c;
    }
    for k in 0..m {
        target[k] += sign * fstar[k];
    }
    let p = problem.equalities.len();
    let mut et = DMatrix::<f64>::zeros(m, p);
    for (i, eq) in problem.equalities.iter().enumerate() {
        for &(k, c) in &eq.terms {
            et[(k, i)] += c;
        }
    }
    let lambda = if p == 0 {
        DVector::zeros(0)
    } else {
        et.clone()
            .svd(true, true)
            .solve(&target, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(p))
    };
    let stationarity = if m == 0 { 0.0 } else { (&et * &lambda - &target).amax() };
    let bound_constant = problem.objective_constant + sign * f0x;
    let rhs: Vec<f64> = problem.equalities.iter().map(|e| e.rhs).collect();
    let dual_objective = bound_constant + lambda.iter().zip(&rhs).map(|(l, e)| l * e).sum::<f64>();
    let primal_objective = problem.objective_value(&y);
    DualSolution {
        status: SolveStatus::Optimal,
        primal_objective,
        dual_objective,
        gap: sign * (dual_objective - primal_objective),
        y,
        equality_multipliers: lambda.iter().copied().collect(),
        bound_constant,
        block_duals: x.iter().map(|b| b.transpose().iter().copied().collect()).collect(),
        primal_infeasibility: 0.0,
        dual_infeasibility: 0.0,
        stationarity_residual: stationarity,
        iterations: 0,
        solve_time_seconds: elapsed,
    }
}

/// Output expected from an external solver command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalSolution {
    pub status: SolveStatus,
    pub y: Vec<f64>,
    /// Dual matrices for each block, row-major.
    pub block_duals: Vec<Vec<f64>>,
    #[serde(default)]
    pub iterations: usize,
}

/// Runs `<command> <problem.json> <solution.json>` and reads the solution back.
#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub command: String,
}

impl ExternalSolver {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
        }
    }
}

fn scratch_path(tag: &str) -> PathBuf {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    std::env::temp_dir().join(format!("qcert-{}-{nanos}-{tag}.json", std::process::id()))
}

impl SdpSolver for ExternalSolver {
    fn solve(&self, problem: &SdpProblem) -> Result<DualSolution, SolverError> {
        problem.validate()?;
        let start = Instant::now();
        let input = scratch_path("problem");
        let output = scratch_path("solution");
        let io = |e: std::io::Error| SolverError::External(e.to_string());
        std::fs::File::create(&input)
            .and_then(|mut f| f.write_all(problem.to_json().as_bytes()))
            .map_err(io)?;
        let status = Command::new(&self.command).arg(&input).arg(&output).status().map_err(io);
        let _ = std::fs::remove_file(&input);
        let status = status?;
        if !status.success() {
            return Err(SolverError::External(format!("{} exited with {status}", self.command)));
        }
        let text = std::fs::read_to_string(&output).map_err(io)?;
        let _ = std::fs::remove_file(&output);
        let ext: ExternalSolution =
            serde_json::from_str(&text).map_err(|e| SolverError::External(format!("bad solution file: {e}")))?;
        if ext.y.len() != problem.num_vars || ext.block_duals.len() != problem.blocks.len() {
            return Err(SolverError::External("solution dimensions do not match the problem".into()));
        }
        let x: Vec<DMatrix<f64>> = problem
            .blocks
            .iter()
            .zip(&ext.block_duals)
            .map(|(b, v)| DMatrix::from_row_slice(b.dim, b.dim, v))
            .collect();
        let mut sol = finish(problem, ext.y, &x, start.elapsed().as_secs_f64());
        sol.status = ext.status;
        sol.iterations = ext.iterations;
        Ok(sol)
    }

    fn name(&self) -> String {
        format!("external:{}", self.command)
    }
}
