//! Lasso estimation: standardization, cyclic coordinate descent over a
//! descending penalty path on an exponential grid, and BIC selection.
//!
//! The objective is the unnormalized penalized least squares
//! `sum_d (y_d - x_d b)^2 + lambda * sum_j |b_j|`, so the coordinate update
//! soft-thresholds at `lambda / 2` and the all-zero penalty threshold is
//! `lambda_max = 2 * max_j |x_j' y|`.

use ndarray::{Array2, ArrayView2, ShapeBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    /// Convergence tolerance on the largest coefficient change per sweep;
    /// KKT residuals are additionally required within `10 * tol`.
    pub tol: f64,
    /// Sweep budget per penalty value.
    pub max_iter: usize,
    /// Number of penalties on the grid.
    pub grid_size: usize,
    /// The grid spans `lambda_max * 2^0 .. lambda_max * 2^-span_exponent`.
    pub span_exponent: f64,
    /// Model fits abandon the descent after this many consecutive
    /// penalties without a BIC improvement; the dense tail of the path is
    /// the expensive part and never wins the selection. 0 disables.
    /// `fit_path_bic` always walks the full grid regardless.
    pub path_patience: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            tol: 1e-7,
            max_iter: 100_000,
            grid_size: 30,
            span_exponent: 20.0,
            path_patience: 4,
        }
    }
}

/// Dense column-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn from_col_major(data: Vec<f64>, n: usize, p: usize) -> Self {
        assert_eq!(data.len(), n * p);
        Design { n, p, data }
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let p = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * p);
        for c in cols {
            assert_eq!(c.len(), n);
            data.extend_from_slice(c);
        }
        Design { n, p, data }
    }

    pub fn num_rows(&self) -> usize {
        self.n
    }

    pub fn num_cols(&self) -> usize {
        self.p
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    fn view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.n, self.p).f(), &self.data).expect("column-major view")
    }

    /// Row dot product with a sparse coefficient list.
    pub fn predict_row_sparse(&self, row: usize, beta: &[(usize, f64)]) -> f64 {
        beta.iter().map(|&(j, b)| self.col(j)[row] * b).sum()
    }
}

/// Per-column location/scale recorded by standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    pub col_means: Vec<f64>,
    /// Sample standard deviation (n-1 denominator); 0.0 for dropped columns.
    pub col_sds: Vec<f64>,
    /// Zero-variance columns, excluded from estimation and reported with
    /// coefficient zero.
    pub dropped: Vec<bool>,
    pub y_mean: f64,
    pub y_sd: f64,
}

impl ScalingParams {
    /// Map a coefficient vector on scaled data back to the original scale.
    pub fn rescale_beta(&self, beta_scaled: &[f64]) -> (Vec<f64>, f64) {
        let beta: Vec<f64> = beta_scaled
            .iter()
            .zip(&self.col_sds)
            .map(|(&b, &sd)| if sd > 0.0 { b * self.y_sd / sd } else { 0.0 })
            .collect();
        let intercept =
            self.y_mean - beta.iter().zip(&self.col_means).map(|(b, m)| b * m).sum::<f64>();
        (beta, intercept)
    }
}

/// Column-side standardization: center and scale every column to mean 0,
/// sample variance 1. Zero-variance columns are zeroed out entirely and
/// flagged dropped. Returns (scaled design, means, sds, dropped).
pub fn standardize_design(x: &Design) -> (Design, Vec<f64>, Vec<f64>, Vec<bool>) {
    let (n, p) = (x.num_rows(), x.num_cols());
    assert!(n >= 2);
    let mut data = vec![0.0; n * p];
    let mut col_means = vec![0.0; p];
    let mut col_sds = vec![0.0; p];
    let mut dropped = vec![false; p];
    for j in 0..p {
        let col = x.col(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        col_means[j] = mean;
        if sd > 0.0 {
            col_sds[j] = sd;
            let out = &mut data[j * n..(j + 1) * n];
            for (o, v) in out.iter_mut().zip(col) {
                *o = (v - mean) / sd;
            }
        } else {
            dropped[j] = true;
        }
    }
    (Design::from_col_major(data, n, p), col_means, col_sds, dropped)
}

/// Response standardization; a constant response keeps `sd = 1` so the
/// downstream math stays finite and the fit degenerates to the mean.
pub fn standardize_response(y: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd_raw = (ss / (n - 1) as f64).sqrt();
    let sd = if sd_raw > 0.0 { sd_raw } else { 1.0 };
    ((y.iter().map(|v| (v - mean) / sd).collect()), mean, sd)
}

/// Center and scale every column and the response to mean 0, sample
/// variance 1.
pub fn standardize(x: &Design, y: &[f64]) -> Result<(Design, Vec<f64>, ScalingParams)> {
    let n = x.num_rows();
    if n < 2 {
        return Err(Error::domain("standardize needs at least 2 rows"));
    }
    assert_eq!(y.len(), n);
    let (x_scaled, col_means, col_sds, dropped) = standardize_design(x);
    if dropped.iter().all(|&d| d) {
        return Err(Error::domain("all design columns have zero variance"));
    }
    let (y_scaled, y_mean, y_sd) = standardize_response(y);
    Ok((
        x_scaled,
        y_scaled,
        ScalingParams {
            col_means,
            col_sds,
            dropped,
            y_mean,
            y_sd,
        },
    ))
}

/// Fit the descending grid on a Gram context and return the BIC-selected
/// solution; ties resolve toward the larger penalty. When `path_patience`
/// is nonzero the walk stops after that many penalties without a BIC
/// improvement, skipping the dense tail the selection never reaches.
pub fn select_path_on_gram(
    gram: &GramContext,
    xty: &[f64],
    yty: f64,
    active: &[usize],
    config: &LassoConfig,
) -> SlotSolution {
    let sub = SubProblem::gather(gram, xty, yty, active);
    let lmax = sub.xty.iter().map(|v| 2.0 * v.abs()).fold(0.0, f64::max);
    let grid = lambda_grid_from(lmax, config.grid_size, config.span_exponent);
    let mut best: Option<SlotSolution> = None;
    let mut beta = vec![0.0; active.len()];
    let mut since_best = 0usize;
    for &lambda in &grid {
        let inner = sub.solve(lambda, &beta, config.tol, config.max_iter);
        beta.clone_from(&inner.beta);
        let sol = solution_from_sub(&sub, lambda, inner);
        let df = sol.df;
        if best.as_ref().is_none_or(|b| sol.bic < b.bic) {
            best = Some(sol);
            since_best = 0;
        } else {
            since_best += 1;
            if config.path_patience > 0 && since_best >= config.path_patience {
                break;
            }
        }
        // Past the minimum with df at n/2 the complexity penalty alone is
        // hundreds of BIC points; RSS cannot drop enough to recover, and
        // the dense fits are the expensive ones.
        if config.path_patience > 0 && since_best >= 2 && df >= gram.n / 2 {
            break;
        }
    }
    best.expect("grid is never empty")
}

/// One lasso solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    /// Coefficients on the standardized problem (full column indexing,
    /// zeros at dropped columns).
    pub beta_scaled: Vec<f64>,
    /// Coefficients on the original scale.
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Nonzero-coefficient count.
    pub df: usize,
    /// Residual sum of squares on the standardized problem.
    pub rss: f64,
    /// Coordinate sweeps spent.
    pub iterations: usize,
    pub converged: bool,
}

impl LassoFit {
    pub fn predict_row(&self, x_raw: &[f64]) -> f64 {
        self.intercept
            + self
                .beta
                .iter()
                .zip(x_raw)
                .filter(|(b, _)| **b != 0.0)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }
}

/// Precomputed quadratic form of a standardized design: `g = X'X` and its
/// diagonal. Building it once lets every penalty value, every response and
/// every column subset reuse the same O(p^2 n) work.
#[derive(Debug, Clone)]
pub struct GramContext {
    pub n: usize,
    pub g: Array2<f64>,
    pub diag: Vec<f64>,
}

impl GramContext {
    pub fn new(x_scaled: &Design) -> Self {
        let v = x_scaled.view();
        let g = v.t().dot(&v);
        let diag = (0..x_scaled.num_cols()).map(|j| g[(j, j)]).collect();
        GramContext {
            n: x_scaled.num_rows(),
            g,
            diag,
        }
    }

    pub fn xty(&self, x_scaled: &Design, y_scaled: &[f64]) -> Vec<f64> {
        (0..x_scaled.num_cols())
            .map(|j| dot(x_scaled.col(j), y_scaled))
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// In-place Cholesky factorization `a = L L'` (lower triangle overwritten).
/// Returns false when the matrix is not numerically positive definite.
fn cholesky_factor_in_place(a: &mut [f64], m: usize) -> bool {
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i * m + j];
            for t in 0..j {
                s -= a[i * m + t] * a[j * m + t];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                a[i * m + i] = s.sqrt();
            } else {
                a[i * m + j] = s / a[j * m + j];
            }
        }
    }
    true
}

/// Solve with an existing Cholesky factor via forward/backward substitution.
fn cholesky_backsolve(factor: &[f64], rhs: &mut [f64], m: usize) -> bool {
    for i in 0..m {
        let mut s = rhs[i];
        for t in 0..i {
            s -= factor[i * m + t] * rhs[t];
        }
        rhs[i] = s / factor[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = rhs[i];
        for t in i + 1..m {
            s -= factor[t * m + i] * rhs[t];
        }
        rhs[i] = s / factor[i * m + i];
    }
    true
}

/// Solution of one penalized fit on a Gram context, sparse over `active`.
#[derive(Debug, Clone)]
pub struct SlotSolution {
    pub lambda: f64,
    /// (column index, scaled coefficient) pairs, nonzero entries only.
    pub beta_scaled: Vec<(usize, f64)>,
    pub df: usize,
    pub rss: f64,
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One penalized subproblem: the Gram and moments gathered onto the
/// `active` column subset, contiguous so sweeps stream over memory.
pub struct SubProblem {
    /// Column indices this subproblem covers, in order.
    pub cols: Vec<usize>,
    n: usize,
    /// k x k row-major gathered Gram.
    g: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
    diag: Vec<f64>,
}

impl SubProblem {
    pub fn gather(gram: &GramContext, xty: &[f64], yty: f64, active: &[usize]) -> Self {
        let k = active.len();
        let mut g = vec![0.0; k * k];
        for (a, &ja) in active.iter().enumerate() {
            let row = gram.g.row(ja);
            let out = &mut g[a * k..(a + 1) * k];
            for (o, &jb) in out.iter_mut().zip(active) {
                *o = row[jb];
            }
        }
        SubProblem {
            cols: active.to_vec(),
            n: gram.n,
            g,
            xty: active.iter().map(|&j| xty[j]).collect(),
            yty,
            diag: active.iter().map(|&j| gram.g[(j, j)]).collect(),
        }
    }

    fn solve(&self, lambda: f64, warm: &[f64], tol: f64, max_iter: usize) -> SubSolution {
        let mut solver = SubSolver {
            sub: self,
            beta: warm.to_vec(),
            q: vec![0.0; self.cols.len()],
        };
        solver.recompute_q();
        let (iterations, converged) = solver.run(lambda, tol, max_iter);
        let rss = solver.rss();
        SubSolution {
            beta: solver.beta,
            rss,
            iterations,
            converged,
        }
    }
}

struct SubSolution {
    beta: Vec<f64>,
    rss: f64,
    iterations: usize,
    converged: bool,
}

struct SubSolver<'a> {
    sub: &'a SubProblem,
    beta: Vec<f64>,
    /// q[a] = sum_l g[a, l] * beta[l]
    q: Vec<f64>,
}

impl SubSolver<'_> {
    fn recompute_q(&mut self) {
        let k = self.beta.len();
        for qa in self.q.iter_mut() {
            *qa = 0.0;
        }
        for (l, &bl) in self.beta.iter().enumerate() {
            if bl != 0.0 {
                let row = &self.sub.g[l * k..(l + 1) * k];
                for (qa, &gv) in self.q.iter_mut().zip(row) {
                    *qa += bl * gv;
                }
            }
        }
    }

    /// One cyclic sweep; `nonzero_only` restricts to currently active
    /// coefficients. Returns the largest coefficient change.
    fn sweep(&mut self, lambda: f64, nonzero_only: bool) -> f64 {
        let k = self.beta.len();
        let mut max_delta = 0.0f64;
        for a in 0..k {
            let old = self.beta[a];
            if nonzero_only && old == 0.0 {
                continue;
            }
            let dj = self.sub.diag[a];
            if dj <= 0.0 {
                continue;
            }
            let rho = self.sub.xty[a] - self.q[a] + dj * old;
            let new = soft_threshold(rho, lambda / 2.0) / dj;
            let delta = new - old;
            if delta != 0.0 {
                self.beta[a] = new;
                let row = &self.sub.g[a * k..(a + 1) * k];
                for (qa, &gv) in self.q.iter_mut().zip(row) {
                    *qa += delta * gv;
                }
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    }

    /// Largest KKT violation: |2 x_j' r| must not exceed lambda at zero
    /// coefficients and must equal lambda with matching sign at active ones.
    fn kkt_violation(&self, lambda: f64) -> f64 {
        let mut worst = 0.0f64;
        for (a, &b) in self.beta.iter().enumerate() {
            if self.sub.diag[a] <= 0.0 {
                continue;
            }
            let grad = 2.0 * (self.sub.xty[a] - self.q[a]);
            let viol = if b == 0.0 {
                grad.abs() - lambda
            } else {
                (grad - lambda * b.signum()).abs()
            };
            worst = worst.max(viol);
        }
        worst
    }

    fn rss(&self) -> f64 {
        let mut rss = self.sub.yty;
        for (a, &b) in self.beta.iter().enumerate() {
            rss -= b * (2.0 * self.sub.xty[a] - self.q[a]);
        }
        rss.max(0.0)
    }

    fn objective(&self, lambda: f64) -> f64 {
        self.rss() + lambda * self.beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn signs(&self) -> Vec<i8> {
        self.beta
            .iter()
            .map(|&b| {
                if b > 0.0 {
                    1
                } else if b < 0.0 {
                    -1
                } else {
                    0
                }
            })
            .collect()
    }

    /// Exact subspace acceleration. With support and signs fixed, the
    /// orthant minimizer solves `G_AA z = xty_A - (lambda/2) s_A`. When the
    /// solve leaves the orthant, step along the segment to the first sign
    /// crossing instead -- the objective decreases all the way there by
    /// convexity -- drop the crossing coordinate and re-solve. Cyclic
    /// sweeps afterwards still validate the full KKT system, so this only
    /// accelerates coordinate descent, never changes what it converges to.
    fn try_direct_solve(&mut self, lambda: f64, signs: &[i8]) -> bool {
        let k = self.beta.len();
        let mut act: Vec<usize> = (0..k).filter(|&a| signs[a] != 0).collect();
        if act.is_empty() {
            return false;
        }
        let beta_before = self.beta.clone();
        let q_before = self.q.clone();
        let obj_before = self.objective(lambda);
        let mut moved = false;
        for _round in 0..20 {
            let m = act.len();
            let mut a = vec![0.0; m * m];
            let mut rhs = vec![0.0; m];
            for (i, &ai) in act.iter().enumerate() {
                let row = &self.sub.g[ai * k..(ai + 1) * k];
                for (j, &aj) in act.iter().enumerate() {
                    a[i * m + j] = row[aj];
                }
                rhs[i] = self.sub.xty[ai] - lambda / 2.0 * signs[ai] as f64;
            }
            let scale = (0..m).map(|i| a[i * m + i]).fold(0.0f64, f64::max);
            let mut factored = None;
            for jitter in [0.0, 1e-12, 1e-9] {
                let mut af = a.clone();
                for i in 0..m {
                    af[i * m + i] += jitter * scale;
                }
                if cholesky_factor_in_place(&mut af, m) {
                    factored = Some(af);
                    break;
                }
            }
            let Some(factor) = factored else {
                break;
            };
            let mut z = rhs.clone();
            cholesky_backsolve(&factor, &mut z, m);
            // Iterative refinement against the exact Gram: a jittered
            // factor solves a perturbed system, and a leftover linear
            // residual would park the KKT conditions just outside the
            // convergence gate.
            let residual = |z: &[f64]| -> (Vec<f64>, f64) {
                let mut r = rhs.clone();
                let mut worst = 0.0f64;
                for i in 0..m {
                    let mut gz = 0.0;
                    for j in 0..m {
                        gz += a[i * m + j] * z[j];
                    }
                    r[i] -= gz;
                    worst = worst.max(r[i].abs());
                }
                (r, worst)
            };
            let z_norm = |z: &[f64]| z.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let tol_lin = 1e-10 * scale.max(1.0);
            let mut refined = false;
            for _ in 0..4 {
                let (mut r, worst) = residual(&z);
                if worst <= tol_lin * (1.0 + z_norm(&z)) {
                    refined = true;
                    break;
                }
                cholesky_backsolve(&factor, &mut r, m);
                for (zi, ri) in z.iter_mut().zip(&r) {
                    *zi += ri;
                }
            }
            if !refined {
                break;
            }
            // Largest step toward z that stays inside the sign orthant.
            let mut t_star = 1.0f64;
            for (i, &ai) in act.iter().enumerate() {
                if z[i] * signs[ai] as f64 <= 0.0 {
                    let cur = self.beta[ai];
                    let t = cur / (cur - z[i]);
                    if t < t_star {
                        t_star = t;
                    }
                }
            }
            if t_star >= 1.0 {
                for (i, &ai) in act.iter().enumerate() {
                    self.beta[ai] = z[i];
                }
                moved = true;
                break;
            }
            // Partial step: land the crossing coordinates exactly on zero
            // and retry on the reduced support.
            let mut next_act = Vec::with_capacity(m - 1);
            for (i, &ai) in act.iter().enumerate() {
                let stepped = self.beta[ai] + t_star * (z[i] - self.beta[ai]);
                if stepped * signs[ai] as f64 > 1e-14 * (1.0 + z_norm(&z)) {
                    self.beta[ai] = stepped;
                    next_act.push(ai);
                } else {
                    self.beta[ai] = 0.0;
                }
            }
            moved = true;
            if next_act.len() == act.len() || next_act.is_empty() {
                break;
            }
            act = next_act;
        }
        if !moved {
            return false;
        }
        self.recompute_q();
        // A jitter-perturbed solve target can lose to an almost-converged
        // iterate; roll back rather than ever stepping uphill.
        if self.objective(lambda) > obj_before + 1e-12 * (1.0 + obj_before.abs()) {
            self.beta = beta_before;
            self.q = q_before;
            return false;
        }
        true
    }

    fn run(&mut self, lambda: f64, tol: f64, max_iter: usize) -> (usize, bool) {
        let mut iterations = 0;
        let mut converged = false;
        // On near-singular designs the steps vanish long before the KKT
        // residuals do; a bounded number of polish rounds keeps the fit
        // honest (converged=false) without unbounded sweeping.
        let mut polish_rounds = 0;
        let mut last_viol = f64::INFINITY;
        let mut direct_fail_streak = 0u32;
        let mut next_direct = 2;
        #[cfg(debug_assertions)]
        let mut last_obj = f64::INFINITY;
        while iterations < max_iter {
            let max_delta = self.sweep(lambda, false);
            iterations += 1;
            #[cfg(debug_assertions)]
            {
                let obj = self.objective(lambda);
                debug_assert!(
                    obj <= last_obj + 1e-7 * (1.0 + last_obj.abs().min(self.sub.yty.abs() + 1.0)),
                    "objective increased: {last_obj} -> {obj}"
                );
                last_obj = obj;
            }
            if max_delta < tol {
                // Guard the KKT check against drift accumulated in q.
                self.recompute_q();
                let viol = self.kkt_violation(lambda);
                if viol <= 10.0 * tol {
                    converged = true;
                    break;
                }
                polish_rounds += 1;
                if polish_rounds >= 50 && viol > 0.5 * last_viol {
                    break;
                }
                last_viol = viol;
            } else if iterations >= next_direct {
                // Correlated active sets make plain sweeps crawl; jump to
                // the current support's exact minimizer. The guards inside
                // keep the step valid; failures back off exponentially so
                // a hostile support cannot thrash on factorizations.
                let signs = self.signs();
                if self.try_direct_solve(lambda, &signs) {
                    direct_fail_streak = 0;
                    next_direct = iterations + 2;
                } else {
                    direct_fail_streak += 1;
                    next_direct = iterations + (2usize << direct_fail_streak.min(5));
                }
            }
        }
        (iterations, converged)
    }
}

fn solution_from_sub(sub: &SubProblem, lambda: f64, inner: SubSolution) -> SlotSolution {
    let beta_scaled: Vec<(usize, f64)> = inner
        .beta
        .iter()
        .zip(&sub.cols)
        .filter(|(b, _)| **b != 0.0)
        .map(|(b, &j)| (j, *b))
        .collect();
    let df = beta_scaled.len();
    let n = sub.n as f64;
    let bic = n * (inner.rss.max(1e-300) / n).ln() + df as f64 * n.ln();
    SlotSolution {
        lambda,
        beta_scaled,
        df,
        rss: inner.rss,
        bic,
        iterations: inner.iterations,
        converged: inner.converged,
    }
}

fn warm_vector(sub: &SubProblem, warm: Option<&[(usize, f64)]>) -> Vec<f64> {
    let mut beta = vec![0.0; sub.cols.len()];
    if let Some(warm) = warm {
        for &(j, b) in warm {
            if let Some(a) = sub.cols.iter().position(|&c| c == j) {
                beta[a] = b;
            }
        }
    }
    beta
}

/// Fit one penalty value on a precomputed Gram context. `warm` maps column
/// index to a starting coefficient.
pub fn fit_slot_on_gram(
    gram: &GramContext,
    xty: &[f64],
    yty: f64,
    active: &[usize],
    lambda: f64,
    warm: Option<&[(usize, f64)]>,
    config: &LassoConfig,
) -> SlotSolution {
    let sub = SubProblem::gather(gram, xty, yty, active);
    let beta0 = warm_vector(&sub, warm);
    let inner = sub.solve(lambda, &beta0, config.tol, config.max_iter);
    solution_from_sub(&sub, lambda, inner)
}

/// Descending penalty grid `lambda_max * 2^g` with `g` equidistant from 0
/// down to `-span_exponent`.
pub fn lambda_grid_from(lambda_max: f64, grid_size: usize, span_exponent: f64) -> Vec<f64> {
    assert!(grid_size >= 2, "grid needs at least 2 points");
    if lambda_max <= 0.0 {
        return vec![0.0];
    }
    (0..grid_size)
        .map(|i| {
            let g = -span_exponent * i as f64 / (grid_size - 1) as f64;
            lambda_max * g.exp2()
        })
        .collect()
}

/// The all-zero threshold for standardized data: `2 * max_j |x_j' y|`.
pub fn lambda_max(x_scaled: &Design, y_scaled: &[f64]) -> f64 {
    (0..x_scaled.num_cols())
        .map(|j| 2.0 * dot(x_scaled.col(j), y_scaled).abs())
        .fold(0.0, f64::max)
}

pub fn lambda_grid(
    x_scaled: &Design,
    y_scaled: &[f64],
    grid_size: usize,
    span_exponent: f64,
) -> Vec<f64> {
    lambda_grid_from(lambda_max(x_scaled, y_scaled), grid_size, span_exponent)
}

/// Single coordinate-descent fit on standardized data. Rescaling to the
/// original units is the path fitter's job; here `beta == beta_scaled`.
pub fn coordinate_descent(
    x_scaled: &Design,
    y_scaled: &[f64],
    lambda: f64,
    warm_start: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> LassoFit {
    assert!(lambda >= 0.0);
    let gram = GramContext::new(x_scaled);
    let xty = gram.xty(x_scaled, y_scaled);
    let yty = dot(y_scaled, y_scaled);
    let active: Vec<usize> = (0..x_scaled.num_cols()).collect();
    let warm: Option<Vec<(usize, f64)>> = warm_start.map(|w| {
        w.iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, b)| (j, *b))
            .collect()
    });
    let config = LassoConfig {
        tol,
        max_iter,
        ..LassoConfig::default()
    };
    let sol = fit_slot_on_gram(&gram, &xty, yty, &active, lambda, warm.as_deref(), &config);
    let mut beta = vec![0.0; x_scaled.num_cols()];
    for &(j, b) in &sol.beta_scaled {
        beta[j] = b;
    }
    LassoFit {
        beta: beta.clone(),
        beta_scaled: beta,
        intercept: 0.0,
        lambda,
        df: sol.df,
        rss: sol.rss,
        iterations: sol.iterations,
        converged: sol.converged,
    }
}

/// Warm-started path over the exponential grid with BIC selection.
#[derive(Debug, Clone)]
pub struct PathResult {
    pub grid: Vec<f64>,
    pub fits: Vec<LassoFit>,
    pub bic: Vec<f64>,
    pub selected: usize,
    pub scaling: ScalingParams,
}

impl PathResult {
    pub fn selected_fit(&self) -> &LassoFit {
        &self.fits[self.selected]
    }
}

/// Standardize, fit the whole penalty path with warm starts, score each fit
/// with `BIC = n ln(RSS/n) + df ln(n)` and select the minimum; ties resolve
/// toward the larger penalty (the sparser model).
pub fn fit_path_bic(x: &Design, y: &[f64], config: &LassoConfig) -> Result<PathResult> {
    let (x_scaled, y_scaled, scaling) = standardize(x, y)?;
    let gram = GramContext::new(&x_scaled);
    let xty = gram.xty(&x_scaled, &y_scaled);
    let yty = dot(&y_scaled, &y_scaled);
    let active: Vec<usize> = (0..x.num_cols()).collect();
    let grid = lambda_grid(&x_scaled, &y_scaled, config.grid_size, config.span_exponent);

    let sub = SubProblem::gather(&gram, &xty, yty, &active);
    let mut fits = Vec::with_capacity(grid.len());
    let mut bic = Vec::with_capacity(grid.len());
    let mut selected = 0;
    let mut warm = vec![0.0; active.len()];
    for (i, &lambda) in grid.iter().enumerate() {
        let inner = sub.solve(lambda, &warm, config.tol, config.max_iter);
        warm.clone_from(&inner.beta);
        let sol = solution_from_sub(&sub, lambda, inner);
        let mut beta_scaled = vec![0.0; x.num_cols()];
        for &(j, b) in &sol.beta_scaled {
            beta_scaled[j] = b;
        }
        let (beta, intercept) = scaling.rescale_beta(&beta_scaled);
        bic.push(sol.bic);
        if sol.bic < bic[selected] {
            selected = i;
        }
        fits.push(LassoFit {
            beta_scaled,
            beta,
            intercept,
            lambda,
            df: sol.df,
            rss: sol.rss,
            iterations: sol.iterations,
            converged: sol.converged,
        });
    }
    Ok(PathResult {
        grid,
        fits,
        bic,
        selected,
        scaling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_design(rng: &mut ChaCha12Rng, n: usize, p: usize) -> Design {
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Design::from_columns(&cols)
    }

    /// Gram-Schmidt orthonormal columns: X'X = I exactly up to fp error.
    fn orthonormal_design(rng: &mut ChaCha12Rng, n: usize, p: usize) -> Design {
        let mut cols: Vec<Vec<f64>> = Vec::new();
        while cols.len() < p {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for c in &cols {
                let proj = dot(&v, c);
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= proj * ci;
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-6 {
                for vi in v.iter_mut() {
                    *vi /= norm;
                }
                cols.push(v);
            }
        }
        Design::from_columns(&cols)
    }

    #[test]
    fn standardize_basics() {
        let x = Design::from_columns(&[vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0]]);
        let y = vec![2.0, 4.0, 6.0];
        let (xs, ys, params) = standardize(&x, &y).unwrap();
        assert_eq!(xs.col(0), &[-1.0, 0.0, 1.0]);
        assert!(params.dropped[1] && !params.dropped[0]);
        assert_eq!(xs.col(1), &[0.0, 0.0, 0.0]);
        assert_eq!(params.y_mean, 4.0);
        assert_eq!(ys, vec![-1.0, 0.0, 1.0]);

        // Standardizing standardized data is the identity.
        let (xs2, ys2, _) = standardize(&xs, &ys).unwrap();
        for (a, b) in xs2.col(0).iter().zip(xs.col(0)) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in ys2.iter().zip(&ys) {
            assert!((a - b).abs() < 1e-12);
        }

        let all_const = Design::from_columns(&[vec![3.0, 3.0, 3.0]]);
        assert!(standardize(&all_const, &y).is_err());
        let short = Design::from_columns(&[vec![1.0]]);
        assert!(standardize(&short, &[1.0]).is_err());
    }

    #[test]
    fn orthonormal_matches_soft_threshold() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = orthonormal_design(&mut rng, 40, 5);
            let y: Vec<f64> = (0..40).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b_ols: Vec<f64> = (0..5).map(|j| dot(x.col(j), &y)).collect();
            for lambda in [0.1, 0.7, 2.0] {
                let fit = coordinate_descent(&x, &y, lambda, None, 1e-9, 10_000);
                assert!(fit.converged);
                for j in 0..5 {
                    let expect = soft_threshold(b_ols[j], lambda / 2.0);
                    assert!(
                        (fit.beta_scaled[j] - expect).abs() < 1e-6,
                        "lambda {lambda} col {j}: {} vs {expect}",
                        fit.beta_scaled[j]
                    );
                }
            }
            // At and above the analytic threshold the solution is exactly zero.
            let lmax = lambda_max(&x, &y);
            for lambda in [lmax, lmax * 1.5] {
                let fit = coordinate_descent(&x, &y, lambda, None, 1e-9, 10_000);
                assert!(fit.beta_scaled.iter().all(|&b| b == 0.0));
            }
        }
    }

    /// Small dense OLS oracle via Gaussian elimination.
    fn ols_solve(x: &Design, y: &[f64]) -> Vec<f64> {
        let p = x.num_cols();
        let mut a = vec![vec![0.0; p + 1]; p];
        for i in 0..p {
            for j in 0..p {
                a[i][j] = dot(x.col(i), x.col(j));
            }
            a[i][p] = dot(x.col(i), y);
        }
        for k in 0..p {
            let pivot = (k..p).max_by(|&r, &s| a[r][k].abs().total_cmp(&a[s][k].abs())).unwrap();
            a.swap(k, pivot);
            for r in 0..p {
                if r != k {
                    let f = a[r][k] / a[k][k];
                    for c in k..=p {
                        a[r][c] -= f * a[k][c];
                    }
                }
            }
        }
        (0..p).map(|i| a[i][p] / a[i][i]).collect()
    }

    #[test]
    fn zero_penalty_recovers_ols() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let x = random_design(&mut rng, 30, 4);
        let y: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fit = coordinate_descent(&x, &y, 0.0, None, 1e-10, 100_000);
        let ols = ols_solve(&x, &y);
        for j in 0..4 {
            assert!((fit.beta_scaled[j] - ols[j]).abs() < 1e-6, "col {j}");
        }
    }

    #[test]
    fn grid_definition() {
        let grid = lambda_grid_from(8.0, 3, 2.0);
        assert_eq!(grid, vec![8.0, 4.0, 2.0]);
        let grid = lambda_grid_from(1.0, 30, 20.0);
        assert_eq!(grid.len(), 30);
        assert!(grid.windows(2).all(|w| w[0] > w[1]));
        assert!((grid[29] - (0.5f64).powf(20.0)).abs() < 1e-12);
    }

    #[test]
    fn first_grid_fit_is_empty() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let x = random_design(&mut rng, 50, 8);
        let y: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let path = fit_path_bic(&x, &y, &LassoConfig::default()).unwrap();
        assert_eq!(path.fits[0].df, 0);
        assert!(path.fits[0].beta_scaled.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn kkt_holds_at_every_path_fit() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let x = random_design(&mut rng, 60, 12);
        let y: Vec<f64> = (0..60)
            .map(|i| x.col(2)[i] * 1.5 - x.col(7)[i] * 0.5 + rng.gen_range(-0.2..0.2))
            .collect();
        let cfg = LassoConfig::default();
        let path = fit_path_bic(&x, &y, &cfg).unwrap();
        let (xs, ys, _) = standardize(&x, &y).unwrap();
        for fit in &path.fits {
            assert!(fit.converged);
            // residual on the scaled problem
            let n = xs.num_rows();
            let mut r = ys.clone();
            for j in 0..xs.num_cols() {
                let b = fit.beta_scaled[j];
                if b != 0.0 {
                    for i in 0..n {
                        r[i] -= b * xs.col(j)[i];
                    }
                }
            }
            for j in 0..xs.num_cols() {
                let g = 2.0 * dot(xs.col(j), &r);
                let b = fit.beta_scaled[j];
                if b == 0.0 {
                    assert!(
                        g.abs() <= fit.lambda + 10.0 * cfg.tol,
                        "zero-coef KKT at lambda {}: |g|={} > {}",
                        fit.lambda,
                        g.abs(),
                        fit.lambda
                    );
                } else {
                    assert!(
                        (g - fit.lambda * b.signum()).abs() <= 10.0 * cfg.tol,
                        "active KKT at lambda {}: g={} lambda={}",
                        fit.lambda,
                        g,
                        fit.lambda
                    );
                }
            }
        }
    }

    #[test]
    fn warm_path_equals_cold_fits() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let x = random_design(&mut rng, 40, 10);
        let y: Vec<f64> = (0..40)
            .map(|i| x.col(1)[i] - 2.0 * x.col(4)[i] + rng.gen_range(-0.3..0.3))
            .collect();
        let cfg = LassoConfig {
            grid_size: 12,
            span_exponent: 10.0,
            ..LassoConfig::default()
        };
        let path = fit_path_bic(&x, &y, &cfg).unwrap();
        let (xs, ys, _) = standardize(&x, &y).unwrap();
        for fit in &path.fits {
            let cold = coordinate_descent(&xs, &ys, fit.lambda, None, cfg.tol, cfg.max_iter);
            for j in 0..x.num_cols() {
                assert!(
                    (fit.beta_scaled[j] - cold.beta_scaled[j]).abs() < 1e-6,
                    "lambda {} col {j}",
                    fit.lambda
                );
            }
        }
    }

    #[test]
    fn prediction_invariant_under_rescaling() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let x = random_design(&mut rng, 50, 6);
        let y: Vec<f64> = (0..50)
            .map(|i| 3.0 + 2.0 * x.col(0)[i] + rng.gen_range(-0.1..0.1))
            .collect();
        let path = fit_path_bic(&x, &y, &LassoConfig::default()).unwrap();
        let fit = path.selected_fit();
        let (xs, _, params) = standardize(&x, &y).unwrap();
        for i in 0..x.num_rows() {
            let raw_row: Vec<f64> = (0..x.num_cols()).map(|j| x.col(j)[i]).collect();
            let via_original = fit.predict_row(&raw_row);
            let scaled_pred: f64 = (0..x.num_cols())
                .map(|j| fit.beta_scaled[j] * xs.col(j)[i])
                .sum();
            let via_scaled = scaled_pred * params.y_sd + params.y_mean;
            assert!(
                (via_original - via_scaled).abs() < 1e-10,
                "row {i}: {via_original} vs {via_scaled}"
            );
        }
    }

    #[test]
    fn planted_column_is_selected() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let x = random_design(&mut rng, 80, 20);
        let y: Vec<f64> = x.col(13).to_vec();
        let path = fit_path_bic(&x, &y, &LassoConfig::default()).unwrap();
        let fit = path.selected_fit();
        assert!(fit.beta[13] != 0.0, "planted column not selected");
        assert!(fit.df <= 3, "df {}", fit.df);
        assert!((fit.beta[13] - 1.0).abs() < 0.05, "beta {}", fit.beta[13]);
    }

    #[test]
    fn pure_noise_stays_sparse() {
        let mut rng = ChaCha12Rng::seed_from_u64(101);
        let x = random_design(&mut rng, 200, 50);
        let y: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let path = fit_path_bic(&x, &y, &LassoConfig::default()).unwrap();
        assert!(path.selected_fit().df <= 3, "df {}", path.selected_fit().df);
    }

    #[test]
    fn brute_force_grid_agrees() {
        // n=10, p=2: direct 2-d grid search over the objective.
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let x = random_design(&mut rng, 10, 2);
        let y: Vec<f64> = (0..10)
            .map(|i| 0.8 * x.col(0)[i] - 0.4 * x.col(1)[i] + rng.gen_range(-0.2..0.2))
            .collect();
        let (xs, ys, _) = standardize(&x, &y).unwrap();
        let objective = |b: &[f64], lambda: f64| {
            let mut rss = 0.0;
            for i in 0..10 {
                let pred: f64 = (0..2).map(|j| b[j] * xs.col(j)[i]).sum();
                rss += (ys[i] - pred) * (ys[i] - pred);
            }
            rss + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
        };
        let cfg = LassoConfig {
            grid_size: 10,
            span_exponent: 8.0,
            ..LassoConfig::default()
        };
        let path = fit_path_bic(&x, &y, &cfg).unwrap();
        for fit in &path.fits {
            let mut best = f64::INFINITY;
            let steps = 400;
            for i0 in 0..=steps {
                let b0 = -2.0 + 4.0 * i0 as f64 / steps as f64;
                for i1 in 0..=steps {
                    let b1 = -2.0 + 4.0 * i1 as f64 / steps as f64;
                    best = best.min(objective(&[b0, b1], fit.lambda));
                }
            }
            let got = objective(&fit.beta_scaled, fit.lambda);
            assert!(
                got <= best + 1e-3,
                "lambda {}: cd {} vs grid {}",
                fit.lambda,
                got,
                best
            );
        }
    }

    #[test]
    fn max_iter_reports_unconverged() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let x = random_design(&mut rng, 30, 8);
        let y: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (xs, ys, _) = standardize(&x, &y).unwrap();
        let fit = coordinate_descent(&xs, &ys, 1e-6, None, 1e-12, 2);
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 2);
    }
}
