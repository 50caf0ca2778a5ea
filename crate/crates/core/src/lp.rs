//! Bounded-variable simplex LP solver exposing the optimal basis and the
//! corner-polyhedron extreme rays required for intersection cuts.
//!
//! Rows are `a.x <= rhs`; every structural variable carries finite bounds.
//! The solver works on the equality system `A x + s = b` with slacks
//! `s >= 0`, keeps a dense basis inverse, and prices by most-negative
//! reduced cost with Bland's rule as anti-cycling fallback.

use thiserror::Error;

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const RATIO_TOL: f64 = 1e-12;
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("solution does not carry a vertex basis")]
    NotAVertex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl SparseRow {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Dense objective over the structural variables (minimized).
    pub objective: Vec<f64>,
    pub rows: Vec<SparseRow>,
}

impl LpProblem {
    pub fn n_vars(&self) -> usize {
        self.lower.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    NonbasicAtLower,
    NonbasicAtUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

/// Row multipliers proving primal infeasibility: `y <= 0` and the box
/// maximum of `y^T A x` stays strictly below `y^T b`.
#[derive(Debug, Clone)]
pub struct FarkasCertificate {
    pub row_multipliers: Vec<f64>,
}

impl FarkasCertificate {
    /// Gap `y^T b - max_box y^T A x`; a negative gap certifies that no point
    /// of the box satisfies all rows.
    pub fn gap(&self, problem: &LpProblem) -> f64 {
        let y = &self.row_multipliers;
        let n = problem.n_vars();
        let mut yta = vec![0.0; n];
        let mut ytb = 0.0;
        for (r, row) in problem.rows.iter().enumerate() {
            ytb += y[r] * row.rhs;
            for &(j, a) in &row.coeffs {
                yta[j] += y[r] * a;
            }
        }
        let mut max_lhs = 0.0;
        for j in 0..n {
            max_lhs += if yta[j] >= 0.0 {
                yta[j] * problem.upper[j]
            } else {
                yta[j] * problem.lower[j]
            };
        }
        ytb - max_lhs
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural primal point (meaningful when Optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Status per variable: structural variables first, then one slack per row.
    pub var_status: Vec<VarStatus>,
    /// Dual value per row.
    pub duals: Vec<f64>,
    pub farkas: Option<FarkasCertificate>,
    /// Basic variable (total index) per row, in basis order.
    pub basic: Vec<usize>,
    /// Dense basis inverse, row-major m x m.
    pub binv: Vec<Vec<f64>>,
    pub n_structural: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaySource {
    VarAtLower(usize),
    VarAtUpper(usize),
    /// Nonbasic slack of this row (binding row relaxed outward).
    Slack(usize),
}

/// One extreme ray of the corner polyhedron at the LP vertex, per nonbasic
/// variable: the change of the full solution when the nonbasic displacement
/// increases by one unit.
#[derive(Debug, Clone)]
pub struct Ray {
    /// Direction over the structural variables.
    pub direction: Vec<f64>,
    pub source: RaySource,
}

pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    Simplex::new(problem).solve()
}

/// One ray per nonbasic variable of an optimal vertex basis.
pub fn corner_rays(problem: &LpProblem, solution: &LpSolution) -> Result<Vec<Ray>, LpError> {
    if solution.status != LpStatus::Optimal || (solution.basic.len() != problem.rows.len()) {
        return Err(LpError::NotAVertex);
    }
    let n = problem.n_vars();
    let m = problem.rows.len();
    // Column-wise access for structural columns.
    let mut rays = Vec::new();
    for j in 0..n + m {
        let (sigma, source) = match solution.var_status[j] {
            VarStatus::Basic => continue,
            VarStatus::NonbasicAtLower => {
                if j < n {
                    (1.0, RaySource::VarAtLower(j))
                } else {
                    (1.0, RaySource::Slack(j - n))
                }
            }
            VarStatus::NonbasicAtUpper => {
                if j < n {
                    (-1.0, RaySource::VarAtUpper(j))
                } else {
                    (-1.0, RaySource::Slack(j - n))
                }
            }
        };
        // alpha = B^{-1} A_j
        let mut col = vec![0.0; m];
        if j < n {
            for (r, row) in problem.rows.iter().enumerate() {
                for &(jj, a) in &row.coeffs {
                    if jj == j {
                        col[r] += a;
                    }
                }
            }
        } else {
            col[j - n] = 1.0;
        }
        let mut alpha = vec![0.0; m];
        for k in 0..m {
            let mut v = 0.0;
            for r in 0..m {
                v += solution.binv[k][r] * col[r];
            }
            alpha[k] = v;
        }
        let mut dir = vec![0.0; n];
        if j < n {
            dir[j] = sigma;
        }
        for (k, &bv) in solution.basic.iter().enumerate() {
            if bv < n {
                dir[bv] -= sigma * alpha[k];
            }
        }
        rays.push(Ray {
            direction: dir,
            source,
        });
    }
    Ok(rays)
}

// ---------------------------------------------------------------------------
// Solver internals
// ---------------------------------------------------------------------------

struct Simplex<'a> {
    problem: &'a LpProblem,
    n: usize,
    m: usize,
    /// Sparse columns of A for structural variables.
    cols: Vec<Vec<(usize, f64)>>,
    /// Bounds over the total variable space (structural, slacks, artificials).
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Objective over the total space (phase dependent).
    cost: Vec<f64>,
    n_total: usize,
    n_artificial: usize,
    vstat: Vec<VarStatus>,
    xval: Vec<f64>,
    basic: Vec<usize>,
    binv: Vec<Vec<f64>>,
    /// Row index served by each artificial variable, in artificial order.
    art_rows: Vec<usize>,
    pivots_since_refactor: usize,
    degenerate_pivots: usize,
    bland: bool,
}

impl<'a> Simplex<'a> {
    fn new(problem: &'a LpProblem) -> Self {
        let n = problem.n_vars();
        let m = problem.rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, row) in problem.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((r, a));
                }
            }
        }
        Simplex {
            problem,
            n,
            m,
            cols,
            lower: Vec::new(),
            upper: Vec::new(),
            cost: Vec::new(),
            n_total: 0,
            n_artificial: 0,
            vstat: Vec::new(),
            xval: Vec::new(),
            basic: Vec::new(),
            binv: Vec::new(),
            art_rows: Vec::new(),
            pivots_since_refactor: 0,
            degenerate_pivots: 0,
            bland: false,
        }
    }

    fn solve(mut self) -> Result<LpSolution, LpError> {
        // Initial point: structural at lower bound, slacks basic.
        let n = self.n;
        let m = self.m;
        self.lower = self.problem.lower.clone();
        self.upper = self.problem.upper.clone();
        self.lower.extend(std::iter::repeat(0.0).take(m));
        self.upper.extend(std::iter::repeat(f64::INFINITY).take(m));
        self.vstat = vec![VarStatus::NonbasicAtLower; n + m];
        self.xval = vec![0.0; n + m];
        for j in 0..n {
            self.xval[j] = self.lower[j];
        }
        let mut needs_artificial = Vec::new();
        for (r, row) in self.problem.rows.iter().enumerate() {
            let resid = row.rhs - row.eval(&self.xval[..n]);
            if resid < 0.0 {
                needs_artificial.push(r);
            }
            self.xval[n + r] = resid.max(0.0);
        }

        self.n_artificial = needs_artificial.len();
        self.n_total = n + m + self.n_artificial;
        // Artificial t_r carries the column -e_r so that t_r = a.x - b >= 0
        // when the row is violated at the start.
        let mut art_of_row = vec![usize::MAX; m];
        for (k, &r) in needs_artificial.iter().enumerate() {
            art_of_row[r] = n + m + k;
        }
        // Extend bookkeeping to the artificials; their stored column index
        // in `column()` is relative to row order, so map directly.
        self.lower
            .extend(std::iter::repeat(0.0).take(self.n_artificial));
        self.upper
            .extend(std::iter::repeat(f64::INFINITY).take(self.n_artificial));
        self.vstat
            .extend(std::iter::repeat(VarStatus::NonbasicAtLower).take(self.n_artificial));
        self.xval
            .extend(std::iter::repeat(0.0).take(self.n_artificial));
        self.art_rows = needs_artificial;

        self.basic = Vec::with_capacity(m);
        for r in 0..m {
            if art_of_row[r] != usize::MAX {
                let aj = art_of_row[r];
                self.basic.push(aj);
                self.vstat[aj] = VarStatus::Basic;
                // slack of r stays nonbasic at lower (0)
            } else {
                self.basic.push(n + r);
                self.vstat[n + r] = VarStatus::Basic;
            }
        }
        self.binv = identity(m);
        self.refactor()?;
        self.recompute_basics();

        if self.n_artificial > 0 {
            // Phase 1: minimize the sum of artificials.
            self.cost = vec![0.0; self.n_total];
            for k in 0..self.n_artificial {
                self.cost[n + m + k] = 1.0;
            }
            self.run_phase()?;
            let infeas: f64 = (0..self.n_artificial).map(|k| self.xval[n + m + k]).sum();
            if infeas > 1e-7 {
                let y = self.duals();
                return Ok(self.infeasible_solution(y));
            }
            self.drive_out_artificials()?;
        }

        // Phase 2.
        self.cost = vec![0.0; self.n_total];
        self.cost[..n].copy_from_slice(&self.problem.objective);
        // Artificials are pinned at zero in phase 2.
        for k in 0..self.n_artificial {
            self.upper[n + m + k] = 0.0;
        }
        self.degenerate_pivots = 0;
        self.bland = false;
        self.run_phase()?;

        self.refactor()?;
        self.recompute_basics();
        let duals = self.duals();
        let x: Vec<f64> = self.xval[..n].to_vec();
        let objective: f64 = self
            .problem
            .objective
            .iter()
            .zip(&x)
            .map(|(c, v)| c * v)
            .sum();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
            var_status: self.vstat[..n + m].to_vec(),
            duals,
            farkas: None,
            basic: self.basic.clone(),
            binv: self.binv.clone(),
            n_structural: n,
        })
    }

    fn infeasible_solution(&self, y: Vec<f64>) -> LpSolution {
        // Phase-1 duals certify infeasibility directly: at a positive
        // phase-1 optimum every slack prices out nonnegatively, so y <= 0
        // componentwise and y^T b > max_box y^T A x.
        let mult = y;
        LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; self.n],
            objective: f64::INFINITY,
            var_status: self.vstat[..self.n + self.m].to_vec(),
            duals: vec![0.0; self.m],
            farkas: Some(FarkasCertificate {
                row_multipliers: mult,
            }),
            basic: Vec::new(),
            binv: Vec::new(),
            n_structural: self.n,
        }
    }

    fn duals(&self) -> Vec<f64> {
        // y = c_B^T B^{-1}
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let mut v = 0.0;
            for (k, &bv) in self.basic.iter().enumerate() {
                v += self.cost[bv] * self.binv[k][r];
            }
            y[r] = v;
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let col = self.column_of(j);
        let mut v = self.cost[j];
        for &(r, a) in &col {
            v -= y[r] * a;
        }
        v
    }

    fn column_of(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            self.cols[j].clone()
        } else if j < self.n + self.m {
            vec![(j - self.n, 1.0)]
        } else {
            vec![(self.art_rows[j - self.n - self.m], -1.0)]
        }
    }

    fn ftran(&self, col: &[(usize, f64)]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for k in 0..m {
            let mut v = 0.0;
            for &(r, a) in col {
                v += self.binv[k][r] * a;
            }
            out[k] = v;
        }
        out
    }

    fn recompute_basics(&mut self) {
        // x_B = B^{-1} (b - N x_N)
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for (r, row) in self.problem.rows.iter().enumerate() {
            rhs[r] = row.rhs;
        }
        for j in 0..self.n_total {
            if self.vstat[j] != VarStatus::Basic {
                let v = match self.vstat[j] {
                    VarStatus::NonbasicAtLower => self.lower[j],
                    VarStatus::NonbasicAtUpper => self.upper[j],
                    VarStatus::Basic => unreachable!(),
                };
                self.xval[j] = v;
                if v != 0.0 {
                    for &(r, a) in &self.column_of(j) {
                        rhs[r] -= a * v;
                    }
                }
            }
        }
        for k in 0..m {
            let mut v = 0.0;
            for r in 0..m {
                v += self.binv[k][r] * rhs[r];
            }
            self.xval[self.basic[k]] = v;
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        if m == 0 {
            self.binv = Vec::new();
            return Ok(());
        }
        // Build B column-wise and invert by Gauss-Jordan with partial pivoting.
        let mut aug = vec![vec![0.0; 2 * m]; m];
        for (k, &bv) in self.basic.iter().enumerate() {
            // Accumulate: a column may carry duplicate row entries.
            for &(r, a) in &self.column_of(bv) {
                aug[r][k] += a;
            }
        }
        for r in 0..m {
            aug[r][m + r] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            for r in col + 1..m {
                if aug[r][col].abs() > aug[piv][col].abs() {
                    piv = r;
                }
            }
            if aug[piv][col].abs() < 1e-12 {
                return Err(LpError::NumericalFailure("singular basis".into()));
            }
            aug.swap(col, piv);
            let p = aug[col][col];
            for c in 0..2 * m {
                aug[col][c] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = aug[r][col];
                    if f != 0.0 {
                        for c in 0..2 * m {
                            aug[r][c] -= f * aug[col][c];
                        }
                    }
                }
            }
        }
        // B^{-1} has rows indexed by basis order.
        let mut binv = vec![vec![0.0; m]; m];
        for k in 0..m {
            for r in 0..m {
                binv[k][r] = aug[k][m + r];
            }
        }
        self.binv = binv;
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn run_phase(&mut self) -> Result<(), LpError> {
        let max_iter = 20_000 + 200 * (self.n_total + self.m);
        let bland_after = 10 * (self.m + self.n_total);
        for _ in 0..max_iter {
            let y = self.duals();
            let entering = self.price(&y);
            let Some((q, sigma)) = entering else {
                return Ok(());
            };
            let alpha = self.ftran(&self.column_of(q));
            // Ratio test over basics plus the entering variable's own span.
            let mut best_t = f64::INFINITY;
            let mut leave: Option<usize> = None; // basis position
            let mut leave_to_upper = false;
            for (k, &bv) in self.basic.iter().enumerate() {
                let delta = -sigma * alpha[k];
                if delta > PIVOT_TOL {
                    let room = self.upper[bv] - self.xval[bv];
                    let t = (room.max(0.0)) / delta;
                    if t < best_t - RATIO_TOL
                        || (t < best_t + RATIO_TOL && better_leave(self, leave, k, &alpha))
                    {
                        best_t = t;
                        leave = Some(k);
                        leave_to_upper = true;
                    }
                } else if delta < -PIVOT_TOL {
                    let room = self.xval[bv] - self.lower[bv];
                    let t = (room.max(0.0)) / (-delta);
                    if t < best_t - RATIO_TOL
                        || (t < best_t + RATIO_TOL && better_leave(self, leave, k, &alpha))
                    {
                        best_t = t;
                        leave = Some(k);
                        leave_to_upper = false;
                    }
                }
            }
            let span = self.upper[q] - self.lower[q];
            if span < best_t - RATIO_TOL {
                // Bound flip: no basis change.
                self.vstat[q] = match self.vstat[q] {
                    VarStatus::NonbasicAtLower => VarStatus::NonbasicAtUpper,
                    VarStatus::NonbasicAtUpper => VarStatus::NonbasicAtLower,
                    VarStatus::Basic => unreachable!(),
                };
                self.recompute_basics();
                continue;
            }
            let Some(k) = leave else {
                return Err(LpError::NumericalFailure(
                    "unbounded direction in bounded problem".into(),
                ));
            };
            if best_t < RATIO_TOL {
                self.degenerate_pivots += 1;
                if self.degenerate_pivots > bland_after {
                    self.bland = true;
                }
            } else {
                self.degenerate_pivots = 0;
            }
            self.pivot(q, sigma, k, leave_to_upper, &alpha)?;
        }
        Err(LpError::NumericalFailure("iteration limit exceeded".into()))
    }

    /// Entering variable: most negative violation of bound optimality, or
    /// smallest eligible index under Bland's rule.
    fn price(&self, y: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None; // (index, sigma, score)
        for j in 0..self.n_total {
            if self.upper[j] <= self.lower[j] {
                continue; // fixed variables never usefully enter
            }
            match self.vstat[j] {
                VarStatus::Basic => continue,
                VarStatus::NonbasicAtLower => {
                    let d = self.reduced_cost(j, y);
                    if d < -1e-9 {
                        if self.bland {
                            return Some((j, 1.0));
                        }
                        if best.map_or(true, |(_, _, s)| -d > s) {
                            best = Some((j, 1.0, -d));
                        }
                    }
                }
                VarStatus::NonbasicAtUpper => {
                    let d = self.reduced_cost(j, y);
                    if d > 1e-9 {
                        if self.bland {
                            return Some((j, -1.0));
                        }
                        if best.map_or(true, |(_, _, s)| d > s) {
                            best = Some((j, -1.0, d));
                        }
                    }
                }
            }
        }
        best.map(|(j, sigma, _)| (j, sigma))
    }

    fn pivot(
        &mut self,
        q: usize,
        sigma: f64,
        k: usize,
        leave_to_upper: bool,
        alpha: &[f64],
    ) -> Result<(), LpError> {
        if alpha[k].abs() < 1e-11 {
            self.refactor()?;
            let alpha2 = self.ftran(&self.column_of(q));
            if alpha2[k].abs() < 1e-11 {
                return Err(LpError::NumericalFailure("pivot element vanished".into()));
            }
            return self.pivot(q, sigma, k, leave_to_upper, &alpha2);
        }
        let leaving = self.basic[k];
        self.vstat[leaving] = if leave_to_upper {
            VarStatus::NonbasicAtUpper
        } else {
            VarStatus::NonbasicAtLower
        };
        self.basic[k] = q;
        self.vstat[q] = VarStatus::Basic;
        // Gauss-Jordan update of B^{-1}.
        let m = self.m;
        let pivk: Vec<f64> = self.binv[k].iter().map(|v| v / alpha[k]).collect();
        for i in 0..m {
            if i != k {
                let f = alpha[i];
                if f != 0.0 {
                    for r in 0..m {
                        self.binv[i][r] -= f * pivk[r];
                    }
                }
            }
        }
        self.binv[k] = pivk;
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        self.recompute_basics();
        Ok(())
    }

    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        let n = self.n;
        let m = self.m;
        loop {
            let Some(k) = self.basic.iter().position(|&bv| bv >= n + m) else {
                break;
            };
            // Pivot the basic artificial (at value 0) out using any column
            // with a nonzero tableau entry in row k; slack columns always
            // provide one.
            let mut done = false;
            for j in 0..n + m {
                if self.vstat[j] == VarStatus::Basic {
                    continue;
                }
                let alpha = self.ftran(&self.column_of(j));
                if alpha[k].abs() > 1e-7 {
                    let sigma = match self.vstat[j] {
                        VarStatus::NonbasicAtLower => 1.0,
                        VarStatus::NonbasicAtUpper => -1.0,
                        VarStatus::Basic => unreachable!(),
                    };
                    // Zero-length pivot: the artificial sits at 0.
                    let leave_to_upper = false;
                    self.pivot(j, sigma, k, leave_to_upper, &alpha)?;
                    done = true;
                    break;
                }
            }
            if !done {
                return Err(LpError::NumericalFailure(
                    "could not drive artificial out of basis".into(),
                ));
            }
        }
        Ok(())
    }
}

fn better_leave(s: &Simplex, current: Option<usize>, cand: usize, alpha: &[f64]) -> bool {
    match current {
        None => true,
        Some(cur) => {
            if s.bland {
                s.basic[cand] < s.basic[cur]
            } else {
                let ac = alpha[cand].abs();
                let au = alpha[cur].abs();
                if (ac - au).abs() > 1e-12 {
                    ac > au
                } else {
                    s.basic[cand] < s.basic[cur]
                }
            }
        }
    }
}

fn identity(m: usize) -> Vec<Vec<f64>> {
    let mut id = vec![vec![0.0; m]; m];
    for i in 0..m {
        id[i][i] = 1.0;
    }
    id
}
