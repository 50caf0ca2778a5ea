//! Approximate-Nash-equilibrium cuts: the Lemma 4.1 dispatcher, NE-free set
//! construction, intersection cuts from corner-polyhedron rays, best-response
//! cuts, and the root-node cost-proxy rows.

use serde::Serialize;
use thiserror::Error;

use crate::bestresponse::BestResponse;
use crate::lifted::{EqCandidate, LiftedLayout};
use crate::lp::{LpProblem, LpSolution, Ray, RaySource, SparseRow};
use crate::model::{CostStructure, ExtendedGame, Game, GameMode};

/// Minimum normalized violation for a cut to be accepted.
pub const CUT_VIOLATION_TOL: f64 = 5e-6;
/// Interior-slack requirement for free sets at the target point.
pub const INTERIOR_TOL: f64 = 1e-9;
/// Step lengths below this are clamped (coefficients capped at 1e9).
pub const ETA_MIN: f64 = 1e-9;
/// Step lengths above this count as infinite (coefficient 0).
pub const ETA_MAX: f64 = 1e12;

#[derive(Debug, Error)]
pub enum CutError {
    #[error("dichotomy violation: both N^phi and N^pihat are empty")]
    DichotomyViolation,
    #[error("target point is not in the interior of the free set: {0}")]
    NotInInterior(String),
    #[error("cost structure tag does not admit this free set")]
    WrongCostClass,
    #[error("operation requires NEP mode")]
    WrongMode,
    #[error("no ray leaves the free set; the corner cannot be cut")]
    NoViolation,
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CutProvenance {
    IcPhi,
    IcPiConv,
    IcPiConc,
    BrCut,
    RootPiHat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutScope {
    Global,
    Local(u64),
}

/// A linear inequality `coeffs . z <= rhs` over the lifted space, normalized
/// so its largest absolute coefficient is 1.
#[derive(Debug, Clone)]
pub struct Cut {
    pub row: SparseRow,
    pub provenance: CutProvenance,
    pub scope: CutScope,
    pub player: usize,
}

impl Cut {
    /// Signed violation at a lifted point: positive means the point is cut off.
    pub fn violation(&self, z: &[f64]) -> f64 {
        self.row.eval(z) - self.row.rhs
    }
}

fn normalize(mut row: SparseRow) -> SparseRow {
    // Merge duplicate indices (e.g. a linear term and a collapsed bilinear
    // term on the same variable) before scaling.
    let mut merged: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for &(j, a) in &row.coeffs {
        *merged.entry(j).or_insert(0.0) += a;
    }
    row.coeffs = merged.into_iter().collect();
    row.coeffs.retain(|&(_, a)| a != 0.0);
    let scale = row
        .coeffs
        .iter()
        .map(|&(_, a)| a.abs())
        .fold(0.0f64, f64::max);
    if scale > 0.0 {
        for c in &mut row.coeffs {
            c.1 /= scale;
        }
        row.rhs /= scale;
    }
    row
}

// ---------------------------------------------------------------------------
// Free sets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeSetKind {
    PolyhedralOpen,
    GradientHalfspace,
    ConcaveSublevel(usize),
}

/// One boundary function `value(z) = constant + linear.z + sum q z_a z_b`;
/// the free set's interior is where every row's value is strictly negative.
#[derive(Debug, Clone)]
pub struct BoundaryRow {
    pub constant: f64,
    pub linear: Vec<(usize, f64)>,
    pub quad: Vec<(usize, usize, f64)>,
}

impl BoundaryRow {
    pub fn value(&self, z: &[f64]) -> f64 {
        let mut v = self.constant;
        for &(j, a) in &self.linear {
            v += a * z[j];
        }
        for &(a, b, q) in &self.quad {
            v += q * z[a] * z[b];
        }
        v
    }

    /// Exit step of this row along `dir` from `z`: the smallest eta > 0 with
    /// value(z + eta dir) = 0, or infinity when the row never blocks.
    pub fn exit_step(&self, z: &[f64], dir: &[f64]) -> f64 {
        let f0 = self.value(z);
        let mut f1 = 0.0;
        for &(j, a) in &self.linear {
            f1 += a * dir[j];
        }
        let mut f2 = 0.0;
        for &(a, b, q) in &self.quad {
            f1 += q * (z[a] * dir[b] + z[b] * dir[a]);
            f2 += q * dir[a] * dir[b];
        }
        smallest_positive_root(f0, f1, f2)
    }

    /// Bisection fallback for the exit step, assuming a single crossing of
    /// zero (the boundary function is convex along rays from the interior).
    pub fn exit_step_bisection(&self, z: &[f64], dir: &[f64]) -> f64 {
        let at = |eta: f64| {
            let pt: Vec<f64> = z.iter().zip(dir).map(|(a, d)| a + eta * d).collect();
            self.value(&pt)
        };
        if at(ETA_MAX) < 0.0 {
            return f64::INFINITY;
        }
        let (mut lo, mut hi) = (0.0f64, ETA_MAX);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-9 * (1.0 + hi.abs()) {
                break;
            }
        }
        hi
    }
}

/// Smallest eta > 0 with f0 + f1 eta + f2 eta^2 = 0 given f0 < 0, or infinity.
fn smallest_positive_root(f0: f64, f1: f64, f2: f64) -> f64 {
    if f2.abs() < 1e-14 {
        if f1 <= 1e-14 {
            return f64::INFINITY;
        }
        return -f0 / f1;
    }
    let disc = f1 * f1 - 4.0 * f2 * f0;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    // Numerically stable pair of roots.
    let q = -0.5 * (f1 + f1.signum() * sq);
    let mut roots = [f64::INFINITY; 2];
    if f2 != 0.0 {
        roots[0] = q / f2;
    }
    if q != 0.0 {
        roots[1] = f0 / q;
    }
    let mut best = f64::INFINITY;
    for r in roots {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct ConvexFreeSet {
    pub kind: FreeSetKind,
    pub rows: Vec<BoundaryRow>,
}

impl ConvexFreeSet {
    pub fn contains_interior(&self, z: &[f64], tol: f64) -> bool {
        self.rows.iter().all(|r| r.value(z) <= -tol)
    }

    /// Exit step out of the closed set along `dir` from the interior point
    /// `z`: the minimum of the per-row exit steps.
    pub fn exit_step(&self, z: &[f64], dir: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.exit_step(z, dir))
            .fold(f64::INFINITY, f64::min)
    }
}

// ---------------------------------------------------------------------------
// Dispatcher (Lemma 4.1)
// ---------------------------------------------------------------------------

/// Splits the players into the cut targets: N^phi (proxy above the true
/// best-response value) and N^pihat (proxy below the true cost). At a
/// non-equilibrium integer-feasible node optimum at least one set is
/// non-empty; both empty surfaces a tolerance inconsistency.
pub fn dispatch_cut_targets(
    game: &Game,
    cand: &EqCandidate,
    br: &[BestResponse],
) -> Result<(Vec<usize>, Vec<usize>), CutError> {
    let n = game.n_players();
    let mut n_phi = Vec::new();
    let mut n_pihat = Vec::new();
    for i in 0..n {
        if cand.phi[i] > br[i].value + 1e-9 {
            n_phi.push(i);
        }
        if cand.pihat[i] < game.eval_cost(i, &cand.x) - 1e-9 {
            n_pihat.push(i);
        }
    }
    if n_phi.is_empty() && n_pihat.is_empty() {
        return Err(CutError::DichotomyViolation);
    }
    Ok((n_phi, n_pihat))
}

// ---------------------------------------------------------------------------
// Cost expansion with own variables fixed
// ---------------------------------------------------------------------------

/// pi_i(y*, x_{-i}) as an expression over the lifted space: constant plus
/// linear terms in rival variables plus (possibly) rival-rival quadratic
/// terms. Own variables are substituted by `y_star`.
fn cost_with_own_fixed(
    game: &Game,
    i: usize,
    y_star: &[f64],
) -> (f64, Vec<(usize, f64)>, Vec<(usize, usize, f64)>) {
    let rng = game.block_range(i);
    let start = rng.start;
    let cost = &game.costs[i];
    let mut constant = cost.constant;
    let mut linear: Vec<(usize, f64)> = Vec::new();
    let mut quad: Vec<(usize, usize, f64)> = Vec::new();
    for (&j, &c) in &cost.linear {
        if rng.contains(&j) {
            constant += c * y_star[j - start];
        } else {
            linear.push((j, c));
        }
    }
    for &(a, b, q) in &cost.quadratic {
        match (rng.contains(&a), rng.contains(&b)) {
            (true, true) => constant += q * y_star[a - start] * y_star[b - start],
            (true, false) => linear.push((b, q * y_star[a - start])),
            (false, true) => linear.push((a, q * y_star[b - start])),
            (false, false) => quad.push((a, b, q)),
        }
    }
    (constant, linear, quad)
}

/// Gradient of pi_i at x, over the player variables.
fn cost_gradient(game: &Game, i: usize, x: &[f64]) -> Vec<f64> {
    let cost = &game.costs[i];
    let mut grad = vec![0.0; game.n_vars()];
    for (&j, &c) in &cost.linear {
        grad[j] += c;
    }
    for &(a, b, q) in &cost.quadratic {
        if a == b {
            grad[a] += 2.0 * q * x[a];
        } else {
            grad[a] += q * x[b];
            grad[b] += q * x[a];
        }
    }
    grad
}

// ---------------------------------------------------------------------------
// Free-set builders
// ---------------------------------------------------------------------------

/// Q^{phi,eps}: { phi_i > pi_i(y*, x_{-i}) } intersected with
/// { g_i(y*, x_{-i}) < eps }. With the integrality flag set, eps = 1 keeps
/// every eq-tuple out of the interior; the caller passes eps.
pub fn build_free_set_phi(
    game: &Game,
    layout: &LiftedLayout,
    i: usize,
    z_star: &[f64],
    y_star: &[f64],
    eps: f64,
) -> Result<ConvexFreeSet, CutError> {
    let (constant, mut linear, quad) = cost_with_own_fixed(game, i, y_star);
    linear.push((layout.phi(i), -1.0));
    let mut rows = vec![BoundaryRow {
        constant,
        linear,
        quad,
    }];

    let rng = game.block_range(i);
    let start = rng.start;
    for g_row in game.constraints.iter().filter(|r| r.owner == i) {
        let mut constant = -g_row.rhs - eps;
        let mut linear = Vec::new();
        for (&j, &a) in &g_row.coeffs {
            if rng.contains(&j) {
                constant += a * y_star[j - start];
            } else {
                linear.push((j, a));
            }
        }
        rows.push(BoundaryRow {
            constant,
            linear,
            quad: vec![],
        });
    }

    let set = ConvexFreeSet {
        kind: FreeSetKind::PolyhedralOpen,
        rows,
    };
    if !set.contains_interior(z_star, INTERIOR_TOL) {
        return Err(CutError::NotInInterior(format!(
            "Q^phi for player {i}: slack below {INTERIOR_TOL}"
        )));
    }
    Ok(set)
}

/// Q^{pi,conv}: the gradient halfspace
/// { pihat_i < pi_i(x*) + grad pi_i(x*)^T (x - x*) }.
pub fn build_free_set_pi_conv(
    game: &Game,
    layout: &LiftedLayout,
    i: usize,
    z_star: &[f64],
) -> Result<ConvexFreeSet, CutError> {
    if game.costs[i].structure != CostStructure::ConvexInAll {
        return Err(CutError::WrongCostClass);
    }
    let x_star = &z_star[..game.n_vars()];
    let grad = cost_gradient(game, i, x_star);
    let pi_star = game.eval_cost(i, x_star);
    let grad_dot_x: f64 = grad.iter().zip(x_star).map(|(g, x)| g * x).sum();
    let mut linear = vec![(layout.pihat(i), 1.0)];
    for (j, &g) in grad.iter().enumerate() {
        if g != 0.0 {
            linear.push((j, -g));
        }
    }
    let set = ConvexFreeSet {
        kind: FreeSetKind::GradientHalfspace,
        rows: vec![BoundaryRow {
            constant: -pi_star + grad_dot_x,
            linear,
            quad: vec![],
        }],
    };
    if !set.contains_interior(z_star, INTERIOR_TOL) {
        return Err(CutError::NotInInterior(format!(
            "Q^pi,conv for player {i}: pihat not strictly below the linearization"
        )));
    }
    Ok(set)
}

/// Q^{pi,conc}: the sublevel region { pihat_i < pi_i(x) }, convex because
/// pi_i is concave.
pub fn build_free_set_pi_conc(
    game: &Game,
    layout: &LiftedLayout,
    i: usize,
    z_star: &[f64],
) -> Result<ConvexFreeSet, CutError> {
    if game.costs[i].structure != CostStructure::ConcaveAllLinearInRivals {
        return Err(CutError::WrongCostClass);
    }
    let cost = &game.costs[i];
    let mut linear = vec![(layout.pihat(i), 1.0)];
    for (&j, &c) in &cost.linear {
        linear.push((j, -c));
    }
    let quad: Vec<(usize, usize, f64)> =
        cost.quadratic.iter().map(|&(a, b, q)| (a, b, -q)).collect();
    let set = ConvexFreeSet {
        kind: FreeSetKind::ConcaveSublevel(i),
        rows: vec![BoundaryRow {
            constant: -cost.constant,
            linear,
            quad,
        }],
    };
    if !set.contains_interior(z_star, INTERIOR_TOL) {
        return Err(CutError::NotInInterior(format!(
            "Q^pi,conc for player {i}: pihat not strictly below the cost"
        )));
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// Intersection cut
// ---------------------------------------------------------------------------

/// Builds the intersection cut at the LP vertex from the corner rays and a
/// free set containing the vertex in its interior: with step lengths eta_j
/// into the closure, the cut is sum_j s_j / eta_j >= 1 over the nonbasic
/// displacements s_j, mapped back to the original variables.
pub fn intersection_cut(
    problem: &LpProblem,
    solution: &LpSolution,
    rays: &[Ray],
    free_set: &ConvexFreeSet,
    provenance: CutProvenance,
    scope: CutScope,
    player: usize,
) -> Result<Cut, CutError> {
    let z_star = &solution.x;
    if !free_set.contains_interior(z_star, INTERIOR_TOL) {
        return Err(CutError::NotInInterior("vertex not interior".into()));
    }
    let n = problem.n_vars();
    // Accumulate sum_j gamma_j s_j(x) >= 1 as dense coefficients plus constant.
    let mut dense = vec![0.0; n];
    let mut constant = 0.0;
    let mut any_finite = false;
    for ray in rays {
        let eta = free_set.exit_step(z_star, &ray.direction);
        if eta >= ETA_MAX {
            continue; // infinite step: coefficient 0
        }
        any_finite = true;
        let gamma = 1.0 / eta.max(ETA_MIN);
        match ray.source {
            RaySource::VarAtLower(j) => {
                // s = x_j - l_j
                dense[j] += gamma;
                constant -= gamma * problem.lower[j];
            }
            RaySource::VarAtUpper(j) => {
                // s = u_j - x_j
                dense[j] -= gamma;
                constant += gamma * problem.upper[j];
            }
            RaySource::Slack(r) => {
                // s = rhs_r - a_r.x
                let row = &problem.rows[r];
                for &(j, a) in &row.coeffs {
                    dense[j] -= gamma * a;
                }
                constant += gamma * row.rhs;
            }
        }
    }
    if !any_finite {
        return Err(CutError::NoViolation);
    }
    // sum gamma s >= 1  <=>  -(dense.x + constant) <= -1.
    let coeffs: Vec<(usize, f64)> = dense
        .iter()
        .enumerate()
        .filter(|&(_, a)| *a != 0.0)
        .map(|(j, a)| (j, -a))
        .collect();
    let row = normalize(SparseRow {
        coeffs,
        rhs: constant - 1.0,
    });
    Ok(Cut {
        row,
        provenance,
        scope,
        player,
    })
}

// ---------------------------------------------------------------------------
// NEP cuts
// ---------------------------------------------------------------------------

/// Best-response cut phi_i <= pi_i(y*, x_{-i}), globally valid in NEP mode.
pub fn best_response_cut(
    game: &Game,
    layout: &LiftedLayout,
    i: usize,
    y_star: &[f64],
) -> Result<Cut, CutError> {
    if game.mode != GameMode::Nep {
        return Err(CutError::WrongMode);
    }
    let (constant, linear, quad) = cost_with_own_fixed(game, i, y_star);
    if !quad.is_empty() {
        return Err(CutError::AssumptionViolated(format!(
            "player {i}: cost has rival-rival quadratic terms; the BR cut is not linear"
        )));
    }
    // phi_i - constant - linear.x <= 0  <=>  phi_i - linear.x <= constant.
    let mut coeffs = vec![(layout.phi(i), 1.0)];
    for (j, c) in linear {
        coeffs.push((j, -c));
    }
    let row = normalize(SparseRow {
        coeffs,
        rhs: constant,
    });
    Ok(Cut {
        row,
        provenance: CutProvenance::BrCut,
        scope: CutScope::Global,
        player: i,
    })
}

/// Root rows pihat_i >= lin_i(x, w): exact at integral points after the
/// bilinear linearization, a relaxation elsewhere.
pub fn root_pihat_cuts(ext: &ExtendedGame, layout: &LiftedLayout) -> Vec<Cut> {
    let game = &ext.base;
    let mut cuts = Vec::with_capacity(game.n_players());
    for i in 0..game.n_players() {
        let cost = &game.costs[i];
        let mut coeffs: Vec<(usize, f64)> = vec![(layout.pihat(i), -1.0)];
        for (&j, &c) in &cost.linear {
            coeffs.push((j, c));
        }
        for &(a, b, q) in &cost.quadratic {
            if q == 0.0 {
                continue;
            }
            let key = match (game.is_integer_var(a), game.is_integer_var(b)) {
                (true, false) => (a, b),
                (false, true) => (b, a),
                _ => (a, b),
            };
            let p_idx = *ext
                .product_of_pair
                .get(&key)
                .expect("linearization covers every bilinear term");
            let w_aux = ext.products[p_idx].w_index;
            coeffs.push((layout.aux(w_aux), q));
        }
        // lin_i(x, w) - pihat_i <= -constant.
        let row = normalize(SparseRow {
            coeffs,
            rhs: -cost.constant,
        });
        cuts.push(Cut {
            row,
            provenance: CutProvenance::RootPiHat,
            scope: CutScope::Global,
            player: i,
        });
    }
    cuts
}

/// Convenience: the lifted indices of all integral variables (player
/// integers plus expansion bits).
pub fn lifted_integer_vars(
    game: &Game,
    layout: &LiftedLayout,
    ext: Option<&ExtendedGame>,
) -> Vec<usize> {
    let mut vars = game.integer_vars();
    if let Some(e) = ext {
        for (k, &is_int) in e.aux_integer.iter().enumerate() {
            if is_int {
                vars.push(layout.aux(k));
            }
        }
    }
    vars
}
