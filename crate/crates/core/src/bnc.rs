//! Branch-and-cut over the lifted space: node problems, the node-processing
//! loop (prune / branch / equilibrium check / cut), and the depth-first
//! driver that either returns an (alpha, beta)-NE witness or certifies that
//! none exists.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bestresponse::{best_response, BestResponse, INT_TOL};
use crate::cuts::{
    best_response_cut, build_free_set_phi, build_free_set_pi_conc, build_free_set_pi_conv,
    dispatch_cut_targets, intersection_cut, lifted_integer_vars, root_pihat_cuts, Cut, CutError,
    CutProvenance, CutScope, CUT_VIOLATION_TOL,
};
use crate::lifted::{EqCandidate, LiftedLayout};
use crate::lp::{corner_rays, solve_lp, LpError, LpProblem, LpStatus, SparseRow};
use crate::model::{linearize_bilinear, CostStructure, Game, GameMode, ModelError};
use crate::{NE_TOL, PRUNE_TOL};

#[derive(Debug, Error)]
pub enum BncError {
    #[error("invalid approximation parameters: {0}")]
    InvalidApproximation(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("cut generation failed: {0}")]
    Cut(#[from] CutError),
}

// ---------------------------------------------------------------------------
// Limits, statuses, result documents
// ---------------------------------------------------------------------------

/// Solve tolerances (overridable from the CLI; defaults are the values the
/// engine's constants document).
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Equilibrium check slack: pi <= alpha Phi + beta + ne.
    pub ne: f64,
    /// Prune a node whose LP value exceeds this.
    pub prune: f64,
    /// Minimum normalized violation for accepting a cut.
    pub cut: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ne: NE_TOL,
            prune: PRUNE_TOL,
            cut: CUT_VIOLATION_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    /// Wall-clock limit in seconds.
    pub time: f64,
    /// Maximum number of processed nodes.
    pub nodes: u64,
    pub tol: Tolerances,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            time: 3600.0,
            nodes: u64::MAX,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    NeFound,
    NoNeExists,
    TimeLimit,
    NodeLimit,
    /// The cut-loop safeguard tripped or no sufficiently violated cut could
    /// be generated; diagnostics are in `SolveResult::diagnostic`.
    CutLimit,
}

#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq, Eq)]
pub struct CutCounts {
    pub ic_phi: u64,
    pub ic_pi_conv: u64,
    pub ic_pi_conc: u64,
    pub br: u64,
}

impl CutCounts {
    fn bump(&mut self, p: CutProvenance) {
        match p {
            CutProvenance::IcPhi => self.ic_phi += 1,
            CutProvenance::IcPiConv => self.ic_pi_conv += 1,
            CutProvenance::IcPiConc => self.ic_pi_conc += 1,
            CutProvenance::BrCut => self.br += 1,
            CutProvenance::RootPiHat => {}
        }
    }

    pub fn total(&self) -> u64 {
        self.ic_phi + self.ic_pi_conv + self.ic_pi_conc + self.br
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq, Eq)]
pub struct Stats {
    pub nodes: u64,
    pub lp_solves: u64,
    pub br_solves: u64,
    pub cuts: CutCounts,
}

/// A cut together with where it was generated and how violated it was there.
#[derive(Debug, Clone)]
pub struct CutRecord {
    pub node_id: u64,
    pub cut: Cut,
    pub violation: f64,
    /// Lifted bounds of the generating node. Local cuts are only claimed
    /// valid inside this box; global cuts are valid everywhere.
    pub node_lower: Vec<f64>,
    pub node_upper: Vec<f64>,
}

/// One branch-and-bound node: tightened lifted bounds plus local cuts.
#[derive(Debug, Clone)]
pub struct Node {
    pub id: u64,
    pub parent: Option<u64>,
    pub depth: u32,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub local_cuts: Vec<Cut>,
}

/// Unexplored remainder of a tree, retained for the adaptive alpha search.
#[derive(Debug, Clone)]
pub struct Frontier {
    /// Open nodes in stack order (last = explored next). On `NeFound` the
    /// node carrying the equilibrium is on top, re-opened.
    pub nodes: Vec<Node>,
    pub global_cuts: Vec<Cut>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    next_id: u64,
}

#[derive(Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub witness: Option<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub stats: Stats,
    pub wall_time_s: f64,
    pub frontier: Frontier,
    pub cut_log: Vec<CutRecord>,
    pub diagnostic: Option<String>,
}

/// Serializable result document with a deterministic field order.
#[derive(Debug, Serialize)]
pub struct ResultDocument {
    pub status: SolveStatus,
    pub witness: Option<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub stats: Stats,
    pub wall_time_s: f64,
    pub diagnostic: Option<String>,
}

impl SolveResult {
    pub fn document(&self) -> ResultDocument {
        ResultDocument {
            status: self.status,
            witness: self.witness.clone(),
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            stats: self.stats,
            wall_time_s: self.wall_time_s,
            diagnostic: self.diagnostic.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Equilibrium check
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct NeCheck {
    pub is_ne: bool,
    pub violators: Vec<usize>,
    /// Phi_i(x_{-i}); +inf when the restricted set is empty (GNEP).
    pub phi: Vec<f64>,
    pub br: Vec<Option<BestResponse>>,
}

/// Tests pi_i(x) <= alpha_i Phi_i(x_{-i}) + beta_i + 1e-8 for every player,
/// returning the exact best-response data for cut generation. An empty
/// restricted set (GNEP) marks the player a violator: x_i itself is then not
/// a feasible strategy.
pub fn check_ne(game: &Game, x: &[f64], alpha: &[f64], beta: &[f64]) -> NeCheck {
    check_ne_with_tol(game, x, alpha, beta, NE_TOL)
}

pub fn check_ne_with_tol(
    game: &Game,
    x: &[f64],
    alpha: &[f64],
    beta: &[f64],
    tol_ne: f64,
) -> NeCheck {
    let n = game.n_players();
    let mut violators = Vec::new();
    let mut phi = Vec::with_capacity(n);
    let mut br = Vec::with_capacity(n);
    for i in 0..n {
        match best_response(game, i, x) {
            Ok(b) => {
                let pi = game.eval_cost(i, x);
                if pi > alpha[i] * b.value + beta[i] + tol_ne {
                    violators.push(i);
                }
                phi.push(b.value);
                br.push(Some(b));
            }
            Err(_) => {
                violators.push(i);
                phi.push(f64::INFINITY);
                br.push(None);
            }
        }
    }
    NeCheck {
        is_ne: violators.is_empty(),
        violators,
        phi,
        br,
    }
}

// ---------------------------------------------------------------------------
// Instance: the alpha-independent parts of the lifted formulation
// ---------------------------------------------------------------------------

struct Instance {
    game: Game,
    layout: LiftedLayout,
    /// g-rows, linearization rows, and (NEP) root pihat rows.
    fixed_rows: Vec<SparseRow>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Vec<f64>,
    int_vars: Vec<usize>,
    cut_round_limit: u64,
    phi_eps: f64,
}

impl Instance {
    fn new(game: &Game) -> Result<Self, BncError> {
        game.validate_for_solve()?;
        let ext = match game.mode {
            GameMode::Nep => Some(linearize_bilinear(game)?),
            GameMode::Gnep => None,
        };
        let layout = LiftedLayout::for_game(game, ext.as_ref());
        let bounds = game.compute_proxy_bounds();
        let n = game.n_players();
        let nv = game.n_vars();
        let d = layout.dim();

        let mut lower = vec![0.0; d];
        let mut upper = vec![0.0; d];
        for v in 0..nv {
            lower[v] = game.var_lower(v);
            upper[v] = game.var_upper(v);
        }
        let big: f64 = 1.0
            + bounds
                .phi_plus
                .iter()
                .zip(&bounds.pihat_minus)
                .map(|(p, q)| p.abs() + q.abs())
                .sum::<f64>();
        lower[layout.lambda()] = -big;
        upper[layout.lambda()] = big;
        for i in 0..n {
            lower[layout.phi(i)] = bounds.pihat_minus[i];
            upper[layout.phi(i)] = bounds.phi_plus[i];
            lower[layout.pihat(i)] = bounds.pihat_minus[i];
            upper[layout.pihat(i)] = bounds.phi_plus[i];
        }
        if let Some(e) = &ext {
            for k in 0..e.n_aux() {
                lower[layout.aux(k)] = e.aux_lower[k];
                upper[layout.aux(k)] = e.aux_upper[k];
            }
        }

        let mut fixed_rows: Vec<SparseRow> = game
            .constraints
            .iter()
            .map(|r| SparseRow {
                coeffs: r.coeffs.iter().map(|(&j, &a)| (j, a)).collect(),
                rhs: r.rhs,
            })
            .collect();
        if let Some(e) = &ext {
            for r in &e.aux_rows {
                fixed_rows.push(SparseRow {
                    coeffs: r
                        .coeffs
                        .iter()
                        .map(|&(j, a)| (if j < nv { j } else { layout.aux(j - nv) }, a))
                        .collect(),
                    rhs: r.rhs,
                });
            }
            for cut in root_pihat_cuts(e, &layout) {
                fixed_rows.push(cut.row);
            }
        }

        let mut objective = vec![0.0; d];
        objective[layout.lambda()] = 1.0;

        let int_vars = lifted_integer_vars(game, &layout, ext.as_ref());
        let cut_round_limit = 10 * nv as u64 + 100;
        // Integral data pushes an infeasible own row off by at least one
        // quantum; without the flag fall back to a conservative sliver.
        let phi_eps = if game.integrality_flag { 1.0 } else { 1e-6 };
        Ok(Instance {
            game: game.clone(),
            layout,
            fixed_rows,
            lower,
            upper,
            objective,
            int_vars,
            cut_round_limit,
            phi_eps,
        })
    }

    /// lambda >= pihat_i/alpha_i - phi_i - beta_i/alpha_i for every player.
    fn lambda_rows(&self, alpha: &[f64], beta: &[f64]) -> Vec<SparseRow> {
        (0..self.game.n_players())
            .map(|i| SparseRow {
                coeffs: vec![
                    (self.layout.pihat(i), 1.0 / alpha[i]),
                    (self.layout.phi(i), -1.0),
                    (self.layout.lambda(), -1.0),
                ],
                rhs: beta[i] / alpha[i],
            })
            .collect()
    }
}

fn validate_approximation(game: &Game, alpha: &[f64], beta: &[f64]) -> Result<(), BncError> {
    let n = game.n_players();
    if alpha.len() != n || beta.len() != n {
        return Err(BncError::InvalidApproximation(format!(
            "expected {n} alpha and beta entries, got {} and {}",
            alpha.len(),
            beta.len()
        )));
    }
    for i in 0..n {
        if !(alpha[i] >= 1.0) {
            return Err(BncError::InvalidApproximation(format!(
                "alpha[{i}] = {} < 1",
                alpha[i]
            )));
        }
        if !(beta[i] >= 0.0) {
            return Err(BncError::InvalidApproximation(format!(
                "beta[{i}] = {} < 0",
                beta[i]
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Node systems (for the tree-invariant observer and Proposition 5.1 tests)
// ---------------------------------------------------------------------------

/// The full linear system of one leaf: lifted bounds plus all of its rows
/// (fixed, lambda, global cuts, local cuts).
#[derive(Debug, Clone)]
pub struct NodeSystem {
    pub node_id: u64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<SparseRow>,
}

impl NodeSystem {
    pub fn admits(&self, z: &[f64], tol: f64) -> bool {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&lo, &hi))| v >= lo - tol && v <= hi + tol)
            && self.rows.iter().all(|r| r.eval(z) <= r.rhs + tol)
    }
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

struct Solver<'a> {
    inst: Instance,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    lambda_rows: Vec<SparseRow>,
    tol: Tolerances,
    global_cuts: Vec<Cut>,
    stack: Vec<Node>,
    next_id: u64,
    stats: Stats,
    cut_log: Vec<CutRecord>,
    observer: Option<&'a mut dyn FnMut(&[NodeSystem])>,
}

enum NodeOutcome {
    Pruned,
    Branched,
    NeFound(Node, Vec<f64>),
    Stalled(String),
}

impl<'a> Solver<'a> {
    fn node_problem(&self, node: &Node) -> LpProblem {
        let mut rows = self.inst.fixed_rows.clone();
        rows.extend(self.lambda_rows.iter().cloned());
        rows.extend(self.global_cuts.iter().map(|c| c.row.clone()));
        rows.extend(node.local_cuts.iter().map(|c| c.row.clone()));
        LpProblem {
            lower: node.lower.clone(),
            upper: node.upper.clone(),
            objective: self.inst.objective.clone(),
            rows,
        }
    }

    fn system_of(&self, node: &Node) -> NodeSystem {
        let p = self.node_problem(node);
        NodeSystem {
            node_id: node.id,
            lower: p.lower,
            upper: p.upper,
            rows: p.rows,
        }
    }

    fn notify(&mut self, extra: Option<&Node>) {
        if self.observer.is_none() {
            return;
        }
        let mut systems: Vec<NodeSystem> = self.stack.iter().map(|n| self.system_of(n)).collect();
        if let Some(n) = extra {
            systems.push(self.system_of(n));
        }
        if let Some(obs) = self.observer.as_mut() {
            obs(&systems);
        }
    }

    /// Most-fractional integer variable, smallest index on ties.
    fn branch_var(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &v in &self.inst.int_vars {
            let frac = (x[v] - x[v].round()).abs();
            if frac > INT_TOL {
                let better = match best {
                    None => true,
                    Some((_, bf)) => frac > bf + 1e-12,
                };
                if better {
                    best = Some((v, frac));
                }
            }
        }
        best.map(|(v, _)| (v, x[v]))
    }

    fn branch(&mut self, node: Node, var: usize, value: f64) {
        let mut ceil_child = node.clone();
        ceil_child.id = self.next_id;
        ceil_child.parent = Some(node.id);
        ceil_child.depth = node.depth + 1;
        ceil_child.lower[var] = value.ceil();
        self.next_id += 1;

        let mut floor_child = node;
        floor_child.parent = Some(floor_child.id);
        floor_child.id = self.next_id;
        floor_child.depth += 1;
        floor_child.upper[var] = value.floor();
        self.next_id += 1;

        // Floor child pushed last: explored first under LIFO.
        self.stack.push(ceil_child);
        self.stack.push(floor_child);
    }

    fn gnep_cuts(
        &mut self,
        node: &Node,
        problem: &LpProblem,
        solution: &crate::lp::LpSolution,
        cand: &EqCandidate,
        check: &NeCheck,
    ) -> Result<Vec<Cut>, String> {
        let game = &self.inst.game;
        let layout = &self.inst.layout;
        let br: Vec<BestResponse> = match check.br.iter().cloned().collect::<Option<Vec<_>>>() {
            Some(v) => v,
            None => {
                return Err(
                    "a best-response set is empty at an integer-feasible node optimum".to_string(),
                )
            }
        };
        let (n_phi, n_pihat) = dispatch_cut_targets(game, cand, &br).map_err(|e| e.to_string())?;
        let rays = corner_rays(problem, solution).map_err(|e| e.to_string())?;
        let scope = CutScope::Local(node.id);
        let mut cuts = Vec::new();
        let mut failures: Vec<String> = Vec::new();
        for &i in &n_phi {
            let attempt = build_free_set_phi(
                game,
                layout,
                i,
                &solution.x,
                &br[i].minimizer,
                self.inst.phi_eps,
            )
            .and_then(|fs| {
                intersection_cut(
                    problem,
                    solution,
                    &rays,
                    &fs,
                    CutProvenance::IcPhi,
                    scope,
                    i,
                )
            });
            match attempt {
                Ok(c) => cuts.push(c),
                Err(e) => failures.push(format!("Q^phi player {i}: {e}")),
            }
        }
        for &i in &n_pihat {
            let fs = match game.costs[i].structure {
                CostStructure::ConvexInAll => build_free_set_pi_conv(game, layout, i, &solution.x)
                    .map(|f| (f, CutProvenance::IcPiConv)),
                CostStructure::ConcaveAllLinearInRivals => {
                    build_free_set_pi_conc(game, layout, i, &solution.x)
                        .map(|f| (f, CutProvenance::IcPiConc))
                }
                CostStructure::BilinearOwnRival => {
                    failures.push(format!(
                        "player {i}: bilinear cost admits no pihat-side free set"
                    ));
                    continue;
                }
            };
            match fs.and_then(|(f, prov)| {
                intersection_cut(problem, solution, &rays, &f, prov, scope, i)
            }) {
                Ok(c) => cuts.push(c),
                Err(e) => failures.push(format!("Q^pi player {i}: {e}")),
            }
        }
        if cuts.is_empty() {
            return Err(format!(
                "no intersection cut available: {}",
                failures.join("; ")
            ));
        }
        Ok(cuts)
    }

    fn process_node(&mut self, mut node: Node, deadline: Instant) -> Result<NodeOutcome, BncError> {
        let game = self.inst.game.clone();
        let mut rounds: u64 = 0;
        loop {
            let problem = self.node_problem(&node);
            let solution = solve_lp(&problem)?;
            self.stats.lp_solves += 1;
            if solution.status == LpStatus::Infeasible {
                return Ok(NodeOutcome::Pruned);
            }
            if solution.objective > self.tol.prune {
                return Ok(NodeOutcome::Pruned);
            }
            if let Some((var, value)) = self.branch_var(&solution.x) {
                self.branch(node, var, value);
                return Ok(NodeOutcome::Branched);
            }

            let cand = EqCandidate::from_lifted(&self.inst.layout, &solution.x);
            // Snap integral coordinates before the exact equilibrium check.
            let mut x = cand.x.clone();
            for &v in &self.inst.int_vars {
                if v < x.len() {
                    x[v] = x[v].round();
                }
            }
            let check = check_ne_with_tol(&game, &x, &self.alpha, &self.beta, self.tol.ne);
            self.stats.br_solves += game.n_players() as u64;
            if check.is_ne {
                return Ok(NodeOutcome::NeFound(node, x));
            }

            let new_cuts: Vec<Cut> = match game.mode {
                GameMode::Nep => {
                    let mut cuts = Vec::new();
                    let mut failures = Vec::new();
                    for &i in &check.violators {
                        match &check.br[i] {
                            Some(b) => {
                                match best_response_cut(&game, &self.inst.layout, i, &b.minimizer) {
                                    Ok(c) => cuts.push(c),
                                    Err(e) => failures.push(format!("player {i}: {e}")),
                                }
                            }
                            None => failures
                                .push(format!("player {i}: best response infeasible in NEP mode")),
                        }
                    }
                    if cuts.is_empty() {
                        return Ok(NodeOutcome::Stalled(format!(
                            "node {}: no best-response cut generated ({})",
                            node.id,
                            failures.join("; ")
                        )));
                    }
                    cuts
                }
                GameMode::Gnep => match self.gnep_cuts(&node, &problem, &solution, &cand, &check) {
                    Ok(c) => c,
                    Err(msg) => {
                        return Ok(NodeOutcome::Stalled(format!("node {}: {msg}", node.id)))
                    }
                },
            };

            let mut added = 0;
            for cut in new_cuts {
                let v = cut.violation(&solution.x);
                if v <= self.tol.cut {
                    continue;
                }
                self.stats.cuts.bump(cut.provenance);
                self.cut_log.push(CutRecord {
                    node_id: node.id,
                    cut: cut.clone(),
                    violation: v,
                    node_lower: node.lower.clone(),
                    node_upper: node.upper.clone(),
                });
                match cut.scope {
                    CutScope::Global => self.global_cuts.push(cut),
                    CutScope::Local(_) => node.local_cuts.push(cut),
                }
                added += 1;
            }
            if added == 0 {
                return Ok(NodeOutcome::Stalled(format!(
                    "node {}: generated cuts all below the violation threshold {}",
                    node.id, self.tol.cut
                )));
            }
            rounds += 1;
            if rounds > self.inst.cut_round_limit {
                return Ok(NodeOutcome::Stalled(format!(
                    "node {}: cut-loop safeguard ({} rounds) exceeded",
                    node.id, self.inst.cut_round_limit
                )));
            }
            if Instant::now() >= deadline {
                // Surfaced by the driver as TimeLimit; re-open the node.
                self.stack.push(node);
                return Ok(NodeOutcome::Branched);
            }
        }
    }

    fn run(
        &mut self,
        limits: &Limits,
        started: Instant,
    ) -> (SolveStatus, Option<Vec<f64>>, Option<String>) {
        let deadline = started + std::time::Duration::from_secs_f64(limits.time.max(0.0));
        let mut ne_node: Option<Node> = None;
        let mut witness: Option<Vec<f64>> = None;
        let mut diagnostic: Option<String> = None;
        let status = loop {
            if Instant::now() >= deadline {
                break SolveStatus::TimeLimit;
            }
            let node = match self.stack.pop() {
                Some(n) => n,
                None => break SolveStatus::NoNeExists,
            };
            if self.stats.nodes >= limits.nodes {
                self.stack.push(node);
                break SolveStatus::NodeLimit;
            }
            self.stats.nodes += 1;
            match self.process_node(node, deadline) {
                Ok(NodeOutcome::Pruned) => {
                    self.notify(None);
                }
                Ok(NodeOutcome::Branched) => {
                    self.notify(None);
                    if Instant::now() >= deadline {
                        break SolveStatus::TimeLimit;
                    }
                }
                Ok(NodeOutcome::NeFound(node, x)) => {
                    self.notify(Some(&node));
                    witness = Some(x);
                    ne_node = Some(node);
                    break SolveStatus::NeFound;
                }
                Ok(NodeOutcome::Stalled(msg)) => {
                    diagnostic = Some(msg);
                    break SolveStatus::CutLimit;
                }
                Err(e) => {
                    diagnostic = Some(format!("internal solver error: {e}"));
                    break SolveStatus::CutLimit;
                }
            }
        };
        // The equilibrium node stays unexplored for the adaptive search.
        if let Some(n) = ne_node {
            self.stack.push(n);
        }
        (status, witness, diagnostic)
    }
}

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

fn root_node(inst: &Instance) -> Node {
    Node {
        id: 0,
        parent: None,
        depth: 0,
        lower: inst.lower.clone(),
        upper: inst.upper.clone(),
        local_cuts: Vec::new(),
    }
}

fn run_solver(
    game: &Game,
    alpha: &[f64],
    beta: &[f64],
    limits: &Limits,
    stack: Vec<Node>,
    global_cuts: Vec<Cut>,
    next_id: u64,
    observer: Option<&mut dyn FnMut(&[NodeSystem])>,
) -> Result<SolveResult, BncError> {
    validate_approximation(game, alpha, beta)?;
    let started = Instant::now();
    let inst = Instance::new(game)?;
    let lambda_rows = inst.lambda_rows(alpha, beta);
    let mut solver = Solver {
        inst,
        alpha: alpha.to_vec(),
        beta: beta.to_vec(),
        lambda_rows,
        tol: limits.tol,
        global_cuts,
        stack,
        next_id,
        stats: Stats::default(),
        cut_log: Vec::new(),
        observer,
    };
    let (status, witness, diagnostic) = solver.run(limits, started);
    Ok(SolveResult {
        status,
        witness,
        alpha: alpha.to_vec(),
        beta: beta.to_vec(),
        stats: solver.stats,
        wall_time_s: started.elapsed().as_secs_f64(),
        frontier: Frontier {
            nodes: solver.stack,
            global_cuts: solver.global_cuts,
            alpha: alpha.to_vec(),
            beta: beta.to_vec(),
            next_id: solver.next_id,
        },
        cut_log: solver.cut_log,
        diagnostic,
    })
}

/// Full solve from a fresh root.
pub fn solve(
    game: &Game,
    alpha: &[f64],
    beta: &[f64],
    limits: &Limits,
) -> Result<SolveResult, BncError> {
    solve_with_observer(game, alpha, beta, limits, None)
}

/// Like [`solve`] but invokes `observer` with the systems of all live leaves
/// after every node event (prune, branch, equilibrium).
pub fn solve_with_observer(
    game: &Game,
    alpha: &[f64],
    beta: &[f64],
    limits: &Limits,
    observer: Option<&mut dyn FnMut(&[NodeSystem])>,
) -> Result<SolveResult, BncError> {
    validate_approximation(game, alpha, beta)?;
    let inst = Instance::new(game)?;
    let root = root_node(&inst);
    run_solver(
        game,
        alpha,
        beta,
        limits,
        vec![root],
        Vec::new(),
        1,
        observer,
    )
}

/// Resumes a retained frontier under new approximation parameters. The
/// caller (the adaptive module) is responsible for retargeting.
pub fn resume(
    game: &Game,
    frontier: Frontier,
    limits: &Limits,
    observer: Option<&mut dyn FnMut(&[NodeSystem])>,
) -> Result<SolveResult, BncError> {
    let next_id = frontier.next_id;
    run_solver(
        game,
        &frontier.alpha.clone(),
        &frontier.beta.clone(),
        limits,
        frontier.nodes,
        frontier.global_cuts,
        next_id,
        observer,
    )
}

impl Frontier {
    /// Rewrites the frontier for a smaller uniform alpha: lambda-rows are
    /// rebuilt by [`resume`] from the stored alpha, branching bounds and
    /// Global cuts are kept, Local cuts are kept iff `reuse_cuts`.
    pub fn retarget(mut self, alpha_new: f64, reuse_cuts: bool) -> Result<Frontier, BncError> {
        if self.alpha.iter().any(|&a| alpha_new >= a) {
            return Err(BncError::InvalidApproximation(format!(
                "retarget to alpha = {alpha_new} is not a decrease from {:?}",
                self.alpha
            )));
        }
        if alpha_new < 1.0 {
            return Err(BncError::InvalidApproximation(format!(
                "alpha = {alpha_new} < 1"
            )));
        }
        self.alpha = vec![alpha_new; self.alpha.len()];
        if !reuse_cuts {
            for node in &mut self.nodes {
                node.local_cuts.clear();
            }
            self.global_cuts.retain(|c| c.scope == CutScope::Global);
        }
        Ok(self)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Builds the node systems of a frontier under its stored parameters —
/// used by the Proposition 5.1 feasibility test.
pub fn frontier_systems(game: &Game, frontier: &Frontier) -> Result<Vec<NodeSystem>, BncError> {
    let inst = Instance::new(game)?;
    let lambda_rows = inst.lambda_rows(&frontier.alpha, &frontier.beta);
    Ok(frontier
        .nodes
        .iter()
        .map(|node| {
            let mut rows = inst.fixed_rows.clone();
            rows.extend(lambda_rows.iter().cloned());
            rows.extend(frontier.global_cuts.iter().map(|c| c.row.clone()));
            rows.extend(node.local_cuts.iter().map(|c| c.row.clone()));
            NodeSystem {
                node_id: node.id,
                lower: node.lower.clone(),
                upper: node.upper.clone(),
                rows,
            }
        })
        .collect())
}

/// Lifts an oracle profile to an eq-tuple in the lifted space of `game`,
/// with implied auxiliary values in NEP mode.
pub fn lift_eq_tuple(game: &Game, cand: &EqCandidate) -> Result<Vec<f64>, BncError> {
    let ext = match game.mode {
        GameMode::Nep => Some(linearize_bilinear(game)?),
        GameMode::Gnep => None,
    };
    let layout = LiftedLayout::for_game(game, ext.as_ref());
    Ok(cand.to_lifted(&layout, ext.as_ref()))
}

/// Deterministic textual fingerprint of a result (wall time masked) for the
/// determinism acceptance check.
pub fn fingerprint(result: &SolveResult) -> String {
    let mut doc = serde_json::to_value(result.document()).expect("document serializes");
    if let Some(obj) = doc.as_object_mut() {
        obj.insert("wall_time_s".into(), serde_json::Value::from(0.0));
    }
    let frontier: Vec<(u64, usize)> = result
        .frontier
        .nodes
        .iter()
        .map(|n| (n.id, n.local_cuts.len()))
        .collect();
    format!("{doc}|frontier={frontier:?}|cuts={}", result.cut_log.len())
}

/// Convenience used by tests: map of player -> number of logged BR cuts.
pub fn br_cuts_by_player(log: &[CutRecord]) -> BTreeMap<usize, u64> {
    let mut m = BTreeMap::new();
    for rec in log {
        if rec.cut.provenance == CutProvenance::BrCut {
            *m.entry(rec.cut.player).or_insert(0) += 1;
        }
    }
    m
}
