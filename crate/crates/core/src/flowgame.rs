//! Implementation games: integral-flow players plus a pricing authority,
//! generated randomly and compiled into the NEP instance format.
//!
//! Encoding layout: player i owns one integer variable per edge (its flow)
//! followed by one activation binary z_i; the authority owns one continuous
//! price per edge. z_i = 0 forces the 0-flow, z_i = 1 the flow polyhedron,
//! realizing the union-of-sets strategy space with linear rows.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bestresponse::best_response;
use crate::lp::{solve_lp, LpProblem, LpStatus, SparseRow};
use crate::model::{CostStructure, Game, GameMode, LinearRow, PlayerBlock, QuadraticCost};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid price bound: {0}")]
    InvalidBound(String),
    #[error("invalid flow instance: {0}")]
    Validation(String),
    #[error("generation failure: {0}")]
    GenerationFailure(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// A flow-pricing instance over a directed graph. One record per flow
/// player; the authority is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowInstance {
    pub n_nodes: usize,
    /// Directed edges as (tail, head) pairs.
    pub edges: Vec<(usize, usize)>,
    pub sources: Vec<usize>,
    pub sinks: Vec<usize>,
    pub demands: Vec<i64>,
    /// Per player, per edge utility mu_i >= 0.
    pub mu: Vec<Vec<f64>>,
    /// Per-edge own-strategy bound c_e.
    pub capacity: Vec<i64>,
    /// Per-edge target load u_e >= 0.
    pub target_load: Vec<f64>,
    /// Per-edge price upper bound.
    pub p_max: Vec<f64>,
}

impl FlowInstance {
    pub fn n_players(&self) -> usize {
        self.demands.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// The strict lower bound the price box must exceed:
    /// |E| * max mu * max c.
    pub fn p_max_floor(&self) -> f64 {
        let max_mu = self.mu.iter().flatten().cloned().fold(0.0f64, f64::max);
        let max_c = self.capacity.iter().cloned().max().unwrap_or(0) as f64;
        self.n_edges() as f64 * max_mu * max_c
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let e = self.n_edges();
        let n = self.n_players();
        if self.sources.len() != n
            || self.sinks.len() != n
            || self.mu.len() != n
            || self.capacity.len() != e
            || self.target_load.len() != e
            || self.p_max.len() != e
        {
            return Err(FlowError::Validation("inconsistent field lengths".into()));
        }
        for &(a, b) in &self.edges {
            if a >= self.n_nodes || b >= self.n_nodes {
                return Err(FlowError::Validation("edge endpoint out of range".into()));
            }
        }
        for i in 0..n {
            if self.demands[i] < 1 {
                return Err(FlowError::Validation(format!(
                    "player {i}: demand must be >= 1"
                )));
            }
            if self.mu[i].len() != e {
                return Err(FlowError::Validation(format!(
                    "player {i}: mu length mismatch"
                )));
            }
            if self.mu[i].iter().any(|&m| m < 0.0) {
                return Err(FlowError::Validation(format!(
                    "player {i}: mu must be >= 0"
                )));
            }
            if !self.has_path(self.sources[i], self.sinks[i]) {
                return Err(FlowError::Validation(format!(
                    "player {i}: no path from source to sink"
                )));
            }
        }
        let floor = self.p_max_floor();
        for (e_idx, &pm) in self.p_max.iter().enumerate() {
            if pm <= floor {
                return Err(FlowError::InvalidBound(format!(
                    "p_max[{e_idx}] = {pm} must strictly exceed |E|*max(mu)*max(c) = {floor}"
                )));
            }
        }
        Ok(())
    }

    fn has_path(&self, s: usize, t: usize) -> bool {
        let mut seen = vec![false; self.n_nodes];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            if v == t {
                return true;
            }
            for &(a, b) in &self.edges {
                if a == v && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        false
    }

    /// Global variable index of x_{i,e} in the encoded game.
    pub fn var_flow(&self, i: usize, e: usize) -> usize {
        i * (self.n_edges() + 1) + e
    }

    /// Global variable index of the activation binary z_i.
    pub fn var_activation(&self, i: usize) -> usize {
        i * (self.n_edges() + 1) + self.n_edges()
    }

    /// Global variable index of the price p_e.
    pub fn var_price(&self, e: usize) -> usize {
        self.n_players() * (self.n_edges() + 1) + e
    }

    /// Compiles the instance into an NEP-mode Game. Player i gets integer
    /// edge flows in [0, c] plus an activation binary with rows
    /// A_G x_i = b_i z_i and x_{i,e} <= c_e z_i; the authority gets the
    /// continuous price box [0, p_max].
    pub fn encode(&self) -> Result<Game, FlowError> {
        self.validate()?;
        let e = self.n_edges();
        let n = self.n_players();

        let mut players = Vec::with_capacity(n + 1);
        for _ in 0..n {
            let mut lower = vec![0.0; e + 1];
            let mut upper: Vec<f64> = self.capacity.iter().map(|&c| c as f64).collect();
            upper.push(1.0);
            lower[e] = 0.0;
            players.push(PlayerBlock {
                k: e + 1,
                l: 0,
                lower,
                upper,
            });
        }
        players.push(PlayerBlock {
            k: 0,
            l: e,
            lower: vec![0.0; e],
            upper: self.p_max.clone(),
        });

        let mut constraints = Vec::new();
        for i in 0..n {
            let zi = self.var_activation(i);
            for v in 0..self.n_nodes {
                // Flow conservation: out - in - b_v z = 0 as two <= rows.
                let mut coeffs: BTreeMap<usize, f64> = BTreeMap::new();
                for (e_idx, &(a, b)) in self.edges.iter().enumerate() {
                    if a == v {
                        *coeffs.entry(self.var_flow(i, e_idx)).or_insert(0.0) += 1.0;
                    }
                    if b == v {
                        *coeffs.entry(self.var_flow(i, e_idx)).or_insert(0.0) -= 1.0;
                    }
                }
                let b_v = if v == self.sources[i] {
                    self.demands[i] as f64
                } else if v == self.sinks[i] {
                    -(self.demands[i] as f64)
                } else {
                    0.0
                };
                if b_v != 0.0 {
                    coeffs.insert(zi, -b_v);
                }
                coeffs.retain(|_, a| *a != 0.0);
                if coeffs.is_empty() {
                    continue;
                }
                constraints.push(LinearRow {
                    owner: i,
                    coeffs: coeffs.clone(),
                    rhs: 0.0,
                });
                let neg: BTreeMap<usize, f64> = coeffs.iter().map(|(&j, &a)| (j, -a)).collect();
                constraints.push(LinearRow {
                    owner: i,
                    coeffs: neg,
                    rhs: 0.0,
                });
            }
            for e_idx in 0..e {
                constraints.push(LinearRow {
                    owner: i,
                    coeffs: BTreeMap::from([
                        (self.var_flow(i, e_idx), 1.0),
                        (zi, -(self.capacity[e_idx] as f64)),
                    ]),
                    rhs: 0.0,
                });
            }
        }

        let mut costs = Vec::with_capacity(n + 1);
        for i in 0..n {
            // pi_i = (p - mu_i)^T x_i.
            let mut linear = BTreeMap::new();
            let mut quadratic = Vec::new();
            for e_idx in 0..e {
                if self.mu[i][e_idx] != 0.0 {
                    linear.insert(self.var_flow(i, e_idx), -self.mu[i][e_idx]);
                }
                quadratic.push((self.var_flow(i, e_idx), self.var_price(e_idx), 1.0));
            }
            costs.push(QuadraticCost {
                owner: i,
                constant: 0.0,
                linear,
                quadratic,
                structure: CostStructure::BilinearOwnRival,
            });
        }
        // Authority: pi = (u - l(x))^T p.
        let mut linear = BTreeMap::new();
        let mut quadratic = Vec::new();
        for e_idx in 0..e {
            if self.target_load[e_idx] != 0.0 {
                linear.insert(self.var_price(e_idx), self.target_load[e_idx]);
            }
            for i in 0..n {
                quadratic.push((self.var_flow(i, e_idx), self.var_price(e_idx), -1.0));
            }
        }
        costs.push(QuadraticCost {
            owner: n,
            constant: 0.0,
            linear,
            quadratic,
            structure: CostStructure::BilinearOwnRival,
        });

        let game = Game {
            mode: GameMode::Nep,
            players,
            constraints,
            costs,
            integrality_flag: true,
        };
        game.validate_for_solve()
            .map_err(|err| FlowError::Validation(err.to_string()))?;
        Ok(game)
    }

    /// Recovers (flows, activations, prices) from an encoded-game profile.
    pub fn decode(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let n = self.n_players();
        let e = self.n_edges();
        let flows = (0..n)
            .map(|i| (0..e).map(|e_idx| x[self.var_flow(i, e_idx)]).collect())
            .collect();
        let acts = (0..n).map(|i| x[self.var_activation(i)]).collect();
        let prices = (0..e).map(|e_idx| x[self.var_price(e_idx)]).collect();
        (flows, acts, prices)
    }

    /// Per-edge load of a joint flow.
    pub fn load(&self, flows: &[Vec<f64>]) -> Vec<f64> {
        (0..self.n_edges())
            .map(|e_idx| flows.iter().map(|f| f[e_idx]).sum())
            .collect()
    }

    /// The four weak-implementation conditions for (x, p):
    /// (i) load at most u, (ii) x is an equilibrium of the flow players at
    /// fixed p, (iii) strictly underused edges have zero price, (iv) p in
    /// the price box.
    pub fn check_implementation(&self, flows: &[Vec<f64>], p: &[f64]) -> [bool; 4] {
        let e = self.n_edges();
        let load = self.load(flows);
        let load_ok = (0..e).all(|k| load[k] <= self.target_load[k] + 1e-9);

        let game = self.encode().expect("instance validated before checking");
        let mut profile = vec![0.0; game.n_vars()];
        for i in 0..self.n_players() {
            for k in 0..e {
                profile[self.var_flow(i, k)] = flows[i][k];
            }
            let active = flows[i].iter().any(|&f| f != 0.0);
            profile[self.var_activation(i)] = if active { 1.0 } else { 0.0 };
        }
        for k in 0..e {
            profile[self.var_price(k)] = p[k];
        }
        let mut eq_ok = game.is_feasible(&profile, 1e-9);
        if eq_ok {
            for i in 0..self.n_players() {
                let cost = game.eval_cost(i, &profile);
                let phi = best_response(&game, i, &profile)
                    .expect("NEP flow player set is never empty")
                    .value;
                if cost > phi + 1e-8 {
                    eq_ok = false;
                    break;
                }
            }
        }

        let price_zero_ok =
            (0..e).all(|k| load[k] >= self.target_load[k] - 1e-9 || p[k].abs() <= 1e-9);
        let box_ok = (0..e).all(|k| p[k] >= -1e-9 && p[k] <= self.p_max[k] + 1e-9);
        [load_ok, eq_ok, price_zero_ok, box_ok]
    }

    /// Total-unimodularity fast path for a flow player's best response at
    /// fixed prices: one LP over the flow polyhedron (integral vertex by
    /// network-matrix structure), compared against the 0-flow.
    pub fn flow_best_response(&self, i: usize, p: &[f64]) -> (Vec<f64>, f64) {
        let e = self.n_edges();
        let objective: Vec<f64> = (0..e).map(|k| p[k] - self.mu[i][k]).collect();
        let mut rows = Vec::new();
        for v in 0..self.n_nodes {
            let mut coeffs = Vec::new();
            for (k, &(a, b)) in self.edges.iter().enumerate() {
                let mut c = 0.0;
                if a == v {
                    c += 1.0;
                }
                if b == v {
                    c -= 1.0;
                }
                if c != 0.0 {
                    coeffs.push((k, c));
                }
            }
            let b_v = if v == self.sources[i] {
                self.demands[i] as f64
            } else if v == self.sinks[i] {
                -(self.demands[i] as f64)
            } else {
                0.0
            };
            if coeffs.is_empty() {
                continue;
            }
            rows.push(SparseRow {
                coeffs: coeffs.clone(),
                rhs: b_v,
            });
            let neg: Vec<(usize, f64)> = coeffs.iter().map(|&(j, a)| (j, -a)).collect();
            rows.push(SparseRow {
                coeffs: neg,
                rhs: -b_v,
            });
        }
        let problem = LpProblem {
            lower: vec![0.0; e],
            upper: self.capacity.iter().map(|&c| c as f64).collect(),
            objective,
            rows,
        };
        let sol = solve_lp(&problem).expect("LP solve failed on the flow polyhedron");
        if sol.status == LpStatus::Optimal && sol.objective < 0.0 {
            let flow: Vec<f64> = sol.x.iter().map(|v| v.round()).collect();
            (flow, sol.objective)
        } else {
            (vec![0.0; e], 0.0)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenParams {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_players: usize,
    pub demand_range: (i64, i64),
    pub mu_range: (i64, i64),
    pub seed: u64,
    /// All players share one source and one utility vector (used by the
    /// implementability ground-truth checks).
    pub single_source_identical_mu: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_nodes: 3,
            n_edges: 4,
            n_players: 2,
            demand_range: (1, 2),
            mu_range: (0, 4),
            seed: 0,
            single_source_identical_mu: false,
        }
    }
}

/// Deterministic random instance: connected digraph (spanning tree oriented
/// away from node 0 plus extra random edges), terminal pairs with existing
/// paths, u sampled as the load of a random feasible joint flow.
pub fn generate(params: &GenParams) -> Result<FlowInstance, FlowError> {
    if params.n_nodes < 2 || params.n_edges < params.n_nodes - 1 {
        return Err(FlowError::GenerationFailure(
            "need at least 2 nodes and edges >= nodes-1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(params.n_edges);
    for v in 1..params.n_nodes {
        let parent = rng.gen_range(0..v);
        edges.push((parent, v));
    }
    while edges.len() < params.n_edges {
        let a = rng.gen_range(0..params.n_nodes);
        let b = rng.gen_range(0..params.n_nodes);
        if a != b {
            edges.push((a, b));
        }
    }

    let max_demand = params.demand_range.1.max(1);
    let mut inst = FlowInstance {
        n_nodes: params.n_nodes,
        edges,
        sources: vec![],
        sinks: vec![],
        demands: vec![],
        mu: vec![],
        capacity: vec![max_demand * params.n_players.max(1) as i64; params.n_edges],
        target_load: vec![0.0; params.n_edges],
        p_max: vec![0.0; params.n_edges],
    };

    let shared_mu: Vec<f64> = (0..params.n_edges)
        .map(|_| rng.gen_range(params.mu_range.0.max(0)..=params.mu_range.1.max(0)) as f64)
        .collect();
    for i in 0..params.n_players {
        let (s, t) = pick_terminals(&inst, params, &mut rng, i)?;
        inst.sources.push(s);
        inst.sinks.push(t);
        inst.demands
            .push(rng.gen_range(params.demand_range.0.max(1)..=max_demand));
        if params.single_source_identical_mu {
            inst.mu.push(shared_mu.clone());
        } else {
            inst.mu.push(
                (0..params.n_edges)
                    .map(|_| {
                        rng.gen_range(params.mu_range.0.max(0)..=params.mu_range.1.max(0)) as f64
                    })
                    .collect(),
            );
        }
    }

    // Target load: route each player along a random path and record the load.
    let mut load = vec![0.0; params.n_edges];
    for i in 0..params.n_players {
        let path = random_path(&inst, inst.sources[i], inst.sinks[i], &mut rng)
            .ok_or_else(|| FlowError::GenerationFailure("no path during load sampling".into()))?;
        for e_idx in path {
            load[e_idx] += inst.demands[i] as f64;
        }
    }
    inst.target_load = load;

    let pm = inst.p_max_floor().floor() + 1.0;
    inst.p_max = vec![pm; params.n_edges];
    inst.validate()?;
    Ok(inst)
}

fn pick_terminals(
    inst: &FlowInstance,
    params: &GenParams,
    rng: &mut ChaCha8Rng,
    player: usize,
) -> Result<(usize, usize), FlowError> {
    for _ in 0..200 {
        let s = if params.single_source_identical_mu {
            0
        } else {
            rng.gen_range(0..inst.n_nodes)
        };
        let t = rng.gen_range(0..inst.n_nodes);
        if s != t && inst.has_path(s, t) {
            return Ok((s, t));
        }
    }
    Err(FlowError::GenerationFailure(format!(
        "no reachable terminal pair for player {player} after 200 draws"
    )))
}

/// A random simple directed path as a list of edge indices.
fn random_path(
    inst: &FlowInstance,
    s: usize,
    t: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<usize>> {
    // Randomized DFS over simple paths.
    fn dfs(
        inst: &FlowInstance,
        v: usize,
        t: usize,
        rng: &mut ChaCha8Rng,
        visited: &mut Vec<bool>,
    ) -> Option<Vec<usize>> {
        if v == t {
            return Some(vec![]);
        }
        let mut outs: Vec<usize> = (0..inst.edges.len())
            .filter(|&k| inst.edges[k].0 == v && !visited[inst.edges[k].1])
            .collect();
        // Fisher-Yates shuffle for a seeded random order.
        for i in (1..outs.len()).rev() {
            let j = rng.gen_range(0..=i);
            outs.swap(i, j);
        }
        for k in outs {
            let next = inst.edges[k].1;
            visited[next] = true;
            if let Some(mut rest) = dfs(inst, next, t, rng, visited) {
                rest.insert(0, k);
                return Some(rest);
            }
            visited[next] = false;
        }
        None
    }
    let mut visited = vec![false; inst.n_nodes];
    visited[s] = true;
    dfs(inst, s, t, rng, &mut visited)
}

pub fn load_flow_instance(document: &str) -> Result<FlowInstance, FlowError> {
    let inst: FlowInstance =
        serde_json::from_str(document).map_err(|e| FlowError::Parse(e.to_string()))?;
    inst.validate()?;
    Ok(inst)
}

pub fn serialize_flow_instance(inst: &FlowInstance) -> String {
    serde_json::to_string_pretty(inst).expect("flow instance serialization cannot fail")
}
