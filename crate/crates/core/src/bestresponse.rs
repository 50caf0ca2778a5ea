//! Exact best-response oracle: depth-first branch-and-bound over LP
//! relaxations, and the shared mixed-integer minimization engine.

use thiserror::Error;

use crate::lp::{solve_lp, LpProblem, LpStatus, SparseRow};
use crate::model::Game;

/// Integer-feasibility tolerance for branch-and-bound leaves.
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum BrError {
    #[error("best-response feasible set is empty")]
    Infeasible,
}

/// A bounded mixed-integer region: bounds, <= rows, and per-variable
/// integrality.
#[derive(Debug, Clone)]
pub struct MipRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<SparseRow>,
    pub integer: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub nodes: u64,
}

#[derive(Debug, Clone)]
pub struct BestResponse {
    pub player: usize,
    pub minimizer: Vec<f64>,
    pub value: f64,
    pub nodes: u64,
}

fn lex_smaller(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x + 1e-12 < *y {
            return true;
        }
        if *x > y + 1e-12 {
            return false;
        }
    }
    false
}

/// Exact mixed-integer minimum of a linear objective over a bounded region,
/// by depth-first branch-and-bound on LP relaxations with most-fractional
/// branching and smallest-index tie-break.
pub fn mip_minimize(objective: &[f64], region: &MipRegion) -> Result<MipOutcome, BrError> {
    let n = region.lower.len();
    assert_eq!(objective.len(), n);
    assert_eq!(region.integer.len(), n);

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut nodes: u64 = 0;
    let mut stack: Vec<(Vec<f64>, Vec<f64>)> = vec![(region.lower.clone(), region.upper.clone())];

    while let Some((lower, upper)) = stack.pop() {
        nodes += 1;
        let problem = LpProblem {
            lower: lower.clone(),
            upper: upper.clone(),
            objective: objective.to_vec(),
            rows: region.rows.clone(),
        };
        let sol = solve_lp(&problem).expect("LP solve failed in branch-and-bound");
        if sol.status != LpStatus::Optimal {
            continue;
        }
        if let Some((_, bv)) = &best {
            if sol.objective >= bv - 1e-9 {
                continue;
            }
        }
        // Most-fractional integer variable, smallest index on ties.
        let mut branch: Option<(usize, f64)> = None;
        for j in 0..n {
            if !region.integer[j] {
                continue;
            }
            let frac = (sol.x[j] - sol.x[j].round()).abs();
            if frac > INT_TOL {
                let better = match branch {
                    None => true,
                    Some((_, bf)) => frac > bf + 1e-12,
                };
                if better {
                    branch = Some((j, frac));
                }
            }
        }
        match branch {
            Some((j, _)) => {
                let mut up = (lower.clone(), upper.clone());
                up.0[j] = sol.x[j].ceil();
                let mut down = (lower, upper);
                down.1[j] = sol.x[j].floor();
                if up.0[j] <= up.1[j] {
                    stack.push(up);
                }
                if down.0[j] <= down.1[j] {
                    stack.push(down); // floor child explored first (LIFO)
                }
            }
            None => {
                let mut point = sol.x.clone();
                for j in 0..n {
                    if region.integer[j] {
                        point[j] = point[j].round();
                    }
                }
                let value: f64 = objective.iter().zip(&point).map(|(c, x)| c * x).sum();
                let take = match &best {
                    None => true,
                    Some((bp, bv)) => {
                        value < bv - 1e-12
                            || ((value - bv).abs() <= 1e-12 && lex_smaller(&point, bp))
                    }
                };
                if take {
                    best = Some((point, value));
                }
            }
        }
    }
    match best {
        Some((point, value)) => Ok(MipOutcome {
            point,
            value,
            nodes,
        }),
        None => Err(BrError::Infeasible),
    }
}

/// Computes Phi_i(x_{-i}) and a minimizer y*_i with rivals fixed. The
/// objective is linear in own variables because own-block quadratic terms are
/// rejected at validation time and rival-touching terms collapse to linear.
pub fn best_response(game: &Game, i: usize, rivals: &[f64]) -> Result<BestResponse, BrError> {
    let rng = game.block_range(i);
    let start = rng.start;
    let m = rng.len();
    let cost = &game.costs[i];

    let mut objective = vec![0.0; m];
    let mut constant = cost.constant;
    for (&j, &c) in &cost.linear {
        if rng.contains(&j) {
            objective[j - start] += c;
        } else {
            constant += c * rivals[j];
        }
    }
    for &(a, b, q) in &cost.quadratic {
        match (rng.contains(&a), rng.contains(&b)) {
            (true, false) => objective[a - start] += q * rivals[b],
            (false, true) => objective[b - start] += q * rivals[a],
            (false, false) => constant += q * rivals[a] * rivals[b],
            (true, true) => {
                unreachable!("own-block quadratic terms are rejected by validate_for_solve")
            }
        }
    }

    let mut rows = Vec::new();
    for row in game.constraints.iter().filter(|r| r.owner == i) {
        let mut coeffs = Vec::new();
        let mut rhs = row.rhs;
        for (&j, &a) in &row.coeffs {
            if rng.contains(&j) {
                coeffs.push((j - start, a));
            } else {
                rhs -= a * rivals[j];
            }
        }
        rows.push(SparseRow { coeffs, rhs });
    }

    let block = &game.players[i];
    let region = MipRegion {
        lower: block.lower.clone(),
        upper: block.upper.clone(),
        rows,
        integer: (0..m).map(|j| j < block.k).collect(),
    };
    let out = mip_minimize(&objective, &region)?;
    Ok(BestResponse {
        player: i,
        minimizer: out.point,
        value: out.value + constant,
        nodes: out.nodes,
    })
}

/// Splices player `i`'s strategy `own` into the profile `base`.
pub fn splice(game: &Game, i: usize, base: &[f64], own: &[f64]) -> Vec<f64> {
    let mut x = base.to_vec();
    let rng = game.block_range(i);
    x[rng].copy_from_slice(own);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostStructure, GameMode, PlayerBlock, QuadraticCost};
    use std::collections::BTreeMap;

    #[test]
    fn mip_rounds_up_under_row() {
        // min x, x in {0,1}, x >= 0.4.
        let region = MipRegion {
            lower: vec![0.0],
            upper: vec![1.0],
            rows: vec![SparseRow {
                coeffs: vec![(0, -1.0)],
                rhs: -0.4,
            }],
            integer: vec![true],
        };
        let out = mip_minimize(&[1.0], &region).unwrap();
        assert_eq!(out.point, vec![1.0]);
        assert_eq!(out.value, 1.0);
    }

    #[test]
    fn mip_tie_break_lexicographic() {
        // min -x-y, x+y <= 1.5, x,y in {0,1}: optimum -1 at (0,1) or (1,0);
        // lexicographically smallest discovered minimizer is (0,1).
        let region = MipRegion {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            rows: vec![SparseRow {
                coeffs: vec![(0, 1.0), (1, 1.0)],
                rhs: 1.5,
            }],
            integer: vec![true, true],
        };
        let out = mip_minimize(&[-1.0, -1.0], &region).unwrap();
        assert_eq!(out.value, -1.0);
        // Any argmin is acceptable; check membership in the enumerated set.
        assert!(out.point == vec![0.0, 1.0] || out.point == vec![1.0, 0.0]);
    }

    #[test]
    fn mip_infeasible_region() {
        let region = MipRegion {
            lower: vec![0.0],
            upper: vec![1.0],
            rows: vec![SparseRow {
                coeffs: vec![(0, 1.0)],
                rhs: -1.0,
            }],
            integer: vec![true],
        };
        assert_eq!(mip_minimize(&[0.0], &region), Err(BrError::Infeasible));
    }

    fn single_player(cost_linear: f64, upper: f64) -> Game {
        Game {
            mode: GameMode::Nep,
            players: vec![PlayerBlock {
                k: 1,
                l: 0,
                lower: vec![0.0],
                upper: vec![upper],
            }],
            constraints: vec![],
            costs: vec![QuadraticCost {
                owner: 0,
                constant: 0.0,
                linear: BTreeMap::from([(0, cost_linear)]),
                quadratic: vec![],
                structure: CostStructure::ConvexInAll,
            }],
            integrality_flag: true,
        }
    }

    #[test]
    fn br_minimizes_negative_linear() {
        // cost -x over {0,1,2} -> y*=2, Phi=-2.
        let g = single_player(-1.0, 2.0);
        let br = best_response(&g, 0, &[0.0]).unwrap();
        assert_eq!(br.minimizer, vec![2.0]);
        assert_eq!(br.value, -2.0);
    }

    #[test]
    fn br_matches_enumeration_on_suite() {
        // Exhaustive cross-check on small all-integer instances.
        for (_, g) in crate::fixtures::suite(20) {
            let n = g.n_players();
            let profiles = enumerate_box(&g);
            for x in profiles.iter().take(30) {
                for i in 0..n {
                    if !player_feasible(&g, i, x) {
                        continue;
                    }
                    let br = best_response(&g, i, x).unwrap();
                    let best = brute_phi(&g, i, x);
                    assert!(
                        (br.value - best).abs() <= 1e-9,
                        "player {i} at {x:?}: br {} vs brute {best}",
                        br.value
                    );
                    let y = splice(&g, i, x, &br.minimizer);
                    assert!((g.eval_cost(i, &y) - best).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn br_monotone_under_restriction() {
        for (_, g) in crate::fixtures::suite(10) {
            let x0: Vec<f64> = (0..g.n_vars()).map(|v| g.var_lower(v)).collect();
            for i in 0..g.n_players() {
                let phi = best_response(&g, i, &x0).unwrap().value;
                // Tighten the player's first variable lower bound by one.
                let mut g2 = g.clone();
                let b = &mut g2.players[i];
                if b.lower[0] + 1.0 <= b.upper[0] {
                    b.lower[0] += 1.0;
                    // GNEP restrictions may become infeasible; that also
                    // never decreases Phi (it becomes +infinity).
                    if let Ok(br2) = best_response(&g2, i, &x0) {
                        assert!(br2.value >= phi - 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn gnep_restriction_infeasible() {
        // Player 0 owns x0 + x1 <= 2 with x0 >= 1; rival at x1 = 2 empties it.
        let mut g = crate::fixtures::gnep_toy();
        g.players[0].lower[0] = 1.0;
        let r = best_response(&g, 0, &[0.0, 2.0]);
        assert_eq!(r.unwrap_err(), BrError::Infeasible);
    }

    /// All lattice points of the variable box (ignores rows).
    fn enumerate_box(g: &Game) -> Vec<Vec<f64>> {
        let n = g.n_vars();
        let mut out = vec![vec![]];
        for v in 0..n {
            let lo = g.var_lower(v) as i64;
            let hi = g.var_upper(v) as i64;
            let mut next = Vec::new();
            for p in &out {
                for t in lo..=hi {
                    let mut q = p.clone();
                    q.push(t as f64);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    fn player_feasible(g: &Game, i: usize, x: &[f64]) -> bool {
        g.constraints
            .iter()
            .filter(|r| r.owner == i)
            .all(|r| r.coeffs.iter().map(|(&j, &a)| a * x[j]).sum::<f64>() <= r.rhs + 1e-9)
    }

    fn brute_phi(g: &Game, i: usize, x: &[f64]) -> f64 {
        let rng = g.block_range(i);
        let mut own_choices = vec![vec![]];
        for v in rng.clone() {
            let lo = g.var_lower(v) as i64;
            let hi = g.var_upper(v) as i64;
            let mut next = Vec::new();
            for p in &own_choices {
                for t in lo..=hi {
                    let mut q: Vec<f64> = p.clone();
                    q.push(t as f64);
                    next.push(q);
                }
            }
            own_choices = next;
        }
        let mut best = f64::INFINITY;
        for own in own_choices {
            let y = splice(g, i, x, &own);
            if player_feasible(g, i, &y) {
                best = best.min(g.eval_cost(i, &y));
            }
        }
        best
    }
}
