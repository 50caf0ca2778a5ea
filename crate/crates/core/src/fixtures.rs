//! Shared desk-scale instances and seeded random suites used across unit and
//! integration tests, plus the hand-derived ground-truth games referenced in
//! documentation examples.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flowgame::FlowInstance;
use crate::model::{CostStructure, Game, GameMode, LinearRow, PlayerBlock, QuadraticCost};

/// T1: one player, pi = x over x in {0, 1}. Exact NE at x = 0, alpha_min = 1.
pub fn t1() -> Game {
    Game {
        mode: GameMode::Nep,
        players: vec![PlayerBlock {
            k: 1,
            l: 0,
            lower: vec![0.0],
            upper: vec![1.0],
        }],
        constraints: vec![],
        costs: vec![QuadraticCost {
            owner: 0,
            constant: 0.0,
            linear: BTreeMap::from([(0, 1.0)]),
            quadratic: vec![],
            structure: CostStructure::ConvexInAll,
        }],
        integrality_flag: true,
    }
}

/// G-MP2: a 2x2 binary game with no exact pure NE and alpha_min = 2.
///
///   pi_1 = 2 - x_1 - x_2 + 2 x_1 x_2,   pi_2 = 1 + x_1 + x_2 - 2 x_1 x_2.
///
/// At every profile the deviating player's best-response value is 1 while the
/// sitting cost is 2, so every profile is a (2,0)-NE and none is better.
pub fn gmp2() -> Game {
    Game {
        mode: GameMode::Nep,
        players: vec![
            PlayerBlock {
                k: 1,
                l: 0,
                lower: vec![0.0],
                upper: vec![1.0],
            },
            PlayerBlock {
                k: 1,
                l: 0,
                lower: vec![0.0],
                upper: vec![1.0],
            },
        ],
        constraints: vec![],
        costs: vec![
            QuadraticCost {
                owner: 0,
                constant: 2.0,
                linear: BTreeMap::from([(0, -1.0), (1, -1.0)]),
                quadratic: vec![(0, 1, 2.0)],
                structure: CostStructure::BilinearOwnRival,
            },
            QuadraticCost {
                owner: 1,
                constant: 1.0,
                linear: BTreeMap::from([(0, 1.0), (1, 1.0)]),
                quadratic: vec![(0, 1, -2.0)],
                structure: CostStructure::BilinearOwnRival,
            },
        ],
        integrality_flag: true,
    }
}

/// 0/1 matching pennies: costs in {0,1}; at every profile some player pays 1
/// while her best response costs 0, so no (alpha,0)-NE exists for any alpha.
pub fn matching_pennies01() -> Game {
    Game {
        mode: GameMode::Nep,
        players: vec![
            PlayerBlock {
                k: 1,
                l: 0,
                lower: vec![0.0],
                upper: vec![1.0],
            },
            PlayerBlock {
                k: 1,
                l: 0,
                lower: vec![0.0],
                upper: vec![1.0],
            },
        ],
        constraints: vec![],
        costs: vec![
            QuadraticCost {
                owner: 0,
                constant: 0.0,
                linear: BTreeMap::from([(0, 1.0), (1, 1.0)]),
                quadratic: vec![(0, 1, -2.0)],
                structure: CostStructure::BilinearOwnRival,
            },
            QuadraticCost {
                owner: 1,
                constant: 1.0,
                linear: BTreeMap::from([(0, -1.0), (1, -1.0)]),
                quadratic: vec![(0, 1, 2.0)],
                structure: CostStructure::BilinearOwnRival,
            },
        ],
        integrality_flag: true,
    }
}

/// GNEP toy: x_1 + x_2 <= 2 shared by both players, x_i in {0,1,2},
/// pi_i = -x_i. Six jointly feasible profiles; (2,0) and (0,2) and (1,1) are
/// exact equilibria.
pub fn gnep_toy() -> Game {
    let shared = |owner: usize| LinearRow {
        owner,
        coeffs: BTreeMap::from([(0, 1.0), (1, 1.0)]),
        rhs: 2.0,
    };
    Game {
        mode: GameMode::Gnep,
        players: vec![
            PlayerBlock {
                k: 1,
                l: 0,
                lower: vec![0.0],
                upper: vec![2.0],
            },
            PlayerBlock {
                k: 1,
                l: 0,
                lower: vec![0.0],
                upper: vec![2.0],
            },
        ],
        constraints: vec![shared(0), shared(1)],
        costs: vec![
            QuadraticCost {
                owner: 0,
                constant: 0.0,
                linear: BTreeMap::from([(0, -1.0)]),
                quadratic: vec![],
                structure: CostStructure::ConvexInAll,
            },
            QuadraticCost {
                owner: 1,
                constant: 0.0,
                linear: BTreeMap::from([(1, -1.0)]),
                quadratic: vec![],
                structure: CostStructure::ConcaveAllLinearInRivals,
            },
        ],
        integrality_flag: true,
    }
}

/// FG1: two parallel edges s -> t, one flow player with demand 1 and
/// mu = (3, 1), capacities (1, 1), target load u = (0, 1), price bound 7.
/// The e2-flow with price p = (7, 0) weakly implements u, so the encoded
/// game has an exact NE.
pub fn fg1() -> FlowInstance {
    FlowInstance {
        n_nodes: 2,
        edges: vec![(0, 1), (0, 1)],
        sources: vec![0],
        sinks: vec![1],
        demands: vec![1],
        mu: vec![vec![3.0, 1.0]],
        capacity: vec![1, 1],
        target_load: vec![0.0, 1.0],
        p_max: vec![7.0, 7.0],
    }
}

/// Number of strategies for one player's single variable: 2..=5.
fn draw_block(rng: &mut ChaCha8Rng) -> PlayerBlock {
    let s = rng.gen_range(2..=5) as f64;
    PlayerBlock {
        k: 1,
        l: 0,
        lower: vec![0.0],
        upper: vec![s - 1.0],
    }
}

/// Seeded all-integer NEP instance: 2-3 players, one integer variable each,
/// box constraints only, linear plus bilinear own-rival cost terms with
/// integer data in [-5, 5].
pub fn random_nep(seed: u64) -> Game {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=3usize);
    let players: Vec<PlayerBlock> = (0..n).map(|_| draw_block(&mut rng)).collect();
    let mut costs = Vec::with_capacity(n);
    for i in 0..n {
        let mut linear = BTreeMap::new();
        for v in 0..n {
            let c = rng.gen_range(-5..=5) as f64;
            if c != 0.0 {
                linear.insert(v, c);
            }
        }
        let mut quadratic = Vec::new();
        for v in 0..n {
            if v != i && rng.gen_bool(0.7) {
                let q = rng.gen_range(-5..=5) as f64;
                if q != 0.0 {
                    quadratic.push((i.min(v), i.max(v), q));
                }
            }
        }
        costs.push(QuadraticCost {
            owner: i,
            constant: rng.gen_range(-5..=5) as f64,
            linear,
            quadratic,
            structure: CostStructure::BilinearOwnRival,
        });
    }
    let g = Game {
        mode: GameMode::Nep,
        players,
        constraints: vec![],
        costs,
        integrality_flag: true,
    };
    g.validate_for_solve()
        .expect("generated NEP instance must validate");
    g
}

/// Seeded all-integer GNEP instance: 2-3 players, one integer variable each,
/// linear costs, and 1-2 coupling rows kept feasible at the all-lower corner.
/// Structure tags alternate so both intersection-cut families get exercised.
pub fn random_gnep(seed: u64) -> Game {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let n = rng.gen_range(2..=3usize);
    let players: Vec<PlayerBlock> = (0..n).map(|_| draw_block(&mut rng)).collect();
    let mut constraints = Vec::new();
    let n_rows = rng.gen_range(1..=2usize);
    for _ in 0..n_rows {
        let mut coeffs = BTreeMap::new();
        for v in 0..n {
            let a = rng.gen_range(-3..=3) as f64;
            if a != 0.0 {
                coeffs.insert(v, a);
            }
        }
        if coeffs.is_empty() {
            coeffs.insert(0, 1.0);
        }
        // Keep the all-lower-bound corner (the origin) feasible so the joint
        // strategy set is never empty.
        let at_origin = 0.0;
        let rhs = (rng.gen_range(0..=4) as f64).max(at_origin);
        if rng.gen_bool(0.5) {
            // Shared constraint: every player owns a copy.
            for i in 0..n {
                constraints.push(LinearRow {
                    owner: i,
                    coeffs: coeffs.clone(),
                    rhs,
                });
            }
        } else {
            let owner = rng.gen_range(0..n);
            constraints.push(LinearRow {
                owner,
                coeffs: coeffs.clone(),
                rhs,
            });
        }
    }
    let mut costs = Vec::with_capacity(n);
    for i in 0..n {
        let mut linear = BTreeMap::new();
        for v in 0..n {
            let c = rng.gen_range(-5..=5) as f64;
            if c != 0.0 {
                linear.insert(v, c);
            }
        }
        let structure = if rng.gen_bool(0.5) {
            CostStructure::ConvexInAll
        } else {
            CostStructure::ConcaveAllLinearInRivals
        };
        costs.push(QuadraticCost {
            owner: i,
            constant: rng.gen_range(-5..=5) as f64,
            linear,
            quadratic: vec![],
            structure,
        });
    }
    let g = Game {
        mode: GameMode::Gnep,
        players,
        constraints,
        costs,
        integrality_flag: true,
    };
    g.validate_for_solve()
        .expect("generated GNEP instance must validate");
    g
}

/// The mixed acceptance suite: `count` instances alternating NEP and GNEP.
pub fn suite(count: usize) -> Vec<(String, Game)> {
    (0..count)
        .map(|s| {
            if s % 2 == 0 {
                (format!("nep-{s}"), random_nep(s as u64))
            } else {
                (format!("gnep-{s}"), random_gnep(s as u64))
            }
        })
        .collect()
}
