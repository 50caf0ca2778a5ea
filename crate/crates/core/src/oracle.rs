//! Brute-force ground truth at desk scale: exact-rational profile
//! enumeration, (alpha, beta)-NE sets, the minimal uniform alpha, and
//! best-response-set families.
//!
//! Only all-integer games are supported; every comparison is carried out in
//! exact arithmetic so the oracle inherits no tolerance ambiguity.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::lifted::EqCandidate;
use crate::model::Game;

const MAX_PROFILES: u128 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance has continuous variables; the oracle is all-integer only")]
    HasContinuous,
    #[error("lattice too large: {0} points exceed the 10^6 oracle limit")]
    TooLarge(u128),
}

pub type Rat = BigRational;

fn rat(x: f64) -> Rat {
    BigRational::from_float(x).expect("finite instance data")
}

fn rat_i(x: i64) -> Rat {
    BigRational::from_integer(BigInt::from(x))
}

/// Exact cost pi_i at an integer profile.
pub fn exact_cost(game: &Game, i: usize, x: &[i64]) -> Rat {
    let c = &game.costs[i];
    let mut v = rat(c.constant);
    for (&j, &a) in &c.linear {
        v += rat(a) * rat_i(x[j]);
    }
    for &(a, b, q) in &c.quadratic {
        v += rat(q) * rat_i(x[a]) * rat_i(x[b]);
    }
    v
}

fn rows_hold(game: &Game, owner: Option<usize>, x: &[i64]) -> bool {
    game.constraints
        .iter()
        .filter(|r| owner.map_or(true, |o| r.owner == o))
        .all(|r| {
            let lhs: Rat = r.coeffs.iter().map(|(&j, &a)| rat(a) * rat_i(x[j])).sum();
            lhs <= rat(r.rhs)
        })
}

fn check_enumerable(game: &Game) -> Result<(), OracleError> {
    if !game.is_all_integer() {
        return Err(OracleError::HasContinuous);
    }
    let mut count: u128 = 1;
    for v in 0..game.n_vars() {
        let span = (game.var_upper(v) - game.var_lower(v)) as u128 + 1;
        count = count.saturating_mul(span);
        if count > MAX_PROFILES {
            return Err(OracleError::TooLarge(count));
        }
    }
    Ok(())
}

fn lattice(game: &Game, vars: std::ops::Range<usize>) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for v in vars {
        let lo = game.var_lower(v) as i64;
        let hi = game.var_upper(v) as i64;
        let mut next = Vec::with_capacity(out.len() * (hi - lo + 1) as usize);
        for p in &out {
            for t in lo..=hi {
                let mut q = p.clone();
                q.push(t);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// All jointly feasible integer profiles (the set X-bar).
pub fn enumerate_profiles(game: &Game) -> Result<Vec<Vec<i64>>, OracleError> {
    check_enumerable(game)?;
    Ok(lattice(game, 0..game.n_vars())
        .into_iter()
        .filter(|x| rows_hold(game, None, x))
        .collect())
}

/// Exact best-response value and argmin set of player i against the rivals
/// in `x`. Returns None when X_i(x_{-i}) is empty (GNEP only).
pub fn exact_best_response(game: &Game, i: usize, x: &[i64]) -> Option<(Rat, BTreeSet<Vec<i64>>)> {
    let rng = game.block_range(i);
    let mut best: Option<Rat> = None;
    let mut argmin: BTreeSet<Vec<i64>> = BTreeSet::new();
    for own in lattice(game, rng.clone()) {
        let mut y = x.to_vec();
        y[rng.clone()].copy_from_slice(&own);
        if !rows_hold(game, Some(i), &y) {
            continue;
        }
        let v = exact_cost(game, i, &y);
        match &best {
            None => {
                best = Some(v);
                argmin.insert(own);
            }
            Some(b) => {
                if v < *b {
                    best = Some(v);
                    argmin = BTreeSet::from([own]);
                } else if v == *b {
                    argmin.insert(own);
                }
            }
        }
    }
    best.map(|b| (b, argmin))
}

/// The exact (alpha, beta)-NE set: profiles where every player's cost is at
/// most alpha_i Phi_i + beta_i, compared in exact arithmetic.
pub fn brute_ne_set(
    game: &Game,
    alpha: &[f64],
    beta: &[f64],
) -> Result<Vec<Vec<i64>>, OracleError> {
    let profiles = enumerate_profiles(game)?;
    let n = game.n_players();
    let a: Vec<Rat> = alpha.iter().map(|&v| rat(v)).collect();
    let b: Vec<Rat> = beta.iter().map(|&v| rat(v)).collect();
    Ok(profiles
        .into_iter()
        .filter(|x| {
            (0..n).all(|i| {
                match exact_best_response(game, i, x) {
                    Some((phi, _)) => exact_cost(game, i, x) <= a[i].clone() * phi + b[i].clone(),
                    // Own restriction empty: x itself is not in X_i, so x is
                    // not an equilibrium; unreachable for profiles in X-bar.
                    None => false,
                }
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaMin {
    Value(Rat),
    Unbounded,
}

impl AlphaMin {
    pub fn to_f64(&self) -> Option<f64> {
        match self {
            AlphaMin::Value(v) => v.to_f64(),
            AlphaMin::Unbounded => None,
        }
    }
}

/// Per-profile interval of uniform alpha >= 1 making the profile an
/// (alpha, 0)-NE; None when no alpha works.
pub fn profile_alpha_interval(game: &Game, x: &[i64]) -> Option<(Rat, Option<Rat>)> {
    let n = game.n_players();
    let mut lo = rat_i(1);
    let mut hi: Option<Rat> = None; // None = unbounded above
    for i in 0..n {
        let (phi, _) = exact_best_response(game, i, x)?;
        let pi = exact_cost(game, i, x);
        if phi.is_positive() {
            let bound = pi / phi;
            if bound > lo {
                lo = bound;
            }
        } else if phi.is_zero() {
            if pi.is_positive() {
                return None;
            }
        } else {
            // Phi < 0: pi <= alpha * Phi caps alpha from above at pi / Phi.
            let bound = pi / phi;
            match &hi {
                None => hi = Some(bound),
                Some(h) => {
                    if bound < *h {
                        hi = Some(bound);
                    }
                }
            }
        }
    }
    if let Some(h) = &hi {
        if *h < lo {
            return None;
        }
    }
    Some((lo, hi))
}

/// Minimum uniform alpha >= 1 admitting an (alpha, 0)-NE, or Unbounded.
pub fn brute_alpha_min(game: &Game) -> Result<AlphaMin, OracleError> {
    let profiles = enumerate_profiles(game)?;
    let mut best: Option<Rat> = None;
    for x in &profiles {
        if let Some((lo, _)) = profile_alpha_interval(game, x) {
            match &best {
                None => best = Some(lo),
                Some(b) => {
                    if lo < *b {
                        best = Some(lo);
                    }
                }
            }
        }
    }
    Ok(best.map_or(AlphaMin::Unbounded, AlphaMin::Value))
}

/// The family of distinct best-response sets of player i across all rival
/// assignments under which X_i is non-empty.
pub fn brute_br_family(game: &Game, i: usize) -> Result<BTreeSet<BTreeSet<Vec<i64>>>, OracleError> {
    check_enumerable(game)?;
    let rng = game.block_range(i);
    let mut family = BTreeSet::new();
    // Enumerate rival assignments over the whole box; own coordinates of the
    // carrier vector are irrelevant to exact_best_response.
    let rival_vars: Vec<usize> = (0..game.n_vars()).filter(|v| !rng.contains(v)).collect();
    let mut rivals = vec![vec![]];
    for &v in &rival_vars {
        let lo = game.var_lower(v) as i64;
        let hi = game.var_upper(v) as i64;
        let mut next = Vec::new();
        for p in &rivals {
            for t in lo..=hi {
                let mut q: Vec<i64> = p.clone();
                q.push(t);
                next.push(q);
            }
        }
        rivals = next;
    }
    for r in rivals {
        let mut x = vec![0i64; game.n_vars()];
        for (k, &v) in rival_vars.iter().enumerate() {
            x[v] = r[k];
        }
        for v in rng.clone() {
            x[v] = game.var_lower(v) as i64;
        }
        if let Some((_, argmin)) = exact_best_response(game, i, &x) {
            family.insert(argmin);
        }
    }
    Ok(family)
}

/// Eq-tuples (x, 0, Phi(x), pi(x)) of all (alpha, beta)-NE profiles, in f64
/// for feeding the tree-invariant and cut-validity checks.
pub fn eq_tuples(
    game: &Game,
    alpha: &[f64],
    beta: &[f64],
) -> Result<Vec<EqCandidate>, OracleError> {
    let ne = brute_ne_set(game, alpha, beta)?;
    let n = game.n_players();
    Ok(ne
        .into_iter()
        .map(|x| {
            let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let phi: Vec<f64> = (0..n)
                .map(|i| {
                    exact_best_response(game, i, &x)
                        .expect("equilibrium profiles have non-empty restrictions")
                        .0
                        .to_f64()
                        .expect("desk-scale rationals fit in f64")
                })
                .collect();
            let pihat: Vec<f64> = (0..n)
                .map(|i| exact_cost(game, i, &x).to_f64().unwrap())
                .collect();
            EqCandidate {
                x: xf,
                lambda: 0.0,
                phi,
                pihat,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Report document (for the `verify` CLI command)
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct ProfileRecord {
    pub x: Vec<i64>,
    pub costs: Vec<f64>,
    pub phi: Vec<f64>,
    /// [lo, hi] of the uniform-alpha interval; hi = null means unbounded
    /// above; the whole field null means no alpha works.
    pub alpha_interval: Option<(f64, Option<f64>)>,
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub profiles: Vec<ProfileRecord>,
    pub ne_set: Vec<Vec<i64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha_min: Option<f64>,
    pub alpha_min_unbounded: bool,
    pub br_family_sizes: Vec<usize>,
}

pub fn oracle_report(
    game: &Game,
    alpha: &[f64],
    beta: &[f64],
) -> Result<OracleReport, OracleError> {
    let n = game.n_players();
    let profiles = enumerate_profiles(game)?;
    let mut records = Vec::with_capacity(profiles.len());
    for x in &profiles {
        let costs: Vec<f64> = (0..n)
            .map(|i| exact_cost(game, i, x).to_f64().unwrap())
            .collect();
        let phi: Vec<f64> = (0..n)
            .map(|i| {
                exact_best_response(game, i, x)
                    .map(|(v, _)| v.to_f64().unwrap())
                    .unwrap_or(f64::INFINITY)
            })
            .collect();
        let alpha_interval = profile_alpha_interval(game, x)
            .map(|(lo, hi)| (lo.to_f64().unwrap(), hi.map(|h| h.to_f64().unwrap())));
        records.push(ProfileRecord {
            x: x.clone(),
            costs,
            phi,
            alpha_interval,
        });
    }
    let am = brute_alpha_min(game)?;
    let br_family_sizes = (0..n)
        .map(|i| brute_br_family(game, i).map(|f| f.len()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OracleReport {
        profiles: records,
        ne_set: brute_ne_set(game, alpha, beta)?,
        alpha: alpha.to_vec(),
        beta: beta.to_vec(),
        alpha_min: am.to_f64(),
        alpha_min_unbounded: matches!(am, AlphaMin::Unbounded),
        br_family_sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn t1_profiles_and_ne() {
        let g = fixtures::t1();
        assert_eq!(enumerate_profiles(&g).unwrap(), vec![vec![0], vec![1]]);
        assert_eq!(brute_ne_set(&g, &[1.0], &[0.0]).unwrap(), vec![vec![0]]);
        assert_eq!(brute_alpha_min(&g).unwrap(), AlphaMin::Value(rat_i(1)));
        let fam = brute_br_family(&g, 0).unwrap();
        assert_eq!(fam.len(), 1);
        assert!(fam.contains(&BTreeSet::from([vec![0i64]])));
    }

    #[test]
    fn gmp2_ground_truth() {
        let g = fixtures::gmp2();
        assert_eq!(enumerate_profiles(&g).unwrap().len(), 4);
        assert!(brute_ne_set(&g, &[1.0, 1.0], &[0.0, 0.0])
            .unwrap()
            .is_empty());
        assert_eq!(brute_ne_set(&g, &[2.0, 2.0], &[0.0, 0.0]).unwrap().len(), 4);
        assert_eq!(brute_alpha_min(&g).unwrap(), AlphaMin::Value(rat_i(2)));
        // Player 1 matches the rival: two distinct singleton BR sets.
        let fam = brute_br_family(&g, 0).unwrap();
        assert_eq!(fam.len(), 2);
        assert!(fam.contains(&BTreeSet::from([vec![0i64]])));
        assert!(fam.contains(&BTreeSet::from([vec![1i64]])));
    }

    #[test]
    fn matching_pennies_unbounded() {
        let g = fixtures::matching_pennies01();
        assert_eq!(brute_alpha_min(&g).unwrap(), AlphaMin::Unbounded);
        assert!(brute_ne_set(&g, &[100.0, 100.0], &[0.0, 0.0])
            .unwrap()
            .is_empty());
        // With beta = 1 every profile qualifies.
        assert_eq!(brute_ne_set(&g, &[1.0, 1.0], &[1.0, 1.0]).unwrap().len(), 4);
    }

    #[test]
    fn gnep_toy_profiles_and_equilibria() {
        let g = fixtures::gnep_toy();
        let profiles = enumerate_profiles(&g).unwrap();
        assert_eq!(profiles.len(), 6);
        let ne = brute_ne_set(&g, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        // Every profile on the budget line x1 + x2 = 2 is an exact NE.
        assert_eq!(ne, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
    }

    #[test]
    fn cross_validation_alpha_min_is_tight() {
        for (name, g) in fixtures::suite(40) {
            match brute_alpha_min(&g).unwrap() {
                AlphaMin::Value(am) => {
                    let a = am.to_f64().unwrap();
                    assert!(
                        !brute_ne_set(&g, &[a; 3][..g.n_players()], &vec![0.0; g.n_players()])
                            .unwrap()
                            .is_empty(),
                        "{name}: NE set empty at alpha_min"
                    );
                    // Slightly below alpha_min no equilibrium may exist, but
                    // only when alpha_min > 1 (alpha is capped below at 1).
                    if a > 1.0 + 1e-9 {
                        let eps = (a - 1.0).min(1e-6);
                        assert!(
                            brute_ne_set(
                                &g,
                                &vec![a - eps; g.n_players()],
                                &vec![0.0; g.n_players()]
                            )
                            .unwrap()
                            .is_empty(),
                            "{name}: NE exists below alpha_min"
                        );
                    }
                }
                AlphaMin::Unbounded => {
                    assert!(
                        brute_ne_set(&g, &vec![1e6; g.n_players()], &vec![0.0; g.n_players()])
                            .unwrap()
                            .is_empty()
                    );
                }
            }
        }
    }

    #[test]
    fn proxy_bounds_respected_by_enumeration() {
        for (_, g) in fixtures::suite(40) {
            let bounds = g.compute_proxy_bounds();
            for x in enumerate_profiles(&g).unwrap() {
                for i in 0..g.n_players() {
                    let pi = exact_cost(&g, i, &x).to_f64().unwrap();
                    assert!(pi >= bounds.pihat_minus[i] - 1e-9);
                    if let Some((phi, _)) = exact_best_response(&g, i, &x) {
                        assert!(phi.to_f64().unwrap() <= bounds.phi_plus[i] + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn continuous_games_rejected() {
        let g = fixtures::fg1().encode().unwrap();
        assert_eq!(
            enumerate_profiles(&g).unwrap_err(),
            OracleError::HasContinuous
        );
    }

    #[test]
    fn alpha_interval_upper_bound_with_negative_phi() {
        use crate::model::{CostStructure, GameMode, PlayerBlock, QuadraticCost};
        use std::collections::BTreeMap;
        // pi_1 = x_1 - 2 over {0,1,2}: at x = (0), pi = -2 = Phi -> interval
        // hits alpha = 1 exactly; at x = (2), pi = 0, Phi = -2 -> alpha <= 0,
        // empty against alpha >= 1.
        let g = Game {
            mode: GameMode::Nep,
            players: vec![PlayerBlock {
                k: 1,
                l: 0,
                lower: vec![0.0],
                upper: vec![2.0],
            }],
            constraints: vec![],
            costs: vec![QuadraticCost {
                owner: 0,
                constant: -2.0,
                linear: BTreeMap::from([(0, 1.0)]),
                quadratic: vec![],
                structure: CostStructure::ConvexInAll,
            }],
            integrality_flag: true,
        };
        let at0 = profile_alpha_interval(&g, &[0]).unwrap();
        assert_eq!(at0.0, rat_i(1));
        assert!(profile_alpha_interval(&g, &[2]).is_none());
        assert_eq!(brute_alpha_min(&g).unwrap(), AlphaMin::Value(rat_i(1)));
    }
}
