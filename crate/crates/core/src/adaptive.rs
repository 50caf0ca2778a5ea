//! Binary search for the minimal uniform alpha admitting an (alpha, 0)-NE:
//! a multi-tree baseline plus two single-tree variants that recycle the
//! unexplored frontier (and optionally the derived cuts) across probes.

use serde::{Deserialize, Serialize};

use crate::bnc::{self, BncError, Frontier, Limits, SolveResult, SolveStatus};
use crate::model::Game;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Multitree,
    ReuseTree,
    ReuseTreeCuts,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::Multitree => "multitree",
            Variant::ReuseTree => "reuse_tree",
            Variant::ReuseTreeCuts => "reuse_tree_cuts",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Converged,
    AlphaUnbounded,
    LimitHit,
}

/// One probe of the search, for the CSV trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub alpha_probe: f64,
    pub status: SolveStatus,
    pub nodes: u64,
    pub cuts: u64,
    pub cumulative_time_s: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchParams {
    pub alpha0: f64,
    pub factor: f64,
    pub tol: f64,
    pub max_growth: u32,
    pub limits: Limits,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            alpha0: 10.0,
            factor: 10.0,
            tol: 0.1,
            max_growth: 20,
            limits: Limits::default(),
        }
    }
}

#[derive(Debug)]
pub struct AlphaSearchResult {
    pub status: SearchStatus,
    pub alpha_lo: f64,
    /// +inf when the search is AlphaUnbounded.
    pub alpha_hi: f64,
    /// An (alpha_hi, 0)-NE profile, when one was found.
    pub witness: Option<Vec<f64>>,
    pub variant: Variant,
    pub iterations: Vec<IterationRecord>,
    /// Some best-response value at a candidate equilibrium was negative, so
    /// the monotonicity argument behind the bisection does not apply and the
    /// interval is heuristic.
    pub heuristic_warning: bool,
    pub diagnostic: Option<String>,
}

impl AlphaSearchResult {
    /// Per-iteration CSV trace: iteration, alpha, status, nodes, cuts,
    /// cumulative time.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,alpha_probe,status,nodes,cuts,cumulative_time_s\n");
        for r in &self.iterations {
            out.push_str(&format!(
                "{},{},{},{},{},{:.6}\n",
                r.iteration,
                r.alpha_probe,
                serde_json::to_value(r.status).unwrap().as_str().unwrap(),
                r.nodes,
                r.cuts,
                r.cumulative_time_s
            ));
        }
        out
    }

    pub fn total_nodes(&self) -> u64 {
        self.iterations.iter().map(|r| r.nodes).sum()
    }

    pub fn total_time_s(&self) -> f64 {
        self.iterations.last().map_or(0.0, |r| r.cumulative_time_s)
    }

    pub fn document(&self) -> AlphaSearchDocument {
        AlphaSearchDocument {
            status: self.status,
            variant: self.variant,
            alpha_lo: self.alpha_lo,
            alpha_hi: if self.alpha_hi.is_finite() {
                Some(self.alpha_hi)
            } else {
                None
            },
            witness: self.witness.clone(),
            heuristic_warning: self.heuristic_warning,
            total_nodes: self.total_nodes(),
            total_time_s: self.total_time_s(),
            iterations: self.iterations.clone(),
            diagnostic: self.diagnostic.clone(),
        }
    }
}

/// Serializable search document with a deterministic field order; `alpha_hi`
/// is null when the search is alpha-unbounded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaSearchDocument {
    pub status: SearchStatus,
    pub variant: Variant,
    pub alpha_lo: f64,
    pub alpha_hi: Option<f64>,
    pub witness: Option<Vec<f64>>,
    pub heuristic_warning: bool,
    pub total_nodes: u64,
    pub total_time_s: f64,
    pub iterations: Vec<IterationRecord>,
    pub diagnostic: Option<String>,
}

struct Search<'a> {
    game: &'a Game,
    params: SearchParams,
    variant: Variant,
    iterations: Vec<IterationRecord>,
    cumulative_time_s: f64,
    heuristic_warning: bool,
}

impl<'a> Search<'a> {
    fn record(&mut self, alpha: f64, r: &SolveResult) {
        self.cumulative_time_s += r.wall_time_s;
        self.iterations.push(IterationRecord {
            iteration: self.iterations.len(),
            alpha_probe: alpha,
            status: r.status,
            nodes: r.stats.nodes,
            cuts: r.stats.cuts.total(),
            cumulative_time_s: self.cumulative_time_s,
        });
        if r.status == SolveStatus::NeFound {
            if let Some(w) = &r.witness {
                let n = self.game.n_players();
                let check = bnc::check_ne(self.game, w, &vec![alpha; n], &vec![0.0; n]);
                if check.phi.iter().any(|&p| p < 0.0) {
                    self.heuristic_warning = true;
                }
            }
        }
    }

    fn fresh_probe(&mut self, alpha: f64) -> Result<SolveResult, BncError> {
        let n = self.game.n_players();
        let r = bnc::solve(
            self.game,
            &vec![alpha; n],
            &vec![0.0; n],
            &self.params.limits,
        )?;
        self.record(alpha, &r);
        Ok(r)
    }

    fn reused_probe(&mut self, frontier: &Frontier, alpha: f64) -> Result<SolveResult, BncError> {
        let reuse_cuts = self.variant == Variant::ReuseTreeCuts;
        let retargeted = frontier.clone().retarget(alpha, reuse_cuts)?;
        let r = bnc::resume(self.game, retargeted, &self.params.limits, None)?;
        self.record(alpha, &r);
        Ok(r)
    }

    fn finish(
        self,
        status: SearchStatus,
        alpha_lo: f64,
        alpha_hi: f64,
        witness: Option<Vec<f64>>,
        diagnostic: Option<String>,
    ) -> AlphaSearchResult {
        AlphaSearchResult {
            status,
            alpha_lo,
            alpha_hi,
            witness,
            variant: self.variant,
            iterations: self.iterations,
            heuristic_warning: self.heuristic_warning,
            diagnostic,
        }
    }
}

enum UpperPhase {
    Found { alpha: f64, result: SolveResult },
    Unbounded,
    LimitHit(SolveResult),
}

fn grow_upper(search: &mut Search) -> Result<UpperPhase, BncError> {
    let mut alpha = search.params.alpha0;
    for _ in 0..=search.params.max_growth {
        let r = search.fresh_probe(alpha)?;
        match r.status {
            SolveStatus::NeFound => return Ok(UpperPhase::Found { alpha, result: r }),
            // No equilibrium found at this alpha: escalate. A cut-loop stall
            // also fails to produce an equilibrium; at extreme alpha the
            // lambda-row margin 1/alpha sinks below the prune threshold, so
            // stalls are the expected non-finding outcome and the growth
            // phase records them and keeps going.
            SolveStatus::NoNeExists | SolveStatus::CutLimit => {
                alpha *= search.params.factor;
            }
            SolveStatus::TimeLimit | SolveStatus::NodeLimit => {
                return Ok(UpperPhase::LimitHit(r));
            }
        }
    }
    Ok(UpperPhase::Unbounded)
}

/// Growth phase only: the smallest alpha in {alpha0, F alpha0, ...} with an
/// (alpha, 0)-NE, or None when `max_growth` escalations all fail.
pub fn find_alpha_upper(game: &Game, params: &SearchParams) -> Result<Option<f64>, BncError> {
    let mut search = Search {
        game,
        params: *params,
        variant: Variant::Multitree,
        iterations: Vec::new(),
        cumulative_time_s: 0.0,
        heuristic_warning: false,
    };
    Ok(match grow_upper(&mut search)? {
        UpperPhase::Found { alpha, .. } => Some(alpha),
        UpperPhase::Unbounded | UpperPhase::LimitHit(_) => None,
    })
}

fn run_search(
    game: &Game,
    params: &SearchParams,
    variant: Variant,
) -> Result<AlphaSearchResult, BncError> {
    let mut search = Search {
        game,
        params: *params,
        variant,
        iterations: Vec::new(),
        cumulative_time_s: 0.0,
        heuristic_warning: false,
    };
    let (mut alpha_hi, first) = match grow_upper(&mut search)? {
        UpperPhase::Found { alpha, result } => (alpha, result),
        UpperPhase::Unbounded => {
            let lo = search
                .iterations
                .last()
                .map_or(params.alpha0, |r| r.alpha_probe);
            return Ok(search.finish(SearchStatus::AlphaUnbounded, lo, f64::INFINITY, None, None));
        }
        UpperPhase::LimitHit(r) => {
            let lo = 1.0;
            let hi = search
                .iterations
                .last()
                .map_or(params.alpha0, |r| r.alpha_probe);
            let diag = r.diagnostic.clone();
            return Ok(search.finish(SearchStatus::LimitHit, lo, hi, None, diag));
        }
    };
    let mut alpha_lo = 1.0f64;
    let mut witness = first.witness.clone();
    // Frontier of the most recent equilibrium-carrying probe (its alpha is
    // always alpha_hi), reused by the single-tree variants.
    let mut frontier = first.frontier;

    while alpha_hi - alpha_lo > params.tol {
        let mid = 0.5 * (alpha_lo + alpha_hi);
        let r = match variant {
            Variant::Multitree => search.fresh_probe(mid)?,
            Variant::ReuseTree | Variant::ReuseTreeCuts => search.reused_probe(&frontier, mid)?,
        };
        match r.status {
            SolveStatus::NeFound => {
                alpha_hi = mid;
                witness = r.witness.clone();
                frontier = r.frontier;
            }
            SolveStatus::NoNeExists => {
                alpha_lo = mid;
            }
            _ => {
                let diag = r.diagnostic.clone();
                return Ok(search.finish(
                    SearchStatus::LimitHit,
                    alpha_lo,
                    alpha_hi,
                    witness,
                    diag,
                ));
            }
        }
    }
    Ok(search.finish(SearchStatus::Converged, alpha_lo, alpha_hi, witness, None))
}

pub fn best_alpha_multitree(
    game: &Game,
    params: &SearchParams,
) -> Result<AlphaSearchResult, BncError> {
    run_search(game, params, Variant::Multitree)
}

pub fn best_alpha_singletree(
    game: &Game,
    params: &SearchParams,
    reuse_cuts: bool,
) -> Result<AlphaSearchResult, BncError> {
    run_search(
        game,
        params,
        if reuse_cuts {
            Variant::ReuseTreeCuts
        } else {
            Variant::ReuseTree
        },
    )
}

pub fn best_alpha(
    game: &Game,
    params: &SearchParams,
    variant: Variant,
) -> Result<AlphaSearchResult, BncError> {
    run_search(game, params, variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle::{self, AlphaMin};
    use num_traits::ToPrimitive;

    const VARIANTS: [Variant; 3] = [
        Variant::Multitree,
        Variant::ReuseTree,
        Variant::ReuseTreeCuts,
    ];

    #[test]
    fn gmp2_converges_to_two_under_all_variants() {
        let g = fixtures::gmp2();
        for v in VARIANTS {
            let r = best_alpha(&g, &SearchParams::default(), v).unwrap();
            assert_eq!(
                r.status,
                SearchStatus::Converged,
                "{v:?}: {:?}",
                r.diagnostic
            );
            assert!(r.alpha_hi - r.alpha_lo <= 0.1 + 1e-12, "{v:?}");
            assert!(
                r.alpha_lo <= 2.0 && 2.0 <= r.alpha_hi,
                "{v:?}: [{}, {}]",
                r.alpha_lo,
                r.alpha_hi
            );
            assert!(r.witness.is_some());
        }
    }

    #[test]
    fn t1_collapses_to_one() {
        let g = fixtures::t1();
        for v in VARIANTS {
            let r = best_alpha(&g, &SearchParams::default(), v).unwrap();
            assert_eq!(r.status, SearchStatus::Converged);
            assert_eq!(r.alpha_lo, 1.0);
            assert!(r.alpha_hi <= 1.0 + 0.1 + 1e-12);
        }
    }

    #[test]
    fn matching_pennies_unbounded() {
        let g = fixtures::matching_pennies01();
        for v in VARIANTS {
            let r = best_alpha(&g, &SearchParams::default(), v).unwrap();
            assert_eq!(r.status, SearchStatus::AlphaUnbounded);
            assert!(r.alpha_hi.is_infinite());
            assert!(r.witness.is_none());
        }
    }

    #[test]
    fn find_alpha_upper_examples() {
        let p = SearchParams::default();
        assert_eq!(find_alpha_upper(&fixtures::gmp2(), &p).unwrap(), Some(10.0));
        assert_eq!(find_alpha_upper(&fixtures::t1(), &p).unwrap(), Some(10.0));
        assert_eq!(
            find_alpha_upper(&fixtures::matching_pennies01(), &p).unwrap(),
            None
        );
    }

    /// True when every best-response value at every feasible profile is
    /// nonnegative — the regime where (alpha, 0)-NE existence is monotone in
    /// alpha and the bisection is exact.
    fn all_phi_nonnegative(g: &crate::model::Game) -> bool {
        oracle::enumerate_profiles(g).unwrap().iter().all(|x| {
            (0..g.n_players()).all(|i| match oracle::exact_best_response(g, i, x) {
                Some((phi, _)) => phi.to_f64().unwrap() >= 0.0,
                None => true,
            })
        })
    }

    #[test]
    fn variants_agree_and_bracket_oracle_on_suite() {
        for (name, g) in fixtures::suite(16) {
            if !all_phi_nonnegative(&g) {
                continue;
            }
            let truth = oracle::brute_alpha_min(&g).unwrap();
            let mut intervals = Vec::new();
            for v in VARIANTS {
                let r = best_alpha(&g, &SearchParams::default(), v).unwrap();
                match (&truth, r.status) {
                    (AlphaMin::Unbounded, s) => {
                        assert_eq!(s, SearchStatus::AlphaUnbounded, "{name} {v:?}");
                    }
                    (AlphaMin::Value(am), SearchStatus::Converged) => {
                        let am = am.to_f64().unwrap();
                        assert!(r.alpha_hi - r.alpha_lo <= 0.1 + 1e-12, "{name} {v:?}");
                        if !r.heuristic_warning {
                            assert!(
                                r.alpha_lo <= am + 1e-9 && am <= r.alpha_hi + 1e-9,
                                "{name} {v:?}: alpha_min {am} outside [{}, {}]",
                                r.alpha_lo,
                                r.alpha_hi
                            );
                        }
                        intervals.push((r.alpha_lo, r.alpha_hi));
                    }
                    (t, s) => panic!(
                        "{name} {v:?}: oracle {t:?} vs search {s:?} ({:?})",
                        r.diagnostic
                    ),
                }
            }
            // Cross-variant agreement: pairwise intersecting intervals.
            for a in &intervals {
                for b in &intervals {
                    assert!(
                        a.0 <= b.1 + 1e-9 && b.0 <= a.1 + 1e-9,
                        "{name}: {intervals:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn trace_csv_shape() {
        let g = fixtures::gmp2();
        let r = best_alpha_multitree(&g, &SearchParams::default()).unwrap();
        let csv = r.trace_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iteration,alpha_probe,status,nodes,cuts,cumulative_time_s"
        );
        assert_eq!(csv.lines().count(), r.iterations.len() + 1);
        assert!(csv.contains("ne_found"));
    }
}
