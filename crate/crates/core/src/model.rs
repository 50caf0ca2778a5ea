//! Game data model, instance file I/O, validation, proxy-bound computation,
//! and exact linearization of bilinear integer-times-continuous cost terms.
//!
//! All modules index variables against one fixed global order: player 1's
//! integer variables, player 1's continuous variables, player 2's integers,
//! and so on. Auxiliary variables introduced elsewhere (lambda, phi, pi-hat,
//! expansion bits, products) are appended after all player blocks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the numerical PSD/NSD structure checks.
pub const EIG_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unsupported bilinear term: {0}")]
    UnsupportedTerm(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameMode {
    Gnep,
    Nep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostStructure {
    /// Cost is convex in the entire strategy profile.
    ConvexInAll,
    /// Cost is concave in the entire profile and linear in the rivals'
    /// strategies.
    ConcaveAllLinearInRivals,
    /// Every quadratic term pairs one own variable with one rival variable.
    BilinearOwnRival,
}

/// One player's variable block: `k` leading integer variables followed by
/// `l` continuous ones, each with finite bounds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlayerBlock {
    pub k: usize,
    pub l: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PlayerBlock {
    pub fn dim(&self) -> usize {
        self.k + self.l
    }
}

/// A sparse linear inequality `coeffs . x <= rhs` owned by one player.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LinearRow {
    pub owner: usize,
    pub coeffs: BTreeMap<usize, f64>,
    pub rhs: f64,
}

/// Quadratic cost `constant + linear.x + sum coeff * x_a * x_b`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuadraticCost {
    pub owner: usize,
    pub constant: f64,
    pub linear: BTreeMap<usize, f64>,
    pub quadratic: Vec<(usize, usize, f64)>,
    pub structure: CostStructure,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Game {
    pub mode: GameMode,
    pub players: Vec<PlayerBlock>,
    pub constraints: Vec<LinearRow>,
    pub costs: Vec<QuadraticCost>,
    pub integrality_flag: bool,
}

/// Per-player proxy bounds: `phi_plus[i] >= Phi_i(x_{-i})` and
/// `pihat_minus[i] <= pi_i(x)` for every feasible profile `x`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProxyBounds {
    pub phi_plus: Vec<f64>,
    pub pihat_minus: Vec<f64>,
}

impl Game {
    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    /// Total number of player variables in the global order.
    pub fn n_vars(&self) -> usize {
        self.players.iter().map(|p| p.dim()).sum()
    }

    /// First global index of player `i`'s block.
    pub fn block_start(&self, i: usize) -> usize {
        self.players[..i].iter().map(|p| p.dim()).sum()
    }

    /// Half-open global index range of player `i`'s block.
    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        let s = self.block_start(i);
        s..s + self.players[i].dim()
    }

    /// Player owning global variable index `v`.
    pub fn owner_of(&self, v: usize) -> usize {
        let mut s = 0;
        for (i, p) in self.players.iter().enumerate() {
            s += p.dim();
            if v < s {
                return i;
            }
        }
        panic!("variable index {v} out of range");
    }

    /// Whether global variable `v` is integral.
    pub fn is_integer_var(&self, v: usize) -> bool {
        let i = self.owner_of(v);
        v - self.block_start(i) < self.players[i].k
    }

    pub fn var_lower(&self, v: usize) -> f64 {
        let i = self.owner_of(v);
        self.players[i].lower[v - self.block_start(i)]
    }

    pub fn var_upper(&self, v: usize) -> f64 {
        let i = self.owner_of(v);
        self.players[i].upper[v - self.block_start(i)]
    }

    /// Indices of all integer player variables.
    pub fn integer_vars(&self) -> Vec<usize> {
        (0..self.n_vars())
            .filter(|&v| self.is_integer_var(v))
            .collect()
    }

    pub fn is_all_integer(&self) -> bool {
        self.players.iter().all(|p| p.l == 0)
    }

    /// pi_i(x) for a full profile `x`.
    pub fn eval_cost(&self, i: usize, point: &[f64]) -> f64 {
        let c = &self.costs[i];
        let mut v = c.constant;
        for (&j, &a) in &c.linear {
            v += a * point[j];
        }
        for &(a, b, q) in &c.quadratic {
            v += q * point[a] * point[b];
        }
        v
    }

    /// Residuals `g(x)`, one per constraint row. Feasibility means every
    /// residual <= tolerance.
    pub fn eval_constraints(&self, point: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|r| {
                let lhs: f64 = r.coeffs.iter().map(|(&j, &a)| a * point[j]).sum();
                lhs - r.rhs
            })
            .collect()
    }

    pub fn is_feasible(&self, point: &[f64], tol: f64) -> bool {
        let in_box = (0..self.n_vars())
            .all(|v| point[v] >= self.var_lower(v) - tol && point[v] <= self.var_upper(v) + tol);
        in_box && self.eval_constraints(point).iter().all(|&r| r <= tol)
    }

    /// Structural validation of all invariants that do not require a solve.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.n_players();
        if n == 0 {
            return Err(ModelError::Validation("game has no players".into()));
        }
        if self.costs.len() != n {
            return Err(ModelError::Validation(format!(
                "expected {n} cost records, got {}",
                self.costs.len()
            )));
        }
        for (i, p) in self.players.iter().enumerate() {
            if p.lower.len() != p.dim() || p.upper.len() != p.dim() {
                return Err(ModelError::Validation(format!(
                    "player {i}: bound vectors must have length k+l = {}",
                    p.dim()
                )));
            }
            for j in 0..p.dim() {
                if !p.lower[j].is_finite() || !p.upper[j].is_finite() {
                    return Err(ModelError::Validation(format!(
                        "player {i} variable {j} has an unbounded bound"
                    )));
                }
                if p.lower[j] > p.upper[j] {
                    return Err(ModelError::Validation(format!(
                        "player {i} variable {j} has lower > upper"
                    )));
                }
            }
        }
        let d = self.n_vars();
        for (r, row) in self.constraints.iter().enumerate() {
            if row.owner >= n {
                return Err(ModelError::Validation(format!(
                    "row {r}: owner out of range"
                )));
            }
            for &j in row.coeffs.keys() {
                if j >= d {
                    return Err(ModelError::Validation(format!(
                        "row {r}: variable index {j} out of range"
                    )));
                }
            }
            if self.mode == GameMode::Nep {
                let rng = self.block_range(row.owner);
                for (&j, &a) in &row.coeffs {
                    if a != 0.0 && !rng.contains(&j) {
                        return Err(ModelError::Validation(format!(
                            "NEP mode: row {r} owned by player {} references variable {j} of another player",
                            row.owner
                        )));
                    }
                }
            }
        }
        for (i, c) in self.costs.iter().enumerate() {
            if c.owner != i {
                return Err(ModelError::Validation(format!(
                    "cost record {i} has owner {}, records must follow player order",
                    c.owner
                )));
            }
            for &j in c.linear.keys() {
                if j >= d {
                    return Err(ModelError::Validation(format!(
                        "cost {i}: linear index {j} out of range"
                    )));
                }
            }
            let rng = self.block_range(i);
            for &(a, b, q) in &c.quadratic {
                if a >= d || b >= d {
                    return Err(ModelError::Validation(format!(
                        "cost {i}: quadratic index out of range"
                    )));
                }
                if q != 0.0 {
                    match c.structure {
                        CostStructure::BilinearOwnRival => {
                            let own_a = rng.contains(&a);
                            let own_b = rng.contains(&b);
                            if own_a == own_b {
                                return Err(ModelError::Validation(format!(
                                    "cost {i}: bilinear_own_rival term ({a},{b}) must pair one own and one rival variable"
                                )));
                            }
                        }
                        CostStructure::ConcaveAllLinearInRivals => {
                            let own_a = rng.contains(&a);
                            let own_b = rng.contains(&b);
                            if !own_a && !own_b {
                                return Err(ModelError::Validation(format!(
                                    "cost {i}: concave_all_linear_in_rivals term ({a},{b}) has both variables in rival blocks"
                                )));
                            }
                        }
                        CostStructure::ConvexInAll => {}
                    }
                }
            }
            match c.structure {
                CostStructure::ConvexInAll => {
                    if min_eigenvalue(&quadratic_form_matrix(c, d)) < -EIG_TOL {
                        return Err(ModelError::Validation(format!(
                            "cost {i}: convex_in_all but quadratic form is not positive semidefinite"
                        )));
                    }
                }
                CostStructure::ConcaveAllLinearInRivals => {
                    let m: Vec<Vec<f64>> = quadratic_form_matrix(c, d)
                        .into_iter()
                        .map(|row| row.into_iter().map(|v| -v).collect())
                        .collect();
                    if min_eigenvalue(&m) < -EIG_TOL {
                        return Err(ModelError::Validation(format!(
                            "cost {i}: concave_all_linear_in_rivals but quadratic form is not negative semidefinite"
                        )));
                    }
                }
                CostStructure::BilinearOwnRival => {}
            }
        }
        Ok(())
    }

    /// Validation required before handing the game to the best-response
    /// oracle: after fixing rivals, each player's objective must be linear in
    /// her own variables, so quadratic terms within one block are rejected.
    pub fn validate_for_solve(&self) -> Result<(), ModelError> {
        self.validate()?;
        for (i, c) in self.costs.iter().enumerate() {
            for &(a, b, q) in &c.quadratic {
                if q != 0.0 && self.owner_of(a) == self.owner_of(b) {
                    return Err(ModelError::Validation(format!(
                        "cost {i}: quadratic term ({a},{b}) lies within a single player block; \
                         best responses would not be exact"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sound per-player proxy bounds via interval arithmetic over the box
    /// hull of the variable bounds.
    pub fn compute_proxy_bounds(&self) -> ProxyBounds {
        let n = self.n_players();
        let mut phi_plus = Vec::with_capacity(n);
        let mut pihat_minus = Vec::with_capacity(n);
        for i in 0..n {
            let (lo, hi) = self.cost_interval(i);
            phi_plus.push(hi);
            pihat_minus.push(lo);
        }
        ProxyBounds {
            phi_plus,
            pihat_minus,
        }
    }

    /// Interval enclosure of pi_i over the variable box. Bilinear terms are
    /// grouped with the linear coefficient of their lower-index variable,
    /// i.e. x_a * (l_a + sum_b q_ab x_b) is bounded as one product, which is
    /// tighter than bounding every term independently.
    pub fn cost_interval(&self, i: usize) -> (f64, f64) {
        let c = &self.costs[i];
        let d = self.n_vars();
        // Group coefficients: group[a] holds the affine expression multiplied
        // by x_a (its own linear coefficient plus rival factors).
        let mut group_linear = vec![0.0; d];
        let mut group_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d];
        let mut squares: Vec<(usize, f64)> = Vec::new();
        for (&j, &a) in &c.linear {
            group_linear[j] += a;
        }
        for &(a, b, q) in &c.quadratic {
            if q == 0.0 {
                continue;
            }
            if a == b {
                squares.push((a, q));
            } else {
                let (g, other) = if a < b { (a, b) } else { (b, a) };
                group_terms[g].push((other, q));
            }
        }
        let mut lo = c.constant;
        let mut hi = c.constant;
        for j in 0..d {
            if group_linear[j] == 0.0 && group_terms[j].is_empty() {
                continue;
            }
            // Inner interval of l_j + sum q * x_other.
            let mut il = group_linear[j];
            let mut ih = group_linear[j];
            for &(other, q) in &group_terms[j] {
                let (tl, th) = scale_interval(q, self.var_lower(other), self.var_upper(other));
                il += tl;
                ih += th;
            }
            let (pl, ph) = product_interval(self.var_lower(j), self.var_upper(j), il, ih);
            lo += pl;
            hi += ph;
        }
        for (j, q) in squares {
            let (xl, xu) = (self.var_lower(j), self.var_upper(j));
            let sq_hi = (xl * xl).max(xu * xu);
            let sq_lo = if xl <= 0.0 && xu >= 0.0 {
                0.0
            } else {
                (xl * xl).min(xu * xu)
            };
            let (tl, th) = scale_interval(q, sq_lo, sq_hi);
            lo += tl;
            hi += th;
        }
        (lo, hi)
    }
}

fn scale_interval(a: f64, lo: f64, hi: f64) -> (f64, f64) {
    if a >= 0.0 {
        (a * lo, a * hi)
    } else {
        (a * hi, a * lo)
    }
}

fn product_interval(al: f64, ah: f64, bl: f64, bh: f64) -> (f64, f64) {
    let cands = [al * bl, al * bh, ah * bl, ah * bh];
    let lo = cands.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cands.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Symmetric matrix of the quadratic form of `c` over dimension `d`.
fn quadratic_form_matrix(c: &QuadraticCost, d: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; d]; d];
    for &(a, b, q) in &c.quadratic {
        m[a][b] += q / 2.0;
        m[b][a] += q / 2.0;
    }
    m
}

fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let d = m.len();
    if d == 0 {
        return 0.0;
    }
    let flat: Vec<f64> = m.iter().flat_map(|r| r.iter().cloned()).collect();
    let mat = nalgebra::DMatrix::from_row_slice(d, d, &flat);
    let eig = mat.symmetric_eigen();
    eig.eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// Instance I/O
// ---------------------------------------------------------------------------

/// Wire schema of the instance document. Field names are normative.
#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    mode: GameMode,
    players: Vec<PlayerBlock>,
    constraints: Vec<LinearRow>,
    costs: Vec<QuadraticCost>,
    integrality_flag: bool,
}

pub fn load_instance(document: &str) -> Result<Game, ModelError> {
    let doc: InstanceDoc =
        serde_json::from_str(document).map_err(|e| ModelError::Parse(e.to_string()))?;
    let game = Game {
        mode: doc.mode,
        players: doc.players,
        constraints: doc.constraints,
        costs: doc.costs,
        integrality_flag: doc.integrality_flag,
    };
    game.validate()?;
    Ok(game)
}

pub fn serialize(game: &Game) -> String {
    let doc = InstanceDoc {
        mode: game.mode,
        players: game.players.clone(),
        constraints: game.constraints.clone(),
        costs: game.costs.clone(),
        integrality_flag: game.integrality_flag,
    };
    serde_json::to_string_pretty(&doc).expect("instance serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Bilinear linearization
// ---------------------------------------------------------------------------

/// One auxiliary product variable `w = x_int * x_cont` together with the
/// expansion bits realizing it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductVar {
    pub int_var: usize,
    pub cont_var: usize,
    /// Index of `w` in the auxiliary block (0-based within aux).
    pub w_index: usize,
    /// Aux indices of the binary expansion bits of `int_var - lower`.
    pub bit_indices: Vec<usize>,
    /// Aux indices of the per-bit McCormick products `v_k = bit_k * x_cont`.
    pub bit_product_indices: Vec<usize>,
}

/// Sparse row over the extended space (player variables followed by the
/// auxiliary block); `coeffs . z <= rhs`. Auxiliary indices are offset by
/// the game's `n_vars()`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// A game plus auxiliary product variables and the exact rows defining them
/// at integral points.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedGame {
    pub base: Game,
    pub products: Vec<ProductVar>,
    /// Rows over the extended space (McCormick rows and bit-linking rows).
    pub aux_rows: Vec<AuxRow>,
    /// Bounds of the auxiliary variables, in aux order.
    pub aux_lower: Vec<f64>,
    pub aux_upper: Vec<f64>,
    /// Which auxiliary variables are integral (the expansion bits).
    pub aux_integer: Vec<bool>,
    /// Map from a cost's (int_var, cont_var) pair to the product index.
    pub product_of_pair: BTreeMap<(usize, usize), usize>,
}

impl ExtendedGame {
    pub fn n_aux(&self) -> usize {
        self.aux_lower.len()
    }

    /// Exact auxiliary values implied by a player-variable point with
    /// integral integer coordinates.
    pub fn implied_aux(&self, point: &[f64]) -> Vec<f64> {
        let mut aux = vec![0.0; self.n_aux()];
        for p in &self.products {
            let x = point[p.int_var];
            let c = point[p.cont_var];
            aux[p.w_index] = x * c;
            let lo = self.base.var_lower(p.int_var);
            let mut shifted = (x - lo).round() as i64;
            for (k, &bi) in p.bit_indices.iter().enumerate() {
                let bit = (shifted & 1) as f64;
                shifted >>= 1;
                aux[bi] = bit;
                aux[p.bit_product_indices[k]] = bit * c;
            }
        }
        aux
    }
}

/// Replaces each bilinear integer-times-continuous cost term `x * p` by an
/// auxiliary `w` via binary expansion of `x` plus exact per-bit McCormick
/// rows. At integral `x` the rows force `w = x * p`; elsewhere they define a
/// relaxation. Products are shared across cost records.
pub fn linearize_bilinear(game: &Game) -> Result<ExtendedGame, ModelError> {
    let mut ext = ExtendedGame {
        base: game.clone(),
        products: Vec::new(),
        aux_rows: Vec::new(),
        aux_lower: Vec::new(),
        aux_upper: Vec::new(),
        aux_integer: Vec::new(),
        product_of_pair: BTreeMap::new(),
    };
    let nv = game.n_vars();
    for c in &game.costs {
        for &(a, b, q) in &c.quadratic {
            if q == 0.0 {
                continue;
            }
            let (int_var, cont_var) = match (game.is_integer_var(a), game.is_integer_var(b)) {
                (true, false) => (a, b),
                (false, true) => (b, a),
                (true, true) => (a, b), // integer*integer: expand the first factor
                (false, false) => {
                    return Err(ModelError::UnsupportedTerm(format!(
                        "term ({a},{b}) multiplies two continuous variables"
                    )));
                }
            };
            if ext.product_of_pair.contains_key(&(int_var, cont_var)) {
                continue;
            }
            add_product(&mut ext, nv, int_var, cont_var)?;
        }
    }
    Ok(ext)
}

fn add_product(
    ext: &mut ExtendedGame,
    nv: usize,
    int_var: usize,
    cont_var: usize,
) -> Result<(), ModelError> {
    let game = &ext.base;
    let xl = game.var_lower(int_var);
    let xu = game.var_upper(int_var);
    let pl = game.var_lower(cont_var);
    let pu = game.var_upper(cont_var);
    if !(xl.is_finite() && xu.is_finite() && pl.is_finite() && pu.is_finite()) {
        return Err(ModelError::UnsupportedTerm(format!(
            "term ({int_var},{cont_var}) has an unbounded factor"
        )));
    }
    let span = (xu - xl).round() as i64;
    if span < 0 {
        return Err(ModelError::UnsupportedTerm(format!(
            "integer variable {int_var} has empty range"
        )));
    }
    let n_bits = if span == 0 {
        0
    } else {
        64 - (span as u64).leading_zeros() as usize
    };

    let aux_base = nv;
    let new_aux = |lo: f64, hi: f64, integer: bool, ext: &mut ExtendedGame| -> usize {
        let idx = ext.aux_lower.len();
        ext.aux_lower.push(lo);
        ext.aux_upper.push(hi);
        ext.aux_integer.push(integer);
        idx
    };

    let (wl, wu) = product_interval(xl, xu, pl, pu);
    let w_index = new_aux(wl, wu, false, ext);

    let mut bit_indices = Vec::with_capacity(n_bits);
    let mut bit_product_indices = Vec::with_capacity(n_bits);
    for _ in 0..n_bits {
        bit_indices.push(new_aux(0.0, 1.0, true, ext));
    }
    for _ in 0..n_bits {
        let (vl, vu) = product_interval(0.0, 1.0, pl, pu);
        bit_product_indices.push(new_aux(vl, vu, false, ext));
    }

    // Linking row: x - lower = sum 2^k bit_k  (as two <= rows).
    {
        let mut coeffs = vec![(int_var, 1.0)];
        for (k, &bi) in bit_indices.iter().enumerate() {
            coeffs.push((aux_base + bi, -((1u64 << k) as f64)));
        }
        ext.aux_rows.push(AuxRow {
            coeffs: coeffs.clone(),
            rhs: xl,
        });
        let neg: Vec<(usize, f64)> = coeffs.iter().map(|&(j, a)| (j, -a)).collect();
        ext.aux_rows.push(AuxRow {
            coeffs: neg,
            rhs: -xl,
        });
    }

    // Per-bit McCormick rows for v_k = bit_k * p with p in [pl, pu]:
    //   v >= pl*z, v <= pu*z, v <= p - pl*(1-z), v >= p - pu*(1-z).
    for (k, &bi) in bit_indices.iter().enumerate() {
        let vi = aux_base + bit_product_indices[k];
        let zi = aux_base + bi;
        ext.aux_rows.push(AuxRow {
            coeffs: vec![(vi, -1.0), (zi, pl)],
            rhs: 0.0,
        });
        ext.aux_rows.push(AuxRow {
            coeffs: vec![(vi, 1.0), (zi, -pu)],
            rhs: 0.0,
        });
        ext.aux_rows.push(AuxRow {
            coeffs: vec![(vi, 1.0), (cont_var, -1.0), (zi, -pl)],
            rhs: -pl,
        });
        ext.aux_rows.push(AuxRow {
            coeffs: vec![(vi, -1.0), (cont_var, 1.0), (zi, pu)],
            rhs: pu,
        });
    }

    // Definition row: w = lower*p + sum 2^k v_k (as two <= rows).
    {
        let mut coeffs = vec![(aux_base + w_index, 1.0), (cont_var, -xl)];
        for (k, &vi) in bit_product_indices.iter().enumerate() {
            coeffs.push((aux_base + vi, -((1u64 << k) as f64)));
        }
        ext.aux_rows.push(AuxRow {
            coeffs: coeffs.clone(),
            rhs: 0.0,
        });
        let neg: Vec<(usize, f64)> = coeffs.iter().map(|&(j, a)| (j, -a)).collect();
        ext.aux_rows.push(AuxRow {
            coeffs: neg,
            rhs: 0.0,
        });
    }

    let product_index = ext.products.len();
    ext.products.push(ProductVar {
        int_var,
        cont_var,
        w_index,
        bit_indices,
        bit_product_indices,
    });
    ext.product_of_pair
        .insert((int_var, cont_var), product_index);
    Ok(())
}
