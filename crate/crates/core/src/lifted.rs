//! Layout of the lifted variable space `(x, lambda, phi, pihat, aux)` shared
//! by the cut machinery and the branch-and-cut engine.
//!
//! Player blocks come first in the global order, followed by the regret
//! variable, the per-player best-response proxies, the per-player cost
//! proxies, and finally any auxiliary variables (expansion bits and product
//! variables of the linearization).

use crate::model::{ExtendedGame, Game};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiftedLayout {
    pub n_vars: usize,
    pub n_players: usize,
    pub n_aux: usize,
}

impl LiftedLayout {
    pub fn for_game(game: &Game, ext: Option<&ExtendedGame>) -> Self {
        LiftedLayout {
            n_vars: game.n_vars(),
            n_players: game.n_players(),
            n_aux: ext.map_or(0, |e| e.n_aux()),
        }
    }

    pub fn lambda(&self) -> usize {
        self.n_vars
    }

    pub fn phi(&self, i: usize) -> usize {
        debug_assert!(i < self.n_players);
        self.n_vars + 1 + i
    }

    pub fn pihat(&self, i: usize) -> usize {
        debug_assert!(i < self.n_players);
        self.n_vars + 1 + self.n_players + i
    }

    pub fn aux(&self, k: usize) -> usize {
        debug_assert!(k < self.n_aux);
        self.n_vars + 1 + 2 * self.n_players + k
    }

    /// Dimension d = sum(k_i + l_i) + 1 + 2n, plus auxiliary variables.
    pub fn dim(&self) -> usize {
        self.n_vars + 1 + 2 * self.n_players + self.n_aux
    }
}

/// A point in the lifted space: strategy profile, maximal approximate
/// regret, best-response proxies, and cost proxies.
#[derive(Debug, Clone, PartialEq)]
pub struct EqCandidate {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub phi: Vec<f64>,
    pub pihat: Vec<f64>,
}

impl EqCandidate {
    pub fn from_lifted(layout: &LiftedLayout, z: &[f64]) -> Self {
        EqCandidate {
            x: z[..layout.n_vars].to_vec(),
            lambda: z[layout.lambda()],
            phi: (0..layout.n_players).map(|i| z[layout.phi(i)]).collect(),
            pihat: (0..layout.n_players).map(|i| z[layout.pihat(i)]).collect(),
        }
    }

    /// Embeds into the lifted space, filling auxiliary coordinates with the
    /// exact values implied by the profile when an extension is given.
    pub fn to_lifted(&self, layout: &LiftedLayout, ext: Option<&ExtendedGame>) -> Vec<f64> {
        let mut z = Vec::with_capacity(layout.dim());
        z.extend_from_slice(&self.x);
        z.push(self.lambda);
        z.extend_from_slice(&self.phi);
        z.extend_from_slice(&self.pihat);
        match ext {
            Some(e) => z.extend(e.implied_aux(&self.x)),
            None => z.extend(std::iter::repeat(0.0).take(layout.n_aux)),
        }
        z
    }
}

/// The eq-tuple `(x, 0, Phi(x), pi(x))` of an equilibrium profile.
pub fn eq_tuple(game: &Game, x: &[f64], phi: &[f64]) -> EqCandidate {
    EqCandidate {
        x: x.to_vec(),
        lambda: 0.0,
        phi: phi.to_vec(),
        pihat: (0..game.n_players())
            .map(|i| game.eval_cost(i, x))
            .collect(),
    }
}
