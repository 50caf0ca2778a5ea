"""Smoke test for the nashcut_py extension module.

Run after `pip install -e . --no-build-isolation` from the repository root:

    python python/smoke_test.py
"""

import json

import nashcut_py as nc

# A 2-player matching-game instance: binary strategies, bilinear costs.
# Alignment costs player 1, misalignment costs player 2; the minimal uniform
# alpha admitting an (alpha, 0)-equilibrium is exactly 2.
GAME = {
    "mode": "nep",
    "players": [
        {"k": 1, "l": 0, "lower": [0.0], "upper": [1.0]},
        {"k": 1, "l": 0, "lower": [0.0], "upper": [1.0]},
    ],
    "constraints": [],
    "costs": [
        {
            "owner": 0,
            "constant": 2.0,
            "linear": {"0": -1.0, "1": -1.0},
            "quadratic": [[0, 1, 2.0]],
            "structure": "bilinear_own_rival",
        },
        {
            "owner": 1,
            "constant": 1.0,
            "linear": {"0": 1.0, "1": 1.0},
            "quadratic": [[0, 1, -2.0]],
            "structure": "bilinear_own_rival",
        },
    ],
    "integrality_flag": True,
}


def main():
    game = nc.Game.from_json(json.dumps(GAME))
    assert game.n_players == 2 and game.n_vars == 2 and game.mode == "nep"
    assert nc.Game.from_json(game.to_json()).to_json() == game.to_json()

    # No exact equilibrium, but one exists at alpha = 2.
    r1 = nc.solve(game, alpha=[1.0])
    assert r1["status"] == "no_ne_exists", r1
    r2 = nc.solve(game, alpha=[2.0])
    assert r2["status"] == "ne_found", r2
    ne, violators = nc.check_ne(game, r2["witness"][:2], alpha=[2.0])
    assert ne and not violators

    # The adaptive search brackets the minimal alpha of 2 within 0.1.
    search = nc.best_alpha(game, variant="reuse_tree_cuts")
    assert search["status"] == "converged", search
    assert search["alpha_lo"] <= 2.0 <= search["alpha_hi"]
    assert search["alpha_hi"] - search["alpha_lo"] <= 0.1 + 1e-9

    # The brute-force oracle agrees.
    report = nc.verify(game, alpha=[2.0])
    assert report["alpha_min"] == 2.0 and report["ne_set"], report

    # Flow-game round trip: generate, encode, solve exactly, decode, and
    # check the implementation conditions.
    inst = nc.generate_flow(seed=0)
    assert nc.FlowInstance.from_json(inst.to_json()).to_json() == inst.to_json()
    flow_game = inst.encode()
    r = nc.solve(flow_game, alpha=[1.0] * flow_game.n_players)
    assert r["status"] == "ne_found", r
    flows, _acts, prices = inst.decode(r["witness"][: flow_game.n_vars])
    assert inst.check_implementation(flows, prices) == [True] * 4

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
