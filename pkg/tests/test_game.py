import numpy as np
import pytest

from icqs import game, instgen, iqp, linalg
from icqs.errors import DimensionMismatch, NotPositiveDefinite


def test_make_instance_validates_pd_and_blocks():
    good = instgen.builtin("cycling")
    assert good.k == 2 and good.dims == (1, 1)
    with pytest.raises(NotPositiveDefinite):
        game.make_instance(
            [
                game.PlayerProblem(Q=np.array([[-1.0]]), C={1: np.zeros((1, 1))}, d=np.zeros(1)),
                game.PlayerProblem(Q=np.array([[1.0]]), C={0: np.zeros((1, 1))}, d=np.zeros(1)),
            ]
        )
    with pytest.raises(DimensionMismatch):
        game.make_instance(
            [
                game.PlayerProblem(Q=np.eye(2), C={1: np.zeros((1, 1))}, d=np.zeros(2)),
                game.PlayerProblem(Q=np.eye(1), C={0: np.zeros((1, 2))}, d=np.zeros(1)),
            ]
        )


def test_interaction_matrix_scalars():
    assert game.interaction_matrix(instgen.builtin("example1"), 0)[0, 0] == pytest.approx(-2.0)
    assert game.interaction_matrix(instgen.builtin("cycling"), 0)[0, 0] == pytest.approx(-0.1)


def test_interaction_matrix_zero_coupling():
    inst = game.make_instance(
        [
            game.PlayerProblem(Q=2 * np.eye(2), C={1: np.zeros((2, 3))}, d=np.zeros(2)),
            game.PlayerProblem(Q=np.eye(3), C={0: np.zeros((3, 2))}, d=np.zeros(3)),
        ]
    )
    assert np.allclose(game.interaction_matrix(inst, 0), 0.0)


def test_classify_the_three_builtins():
    rep = game.classify(instgen.builtin("cycling"))
    assert rep.classification is game.Adequacy.POSITIVE
    assert rep.rho == pytest.approx(0.9)

    rep = game.classify(instgen.builtin("example1"))
    assert rep.classification is game.Adequacy.NEGATIVE
    assert rep.rho == pytest.approx(1.0)

    rep = game.classify(instgen.builtin("counterexample", M=10))
    assert rep.classification is game.Adequacy.NEITHER
    assert rep.rho is None
    assert rep.sigma_max[0] == pytest.approx(1.0)  # R_1 = -I


def test_classify_scale_consistency():
    # shrinking every coupling block can only shrink interaction sigmas
    rng = np.random.default_rng(12)
    for seed in range(10):
        inst = instgen.gen_random(instgen.RandomSpec(n_players=2, vars_per_player=3, seed=seed))
        base = game.classify(inst)
        t = rng.uniform(0.05, 0.95)
        scaled = game.make_instance(
            [
                game.PlayerProblem(Q=p.Q, C={j: t * B for j, B in p.C.items()}, d=p.d)
                for p in inst.players
            ]
        )
        rep = game.classify(scaled)
        assert rep.classification is game.Adequacy.POSITIVE
        for i in range(inst.k):
            assert rep.sigma_max[i] <= base.sigma_max[i] + 1e-12


def test_objective_known_cost_table_entries():
    cyc = instgen.builtin("cycling")
    assert game.objective(cyc, 0, [1.0], [[1.0]]) == pytest.approx(-0.1)

    cg = instgen.builtin("counterexample", M=10)
    assert game.objective(cg, 0, [10.0, 0.0], [[0.0, 1.0]]) == pytest.approx(50.0)
    assert game.objective(cg, 0, [0.0, 0.0], [[7.0, -3.0]]) == 0.0


def test_objective_dimension_mismatch():
    cyc = instgen.builtin("cycling")
    with pytest.raises(DimensionMismatch):
        game.objective(cyc, 0, [1.0, 2.0], [[1.0]])
    with pytest.raises(DimensionMismatch):
        game.objective(cyc, 0, [1.0], [[1.0, 2.0]])


def test_best_response_examples():
    ex1 = instgen.builtin("example1")
    assert game.best_response(ex1, 0, [[5.0]]).tolist() == [10]

    cyc = instgen.builtin("cycling")
    assert game.best_response(cyc, 1, [[0.0]]).tolist() == [1]

    cg = instgen.builtin("counterexample", M=10)
    assert game.best_response(cg, 1, [[0.0, 1.0]]).tolist() == [10, 0]


def test_best_response_against_mixed_mean_matches_pure_concentration():
    cg = instgen.builtin("counterexample", M=10)
    pure = game.best_response(cg, 1, [[10.0, 0.0]])
    concentrated_mean = 1.0 * np.array([10.0, 0.0])
    assert np.array_equal(game.best_response(cg, 1, [concentrated_mean]), pure)


def test_best_response_beats_box_oracle():
    # the response's cost is minimal over every integer point in a prox box
    rng = np.random.default_rng(13)
    for seed in range(10):
        inst = instgen.gen_random(instgen.RandomSpec(n_players=2, vars_per_player=3, seed=50 + seed))
        others = [rng.integers(-5, 6, size=3).astype(float)]
        v = game.best_response(inst, 0, others)
        q = game.effective_quadratic(inst, 0, others)
        _, oracle_value = iqp.brute_force_min(q)
        assert q.value(v) == pytest.approx(oracle_value, abs=1e-9)


def test_instance_file_round_trip(tmp_path):
    inst = instgen.gen_pricing(instgen.PricingSpec(n_players=3, seed=21))
    path = tmp_path / "inst.json"
    game.save_instance(inst, path)
    loaded = game.load_instance(path)
    for p, q in zip(inst.players, loaded.players):
        assert np.array_equal(p.Q, q.Q)
        assert np.array_equal(p.d, q.d)
        for j in p.C:
            assert np.array_equal(p.C[j], q.C[j])
    assert loaded.meta == inst.meta
    # save -> load -> save is byte-stable
    path2 = tmp_path / "inst2.json"
    game.save_instance(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_round_trip_is_value_exact_for_decimal_literals(tmp_path):
    # 12-significant-digit decimals survive load -> save -> load untouched
    doc = {
        "players": [
            {"Q": [[1.23456789012]], "C": {"1": [[-0.000123456789012]]}, "d": [99.9999999999]},
            {"Q": [[2.0]], "C": {"0": [[0.1]]}, "d": [-1.1]},
        ],
        "meta": {"note": "literal exactness"},
    }
    inst = game.instance_from_dict(doc)
    assert inst.players[0].Q[0, 0] == 1.23456789012
    path = tmp_path / "literal.json"
    game.save_instance(inst, path)
    again = game.load_instance(path)
    assert again.players[0].Q[0, 0] == 1.23456789012
    assert again.players[0].C[1][0, 0] == -0.000123456789012
    assert again.players[0].d[0] == 99.9999999999


def test_wide_interaction_matrix_shape_multiplayer():
    inst = instgen.gen_random(instgen.RandomSpec(n_players=3, vars_per_player=4, seed=2))
    R = game.interaction_matrix(inst, 1)
    assert R.shape == (4, 8)
    assert len(linalg.singular_values(R)) == 4
