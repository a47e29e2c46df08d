import dataclasses
import math

import numpy as np
import pytest

import oracle
from friendly_wigner.experiment import (
    ConfigError,
    IncompleteTreeError,
    OutcomeTable,
    Protocol,
    ProtocolConfig,
    RoundStream,
    TimePoint,
    BranchTree,
    build_protocol,
    evolve_exact,
    joint_distribution,
    monte_carlo,
    random_config,
    records_from_indices,
    run_round,
    sample_rounds,
    hand_evolved_states,
)
from friendly_wigner.statevec import fidelity


def test_default_protocol_has_five_steps_in_time_order():
    proto = build_protocol()
    names = [s.name for s in proto.steps]
    assert names == ["init", "fbar_measures_r", "f_measures_s", "wbar_measures_lbar", "w_measures_l"]
    times = [s.time for s in proto.steps]
    assert times == sorted(times)
    assert times[0] == TimePoint.T0 and times[-1] == TimePoint.T3


def test_time_points_and_aliases():
    assert TimePoint.T0 < TimePoint.T1 < TimePoint.T2 < TimePoint.T3
    assert TimePoint.parse("t2") == TimePoint.T2
    assert TimePoint.parse("n:10") == TimePoint.T2
    with pytest.raises(ValueError):
        TimePoint.parse("t9")


def test_global_states_match_hand_evolution():
    g = Protocol.default().global_states()
    ref = hand_evolved_states()
    for key in ("init", "fbar_sets_spin", "fbar_sends_spin", "f_measures_s"):
        assert fidelity(g[key], ref[key]) == pytest.approx(1, abs=1e-12)


def test_wbar_okbar_node():
    tree = evolve_exact(Protocol.default())
    p, post = tree.wbar_branches()["okbar"]
    assert p == pytest.approx(1 / 6, abs=1e-12)
    assert fidelity(post, hand_evolved_states()["wbar_measures_lbar"]["okbar"][1]) == pytest.approx(1, abs=1e-12)


def test_exact_table_and_marginals():
    table = joint_distribution(evolve_exact(Protocol.default()))
    assert table[("okbar", "ok")] == pytest.approx(1 / 12, abs=1e-12)
    assert table[("failsbar", "fails")] == pytest.approx(3 / 4, abs=1e-12)
    assert table.marginal_wbar("okbar") == pytest.approx(1 / 6, abs=1e-12)
    assert table.conditional("ok", "okbar") == pytest.approx(1 / 2, abs=1e-12)
    assert table.conditional("ok", "failsbar") == pytest.approx(1 / 10, abs=1e-12)
    assert [c[:2] for c in table.cells()] == [
        ("okbar", "ok"),
        ("okbar", "fails"),
        ("failsbar", "ok"),
        ("failsbar", "fails"),
    ]


def test_tree_children_sum_to_one_and_leaves_are_products():
    tree = evolve_exact(Protocol.default())

    def walk(node, acc):
        if node.children:
            assert abs(sum(c.probability for c in node.children) - 1) < 1e-12
            for c in node.children:
                walk(c, acc * c.probability)

    walk(tree.root, 1.0)
    leaves = list(tree.leaves())
    assert abs(sum(p for _, p, _ in leaves) - 1) < 1e-12
    for path, p, _ in leaves:
        node, prod = tree.root, 1.0
        for var in ("r", "z", "wbar", "w"):
            node = tree.child(node, path[var])
            prod *= node.probability
        assert p == pytest.approx(prod, abs=1e-15)


def test_heads_record_forces_z_minus_in_tree():
    tree = evolve_exact(Protocol.default())
    heads = tree.child(tree.root, "heads")
    assert [c.outcome.name for c in heads.children] == ["minus"]


def test_degenerate_heads_config_matches_brute_force():
    # with heads certain every cell is 1/4; the hand oracle enumerates the single record pair
    cfg = ProtocolConfig(a_heads=1.0, a_tails=0.0)
    table = joint_distribution(evolve_exact(Protocol(cfg)))
    ref = oracle.brute_force_joint(1.0)
    for key, p in ref.items():
        assert table[key] == pytest.approx(p, abs=1e-12)
    assert table[("okbar", "ok")] == pytest.approx(1 / 4, abs=1e-12)
    rounds = monte_carlo(Protocol(cfg), 2000, seed=1)
    assert rounds.marginal("r", "heads") == 1.0


def test_random_configs_match_oracle():
    rng = np.random.default_rng(3)
    for _ in range(25):
        cfg = random_config(rng)
        table = joint_distribution(evolve_exact(Protocol(cfg)))
        for key, p in oracle.joint(cfg).items():
            assert table[key] == pytest.approx(p, abs=1e-12)


def test_validation_names_fields():
    with pytest.raises(ConfigError, match="normalization"):
        ProtocolConfig(a_heads=math.sqrt(0.5), a_tails=math.sqrt(0.4)).validate()
    bad = {"okbar": {"hbar": 1.0}, "failsbar": {"hbar": 0.6, "tbar": 0.8}}
    with pytest.raises(ConfigError) as err:
        build_protocol(ProtocolConfig(wbar_basis=bad))
    assert err.value.field == "wbar_basis"
    with pytest.raises(ConfigError):
        build_protocol(ProtocolConfig(w_basis={"ok": {"minus": 1.0}, "oops": {"plus": 1.0}}))


def test_joint_distribution_rejects_incomplete_tree():
    full = evolve_exact(Protocol.default())
    r_node = dataclasses.replace(full.root.children[0], children=())
    truncated = dataclasses.replace(full.root, children=(r_node,))
    with pytest.raises(IncompleteTreeError):
        joint_distribution(BranchTree(full.protocol, truncated, full.rows))


def test_outcome_table_invariants():
    with pytest.raises(ValueError):
        OutcomeTable({("okbar", "ok"): 0.5, ("okbar", "fails"): 0.6, ("failsbar", "ok"): 0.0, ("failsbar", "fails"): 0.0})


def test_run_round_deterministic_and_consistent():
    proto = Protocol.default()
    a = run_round(proto, RoundStream(42, 0, 0))
    b = run_round(proto, RoundStream(42, 0, 0))
    assert a == b
    assert (a.seed, a.worker, a.round) == (42, 0, 0)
    for i in range(300):
        rec = run_round(proto, RoundStream(9, 0, i))
        if rec.r == "heads":
            assert rec.z == "minus"


def test_vectorized_rounds_match_step_by_step():
    proto = Protocol.default()
    idx = sample_rounds(proto, seed=17, worker=0, count=300)
    fast = records_from_indices(idx, seed=17, worker=0)
    slow = [run_round(proto, RoundStream(17, 0, i)) for i in range(300)]
    assert fast == slow


def test_monte_carlo_z_plus_frequency():
    n = 10**6
    freq = monte_carlo(Protocol.default(), n, seed=123)
    p = 1 / 3
    assert abs(freq.marginal("z", "plus") - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_monte_carlo_worker_independence():
    proto = Protocol.default()
    a = monte_carlo(proto, 50_000, seed=5, workers=1)
    b = monte_carlo(proto, 50_000, seed=5, workers=4)
    assert a.joint_counts == b.joint_counts
    assert a.marginal_counts == b.marginal_counts


def test_monte_carlo_edge_cases():
    with pytest.raises(ValueError):
        monte_carlo(Protocol.default(), 0, seed=1)
    one = monte_carlo(Protocol.default(), 1, seed=1)
    assert sum(one.joint_counts.values()) == 1
    assert one.degenerate
    assert math.isnan(one.stderr("okbar", "ok"))
