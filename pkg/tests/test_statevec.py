import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from friendly_wigner.experiment import hand_evolved_states
from friendly_wigner.statevec import (
    LBAR,
    L,
    R,
    S,
    Basis,
    DensityMatrix,
    ImpossibleBranchError,
    IncompleteBasisError,
    Ket,
    Projector,
    StateError,
    Subsystem,
    born_probability,
    collapse,
    fidelity,
    inner,
    mix,
    sample_measurement,
    tensor,
)

H = 1 / math.sqrt(2)
OKBAR = Ket.of(LBAR, {"hbar": H, "tbar": -H})
FAILSBAR = Ket.of(LBAR, {"hbar": H, "tbar": H})
OK = Ket.of(L, {"minus": H, "plus": -H})
FAILS = Ket.of(L, {"minus": H, "plus": H})
ROW4 = hand_evolved_states()["f_measures_s"]


class Counter:
    """Minimal rng stand-in returning a fixed sequence."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def test_inner_examples():
    assert inner(OKBAR, Ket.basis(LBAR, "hbar")) == pytest.approx(H, abs=1e-12)
    assert abs(inner(ROW4, ROW4) - 1) < 1e-12
    assert abs(inner(OK, FAILS)) < 1e-12


def test_inner_is_conjugate_linear_in_first_argument():
    a = Ket.of(S, {"up": 1j * H, "down": H})
    b = Ket.of(S, {"up": H, "down": H})
    assert inner(a, b) == pytest.approx(np.conj(inner(b, a)))
    assert inner(a, b) == pytest.approx(-1j * 0.5 + 0.5)


def test_inner_rejects_mismatched_spaces():
    with pytest.raises(StateError):
        inner(OK, OKBAR)


def test_tensor_rejects_overlap():
    with pytest.raises(StateError):
        tensor(OK, FAILS)


def test_ket_rejects_unnormalized_unless_flagged():
    with pytest.raises(StateError):
        Ket.of(S, {"up": 1.0, "down": 1.0})
    k = Ket.of(S, {"up": 1.0, "down": 1.0}, normalized=False)
    assert k.unnormalized
    assert k.norm() == pytest.approx(math.sqrt(2))


def test_equality_up_to_global_phase():
    assert OK == OK.scaled(-1)
    assert OK == OK.scaled(np.exp(0.7j))
    assert OK != FAILS


def test_born_examples():
    proj = Projector(tensor(OKBAR, OK))
    assert born_probability(ROW4, proj) == pytest.approx(1 / 12, abs=1e-12)
    assert born_probability(ROW4, Projector.identity(ROW4.space)) == pytest.approx(1, abs=1e-12)
    # the two z = minus branches carry amplitude sqrt(1/3) each
    assert born_probability(ROW4, Projector(Ket.basis(L, "minus"))) == pytest.approx(2 / 3, abs=1e-12)


def test_born_rejects_unnormalized():
    k = Ket.of(S, {"up": 2.0}, normalized=False)
    proj = Projector(Ket.basis(S, "up"))
    with pytest.raises(StateError):
        born_probability(k, proj)
    assert born_probability(k, proj, allow_unnormalized=True) == pytest.approx(4.0)


def test_collapse_examples():
    post, p = collapse(ROW4, Projector(OKBAR))
    assert p == pytest.approx(1 / 6, abs=1e-12)
    assert fidelity(post, tensor(OKBAR, Ket.basis(L, "plus"))) == pytest.approx(1, abs=1e-12)

    post, p = collapse(ROW4, Projector(FAILSBAR))
    expect = tensor(FAILSBAR, Ket.of(L, {"minus": math.sqrt(4 / 5), "plus": math.sqrt(1 / 5)}))
    assert p == pytest.approx(5 / 6, abs=1e-12)
    assert fidelity(post, expect) == pytest.approx(1, abs=1e-12)

    same, p = collapse(OK, Projector(OK))
    assert p == pytest.approx(1) and same == OK


def test_collapse_impossible_branch():
    with pytest.raises(ImpossibleBranchError):
        collapse(Ket.basis(L, "minus"), Projector(Ket.basis(L, "plus")))


def test_projector_rejects_overlapping_targets():
    with pytest.raises(StateError):
        Projector([OK, Ket.basis(L, "minus")])


def test_incomplete_basis_rejected():
    with pytest.raises(IncompleteBasisError):
        Basis("L", (("ok", OK),))


def test_sample_measurement_deterministic_and_eigenstates():
    init = hand_evolved_states()["init"]
    basis = Basis.computational(R)
    a = sample_measurement(init, basis, np.random.default_rng(5))
    b = sample_measurement(init, basis, np.random.default_rng(5))
    assert a[0] == b[0]
    # an eigenstate gives its own label whatever the draw
    for u in (0.0, 0.5, 0.999999):
        lab, post = sample_measurement(Ket.basis(R, "tails"), basis, Counter([u]))
        assert lab.name == "tails" and post == Ket.basis(R, "tails")


def test_sample_measurement_frequency():
    # the scan is cumulative in basis order, so heads is drawn iff u < 1/3;
    # check that law on 10^6 uniform draws without per-call overhead
    init = hand_evolved_states()["init"]
    basis = Basis.computational(R)
    p = basis.probabilities(init)["heads"]
    n = 10**6
    u = np.random.default_rng(11).random(n)
    freq = np.mean(u < p)
    assert abs(freq - 1 / 3) < 4 * math.sqrt(p * (1 - p) / n)
    # and the per-call path agrees with the threshold on a sample of draws
    for x in u[:200]:
        lab, _ = sample_measurement(init, basis, Counter([x]))
        assert (lab.name == "heads") == (x < p)


def test_mix_examples():
    rho = mix([(0.5, OKBAR), (0.5, FAILSBAR)])
    assert np.allclose(rho.in_basis([OKBAR, FAILSBAR]), np.diag([0.5, 0.5]), atol=1e-12)

    pure = mix([(1.0, OK)])
    assert np.allclose(pure.eigenvalues(), [1, 0], atol=1e-12)
    assert pure.purity() == pytest.approx(1)

    other = mix([(0.5, Ket.basis(LBAR, "hbar")), (0.5, Ket.basis(LBAR, "tbar"))])
    assert rho.allclose(other)
    assert np.allclose(other.matrix, np.eye(2) / 2, atol=1e-12)


def test_mix_rejects_bad_weights():
    with pytest.raises(StateError):
        mix([(0.5, OK), (0.4, FAILS)])
    with pytest.raises(StateError):
        mix([(1.5, OK), (-0.5, FAILS)])


def test_density_matrix_validation():
    with pytest.raises(StateError):
        DensityMatrix((L,), np.array([[1, 0], [0, 1]]))
    with pytest.raises(StateError):
        DensityMatrix((L,), np.array([[1.5, 0], [0, -0.5]]))


def test_factor_detects_entanglement():
    assert ROW4.factor(["Lbar"]) is None
    prod = tensor(OKBAR, Ket.basis(L, "plus"))
    assert prod.factor(["L"]) == Ket.basis(L, "plus")


def test_relabel_is_isometry():
    a = Ket.of(S, {"up": 0.6, "down": 0.8})
    b = Ket.of(S, {"up": H, "down": -H})
    mapping = {"down": "minus", "up": "plus"}
    a2, b2 = a.relabel(S, L, mapping), b.relabel(S, L, mapping)
    assert inner(a2, b2) == pytest.approx(inner(a, b), abs=1e-12)


# --- properties --------------------------------------------------------------

amps = st.floats(-1, 1, allow_nan=False)
QUBIT = Subsystem("Q", ("0", "1"))


def _ket(sub, xs):
    v = np.array(xs[: len(sub.labels)], dtype=complex) + 1j * np.array(xs[len(sub.labels):], dtype=complex)
    n = np.linalg.norm(v)
    if n < 1e-3:
        v, n = np.array([1, 0], dtype=complex), 1.0
    return Ket((sub,), vector=v / n)


def _basis(sub, angle):
    c, s = math.cos(angle), math.sin(angle)
    return Basis.from_table(sub, {"a": dict(zip(sub.labels, (c, s))), "b": dict(zip(sub.labels, (-s, c)))})


@settings(max_examples=60, deadline=None)
@given(st.lists(amps, min_size=4, max_size=4), st.lists(amps, min_size=4, max_size=4))
def test_tensor_keeps_norm(xs, ys):
    k = tensor(_ket(QUBIT, xs), _ket(L, ys))
    assert abs(k.norm() - 1) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(amps, min_size=4, max_size=4), st.floats(0, 2 * math.pi))
def test_completeness_and_collapse_consistency(xs, angle):
    state = _ket(QUBIT, xs)
    basis = _basis(QUBIT, angle)
    probs = basis.probabilities(state)
    assert abs(sum(probs.values()) - 1) < 1e-12
    for lab, p in probs.items():
        if p > 1e-9:
            post, _ = collapse(state, basis.projector(lab))
            assert abs(post.norm() - 1) < 1e-12
            assert abs(born_probability(post, basis.projector(lab)) - 1) < 1e-12


@settings(max_examples=60, deadline=None)
@given(
    st.lists(amps, min_size=4, max_size=4),
    st.lists(amps, min_size=4, max_size=4),
    st.floats(0.0, 1.0),
    st.floats(0, 2 * math.pi),
)
def test_density_expectation_matches_branch_average(xs, ys, w, angle):
    a, b = _ket(QUBIT, xs), _ket(QUBIT, ys)
    rho = mix([(w, a), (1 - w, b)])
    proj = _basis(QUBIT, angle).projector("a")
    expect = w * born_probability(a, proj) + (1 - w) * born_probability(b, proj)
    assert abs(rho.expectation(proj) - expect) < 1e-12
