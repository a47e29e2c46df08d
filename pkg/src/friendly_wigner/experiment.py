"""The four-agent protocol: exact branch tree and seeded Monte Carlo rounds.

One round runs

    t0  R is prepared in a_heads|heads> + a_tails|tails>
    t1  Fbar measures R and prepares the spin S accordingly; the lab Lbar
        now carries the record (heads -> hbar, tails -> tbar)
    t2  F measures S; lab L carries the record (down -> minus, up -> plus)
    t3  Wbar measures Lbar in {okbar, failsbar}, announces the result,
        then W measures L in {ok, fails}

From the Wigners' side the friends' measurements are unitary record
transfers, so the global state stays coherent until Wbar acts.  The branch
tree therefore has two kinds of levels: record branches for r and z (relative
states as seen by the friends) and collapse branches for wbar and w, which are
drawn from the coherent global state and do not depend on the record branch
above them.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .statevec import (
    LBAR,
    TOL,
    Basis,
    BasisLabel,
    Ket,
    L,
    Projector,
    R,
    S,
    StateError,
    born_probability,
    collapse,
    sample_measurement,
    tensor,
)

CONFIG_TOL = 1e-9
_H = math.sqrt(0.5)

WBAR_OUTCOMES = ("okbar", "failsbar")
W_OUTCOMES = ("ok", "fails")
Z_OUTCOMES = ("minus", "plus")
R_OUTCOMES = ("heads", "tails")


class ConfigError(ValueError):
    def __init__(self, field_name: str, constraint: str):
        self.field = field_name
        self.constraint = constraint
        super().__init__(f"{field_name}: {constraint}")


class IncompleteTreeError(ValueError):
    pass


class TimePoint(enum.IntEnum):
    """Coarse time intervals of one round; each also names an instant inside it."""

    T0 = 0
    T1 = 1
    T2 = 2
    T3 = 3

    @property
    def label(self) -> str:
        return f"t{self.value}"

    @property
    def aliases(self) -> tuple[str, ...]:
        return _CLOCK_ALIASES[self]

    @classmethod
    def parse(cls, text: str) -> "TimePoint":
        t = text.strip().lower()
        if t.startswith("t") and t[1:].isdigit() and int(t[1:]) in range(4):
            return cls(int(t[1:]))
        for tp, names in _CLOCK_ALIASES.items():
            if t in names:
                return tp
        raise ValueError(f"unknown time point {text!r} (expected t0..t3 or a clock alias)")

    def __str__(self):
        return self.label


# original n:xx clock annotations, for cross-reading older write-ups
_CLOCK_ALIASES = {
    TimePoint.T0: ("before n:00",),
    TimePoint.T1: ("n:00", "n:01", "n:02"),
    TimePoint.T2: ("n:10", "n:11"),
    TimePoint.T3: ("n:20", "n:21", "n:30", "n:31"),
}

DEFAULT_SPIN_PREP = {"heads": {"down": 1.0}, "tails": {"up": _H, "down": _H}}
DEFAULT_F_BASIS = {"minus": {"down": 1.0}, "plus": {"up": 1.0}}
DEFAULT_WBAR_BASIS = {"okbar": {"hbar": _H, "tbar": -_H}, "failsbar": {"hbar": _H, "tbar": _H}}
DEFAULT_W_BASIS = {"ok": {"minus": _H, "plus": -_H}, "fails": {"minus": _H, "plus": _H}}
DEFAULT_TIMES = {
    "init": TimePoint.T0,
    "fbar_measures_r": TimePoint.T1,
    "f_measures_s": TimePoint.T2,
    "wbar_measures_lbar": TimePoint.T3,
    "w_measures_l": TimePoint.T3,
}


def _freeze(table: Mapping[str, Mapping[str, complex]]) -> dict[str, dict[str, complex]]:
    return {k: dict(v) for k, v in table.items()}


@dataclass(frozen=True)
class ProtocolConfig:
    a_heads: float = math.sqrt(1 / 3)
    a_tails: float = math.sqrt(2 / 3)
    spin_prep: Mapping[str, Mapping[str, complex]] = field(default_factory=lambda: _freeze(DEFAULT_SPIN_PREP))
    f_basis: Mapping[str, Mapping[str, complex]] = field(default_factory=lambda: _freeze(DEFAULT_F_BASIS))
    wbar_basis: Mapping[str, Mapping[str, complex]] = field(default_factory=lambda: _freeze(DEFAULT_WBAR_BASIS))
    w_basis: Mapping[str, Mapping[str, complex]] = field(default_factory=lambda: _freeze(DEFAULT_W_BASIS))
    time_labels: Mapping[str, TimePoint] = field(default_factory=lambda: dict(DEFAULT_TIMES))

    def validate(self) -> None:
        """Raise ConfigError naming the first offending field."""
        norm = self.a_heads**2 + self.a_tails**2
        if abs(norm - 1) > CONFIG_TOL:
            raise ConfigError("a_heads/a_tails", f"normalization: a_heads^2 + a_tails^2 = {norm:.12g}, expected 1")
        _check_keys("spin_prep", self.spin_prep, R_OUTCOMES)
        for r, comps in self.spin_prep.items():
            _check_vector(f"spin_prep.{r}", S, comps)
        for name, sub, labels in (
            ("f_basis", S, Z_OUTCOMES),
            ("wbar_basis", LBAR, WBAR_OUTCOMES),
            ("w_basis", L, W_OUTCOMES),
        ):
            table = getattr(self, name)
            _check_keys(name, table, labels)
            vecs = [_check_vector(f"{name}.{k}", sub, table[k]) for k in labels]
            gram = np.array([[np.vdot(a, b) for b in vecs] for a in vecs])
            if not np.allclose(gram, np.eye(len(vecs)), atol=CONFIG_TOL):
                raise ConfigError(name, f"basis vectors are not orthonormal (overlap {abs(gram[0, 1]):.6g})")
        times = [TimePoint(self.time_labels[s]) for s in DEFAULT_TIMES if s in self.time_labels]
        if sorted(self.time_labels) != sorted(DEFAULT_TIMES) or times != sorted(times):
            raise ConfigError("time_labels", "every step needs a time point, non-decreasing along the schedule")

    def as_dict(self) -> dict:
        def enc(table):
            return {k: {n: _num(v) for n, v in comps.items()} for k, comps in table.items()}

        return {
            "a_heads": self.a_heads,
            "a_tails": self.a_tails,
            "spin_prep": enc(self.spin_prep),
            "f_basis": enc(self.f_basis),
            "wbar_basis": enc(self.wbar_basis),
            "w_basis": enc(self.w_basis),
            "time_labels": {k: TimePoint(v).label for k, v in self.time_labels.items()},
        }


def _num(v: complex):
    v = complex(v)
    return v.real if v.imag == 0 else [v.real, v.imag]


def _check_keys(name, table, labels):
    if set(table) != set(labels):
        raise ConfigError(name, f"expected outcome labels {list(labels)}, got {sorted(table)}")


def _check_vector(name: str, sub, comps) -> np.ndarray:
    v = np.zeros(sub.dim, dtype=complex)
    for lab, amp in comps.items():
        if lab not in sub.labels:
            raise ConfigError(name, f"unknown basis label {lab!r} for {sub.name} (allowed {list(sub.labels)})")
        v[sub.index(lab)] = amp
    n = np.linalg.norm(v)
    if abs(n - 1) > CONFIG_TOL:
        raise ConfigError(name, f"normalization: vector norm is {n:.12g}, expected 1")
    return v


def _unit(sub, comps) -> Ket:
    k = Ket.of(sub, comps, normalized=False)
    return k.normalize()


def random_config(rng: np.random.Generator) -> ProtocolConfig:
    """A valid config with random real amplitudes and randomly rotated bases."""

    def rot(labels, sub_labels):
        phi = rng.uniform(0, 2 * np.pi)
        c, s = math.cos(phi), math.sin(phi)
        return {labels[0]: {sub_labels[0]: c, sub_labels[1]: s}, labels[1]: {sub_labels[0]: -s, sub_labels[1]: c}}

    theta = rng.uniform(0, np.pi / 2)
    prep = {}
    for r in R_OUTCOMES:
        phi = rng.uniform(0, 2 * np.pi)
        prep[r] = {"up": math.cos(phi), "down": math.sin(phi)}
    return ProtocolConfig(
        a_heads=math.cos(theta),
        a_tails=math.sin(theta),
        spin_prep=prep,
        f_basis=rot(Z_OUTCOMES, ("down", "up")),
        wbar_basis=rot(WBAR_OUTCOMES, LBAR.labels),
        w_basis=rot(W_OUTCOMES, L.labels),
    )


@dataclass(frozen=True)
class Step:
    name: str
    agent: str
    time: TimePoint
    action: str


class Protocol:
    """Validated, executable five-step schedule built from a ProtocolConfig."""

    def __init__(self, config: ProtocolConfig):
        config.validate()
        self.config = config
        c = config
        self.init = Ket.of(R, {"heads": c.a_heads, "tails": c.a_tails}, normalized=False).normalize()
        self.r_basis = Basis.computational(R)
        self.spin_prep = {r: _unit(S, c.spin_prep[r]) for r in R_OUTCOMES}
        self.f_basis = Basis("S", tuple((z, _unit(S, c.f_basis[z])) for z in Z_OUTCOMES))
        self.wbar_basis = Basis("Lbar", tuple((w, _unit(LBAR, c.wbar_basis[w])) for w in WBAR_OUTCOMES))
        self.w_basis = Basis("L", tuple((w, _unit(L, c.w_basis[w])) for w in W_OUTCOMES))
        # F's record: S state |s> goes to sum_z <f_z|s> |z>_L
        self.record_map = {
            o: {z: complex(np.conj(self.f_basis[z].vector[S.index(o)])) for z in Z_OUTCOMES} for o in S.labels
        }
        t = {k: TimePoint(v) for k, v in c.time_labels.items()}
        self.steps = (
            Step("init", "-", t["init"], "prepare R"),
            Step("fbar_measures_r", "FBAR", t["fbar_measures_r"], "Fbar measures R, prepares and sends S"),
            Step("f_measures_s", "F", t["f_measures_s"], "F measures S"),
            Step("wbar_measures_lbar", "WBAR", t["wbar_measures_lbar"], "Wbar measures Lbar and announces"),
            Step("w_measures_l", "W", t["w_measures_l"], "W measures L"),
        )

    @classmethod
    def default(cls) -> "Protocol":
        return cls(ProtocolConfig())

    def lab_record(self, spin: Ket) -> Ket:
        """What F's lab holds after measuring ``spin``: the record image on L."""
        return spin.transfer(S, L, self.record_map)

    def rbar(self, r: str) -> Ket:
        return Ket.basis(LBAR, {"heads": "hbar", "tails": "tbar"}[r])

    def global_states(self) -> dict[str, Ket]:
        """Coherent global state after each unitary stage (rows 1-4 of the evolution table)."""
        row1 = self.init
        row2 = None
        for r in R_OUTCOMES:
            amp = self.init.vector[R.index(r)]
            term = tensor(Ket.basis(R, r), self.spin_prep[r]).scaled(amp)
            row2 = term if row2 is None else row2 + term
        row2 = row2.normalize()
        row3 = row2.relabel(R, LBAR).normalize()
        row4 = row3.transfer(S, L, self.record_map).normalize()
        return {"init": row1, "fbar_sets_spin": row2, "fbar_sends_spin": row3, "f_measures_s": row4}


def build_protocol(config: ProtocolConfig | None = None) -> Protocol:
    return Protocol(config or ProtocolConfig())


@dataclass(frozen=True)
class Node:
    step: str
    outcome: BasisLabel | None
    probability: float
    state: Ket
    time: TimePoint
    children: tuple["Node", ...] = ()

    @property
    def variable(self) -> str | None:
        return _STEP_VARIABLE.get(self.step)


_STEP_VARIABLE = {
    "fbar_measures_r": "r",
    "f_measures_s": "z",
    "wbar_measures_lbar": "wbar",
    "w_measures_l": "w",
}


@dataclass(frozen=True)
class BranchTree:
    protocol: Protocol
    root: Node
    rows: dict
    depth: int = 4

    def leaves(self) -> Iterator[tuple[dict[str, str], float, Node]]:
        """Yield (outcome path, leaf probability, leaf node)."""

        def walk(node, path, prob):
            if not node.children:
                yield path, prob, node
                return
            for ch in node.children:
                yield from walk(ch, {**path, ch.variable: ch.outcome.name}, prob * ch.probability)

        yield from walk(self.root, {}, 1.0)

    def child(self, node: Node, outcome: str) -> Node:
        for ch in node.children:
            if ch.outcome.name == outcome:
                return ch
        raise KeyError(f"no branch {outcome!r} below {node.step}")

    def path(self, *outcomes: str) -> Node:
        node = self.root
        for o in outcomes:
            node = self.child(node, o)
        return node

    def wbar_branches(self) -> dict[str, tuple[float, Ket]]:
        return {lab: (p, k) for lab, p, k in self.rows["wbar_measures_lbar"]}

    def w_branches(self) -> dict[tuple[str, str], tuple[float, Ket]]:
        return {(wb, w): (p, k) for wb, w, p, k in self.rows["w_measures_l"]}


def evolve_exact(protocol: Protocol) -> BranchTree:
    g = protocol.global_states()
    row4 = g["f_measures_s"]
    times = {s.name: s.time for s in protocol.steps}

    w_nodes = {}
    wbar_rows, w_rows = [], []
    for wb, pwb in protocol.wbar_basis.probabilities(row4).items():
        if pwb <= TOL:
            continue
        post, _ = collapse(row4, protocol.wbar_basis.projector(wb))
        wbar_rows.append((wb, pwb, post))
        kids = []
        for w, pw in protocol.w_basis.probabilities(post).items():
            if pw <= TOL:
                continue
            final, _ = collapse(post, protocol.w_basis.projector(w))
            w_rows.append((wb, w, pw, final))
            kids.append(Node("w_measures_l", BasisLabel("L", w), pw, final, times["w_measures_l"]))
        w_nodes[wb] = (pwb, post, tuple(kids))

    def wbar_level():
        return tuple(
            Node("wbar_measures_lbar", BasisLabel("Lbar", wb), p, post, times["wbar_measures_lbar"], kids)
            for wb, (p, post, kids) in w_nodes.items()
        )

    r_nodes = []
    for r, pr in protocol.r_basis.probabilities(protocol.init).items():
        if pr <= TOL:
            continue
        spin = protocol.spin_prep[r]
        z_nodes = []
        for z, pz in protocol.f_basis.probabilities(spin).items():
            if pz <= TOL:
                continue
            rel = tensor(protocol.rbar(r), Ket.basis(L, z))
            z_nodes.append(Node("f_measures_s", BasisLabel("L", z), pz, rel, times["f_measures_s"], wbar_level()))
        rel = tensor(protocol.rbar(r), spin)
        r_nodes.append(Node("fbar_measures_r", BasisLabel("R", r), pr, rel, times["fbar_measures_r"], tuple(z_nodes)))

    root = Node("init", None, 1.0, protocol.init, times["init"], tuple(r_nodes))
    rows = dict(g)
    rows["wbar_measures_lbar"] = wbar_rows
    rows["w_measures_l"] = w_rows
    return BranchTree(protocol, root, rows)


@dataclass(frozen=True)
class OutcomeTable:
    """Exact joint distribution of the two Wigners' outcomes."""

    probabilities: dict[tuple[str, str], float]

    def __post_init__(self):
        total = sum(self.probabilities.values())
        if abs(total - 1) > TOL or min(self.probabilities.values()) < 0:
            raise StateError(f"outcome table is not a distribution (sum {total!r})")

    def __getitem__(self, key: tuple[str, str]) -> float:
        return self.probabilities[key]

    def marginal_wbar(self, wbar: str) -> float:
        return sum(p for (wb, _), p in self.probabilities.items() if wb == wbar)

    def marginal_w(self, w: str) -> float:
        return sum(p for (_, x), p in self.probabilities.items() if x == w)

    def conditional(self, w: str, given_wbar: str) -> float:
        m = self.marginal_wbar(given_wbar)
        if m <= TOL:
            raise ZeroDivisionError(f"P(wbar={given_wbar}) is zero")
        return self.probabilities[(given_wbar, w)] / m

    def cells(self) -> list[tuple[str, str, float]]:
        return [(wb, w, self.probabilities[(wb, w)]) for wb in WBAR_OUTCOMES for w in W_OUTCOMES]


def joint_distribution(tree: BranchTree) -> OutcomeTable:
    probs = {(wb, w): 0.0 for wb in WBAR_OUTCOMES for w in W_OUTCOMES}
    for path, p, _ in tree.leaves():
        if set(path) != {"r", "z", "wbar", "w"}:
            raise IncompleteTreeError(f"leaf with unresolved outcomes: {path}")
        probs[(path["wbar"], path["w"])] += p
    return OutcomeTable(probs)


# --- Monte Carlo ---------------------------------------------------------

LANE_SIZE = 1 << 14
DRAWS_PER_ROUND = 4


def _lane_key(seed: int, lane: int) -> np.ndarray:
    return np.random.SeedSequence([seed, lane]).generate_state(2, np.uint64)


def _to_unit(raw: np.ndarray) -> np.ndarray:
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


class RoundStream:
    """Uniform draws for one round, fixed by (seed, lane, round-in-lane).

    Lanes are fixed-size slices of the global round index, so a round's draws
    do not depend on how lanes are spread over workers.
    """

    def __init__(self, seed: int, worker: int, round_index: int):
        if not 0 <= round_index < LANE_SIZE:
            raise ValueError(f"round index {round_index} outside lane of size {LANE_SIZE}")
        self.seed, self.worker, self.round = seed, worker, round_index
        bg = np.random.Philox(key=_lane_key(seed, worker))
        bg.advance(round_index)
        self._u = _to_unit(bg.random_raw(DRAWS_PER_ROUND))
        self._i = 0

    @classmethod
    def for_round(cls, seed: int, global_round: int) -> "RoundStream":
        return cls(seed, global_round // LANE_SIZE, global_round % LANE_SIZE)

    def random(self) -> float:
        if self._i >= DRAWS_PER_ROUND:
            raise RuntimeError("round stream exhausted")
        u = float(self._u[self._i])
        self._i += 1
        return u


@dataclass(frozen=True)
class RoundRecord:
    r: str
    z: str
    wbar: str
    w: str
    seed: int
    worker: int
    round: int

    def __post_init__(self):
        if self.r not in R_OUTCOMES or self.z not in Z_OUTCOMES:
            raise ValueError(f"bad record {self}")


def run_round(protocol: Protocol, stream: RoundStream) -> RoundRecord:
    """One round sampled step by step on the state vectors."""
    r, _ = sample_measurement(protocol.init, protocol.r_basis, stream)
    z, _ = sample_measurement(protocol.spin_prep[r.name], protocol.f_basis, stream)
    row4 = protocol.global_states()["f_measures_s"]
    wb, post = sample_measurement(row4, protocol.wbar_basis, stream)
    w, _ = sample_measurement(post, protocol.w_basis, stream)
    return RoundRecord(r.name, z.name, wb.name, w.name, stream.seed, stream.worker, stream.round)


class _Sampler:
    """Conditional outcome probabilities laid out for vectorized draws."""

    def __init__(self, protocol: Protocol):
        p = protocol
        row4 = p.global_states()["f_measures_s"]
        self.p_r = _cum(p.r_basis.probabilities(p.init), R_OUTCOMES)
        self.p_z = np.array([_cum(p.f_basis.probabilities(p.spin_prep[r]), Z_OUTCOMES) for r in R_OUTCOMES])
        pwb = p.wbar_basis.probabilities(row4)
        self.p_wbar = _cum(pwb, WBAR_OUTCOMES)
        rows = []
        for wb in WBAR_OUTCOMES:
            if pwb[wb] <= TOL:
                rows.append(np.array([1.0, 1.0]))
                continue
            post, _ = collapse(row4, p.wbar_basis.projector(wb))
            rows.append(_cum(p.w_basis.probabilities(post), W_OUTCOMES))
        self.p_w = np.array(rows)

    def draw(self, u: np.ndarray) -> np.ndarray:
        """Map an (n, 4) array of uniforms to (n, 4) outcome indices."""
        r = _pick(self.p_r, u[:, 0])
        z = _pick_rows(self.p_z[r], u[:, 1])
        wb = _pick(self.p_wbar, u[:, 2])
        w = _pick_rows(self.p_w[wb], u[:, 3])
        return np.stack([r, z, wb, w], axis=1)


def _cum(probs: Mapping[str, float], order) -> np.ndarray:
    acc, out = 0.0, []
    for k in order:
        acc += probs[k]
        out.append(acc)
    return np.array(out)


def _pick(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)


def _pick_rows(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum((u[:, None] >= cum).sum(axis=1), cum.shape[1] - 1)


def sample_rounds(protocol: Protocol, seed: int, worker: int, count: int, sampler: _Sampler | None = None) -> np.ndarray:
    """Outcome indices (r, z, wbar, w) for the first ``count`` rounds of one lane."""
    if not 0 < count <= LANE_SIZE:
        raise ValueError("count must be in 1..LANE_SIZE")
    bg = np.random.Philox(key=_lane_key(seed, worker))
    u = _to_unit(bg.random_raw(DRAWS_PER_ROUND * count)).reshape(count, DRAWS_PER_ROUND)
    return (sampler or _Sampler(protocol)).draw(u)


def records_from_indices(idx: np.ndarray, seed: int, worker: int) -> list[RoundRecord]:
    return [
        RoundRecord(R_OUTCOMES[a], Z_OUTCOMES[b], WBAR_OUTCOMES[c], W_OUTCOMES[d], seed, worker, i)
        for i, (a, b, c, d) in enumerate(idx)
    ]


@dataclass(frozen=True)
class FrequencyTable:
    rounds: int
    seed: int
    joint_counts: dict[tuple[str, str], int]
    marginal_counts: dict[str, dict[str, int]]

    @property
    def degenerate(self) -> bool:
        """Fewer than two rounds: standard errors are meaningless."""
        return self.rounds < 2

    def frequency(self, wbar: str, w: str) -> float:
        return self.joint_counts[(wbar, w)] / self.rounds

    def marginal(self, variable: str, value: str) -> float:
        return self.marginal_counts[variable][value] / self.rounds

    def stderr(self, wbar: str, w: str) -> float:
        if self.degenerate:
            return math.nan
        f = self.frequency(wbar, w)
        return math.sqrt(f * (1 - f) / self.rounds)

    def marginal_stderr(self, variable: str, value: str) -> float:
        if self.degenerate:
            return math.nan
        f = self.marginal(variable, value)
        return math.sqrt(f * (1 - f) / self.rounds)

    def z_scores(self, exact: OutcomeTable) -> dict[tuple[str, str], float]:
        """Deviation from ``exact`` in units of the exact binomial standard error."""
        out = {}
        for wb, w, p in exact.cells():
            sigma = math.sqrt(p * (1 - p) / self.rounds)
            diff = self.frequency(wb, w) - p
            out[(wb, w)] = 0.0 if sigma == 0 and diff == 0 else (math.inf if sigma == 0 else diff / sigma)
        return out


_VARIABLES = (("r", R_OUTCOMES), ("z", Z_OUTCOMES), ("wbar", WBAR_OUTCOMES), ("w", W_OUTCOMES))


def _lane_counts(args) -> np.ndarray:
    protocol, sampler, seed, lane, count = args
    idx = sample_rounds(protocol, seed, lane, count, sampler)
    counts = np.zeros(4 + 2 * 4, dtype=np.int64)
    counts[:4] = np.bincount(idx[:, 2] * 2 + idx[:, 3], minlength=4)
    for v in range(4):
        counts[4 + 2 * v: 6 + 2 * v] = np.bincount(idx[:, v], minlength=2)
    return counts


def monte_carlo(protocol: Protocol, rounds: int, seed: int, workers: int = 1) -> FrequencyTable:
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if workers < 1:
        raise ValueError("workers must be at least 1")
    sampler = _Sampler(protocol)
    lanes = []
    left, lane = rounds, 0
    while left > 0:
        n = min(LANE_SIZE, left)
        lanes.append((protocol, sampler, seed, lane, n))
        left -= n
        lane += 1
    if workers == 1:
        parts = map(_lane_counts, lanes)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        parts = pool.map(_lane_counts, lanes)
    total = np.zeros(12, dtype=np.int64)
    for part in parts:
        total += part
    if workers > 1:
        pool.shutdown()
    joint = {(wb, w): int(total[i * 2 + j]) for i, wb in enumerate(WBAR_OUTCOMES) for j, w in enumerate(W_OUTCOMES)}
    marg = {name: {lab: int(total[4 + 2 * v + k]) for k, lab in enumerate(labels)} for v, (name, labels) in enumerate(_VARIABLES)}
    return FrequencyTable(rounds, seed, joint, marg)


def hand_evolved_states() -> dict[str, object]:
    """Closed-form states of the default schedule, written out by hand."""
    h = math.sqrt(0.5)
    t3 = math.sqrt(1 / 3)
    okbar = Ket.of(LBAR, {"hbar": h, "tbar": -h})
    failsbar = Ket.of(LBAR, {"hbar": h, "tbar": h})
    ok = Ket.of(L, {"minus": h, "plus": -h})
    fails = Ket.of(L, {"minus": h, "plus": h})
    minus, plus = Ket.basis(L, "minus"), Ket.basis(L, "plus")
    return {
        "init": Ket.of(R, {"heads": t3, "tails": math.sqrt(2 / 3)}),
        "fbar_sets_spin": Ket((R, S), {("heads", "down"): t3, ("tails", "up"): t3, ("tails", "down"): t3}),
        "fbar_sends_spin": Ket((LBAR, S), {("hbar", "down"): t3, ("tbar", "up"): t3, ("tbar", "down"): t3}),
        "f_measures_s": Ket((LBAR, L), {("hbar", "minus"): t3, ("tbar", "minus"): t3, ("tbar", "plus"): t3}),
        "wbar_measures_lbar": {
            "okbar": (1 / 6, tensor(okbar, plus)),
            "failsbar": (5 / 6, tensor(failsbar, (minus.scaled(math.sqrt(4 / 5)) + plus.scaled(math.sqrt(1 / 5))).normalize())),
        },
        "w_measures_l": {
            ("okbar", "ok"): (1 / 2, tensor(okbar, ok)),
            ("okbar", "fails"): (1 / 2, tensor(okbar, fails)),
            ("failsbar", "ok"): (1 / 10, tensor(failsbar, ok)),
            ("failsbar", "fails"): (9 / 10, tensor(failsbar, fails)),
        },
    }


__all__ = [
    "ConfigError",
    "IncompleteTreeError",
    "TimePoint",
    "ProtocolConfig",
    "Protocol",
    "Step",
    "Node",
    "BranchTree",
    "OutcomeTable",
    "RoundStream",
    "RoundRecord",
    "FrequencyTable",
    "build_protocol",
    "evolve_exact",
    "joint_distribution",
    "run_round",
    "sample_rounds",
    "records_from_indices",
    "monte_carlo",
    "random_config",
    "hand_evolved_states",
]
