"""State assignments made by each agent at each time point.

The catalog is closed: only the situations the four-agent deduction actually
passes through are modeled, and anything else raises NotModeledError.

Fbar's view from inside a lab that the outside world describes as
|okbar> = (|hbar> - |tbar>)/sqrt(2) is a superposition of Fbar's records.  Those
records live in the same two-dimensional L space (the claim "w=ok has
probability 1/2" is |minus>, the claim "probability 0" is |fails>), so the
branches overlap and the plain 1/sqrt(2) prefactor has to be replaced by the
norm computed from their Gram matrix.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .experiment import Protocol, TimePoint, evolve_exact, joint_distribution
from .statevec import (
    LBAR,
    TOL,
    Basis,
    DensityMatrix,
    Ket,
    L,
    Projector,
    born_probability,
    collapse,
    inner,
    mix,
)


class NotModeledError(LookupError):
    """The (agent, time, conditioning) situation is outside the catalog."""


class Agent(str, enum.Enum):
    FBAR = "FBAR"
    F = "F"
    WBAR = "WBAR"
    W = "W"

    @classmethod
    def parse(cls, text: str) -> "Agent":
        key = text.strip().upper().replace("̄", "BAR")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown agent {text!r} (expected FBAR, F, WBAR, W)") from None


@dataclass(frozen=True)
class RecordBranch:
    record_of: str  # Fbar's R result that produced this record
    amplitude: complex  # component of Fbar's lab state on that result
    record: Ket  # L state the record corresponds to
    claim: float  # probability of w=ok asserted by this record


@dataclass(frozen=True)
class RecordSuperposition:
    lab_outcome: str
    branches: tuple[RecordBranch, ...]
    event: str = "w=ok"

    @property
    def raw(self) -> Ket:
        total = None
        for b in self.branches:
            term = b.record.scaled(b.amplitude)
            total = term if total is None else total + term
        return total

    @property
    def norm_factor(self) -> float:
        return 1.0 / self.raw.norm()

    @property
    def coefficients(self) -> tuple[complex, ...]:
        """Branch coefficients of the normalized state."""
        return tuple(self.norm_factor * b.amplitude for b in self.branches)

    @property
    def normalization(self) -> float:
        """Prefactor of the bracket once the largest branch weight is scaled to one."""
        top = max(abs(b.amplitude) for b in self.branches)
        return top * self.norm_factor

    @property
    def state(self) -> Ket:
        return self.raw.normalize()

    def gram(self) -> np.ndarray:
        return record_overlap(self)


PerspectiveBody = Union[Ket, DensityMatrix, RecordSuperposition]


@dataclass(frozen=True)
class PerspectiveState:
    agent: Agent
    time: TimePoint
    conditioning: tuple[tuple[str, str], ...]
    lab: str
    body: PerspectiveBody
    note: str = ""

    @property
    def kind(self) -> str:
        if isinstance(self.body, Ket):
            return "pure"
        if isinstance(self.body, DensityMatrix):
            return "mixed"
        return "record_superposition"


def _norm_cond(conditioning) -> tuple[tuple[str, str], ...]:
    if conditioning is None:
        return ()
    if isinstance(conditioning, Mapping):
        items = conditioning.items()
    else:
        items = []
        for c in conditioning:
            if isinstance(c, str):
                k, _, v = c.partition("=")
                items.append((k.strip(), v.strip()))
            else:
                items.append(tuple(c))
    return tuple(sorted((str(k).lower(), str(v)) for k, v in items))


def _default():
    return Protocol.default()


# --- helpers shared with the reasoning engine -------------------------------


def certain_outcome(state: Ket, basis: Basis) -> str | None:
    """Label the state assigns probability one to, if any."""
    for lab, p in basis.probabilities(state).items():
        if abs(p - 1) <= TOL:
            return lab
    return None


def heralded_lab_state(protocol: Protocol, wbar: str) -> Ket:
    """L factor of the global state once Wbar's result is known."""
    row4 = protocol.global_states()["f_measures_s"]
    post, _ = collapse(row4, protocol.wbar_basis.projector(wbar))
    return post.factor(("L",))


def retrodict_lbar(protocol: Protocol, z: str) -> Ket:
    """Lbar factor at t2 given F's record, from the coherent global state."""
    row4 = protocol.global_states()["f_measures_s"]
    post, _ = collapse(row4, Projector(Ket.basis(L, z)))
    lbar = post.factor(("Lbar",))
    if lbar is None:
        raise NotModeledError(f"Lbar is still entangled after conditioning on z={z}")
    return lbar


def fbar_record_for(protocol: Protocol, z: str) -> str:
    """The unique R result compatible with F's record ``z``."""
    row4 = protocol.global_states()["f_measures_s"]
    cands = []
    for r, rbar in (("heads", "hbar"), ("tails", "tbar")):
        k = Ket((LBAR, L), {(rbar, z): 1.0})
        if abs(inner(k, row4)) ** 2 > TOL:
            cands.append(r)
    if len(cands) != 1:
        raise NotModeledError(f"z={z} does not single out Fbar's result (compatible: {cands})")
    return cands[0]


def record_superposition(protocol: Protocol, lab_outcome: str) -> RecordSuperposition:
    lab = protocol.wbar_basis[lab_outcome]
    ok = protocol.w_basis["ok"]
    branches = []
    for r in ("heads", "tails"):
        amp = inner(protocol.rbar(r), lab)
        if abs(amp) <= TOL:
            continue
        rec = protocol.lab_record(protocol.spin_prep[r]).normalize()
        branches.append(RecordBranch(r, amp, rec, abs(inner(ok, rec)) ** 2))
    return RecordSuperposition(lab_outcome, tuple(branches))


# --- the catalog ------------------------------------------------------------


def _wigner_heralded(protocol, cond, lab):
    wbar = cond["wbar"]
    if lab == "Lbar":
        return protocol.wbar_basis[wbar], f"Wbar's result {wbar} fixes Lbar"
    if lab == "L":
        k = heralded_lab_state(protocol, wbar)
        return k, f"L factor of the global state collapsed on wbar={wbar}"
    return None


def _w_final(protocol, cond, lab):
    if lab == "Lbar":
        return protocol.wbar_basis[cond["wbar"]], "announced result"
    if lab == "L":
        return protocol.w_basis[cond["w"]], "W's own result"
    return None


def _f_t3(protocol, cond, lab):
    z = cond["z"]
    if lab == "L":
        return Ket.basis(L, z), "F's own record"
    if lab == "Lbar":
        before = retrodict_lbar(protocol, z)
        branches = [(abs(inner(k, before)) ** 2, k) for _, k in protocol.wbar_basis.outcomes]
        return mix(branches), "Lbar at t2 sent through Wbar's measurement with the result unknown"
    return None


def _f_t2(protocol, cond, lab):
    z = cond["z"]
    if lab == "L":
        return Ket.basis(L, z), "F's own record"
    if lab == "Lbar":
        return retrodict_lbar(protocol, z), "Lbar factor after conditioning the global state on z"
    return None


def _fbar_t1(protocol, cond, lab):
    r = cond["r"]
    if lab == "Lbar":
        return protocol.rbar(r), "Fbar's own record"
    if lab == "S":
        return protocol.spin_prep[r], "spin Fbar prepared"
    return None


def _fbar_t3(protocol, cond, lab):
    outcome = cond["lbar"]
    if lab == "L":
        return record_superposition(protocol, outcome), f"Fbar's records inside Lbar = |{outcome}>"
    if lab == "Lbar":
        return protocol.wbar_basis[outcome], "Fbar's lab is unchanged from t1 in Fbar's own account"
    return None


_CATALOG = {
    (Agent.WBAR, TimePoint.T3, ("wbar",)): (_wigner_heralded, ("Lbar", "L")),
    (Agent.W, TimePoint.T3, ("wbar",)): (_wigner_heralded, ("Lbar", "L")),
    (Agent.W, TimePoint.T3, ("w", "wbar")): (_w_final, ("Lbar", "L")),
    (Agent.F, TimePoint.T3, ("z",)): (_f_t3, ("Lbar", "L")),
    (Agent.F, TimePoint.T2, ("z",)): (_f_t2, ("L", "Lbar")),
    (Agent.FBAR, TimePoint.T1, ("r",)): (_fbar_t1, ("Lbar", "S")),
    (Agent.FBAR, TimePoint.T3, ("lbar",)): (_fbar_t3, ("L", "Lbar")),
}

_ALLOWED_VALUES = {
    "wbar": ("okbar", "failsbar"),
    "w": ("ok", "fails"),
    "z": ("minus", "plus"),
    "r": ("heads", "tails"),
    "lbar": ("okbar", "failsbar"),
}


def catalog() -> list[tuple[str, str, tuple[str, ...], tuple[str, ...]]]:
    """(agent, time, conditioning keys, labs) for every modeled situation."""
    return [(a.value, t.label, keys, labs) for (a, t, keys), (_, labs) in _CATALOG.items()]


def assign_state(
    agent: Agent | str,
    time: TimePoint | str,
    conditioning=None,
    lab: str | None = None,
    protocol: Protocol | None = None,
) -> PerspectiveState:
    agent = agent if isinstance(agent, Agent) else Agent.parse(agent)
    time = time if isinstance(time, TimePoint) else TimePoint.parse(time)
    cond = _norm_cond(conditioning)
    keys = tuple(sorted(k for k, _ in cond))
    entry = _CATALOG.get((agent, time, keys))
    if entry is None:
        raise NotModeledError(f"no state assignment modeled for {agent.value} at {time.label} given {dict(cond) or '{}'}")
    for k, v in cond:
        if v not in _ALLOWED_VALUES[k]:
            raise NotModeledError(f"{k}={v} is not a value of {k} (expected one of {_ALLOWED_VALUES[k]})")
    handler, labs = entry
    lab = lab or labs[0]
    if lab not in labs:
        raise NotModeledError(f"{agent.value} at {time.label} assigns no state to lab {lab} (modeled: {labs})")
    protocol = protocol or _default()
    result = handler(protocol, dict(cond), lab)
    if result is None or result[0] is None:
        raise NotModeledError(f"{agent.value} holds no pure or mixed assignment for {lab} here")
    body, note = result
    return PerspectiveState(agent, time, cond, lab, body, note)


# --- overlaps and messages --------------------------------------------------


def record_overlap(rs: RecordSuperposition) -> np.ndarray:
    recs = [b.record for b in rs.branches]
    return np.array([[inner(a, b) for b in recs] for a in recs])


def normalization_from_gram(rs: RecordSuperposition) -> float:
    """Bracket prefactor recomputed from the Gram matrix alone."""
    top = max(abs(b.amplitude) for b in rs.branches)
    c = np.array([b.amplitude / top for b in rs.branches])
    return 1.0 / math.sqrt(float(np.real(c.conj() @ record_overlap(rs) @ c)))


@dataclass(frozen=True)
class MessageDistribution:
    lab_outcome: str
    entries: tuple[tuple[float, float], ...]  # (quasi-weight, claimed probability)
    records: tuple[str, ...]
    born_probability: float  # direct Born probability of w=ok on the record state

    @property
    def effective_probability(self) -> float:
        return sum(q * m for q, m in self.entries)

    @property
    def consistent(self) -> bool:
        return abs(self.effective_probability - self.born_probability) <= TOL


def open_lab_message(branch: str, protocol: Protocol | None = None) -> MessageDistribution:
    """What F would be told by Fbar on opening Lbar in the given t3 branch.

    Quasi-weights are the squared coefficients of the normalized record
    superposition; they are not probabilities and may exceed one.
    """
    protocol = protocol or _default()
    rs = record_superposition(protocol, branch)
    entries = tuple((abs(c) ** 2, b.claim) for c, b in zip(rs.coefficients, rs.branches))
    born = born_probability(rs.state, protocol.w_basis.projector("ok"))
    return MessageDistribution(branch, entries, tuple(b.record_of for b in rs.branches), born)


def f_branch_weights(protocol: Protocol, z: str) -> dict[str, float]:
    """F's t3 weights on Wbar's two results (diagonal of F's Lbar assignment)."""
    rho = assign_state(Agent.F, TimePoint.T3, {"z": z}, "Lbar", protocol).body
    kets = [k for _, k in protocol.wbar_basis.outcomes]
    diag = np.real(np.diag(rho.in_basis(kets)))
    return dict(zip(protocol.wbar_basis.labels, diag.tolist()))


def w_equal_time_prediction(protocol: Protocol | None = None, herald: str = "okbar") -> float:
    """W's t3 probability for w=ok, averaged over F's view of Wbar's result."""
    protocol = protocol or _default()
    z = certain_outcome(heralded_lab_state(protocol, herald), Basis.computational(L))
    if z is None:
        raise NotModeledError(f"Wbar's L assignment after {herald} gives F no certain record")
    weights = f_branch_weights(protocol, z)
    return sum(w * open_lab_message(b, protocol).effective_probability for b, w in weights.items())


def literal_printed_prediction(protocol: Protocol | None = None) -> float:
    """The two-branch sum with the extra factor 1/2 on the second term, as printed."""
    protocol = protocol or _default()
    a = open_lab_message("okbar", protocol).effective_probability
    b = open_lab_message("failsbar", protocol).effective_probability
    return 0.5 * a + 0.5 * 0.5 * b


def equal_time_joint(protocol: Protocol | None = None, herald: str = "okbar") -> float:
    protocol = protocol or _default()
    row4 = protocol.global_states()["f_measures_s"]
    return born_probability(row4, protocol.wbar_basis.projector(herald)) * w_equal_time_prediction(protocol, herald)


@dataclass(frozen=True)
class InconsistencyReport:
    herald: str
    certain_z: str
    retrodicted_record: str
    p_minus_heralded: float
    p_minus_from_premise: float

    @property
    def contradiction(self) -> bool:
        return abs(self.p_minus_heralded - self.p_minus_from_premise) > TOL

    def as_dict(self) -> dict:
        return {
            "herald": self.herald,
            "certain_z": self.certain_z,
            "retrodicted_record": self.retrodicted_record,
            "p_z_minus_heralded_global": self.p_minus_heralded,
            "p_z_minus_given_record_at_t1": self.p_minus_from_premise,
            "contradiction": self.contradiction,
        }


def non_equal_time_check(protocol: Protocol | None = None, herald: str = "okbar") -> InconsistencyReport:
    """Back-in-time chain: herald -> z certain -> Fbar's record, then re-run from that record.

    (a) is P(z=minus) in the heralded global state; (b) is P(z=minus) once
    Lbar is taken to hold the retrodicted record at t1.
    """
    protocol = protocol or _default()
    minus = Projector(Ket.basis(L, "minus"))
    lab_l = heralded_lab_state(protocol, herald)
    a = born_probability(lab_l, minus)
    z = certain_outcome(lab_l, Basis.computational(L))
    if z is None:
        raise NotModeledError(f"after {herald} no z value is certain; nothing to retrodict")
    r = fbar_record_for(protocol, z)
    from_record = protocol.lab_record(protocol.spin_prep[r]).normalize()
    b = born_probability(from_record, minus)
    return InconsistencyReport(herald, z, r, a, b)


def open_lab_restricted(lab_state: Ket) -> list[tuple[str, float, Ket]]:
    """Open Lbar with the only projectors the schedule allows, {|hbar><hbar|, |tbar><tbar|}."""
    out = []
    for lab, k in Basis.computational(LBAR).outcomes:
        p = born_probability(lab_state, Projector(k))
        if p > TOL:
            post, _ = collapse(lab_state, Projector(k))
            out.append((lab, p, post))
    return out


def quantum_conditional(protocol: Protocol | None = None, w: str = "ok", herald: str = "okbar") -> float:
    protocol = protocol or _default()
    return joint_distribution(evolve_exact(protocol)).conditional(w, herald)
