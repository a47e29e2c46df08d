"""Nested-certainty statements, the equal-time lifting rule, and pathway verdicts.

W reasons at t3 through Wbar, F and Fbar, each at a time point of its own.
A pathway fixes those three times.  Evaluating it means walking the chain,
checking at each hop that the cited agent actually holds the premise it is
credited with, and comparing the resulting claim for w=ok with the
probability the global quantum state gives.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

from .experiment import (
    Protocol,
    TimePoint,
    evolve_exact,
    joint_distribution,
)
from .perspectives import (
    Agent,
    NotModeledError,
    assign_state,
    certain_outcome,
    f_branch_weights,
    fbar_record_for,
    literal_printed_prediction,
    non_equal_time_check,
    open_lab_message,
)
from .statevec import TOL, Basis, Ket, L, born_probability

MAX_DEPTH = 4
EVENT = "w=ok"


class EqualTimeViolation(ValueError):
    """The equal-time lifting rule was asked to cross two different time points."""


class SingleOutcomeViolation(ValueError):
    """An agent would hold two different certain values for one variable at one time."""


# --- statement grammar ------------------------------------------------------


@dataclass(frozen=True)
class OutcomeCertain:
    variable: str
    value: str


@dataclass(frozen=True)
class ProbabilityClaim:
    event: str
    value: float


@dataclass(frozen=True)
class Nested:
    """Certainty about another agent's statement; that statement carries its own time."""

    inner: "Statement"


@dataclass(frozen=True)
class Weighted:
    """Mixture of possible statements by another agent, with classical weights."""

    branches: tuple[tuple[float, "Statement"], ...]


Body = Union[OutcomeCertain, ProbabilityClaim, Nested, Weighted]


@dataclass(frozen=True)
class Statement:
    subject: str
    asserted_at: TimePoint
    body: Body

    def __post_init__(self):
        if self.depth() > MAX_DEPTH:
            raise ValueError(f"statement nests {self.depth()} agents, at most {MAX_DEPTH} allowed")

    def depth(self) -> int:
        if isinstance(self.body, Nested):
            return 1 + self.body.inner.depth()
        if isinstance(self.body, Weighted):
            return 1 + max(s.depth() for _, s in self.body.branches)
        return 1

    def render(self) -> str:
        head = f"{self.subject} is certain at {self.asserted_at.label} that"
        b = self.body
        if isinstance(b, OutcomeCertain):
            return f"{head} {b.variable}={b.value}"
        if isinstance(b, ProbabilityClaim):
            return f"{head} P({b.event}) = {b.value:.12g}"
        if isinstance(b, Nested):
            return f"{head}, {b.inner.render()}"
        parts = [f"with weight {w:.12g}: {s.render()}" for w, s in b.branches]
        return f"{head} [" + "; ".join(parts) + "]"


def apply_assumption_c(outer: Statement, rule: str = "improved") -> Statement:
    """Lift nested certainties to the outer subject.

    ``rule="improved"`` only lifts across hops where the cited agent reasons
    at the same time point as the citing one; ``rule="original"`` lifts
    regardless of time.
    """
    if rule not in ("improved", "original"):
        raise ValueError(f"unknown rule {rule!r}")
    body = outer.body
    if isinstance(body, Nested):
        inner = body.inner
        if rule == "improved" and inner.asserted_at != outer.asserted_at:
            raise EqualTimeViolation(
                f"{outer.subject} at {outer.asserted_at.label} cites {inner.subject} at {inner.asserted_at.label}"
            )
        return Statement(outer.subject, outer.asserted_at, apply_assumption_c(inner, rule).body)
    if isinstance(body, Weighted):
        lifted = []
        for w, s in body.branches:
            if rule == "improved" and s.asserted_at != outer.asserted_at:
                raise EqualTimeViolation(
                    f"{outer.subject} at {outer.asserted_at.label} cites {s.subject} at {s.asserted_at.label}"
                )
            lifted.append((w, apply_assumption_c(s, rule).body))
        return Statement(outer.subject, outer.asserted_at, _combine(lifted))
    return outer


def apply_improved_C(outer: Statement) -> Statement:
    return apply_assumption_c(outer, "improved")


def _combine(branches: list[tuple[float, Body]]) -> Body:
    total = sum(w for w, _ in branches)
    if abs(total - 1) > 1e-9:
        raise ValueError(f"branch weights sum to {total!r}")
    bodies = [b for _, b in branches]
    if all(isinstance(b, ProbabilityClaim) for b in bodies) and len({b.event for b in bodies}) == 1:
        return ProbabilityClaim(bodies[0].event, sum(w * b.value for w, b in branches))
    if all(isinstance(b, OutcomeCertain) for b in bodies) and len(set(bodies)) == 1:
        return bodies[0]
    raise ValueError("cannot merge branches asserting different kinds of claims")


class KnowledgeBase:
    """Statements held by agents, with the single-outcome check applied on entry."""

    def __init__(self, statements: Iterable[Statement] = ()):
        self._held: list[Statement] = []
        for s in statements:
            self.add(s)

    def add(self, s: Statement) -> None:
        if isinstance(s.body, OutcomeCertain):
            for t in self._held:
                if (
                    t.subject == s.subject
                    and t.asserted_at == s.asserted_at
                    and isinstance(t.body, OutcomeCertain)
                    and t.body.variable == s.body.variable
                    and t.body.value != s.body.value
                ):
                    raise SingleOutcomeViolation(
                        f"{s.subject} at {s.asserted_at.label}: {s.body.variable}={t.body.value} and ={s.body.value}"
                    )
        self._held.append(s)

    def __iter__(self):
        return iter(self._held)

    def __len__(self):
        return len(self._held)


def certainty_from_state(subject: str, time: TimePoint, state: Ket, basis: Basis, variable: str) -> Statement | None:
    """An OutcomeCertain statement when the state gives one outcome Born probability 1."""
    lab = certain_outcome(state, basis)
    return None if lab is None else Statement(subject, time, OutcomeCertain(variable, lab))


# --- pathways ---------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Pathway:
    wbar: TimePoint
    f: TimePoint
    fbar: TimePoint

    @property
    def w(self) -> TimePoint:
        return TimePoint.T3

    @property
    def label(self) -> str:
        return f"WBAR:{self.wbar.label},F:{self.f.label},FBAR:{self.fbar.label}"

    @property
    def notation(self) -> str:
        return f"FBAR({self.fbar.label})F({self.f.label})WBAR({self.wbar.label})W(t3)"

    @property
    def equal_time(self) -> bool:
        return self.wbar == self.f == self.fbar == self.w

    @classmethod
    def parse(cls, text: str) -> "Pathway":
        parts = {}
        for item in text.split(","):
            k, sep, v = item.partition(":")
            if not sep:
                raise ValueError(f"malformed pathway item {item!r}")
            parts[k.strip().upper()] = TimePoint.parse(v)
        if set(parts) != {"WBAR", "F", "FBAR"}:
            raise ValueError(f"pathway needs WBAR, F and FBAR times, got {sorted(parts)}")
        return cls(parts["WBAR"], parts["F"], parts["FBAR"])


def enumerate_pathways() -> list[Pathway]:
    """The nine deduction routes W can take at t3.

    Wbar's and F's times range freely over t1..t3; Fbar's time repeats the
    step from Wbar to F (clamped to t1..t3), which covers the all-equal routes
    and the strictly backward t3, t2, t1 route.
    """
    out = []
    times = (TimePoint.T1, TimePoint.T2, TimePoint.T3)
    for wb in times:
        for f in times:
            fb = TimePoint(min(max(2 * f - wb, 1), 3))
            out.append(Pathway(wb, f, fb))
    return sorted(out)


@dataclass(frozen=True)
class ConsistentPrediction:
    probability: float

    def __post_init__(self):
        if not -TOL <= self.probability <= 1 + TOL:
            raise ValueError(f"prediction {self.probability} outside [0, 1]")


@dataclass(frozen=True)
class ContradictionWithQM:
    claimed: float
    quantum: float


@dataclass(frozen=True)
class BrokenPremise:
    hop: str
    description: str


VerdictKind = Union[ConsistentPrediction, ContradictionWithQM, BrokenPremise]


@dataclass(frozen=True)
class Verdict:
    pathway: Pathway
    kind: VerdictKind
    statement: Statement | None = None
    improved_c_admissible: bool = False
    worked_chain: bool = False
    transcript: tuple[str, ...] = ()
    premise_check: dict | None = None

    @property
    def name(self) -> str:
        return type(self.kind).__name__

    def as_dict(self) -> dict:
        d = {"pathway": self.pathway.label, "notation": self.pathway.notation, "verdict": self.name}
        k = self.kind
        if isinstance(k, ConsistentPrediction):
            d["probability"] = k.probability
        elif isinstance(k, ContradictionWithQM):
            d["claimed"], d["quantum"] = k.claimed, k.quantum
        else:
            d["hop"], d["reason"] = k.hop, k.description
        d["improved_c_admissible"] = self.improved_c_admissible
        d["semantics"] = "worked chain" if self.worked_chain else "artifact-defined premise check"
        d["transcript"] = list(self.transcript)
        if self.premise_check is not None:
            d["premise_check"] = self.premise_check
        return d


_WORKED_CHAINS = {
    Pathway(TimePoint.T3, TimePoint.T3, TimePoint.T3),
    Pathway(TimePoint.T3, TimePoint.T2, TimePoint.T1),
}


def _step_time(protocol: Protocol, step: str) -> TimePoint:
    return next(s.time for s in protocol.steps if s.name == step)


def _classify(claimed: float, quantum: float) -> VerdictKind:
    if abs(claimed - quantum) <= TOL:
        return ConsistentPrediction(claimed)
    return ContradictionWithQM(claimed, quantum)


def _admissible(stmt: Statement) -> bool:
    try:
        apply_improved_C(stmt)
    except EqualTimeViolation:
        return False
    return True


def evaluate_pathway(p: Pathway, protocol: Protocol | None = None, herald: str = "okbar") -> Verdict:
    protocol = protocol or Protocol.default()
    table = joint_distribution(evolve_exact(protocol))
    worked = p in _WORKED_CHAINS
    t_wbar = _step_time(protocol, "wbar_measures_lbar")
    t_f = _step_time(protocol, "f_measures_s")
    t_fbar = _step_time(protocol, "fbar_measures_r")

    def broken(hop, why, log=()):
        return Verdict(p, BrokenPremise(hop, why), worked_chain=worked, transcript=tuple(log) + (f"{hop}: {why}",))

    if table.marginal_wbar(herald) <= TOL:
        return broken("W->WBAR", f"the herald wbar={herald} has probability zero")
    quantum = table.conditional("ok", herald)

    if p.wbar < t_wbar:
        return broken("W->WBAR", f"Wbar holds no wbar record at {p.wbar.label}; it exists from {t_wbar.label}")
    if p.f > p.wbar:
        return broken("WBAR->F", f"Wbar at {p.wbar.label} cannot cite a conclusion F draws later, at {p.f.label}")
    if p.fbar > p.f:
        return broken("F->FBAR", f"F at {p.f.label} cannot cite a conclusion Fbar draws later, at {p.fbar.label}")

    lab_l = assign_state(Agent.WBAR, TimePoint.T3, {"wbar": herald}, "L", protocol).body
    log = [f"WBAR at t3, given wbar={herald}, assigns L = {lab_l!r}"]
    z = certain_outcome(lab_l, Basis.computational(L))

    if p.equal_time and z is None:
        # F holds no certainty, so the chain ends at Wbar's own assignment
        claim = born_probability(lab_l, protocol.w_basis.projector("ok"))
        stmt = Statement("W", TimePoint.T3, Nested(Statement("WBAR", TimePoint.T3, ProbabilityClaim(EVENT, claim))))
        log.append("F is certain of no z value at t3; the chain stops at Wbar")
        lifted = apply_improved_C(stmt)
        log.append(f"lifted: {lifted.render()}")
        return Verdict(p, _classify(lifted.body.value, quantum), stmt, True, worked, tuple(log))

    if p.f < t_f:
        return broken("WBAR->F", f"F holds no z record at {p.f.label}; F measures during {t_f.label}", log)
    if z is None:
        return broken("WBAR->F", "Wbar's L assignment is not a z eigenstate, so F is certain of nothing", log)
    log.append(f"F is certain at {p.f.label} that z={z}")
    try:
        r = fbar_record_for(protocol, z)
    except NotModeledError as exc:
        return broken("F->FBAR", str(exc), log)
    if p.fbar < t_fbar:
        return broken("F->FBAR", f"Fbar holds no record at {p.fbar.label}", log)

    if p.equal_time:
        weights = f_branch_weights(protocol, z)
        log.append("F at t3 assigns Lbar the mixture " + ", ".join(f"{w:.12g} {b}" for b, w in weights.items()))
        branches = []
        for b, w in weights.items():
            msg = open_lab_message(b, protocol)
            log.append(
                f"  Lbar={b}: quasi-weights {[round(q, 12) for q, _ in msg.entries]} on claims "
                f"{[round(m, 12) for _, m in msg.entries]}, effective {msg.effective_probability:.12g}"
                f" (Born check {msg.born_probability:.12g})"
            )
            branches.append((w, Statement("FBAR", TimePoint.T3, ProbabilityClaim(EVENT, msg.effective_probability))))
        stmt = Statement(
            "W",
            TimePoint.T3,
            Nested(Statement("WBAR", TimePoint.T3, Nested(Statement("F", TimePoint.T3, Weighted(tuple(branches)))))),
        )
        lifted = apply_improved_C(stmt)
        log.append(f"lifted: {lifted.render()}")
        return Verdict(p, _classify(lifted.body.value, quantum), stmt, True, worked, tuple(log))

    # backward chain: Fbar's record r is taken as fixed, and the L state it
    # implies is assumed unchanged until W measures
    lbar = assign_state(Agent.FBAR, TimePoint.T1, {"r": r}, "Lbar", protocol).body
    record = protocol.lab_record(protocol.spin_prep[r]).normalize()
    claim = born_probability(record, protocol.w_basis.projector("ok"))
    log.append(f"F at {p.f.label} infers Lbar = {lbar!r} at {p.fbar.label}, so Fbar is certain r={r}")
    log.append(f"Fbar at {p.fbar.label} expects L = {record!r} at t3 and claims P(w=ok) = {claim:.12g}")
    stmt = Statement(
        "W",
        TimePoint.T3,
        Nested(
            Statement(
                "WBAR",
                p.wbar,
                Nested(Statement("F", p.f, Nested(Statement("FBAR", p.fbar, ProbabilityClaim(EVENT, claim))))),
            )
        ),
    )
    lifted = apply_assumption_c(stmt, "original")
    log.append(f"lifted with the time-blind rule: {lifted.render()}")
    check = None
    try:
        check = non_equal_time_check(protocol, herald).as_dict()
        if check["contradiction"]:
            log.append(
                f"premise conflict: P(z=minus) is {check['p_z_minus_heralded_global']:.12g} in the heralded state "
                f"but {check['p_z_minus_given_record_at_t1']:.12g} once Lbar holds r={r}"
            )
    except NotModeledError:
        pass
    return Verdict(p, _classify(lifted.body.value, quantum), stmt, _admissible(stmt), worked, tuple(log), check)


def evaluate_all(protocol: Protocol | None = None) -> list[Verdict]:
    protocol = protocol or Protocol.default()
    return [evaluate_pathway(p, protocol) for p in enumerate_pathways()]


# --- chain and report -------------------------------------------------------


def conditional_chain_factors(
    protocol: Protocol | None = None, r: str = "tails", z: str = "plus", wbar: str = "okbar", w: str = "ok"
) -> list[tuple[str, float]]:
    """Step-by-step conditionals read off the branch tree.

    P(r), P(z | r) and P(w | wbar) are branch probabilities; P(wbar | z) is
    Wbar's Born probability on the relative state of the (r, z) record branch.
    A missing branch contributes zero.
    """
    protocol = protocol or Protocol.default()
    tree = evolve_exact(protocol)
    try:
        rn = tree.child(tree.root, r)
    except KeyError:
        return [(f"P(r={r})", 0.0)]
    try:
        zn = tree.child(rn, z)
    except KeyError:
        return [(f"P(r={r})", rn.probability), (f"P(z={z}|r={r})", 0.0)]
    p_wbar = born_probability(zn.state, protocol.wbar_basis.projector(wbar))
    try:
        p_w = tree.child(tree.child(zn, wbar), w).probability
    except KeyError:
        p_w = 0.0
    return [
        (f"P(r={r})", rn.probability),
        (f"P(z={z}|r={r})", zn.probability),
        (f"P(wbar={wbar}|z={z})", p_wbar),
        (f"P(w={w}|wbar={wbar})", p_w),
    ]


def conditional_chain_probability(protocol: Protocol | None = None) -> float:
    prod = 1.0
    for _, v in conditional_chain_factors(protocol):
        prod *= v
    return prod


@dataclass
class Report:
    joint: dict
    chain_factors: list
    chain_product: float
    verdicts: list[Verdict]
    non_equal_time: dict | None
    transcript: list[str]
    equal_time_prediction: float | None
    quantum_conditional: float
    literal_printed_value: float | None
    notes: list[str] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.equal_time_prediction is not None and abs(self.equal_time_prediction - self.quantum_conditional) <= TOL

    def as_dict(self) -> dict:
        return {
            "overall": "consistent" if self.consistent else "inconsistent",
            "joint": self.joint,
            "conditional_chain": {"factors": [[k, v] for k, v in self.chain_factors], "product": self.chain_product},
            "equal_time_prediction": self.equal_time_prediction,
            "quantum_conditional": self.quantum_conditional,
            "pathways": [v.as_dict() for v in self.verdicts],
            "non_equal_time_check": self.non_equal_time,
            "derivation": self.transcript,
            "literal_printed_value": self.literal_printed_value,
            "notes": self.notes,
        }


def consistency_report(protocol: Protocol | None = None) -> Report:
    protocol = protocol or Protocol.default()
    table = joint_distribution(evolve_exact(protocol))
    joint = {f"{wb},{w}": p for wb, w, p in table.cells()}
    factors = conditional_chain_factors(protocol)
    product = 1.0
    for _, v in factors:
        product *= v
    verdicts = evaluate_all(protocol)
    eq = next(v for v in verdicts if v.pathway.equal_time)
    eq_pred = eq.kind.probability if isinstance(eq.kind, ConsistentPrediction) else None
    if isinstance(eq.kind, ContradictionWithQM):
        eq_pred = eq.kind.claimed
    try:
        neq = non_equal_time_check(protocol).as_dict()
    except NotModeledError:
        neq = None
    transcript = []
    if eq.statement is not None:
        transcript.append("A(i): " + eq.statement.render())
        transcript.append("A(ii): " + apply_improved_C(eq.statement).render())
    transcript.extend(eq.transcript)
    notes = [
        "verdicts for pathways other than (t3,t3,t3) and (t3,t2,t1) come from an artifact-defined premise check",
    ]
    try:
        literal = literal_printed_prediction(protocol)
        notes.append(
            f"the printed two-branch sum carries an extra factor 1/2 on its second term; read literally it gives "
            f"{literal:.12g}, the equal-weight average used here gives {eq_pred if eq_pred is None else f'{eq_pred:.12g}'}"
        )
    except NotModeledError:
        literal = None
    quantum = table.conditional("ok", "okbar") if table.marginal_wbar("okbar") > TOL else float("nan")
    return Report(joint, factors, product, verdicts, neq, transcript, eq_pred, quantum, literal, notes)
