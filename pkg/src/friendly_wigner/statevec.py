"""Exact linear algebra on small, labeled composite Hilbert spaces.

States are kept as sparse mappings from label tuples to amplitudes so that
printed output stays readable; all arithmetic goes through dense numpy
arrays, which is cheap at the dimensions involved here (at most 16).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

TOL = 1e-12
MIX_SUM_TOL = 1e-9


class StateError(ValueError):
    """Invalid construction or combination of states."""


class ImpossibleBranchError(StateError):
    """Projection onto an outcome that has zero Born probability."""


class IncompleteBasisError(StateError):
    pass


@dataclass(frozen=True)
class Subsystem:
    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise StateError(f"duplicate basis labels in subsystem {self.name}")

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise StateError(f"{label!r} is not a basis label of {self.name}") from None


R = Subsystem("R", ("heads", "tails"))
S = Subsystem("S", ("up", "down"))
LBAR = Subsystem("Lbar", ("hbar", "tbar"))
L = Subsystem("L", ("minus", "plus"))


@dataclass(frozen=True)
class BasisLabel:
    subsystem: str
    name: str

    def __str__(self):
        return f"{self.name}_{self.subsystem}"


def _dims(space: Sequence[Subsystem]) -> tuple[int, ...]:
    return tuple(s.dim for s in space)


def _check_disjoint(a: Sequence[Subsystem], b: Sequence[Subsystem]):
    names = {s.name for s in a}
    clash = names & {s.name for s in b}
    if clash:
        raise StateError(f"overlapping subsystems: {sorted(clash)}")


class Ket:
    """Pure state over an ordered tuple of subsystems.

    ``amplitudes`` maps label tuples (one label per subsystem, in ``space``
    order) to complex amplitudes; absent keys are zero.  Kets are normalized
    unless built with ``normalized=False``, in which case ``unnormalized`` is
    set and downstream probability routines refuse them unless told otherwise.

    Two kets compare equal when they live on the same space and differ by at
    most a global phase.
    """

    __slots__ = ("space", "_vec", "unnormalized")

    def __init__(
        self,
        space: Sequence[Subsystem],
        amplitudes: Mapping[tuple[str, ...], complex] | None = None,
        *,
        normalized: bool = True,
        vector: np.ndarray | None = None,
    ):
        space = tuple(space)
        names = [s.name for s in space]
        if len(set(names)) != len(names):
            raise StateError(f"repeated subsystem in space {names}")
        dims = _dims(space)
        if vector is not None:
            vec = np.asarray(vector, dtype=complex).reshape(dims)
        else:
            vec = np.zeros(dims, dtype=complex)
            for key, amp in (amplitudes or {}).items():
                if isinstance(key, str):
                    key = (key,)
                if len(key) != len(space):
                    raise StateError(f"label {key} does not match space {names}")
                idx = tuple(s.index(k) for s, k in zip(space, key))
                vec[idx] += amp
        norm = float(np.linalg.norm(vec))
        if normalized and abs(norm - 1.0) > TOL:
            raise StateError(f"ket norm is {norm!r}, expected 1")
        vec.setflags(write=False)
        self.space = space
        self._vec = vec
        self.unnormalized = not normalized

    # construction helpers
    @classmethod
    def basis(cls, subsystem: Subsystem, label: str) -> "Ket":
        return cls((subsystem,), {(label,): 1.0})

    @classmethod
    def of(cls, subsystem: Subsystem, components: Mapping[str, complex], *, normalized=True) -> "Ket":
        return cls((subsystem,), {(k,): v for k, v in components.items()}, normalized=normalized)

    @property
    def tensor_array(self) -> np.ndarray:
        return self._vec

    @property
    def vector(self) -> np.ndarray:
        return self._vec.reshape(-1)

    @property
    def amplitudes(self) -> dict[tuple[str, ...], complex]:
        out = {}
        for idx in itertools.product(*(range(d) for d in _dims(self.space))):
            amp = complex(self._vec[idx])
            if abs(amp) > TOL:
                out[tuple(s.labels[i] for s, i in zip(self.space, idx))] = amp
        return out

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.space)

    def norm(self) -> float:
        return float(np.linalg.norm(self._vec))

    def normalize(self) -> "Ket":
        n = self.norm()
        if n <= TOL:
            raise StateError("cannot normalize the zero vector")
        return Ket(self.space, vector=self._vec / n)

    def scaled(self, factor: complex) -> "Ket":
        return Ket(self.space, vector=self._vec * factor, normalized=False)

    def __add__(self, other: "Ket") -> "Ket":
        other = other.reorder(self.names)
        return Ket(self.space, vector=self._vec + other._vec, normalized=False)

    def __sub__(self, other: "Ket") -> "Ket":
        return self + other.scaled(-1)

    def reorder(self, names: Sequence[str]) -> "Ket":
        """Same state with subsystems permuted into ``names`` order."""
        names = tuple(names)
        if names == self.names:
            return self
        if sorted(names) != sorted(self.names):
            raise StateError(f"spaces differ: {self.names} vs {names}")
        perm = [self.names.index(n) for n in names]
        space = tuple(self.space[p] for p in perm)
        return Ket(space, vector=np.transpose(self._vec, perm), normalized=not self.unnormalized)

    def relabel(self, old: Subsystem, new: Subsystem, mapping: Mapping[str, str] | None = None) -> "Ket":
        """Rename a subsystem and its labels; an isometry onto the new factor."""
        table = {o: {(mapping or dict(zip(old.labels, new.labels)))[o]: 1.0} for o in old.labels}
        return self.transfer(old, new, table)

    def transfer(self, old: Subsystem, new: Subsystem, table: Mapping[str, Mapping[str, complex]]) -> "Ket":
        """Apply the linear map |o> -> sum_n table[o][n] |n> from ``old`` to ``new``."""
        pos = self.names.index(old.name)
        m = np.zeros((new.dim, old.dim), dtype=complex)
        for o, row in table.items():
            for n, amp in row.items():
                m[new.index(n), old.index(o)] = amp
        vec = np.moveaxis(np.tensordot(m, self._vec, axes=([1], [pos])), 0, pos)
        space = self.space[:pos] + (new,) + self.space[pos + 1:]
        return Ket(space, vector=vec, normalized=False if self.unnormalized else abs(np.linalg.norm(vec) - 1) <= TOL)

    def factor(self, names: Sequence[str]) -> "Ket | None":
        """Return the state of ``names`` if the ket is a product across that cut, else None."""
        names = tuple(names)
        rest = tuple(n for n in self.names if n not in names)
        if not rest:
            return self.reorder(names)
        k = self.reorder(names + rest)
        da = int(np.prod(_dims(k.space[: len(names)])))
        mat = k._vec.reshape(da, -1)
        u, sv, _ = np.linalg.svd(mat)
        if sv.size > 1 and sv[1] > 1e-9:
            return None
        return Ket(k.space[: len(names)], vector=u[:, 0] * sv[0] / np.linalg.norm(sv[0]))

    def density(self) -> "DensityMatrix":
        v = self.vector
        return DensityMatrix(self.space, np.outer(v, v.conj()))

    def __eq__(self, other):
        if not isinstance(other, Ket) or sorted(self.names) != sorted(other.names):
            return NotImplemented if not isinstance(other, Ket) else False
        o = other.reorder(self.names)
        if abs(self.norm() - o.norm()) > 1e-9:
            return False
        ov = abs(np.vdot(self.vector, o.vector))
        return abs(ov - self.norm() * o.norm()) <= 1e-9

    __hash__ = None

    def __repr__(self):
        terms = " + ".join(f"({a:.6g})|{','.join(k)}>" for k, a in self.amplitudes.items())
        return f"Ket[{','.join(self.names)}]({terms or '0'})"


def tensor(a: Ket, b: Ket) -> Ket:
    _check_disjoint(a.space, b.space)
    vec = np.multiply.outer(a.tensor_array, b.tensor_array)
    return Ket(a.space + b.space, vector=vec, normalized=not (a.unnormalized or b.unnormalized))


def inner(a: Ket, b: Ket) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if set(a.names) != set(b.names):
        raise StateError(f"inner product across different spaces {a.names} vs {b.names}")
    return complex(np.vdot(a.vector, b.reorder(a.names).vector))


def fidelity(a: Ket, b: Ket) -> float:
    return abs(inner(a, b)) ** 2


class Projector:
    """Orthogonal projector onto span(targets), acting on the targets' subsystems.

    Targets must be normalized and mutually orthogonal; they share one space.
    """

    def __init__(self, targets: Ket | Iterable[Ket]):
        targets = (targets,) if isinstance(targets, Ket) else tuple(targets)
        if not targets:
            raise StateError("projector needs at least one target")
        names = targets[0].names
        targets = tuple(t.reorder(names) for t in targets)
        for t in targets:
            if t.unnormalized or abs(t.norm() - 1) > TOL:
                raise StateError("projector targets must be normalized")
        gram = np.array([[inner(x, y) for y in targets] for x in targets])
        if not np.allclose(gram, np.eye(len(targets)), atol=TOL):
            raise StateError("projector targets are not orthonormal")
        self.targets = targets
        self.scope = targets[0].space
        m = sum(np.outer(t.vector, t.vector.conj()) for t in targets)
        self.matrix = m

    @classmethod
    def identity(cls, space: Sequence[Subsystem]) -> "Projector":
        space = tuple(space)
        kets = []
        for labels in itertools.product(*(s.labels for s in space)):
            kets.append(Ket(space, {labels: 1.0}))
        return cls(kets)

    @property
    def scope_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.scope)

    def apply(self, state: Ket) -> Ket:
        """(P ⊗ I)|state>, unnormalized."""
        missing = set(self.scope_names) - set(state.names)
        if missing:
            raise StateError(f"projector acts on {sorted(missing)} absent from the state")
        rest = tuple(n for n in state.names if n not in self.scope_names)
        k = state.reorder(self.scope_names + rest)
        d = self.matrix.shape[0]
        flat = self.matrix @ k.tensor_array.reshape(d, -1)
        out = Ket(k.space, vector=flat.reshape(k.tensor_array.shape), normalized=False)
        return out.reorder(state.names)

    def is_idempotent(self) -> bool:
        return np.allclose(self.matrix @ self.matrix, self.matrix, atol=TOL)


def born_probability(state: Ket, proj: Projector, *, allow_unnormalized: bool = False) -> float:
    if state.unnormalized and not allow_unnormalized:
        raise StateError("Born probability of an unnormalized ket requested without allow_unnormalized")
    if not allow_unnormalized and abs(state.norm() - 1) > TOL:
        raise StateError("state is not normalized")
    return proj.apply(state).norm() ** 2


def collapse(state: Ket, proj: Projector) -> tuple[Ket, float]:
    p = born_probability(state, proj)
    if p <= TOL:
        raise ImpossibleBranchError(f"outcome has probability {p:.3g}")
    return proj.apply(state).scaled(1 / np.sqrt(p)).normalize(), p


@dataclass(frozen=True)
class Basis:
    """Labeled orthonormal measurement basis on one subsystem (or product of them)."""

    subsystem: str
    outcomes: tuple[tuple[str, Ket], ...]

    def __post_init__(self):
        if not self.outcomes:
            raise IncompleteBasisError("empty basis")
        space = self.outcomes[0][1].names
        total = sum(np.outer(k.reorder(space).vector, k.reorder(space).vector.conj()) for _, k in self.outcomes)
        dim = int(np.prod(_dims(self.outcomes[0][1].space)))
        if not np.allclose(total, np.eye(dim), atol=TOL):
            raise IncompleteBasisError(f"basis on {self.subsystem} does not resolve the identity")

    @classmethod
    def from_table(cls, subsystem: Subsystem, table: Mapping[str, Mapping[str, complex]], *, name: str | None = None):
        kets = []
        for label, comps in table.items():
            kets.append((label, Ket.of(subsystem, comps)))
        return cls(name or subsystem.name, tuple(kets))

    @classmethod
    def computational(cls, subsystem: Subsystem) -> "Basis":
        return cls(subsystem.name, tuple((lab, Ket.basis(subsystem, lab)) for lab in subsystem.labels))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.outcomes)

    def __getitem__(self, label: str) -> Ket:
        for lab, k in self.outcomes:
            if lab == label:
                return k
        raise KeyError(label)

    def projector(self, label: str) -> Projector:
        return Projector(self[label])

    def probabilities(self, state: Ket) -> dict[str, float]:
        return {lab: born_probability(state, Projector(k)) for lab, k in self.outcomes}


def sample_measurement(state: Ket, basis: Basis, rng) -> tuple[BasisLabel, Ket]:
    """Draw one outcome of ``basis`` on ``state``.

    ``rng`` is anything with a ``random()`` method returning a float in [0, 1);
    one draw is consumed per call.  Outcomes are scanned in basis order.
    """
    u = rng.random()
    probs = basis.probabilities(state)
    acc = 0.0
    chosen = basis.labels[-1]
    for lab in basis.labels:
        acc += probs[lab]
        if u < acc and probs[lab] > TOL:
            chosen = lab
            break
    post, _ = collapse(state, basis.projector(chosen))
    return BasisLabel(basis.subsystem, chosen), post


@dataclass
class DensityMatrix:
    space: tuple[Subsystem, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.space = tuple(self.space)
        m = np.asarray(self.matrix, dtype=complex)
        d = int(np.prod(_dims(self.space)))
        if m.shape != (d, d):
            raise StateError(f"matrix shape {m.shape} does not match dimension {d}")
        if not np.allclose(m, m.conj().T, atol=TOL):
            raise StateError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > TOL:
            raise StateError(f"density matrix trace {np.trace(m).real!r} != 1")
        if np.linalg.eigvalsh(m).min() < -TOL:
            raise StateError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        self.matrix = m

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.space)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)[::-1]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def expectation(self, proj: Projector) -> float:
        """tr(rho P) for a projector on the full space."""
        if proj.scope_names != self.names:
            raise StateError("expectation needs a projector over the whole space")
        return float(np.real(np.trace(self.matrix @ proj.matrix)))

    def in_basis(self, kets: Sequence[Ket]) -> np.ndarray:
        """Matrix elements <k_i| rho |k_j>."""
        vs = np.array([k.reorder(self.names).vector for k in kets])
        return vs.conj() @ self.matrix @ vs.T

    def allclose(self, other: "DensityMatrix", atol: float = TOL) -> bool:
        return self.names == other.names and np.allclose(self.matrix, other.matrix, atol=atol)


def mix(branches: Iterable[tuple[float, Ket]]) -> DensityMatrix:
    branches = list(branches)
    if not branches:
        raise StateError("empty mixture")
    if any(p < 0 for p, _ in branches):
        raise StateError("negative mixture weight")
    total = sum(p for p, _ in branches)
    if abs(total - 1) > MIX_SUM_TOL:
        raise StateError(f"mixture weights sum to {total!r}")
    names = branches[0][1].names
    m = sum(p * np.outer(k.reorder(names).vector, k.reorder(names).vector.conj()) for p, k in branches)
    return DensityMatrix(branches[0][1].reorder(names).space, m)
