"""Sparse exact state algebra for hybrid ensemble/photon registers.

Everything downstream works in a tiny Hilbert space: a handful of four-level
collective ensemble registers and photon modes with a hard occupation cutoff.
States are sparse maps from basis-label tuples to complex amplitudes, so the
protocol circuits stay exact (no truncation error, only float rounding) and
cheap enough to enumerate outcome by outcome.

Two numeric tolerances are pinned here and used everywhere: ``ATOL_STATE``
for algebraic identities (norms, traces, hermiticity) and the looser
``ATOL_PSD`` for eigenvalue positivity checks, which accumulate more rounding.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Union

import numpy as np

# Algebraic tolerance: norms, traces, hermiticity, unitarity.
ATOL_STATE = 1e-12

# Eigenvalue floor when asserting positive semidefiniteness.
ATOL_PSD = 1e-10

# Collective levels of one blockaded ensemble: shared ground state, the
# optically excited state, the long-lived storage state, and the singly
# occupied upper level (double occupation is blockaded, hence no "r2").
ENSEMBLE_LEVELS = ("g", "e", "s", "r1")

Label = Union[str, int]
LabelTuple = tuple
KetBra = tuple


@dataclass(frozen=True)
class EnsembleQudit:
    """Four-level register held by one atomic ensemble."""

    name: str = ""

    @property
    def dim(self) -> int:
        return len(ENSEMBLE_LEVELS)

    def basis_labels(self) -> tuple:
        return ENSEMBLE_LEVELS

    def label_index(self, label) -> int:
        try:
            return ENSEMBLE_LEVELS.index(label)
        except ValueError:
            raise ValueError(f"unknown ensemble level {label!r}") from None

    def canonical(self, label):
        self.label_index(label)
        return label


@dataclass(frozen=True)
class OpticalMode:
    """Photon mode with occupation 0..cutoff; exceeding the cutoff is an error."""

    cutoff: int = 2
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.cutoff, int) or self.cutoff < 1:
            raise ValueError(f"mode cutoff must be an integer >= 1, got {self.cutoff!r}")

    @property
    def dim(self) -> int:
        return self.cutoff + 1

    def basis_labels(self) -> tuple:
        return tuple(range(self.cutoff + 1))

    def label_index(self, label) -> int:
        if isinstance(label, bool) or not isinstance(label, (int, np.integer)):
            raise ValueError(f"mode occupation must be an integer, got {label!r}")
        n = int(label)
        if not 0 <= n <= self.cutoff:
            raise ValueError(f"occupation {n} outside cutoff {self.cutoff}")
        return n

    def canonical(self, label):
        n = self.label_index(label)
        return n


Subsystem = Union[EnsembleQudit, OpticalMode]


def _canonical_key(subsystems, key) -> tuple:
    if len(key) != len(subsystems):
        raise ValueError(
            f"label tuple {key!r} has {len(key)} entries for {len(subsystems)} subsystems"
        )
    return tuple(sub.canonical(lab) for sub, lab in zip(subsystems, key))


def _key_sort_index(subsystems, key) -> tuple:
    return tuple(sub.label_index(lab) for sub, lab in zip(subsystems, key))


def same_structure(a, b) -> bool:
    """True when two states/operators share an identical subsystem register."""
    return tuple(a.subsystems) == tuple(b.subsystems)


class HybridState:
    """Sparse pure state over an ordered register of subsystems.

    Amplitudes live in a map from basis-label tuples to complex numbers;
    labels with amplitude exactly zero are absent.  Instances are immutable
    (operations return new states) and are not normalized implicitly; use
    :meth:`normalized` where a unit vector is required.
    """

    __slots__ = ("_subsystems", "_amps")

    def __init__(self, subsystems, amplitudes: Mapping):
        subs = tuple(subsystems)
        if not subs:
            raise ValueError("state needs at least one subsystem")
        amps = {}
        for key, value in amplitudes.items():
            value = complex(value)
            if value == 0:
                continue
            amps[_canonical_key(subs, tuple(key))] = value
        self._subsystems = subs
        self._amps = amps

    @classmethod
    def basis(cls, subsystems, key) -> "HybridState":
        return cls(subsystems, {tuple(key): 1.0})

    @classmethod
    def from_terms(cls, subsystems, terms: Iterable, normalize: bool = False) -> "HybridState":
        amps = {}
        subs = tuple(subsystems)
        for key, value in terms:
            k = _canonical_key(subs, tuple(key))
            amps[k] = amps.get(k, 0.0) + complex(value)
        state = cls(subs, amps)
        return state.normalized() if normalize else state

    @property
    def subsystems(self) -> tuple:
        return self._subsystems

    @property
    def amplitudes(self) -> Mapping:
        return MappingProxyType(self._amps)

    def amplitude(self, key) -> complex:
        return self._amps.get(_canonical_key(self._subsystems, tuple(key)), 0.0 + 0.0j)

    def __len__(self) -> int:
        return len(self._amps)

    def __iter__(self) -> Iterator:
        return iter(self._amps.items())

    def norm_squared(self) -> float:
        return float(sum((a * a.conjugate()).real for a in self._amps.values()))

    def norm(self) -> float:
        return math.sqrt(self.norm_squared())

    def normalized(self) -> "HybridState":
        n = self.norm()
        if n <= ATOL_STATE:
            raise ValueError("cannot normalize a (numerically) zero state")
        return self.scaled(1.0 / n)

    def scaled(self, factor) -> "HybridState":
        factor = complex(factor)
        return HybridState(self._subsystems, {k: factor * a for k, a in self._amps.items()})

    def add(self, other: "HybridState") -> "HybridState":
        if not same_structure(self, other):
            raise ValueError("cannot add states over different registers")
        amps = dict(self._amps)
        for k, a in other._amps.items():
            amps[k] = amps.get(k, 0.0) + a
        return HybridState(self._subsystems, amps)

    def inner(self, other: "HybridState") -> complex:
        """<self|other>, conjugate-linear in self."""
        if not same_structure(self, other):
            raise ValueError("cannot take inner product over different registers")
        mine, theirs = self._amps, other._amps
        if len(theirs) < len(mine):
            return complex(sum(mine[k].conjugate() * v for k, v in theirs.items() if k in mine))
        return complex(sum(v.conjugate() * theirs[k] for k, v in mine.items() if k in theirs))

    def sorted_items(self) -> list:
        return sorted(
            self._amps.items(),
            key=lambda item: _key_sort_index(self._subsystems, item[0]),
        )

    def to_density(self) -> "DensityOperator":
        return DensityOperator.from_pure(self)

    def allclose(self, other: "HybridState", atol: float = ATOL_STATE) -> bool:
        if not same_structure(self, other):
            return False
        keys = set(self._amps) | set(other._amps)
        return all(
            abs(self._amps.get(k, 0.0) - other._amps.get(k, 0.0)) <= atol for k in keys
        )

    def __repr__(self) -> str:
        parts = [f"{a:.4g}*|{','.join(map(str, k))}>" for k, a in self.sorted_items()[:6]]
        if len(self._amps) > 6:
            parts.append("...")
        return f"HybridState({' + '.join(parts) or '0'})"


def tensor(a: HybridState, b: HybridState) -> HybridState:
    """Tensor product; subsystem order is a's register followed by b's."""
    subs = a.subsystems + b.subsystems
    amps = {}
    for ka, va in a.amplitudes.items():
        for kb, vb in b.amplitudes.items():
            amps[ka + kb] = va * vb
    return HybridState(subs, amps)


class DensityOperator:
    """Sparse density operator over the same labelled register as HybridState.

    Stored as a map (ket_labels, bra_labels) -> complex.  Not normalized
    implicitly; channels that condition on outcomes divide by the outcome
    probability explicitly.
    """

    __slots__ = ("_subsystems", "_elems")

    def __init__(self, subsystems, elements: Mapping):
        subs = tuple(subsystems)
        if not subs:
            raise ValueError("operator needs at least one subsystem")
        elems = {}
        for (ket, bra), value in elements.items():
            value = complex(value)
            if value == 0:
                continue
            pair = (_canonical_key(subs, tuple(ket)), _canonical_key(subs, tuple(bra)))
            elems[pair] = value
        self._subsystems = subs
        self._elems = elems

    @classmethod
    def from_pure(cls, psi: HybridState) -> "DensityOperator":
        elems = {}
        items = list(psi.amplitudes.items())
        for ket, va in items:
            for bra, vb in items:
                elems[(ket, bra)] = va * vb.conjugate()
        return cls(psi.subsystems, elems)

    @classmethod
    def mixture(cls, components: Iterable) -> "DensityOperator":
        """Weighted sum of (weight, HybridState | DensityOperator) pairs."""
        total = None
        for weight, part in components:
            rho = part.to_density() if isinstance(part, HybridState) else part
            term = rho.scaled(weight)
            total = term if total is None else total.add(term)
        if total is None:
            raise ValueError("mixture of zero components")
        return total

    @property
    def subsystems(self) -> tuple:
        return self._subsystems

    @property
    def elements(self) -> Mapping:
        return MappingProxyType(self._elems)

    def element(self, ket, bra) -> complex:
        pair = (
            _canonical_key(self._subsystems, tuple(ket)),
            _canonical_key(self._subsystems, tuple(bra)),
        )
        return self._elems.get(pair, 0.0 + 0.0j)

    def scaled(self, factor) -> "DensityOperator":
        factor = complex(factor)
        return DensityOperator(
            self._subsystems, {p: factor * v for p, v in self._elems.items()}
        )

    def add(self, other: "DensityOperator") -> "DensityOperator":
        if not same_structure(self, other):
            raise ValueError("cannot add operators over different registers")
        elems = dict(self._elems)
        for p, v in other._elems.items():
            elems[p] = elems.get(p, 0.0) + v
        return DensityOperator(self._subsystems, elems)

    def trace(self) -> complex:
        return complex(sum(v for (k, b), v in self._elems.items() if k == b))

    def normalized(self) -> "DensityOperator":
        tr = self.trace().real
        if tr <= ATOL_STATE:
            raise ValueError("cannot normalize a (numerically) zero operator")
        return self.scaled(1.0 / tr)

    def expectation(self, psi: HybridState) -> complex:
        """<psi| rho |psi>."""
        if not same_structure(self, psi):
            raise ValueError("state and operator registers differ")
        amps = psi.amplitudes
        acc = 0.0 + 0.0j
        for (ket, bra), v in self._elems.items():
            ak = amps.get(ket)
            if ak is None:
                continue
            ab = amps.get(bra)
            if ab is None:
                continue
            acc += ak.conjugate() * v * ab
        return complex(acc)

    def support_kets(self) -> list:
        kets = {k for k, _ in self._elems} | {b for _, b in self._elems}
        return sorted(kets, key=lambda k: _key_sort_index(self._subsystems, k))

    def to_dense(self):
        """Matrix on the support basis; returns (matrix, basis_kets)."""
        basis = self.support_kets()
        index = {k: i for i, k in enumerate(basis)}
        mat = np.zeros((len(basis), len(basis)), dtype=complex)
        for (ket, bra), v in self._elems.items():
            mat[index[ket], index[bra]] = v
        return mat, basis

    def min_eigenvalue(self) -> float:
        if not self._elems:
            return 0.0
        mat, _ = self.to_dense()
        return float(np.linalg.eigvalsh(mat)[0])

    def assert_valid(self, atol: float = ATOL_STATE, atol_psd: float = ATOL_PSD):
        """Raise unless trace 1, hermitian, and positive semidefinite."""
        tr = self.trace()
        if abs(tr - 1.0) > atol:
            raise ValueError(f"trace {tr} deviates from 1 beyond {atol}")
        for (ket, bra), v in self._elems.items():
            if abs(v - self._elems.get((bra, ket), 0.0).conjugate()) > atol:
                raise ValueError(f"element ({ket},{bra}) breaks hermiticity")
        lo = self.min_eigenvalue()
        if lo < -atol_psd:
            raise ValueError(f"negative eigenvalue {lo} below -{atol_psd}")

    def to_density(self) -> "DensityOperator":
        return self

    def __repr__(self) -> str:
        return f"DensityOperator({len(self._elems)} elements, trace={self.trace():.4g})"


def as_density(state) -> DensityOperator:
    """Coerce a HybridState or DensityOperator to a DensityOperator."""
    if isinstance(state, DensityOperator):
        return state
    if isinstance(state, HybridState):
        return state.to_density()
    raise TypeError(f"expected HybridState or DensityOperator, got {type(state).__name__}")


def measure_projective(state: HybridState, subsystem: int, labels) -> tuple:
    """Project one subsystem onto a label subset.

    Returns ``(probability, post_state)`` with the post state renormalized,
    or ``(0.0, None)`` when the projected component vanishes.
    """
    subs = state.subsystems
    if not 0 <= subsystem < len(subs):
        raise ValueError(f"subsystem index {subsystem} out of range")
    wanted = {subs[subsystem].canonical(lab) for lab in labels}
    if not wanted:
        raise ValueError("projector needs at least one label")
    kept = {k: a for k, a in state.amplitudes.items() if k[subsystem] in wanted}
    prob = float(sum((a * a.conjugate()).real for a in kept.values()))
    total = state.norm_squared()
    if total <= ATOL_STATE:
        raise ValueError("cannot measure a zero state")
    prob /= total
    if prob <= ATOL_STATE:
        return 0.0, None
    post = HybridState(subs, kept).normalized()
    return prob, post


def fidelity(rho, psi: HybridState) -> float:
    """Pure-target fidelity <psi|rho|psi>; accepts a pure state for rho too."""
    rho = as_density(rho)
    value = rho.expectation(psi)
    if abs(value.imag) > ATOL_PSD:
        raise ValueError(f"fidelity came out non-real ({value}); operator not hermitian?")
    # clip float dust just outside [0, 1]
    return float(min(max(value.real, 0.0), 1.0))


def partial_trace(rho, keep) -> DensityOperator:
    """Trace out all subsystems not listed in ``keep`` (order preserved)."""
    rho = as_density(rho)
    subs = rho.subsystems
    keep = tuple(keep)
    if len(set(keep)) != len(keep):
        raise ValueError("keep indices must be distinct")
    for i in keep:
        if not 0 <= i < len(subs):
            raise ValueError(f"keep index {i} out of range")
    drop = [i for i in range(len(subs)) if i not in keep]
    if not keep:
        raise ValueError("must keep at least one subsystem")
    new_subs = tuple(subs[i] for i in keep)
    elems = {}
    for (ket, bra), v in rho.elements.items():
        if any(ket[i] != bra[i] for i in drop):
            continue
        pair = (tuple(ket[i] for i in keep), tuple(bra[i] for i in keep))
        elems[pair] = elems.get(pair, 0.0) + v
    return DensityOperator(new_subs, elems)


def basis_iter(subsystems) -> Iterator:
    """Iterate the full product basis of a register (small registers only)."""
    return itertools.product(*(sub.basis_labels() for sub in subsystems))
