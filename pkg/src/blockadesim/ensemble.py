"""Single-ensemble operations: logical gates, photon absorption, storage transfer.

A logical qubit lives in the ground/storage pair of one ensemble register:
|0> = "g", |1> = "s".  Logical gates refuse to act when the register carries
weight outside that pair, because during the optical protocol the same
register transits "e" and "r1" where the logical gate set is meaningless.

``blockade_absorb`` is the interaction step: an ensemble in "e" coherently
absorbs one photon from a mode and climbs to "r1" with amplitude
sqrt(p_absorption).  A register already in "r1" blocks further absorption
(the blockade), so it commutes with the photon number; "g"/"s" registers are
dark to the interaction light.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .state_algebra import (
    ATOL_STATE,
    DensityOperator,
    EnsembleQudit,
    HybridState,
    OpticalMode,
    measure_projective,
)

LOGICAL_LEVELS = ("g", "s")


@dataclass(frozen=True)
class AbsorptionModel:
    """Single number: probability that an excited ensemble absorbs one photon."""

    p_absorption: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_absorption <= 1.0:
            raise ValueError(f"p_absorption must be in [0, 1], got {self.p_absorption}")

    @property
    def epsilon(self) -> float:
        """Miss probability 1 - p_absorption (the protocol's error knob)."""
        return 1.0 - self.p_absorption


def _require_qudit(obj, index: int) -> EnsembleQudit:
    subs = obj.subsystems
    if not 0 <= index < len(subs):
        raise ValueError(f"ensemble index {index} out of range")
    sub = subs[index]
    if not isinstance(sub, EnsembleQudit):
        raise ValueError(f"subsystem {index} is not an ensemble register")
    return sub


def _weight_outside_logical(obj, index: int) -> float:
    if isinstance(obj, HybridState):
        return sum(
            (a * a.conjugate()).real
            for k, a in obj.amplitudes.items()
            if k[index] not in LOGICAL_LEVELS
        )
    return sum(
        v.real
        for (ket, bra), v in obj.elements.items()
        if ket == bra and ket[index] not in LOGICAL_LEVELS
    )


def _apply_level_map(obj, index: int, level_map: dict):
    """Linear map on one ensemble register, for states and operators alike.

    ``level_map`` sends a level to a tuple of (level, coefficient) branches.
    Levels missing from the map pass through unchanged.
    """
    if isinstance(obj, HybridState):
        out = {}
        for key, amp in obj.amplitudes.items():
            for level, coeff in level_map.get(key[index], ((key[index], 1.0),)):
                new = key[:index] + (level,) + key[index + 1:]
                out[new] = out.get(new, 0.0) + coeff * amp
        return HybridState(obj.subsystems, out)
    if isinstance(obj, DensityOperator):
        out = {}
        for (ket, bra), v in obj.elements.items():
            for kl, kc in level_map.get(ket[index], ((ket[index], 1.0),)):
                for bl, bc in level_map.get(bra[index], ((bra[index], 1.0),)):
                    pair = (
                        ket[:index] + (kl,) + ket[index + 1:],
                        bra[:index] + (bl,) + bra[index + 1:],
                    )
                    out[pair] = out.get(pair, 0.0) + kc * complex(bc).conjugate() * v
        return DensityOperator(obj.subsystems, out)
    raise TypeError(f"expected HybridState or DensityOperator, got {type(obj).__name__}")


def _logical_gate(obj, index: int, level_map: dict):
    _require_qudit(obj, index)
    leak = _weight_outside_logical(obj, index)
    if leak > ATOL_STATE:
        raise ValueError(
            f"logical gate on register {index} with weight {leak:.3g} outside g/s"
        )
    return _apply_level_map(obj, index, level_map)


def gate_x(obj, index: int):
    """Logical bit flip g <-> s."""
    return _logical_gate(obj, index, {"g": (("s", 1.0),), "s": (("g", 1.0),)})


def gate_h(obj, index: int):
    """Logical Hadamard on the g/s pair."""
    r = 1.0 / math.sqrt(2.0)
    return _logical_gate(
        obj, index, {"g": (("g", r), ("s", r)), "s": (("g", r), ("s", -r))}
    )


def gate_phase(obj, index: int, phi: float):
    """Logical rotation about Z: g -> exp(-i phi/2) g, s -> exp(+i phi/2) s."""
    lo = cmath.exp(-0.5j * phi)
    hi = cmath.exp(0.5j * phi)
    return _logical_gate(obj, index, {"g": (("g", lo),), "s": (("s", hi),)})


def blockade_absorb(state: HybridState, ensemble: int, mode: int, absorption: AbsorptionModel) -> HybridState:
    """Coherent single-photon absorption on (ensemble, mode), blockade included.

    Branches per basis component:

      ("e", n>=1)  ->  sqrt(p) ("r1", n-1)  +  sqrt(1-p) ("e", n)
      anything else -> unchanged ("r1" blocks, "g"/"s" are dark, n=0 idles)

    Norm-preserving on its whole domain; a component collision (same output
    label fed from two inputs) would break that silently, so it raises.
    """
    _require_qudit(state, ensemble)
    sub_mode = state.subsystems[mode]
    if not isinstance(sub_mode, OpticalMode):
        raise ValueError(f"subsystem {mode} is not an optical mode")
    p = absorption.p_absorption
    amp_take = math.sqrt(p)
    amp_miss = math.sqrt(1.0 - p)
    before = state.norm_squared()
    out = {}
    produced_from = {}
    for key, amp in state.amplitudes.items():
        level, n = key[ensemble], key[mode]
        branches = []
        if level == "e" and n >= 1:
            if amp_take != 0.0:
                taken = list(key)
                taken[ensemble] = "r1"
                taken[mode] = n - 1
                branches.append((tuple(taken), amp_take * amp))
            if amp_miss != 0.0:
                branches.append((key, amp_miss * amp))
        else:
            branches.append((key, amp))
        for new, value in branches:
            src = produced_from.setdefault(new, key)
            if src != key:
                raise ValueError(
                    f"absorption branches collide on {new!r} (from {src!r} and {key!r})"
                )
            out[new] = out.get(new, 0.0) + value
    result = HybridState(state.subsystems, out)
    if abs(result.norm_squared() - before) > ATOL_STATE:
        raise ValueError("absorption failed to preserve the norm")
    return result


def transfer_to_storage(obj, index: int):
    """Map the optical pair to the storage pair: e -> g, r1 -> s.

    Storage labels already present pass through.  This is a relabelling, not
    a unitary on the full qudit: if a relabelled component lands on a label
    another component already occupies, amplitudes would mix and the norm
    check below could not save us, so that case raises instead.
    """
    if not isinstance(obj, (HybridState, DensityOperator)):
        raise TypeError(
            f"expected HybridState or DensityOperator, got {type(obj).__name__}"
        )
    _require_qudit(obj, index)
    mapping = {"e": "g", "r1": "s", "g": "g", "s": "s"}

    def relabel(key):
        return key[:index] + (mapping[key[index]],) + key[index + 1:]

    if isinstance(obj, HybridState):
        sources = {}
        for key in obj.amplitudes:
            new = relabel(key)
            prev = sources.setdefault(new, key)
            if prev != key:
                raise ValueError(
                    f"storage transfer collides on {new!r} "
                    f"(register {index} holds both optical and storage weight)"
                )
        return HybridState(
            obj.subsystems, {relabel(k): a for k, a in obj.amplitudes.items()}
        )
    kets = {k for k, _ in obj.elements} | {b for _, b in obj.elements}
    sources = {}
    for key in kets:
        new = relabel(key)
        prev = sources.setdefault(new, key)
        if prev != key:
            raise ValueError(
                f"storage transfer collides on {new!r} "
                f"(register {index} holds both optical and storage weight)"
            )
    return DensityOperator(
        obj.subsystems,
        {(relabel(k), relabel(b)): v for (k, b), v in obj.elements.items()},
    )


def readout(state: HybridState, index: int, rng: np.random.Generator) -> tuple:
    """Sample a logical Z measurement on one register; returns (bit, post_state).

    bit 0 means "g", bit 1 means "s".  Requires all weight in the logical pair.
    """
    _require_qudit(state, index)
    leak = _weight_outside_logical(state, index)
    if leak > ATOL_STATE:
        raise ValueError(f"readout on register {index} with weight {leak:.3g} outside g/s")
    p0, post0 = measure_projective(state, index, {"g"})
    if rng.random() < p0:
        return 0, post0
    _, post1 = measure_projective(state, index, {"s"})
    return 1, post1
