"""Shared test utilities: random state generation and statistics helpers."""

import math

import numpy as np

from blockadesim.state_algebra import (
    EnsembleQudit,
    HybridState,
    OpticalMode,
    basis_iter,
)


def random_register(rng, max_subsystems=3, cutoff=2):
    """Random mix of ensemble registers and optical modes (at least one each kind possible)."""
    n = int(rng.integers(1, max_subsystems + 1))
    subs = []
    for i in range(n):
        if rng.random() < 0.5:
            subs.append(EnsembleQudit(f"q{i}"))
        else:
            subs.append(OpticalMode(cutoff, f"m{i}"))
    return tuple(subs)


def random_state(rng, subsystems, max_terms=6, allowed_labels=None):
    """Normalized random state on a sparse random support.

    ``allowed_labels`` optionally restricts the labels of each subsystem
    (mapping from subsystem index to an iterable of labels).
    """
    basis = []
    for key in basis_iter(subsystems):
        if allowed_labels and any(
            key[i] not in allowed_labels[i] for i in allowed_labels
        ):
            continue
        basis.append(key)
    n_terms = int(rng.integers(1, min(max_terms, len(basis)) + 1))
    picks = rng.choice(len(basis), size=n_terms, replace=False)
    amps = {}
    for i in picks:
        re, im = rng.normal(size=2)
        amps[basis[int(i)]] = complex(re, im)
    return HybridState(subsystems, amps).normalized()


def random_optical_pair(rng, cutoff=4, max_total=2):
    """Random state of two modes whose total occupation never exceeds max_total.

    Headroom between max_total and the cutoff keeps a balanced splitter from
    overflowing, since it preserves the total occupation.
    """
    subs = (OpticalMode(cutoff, "a"), OpticalMode(cutoff, "b"))
    keys = [
        (m, n)
        for m in range(max_total + 1)
        for n in range(max_total + 1 - m)
    ]
    amps = {}
    for key in keys:
        if rng.random() < 0.7:
            re, im = rng.normal(size=2)
            amps[key] = complex(re, im)
    if not amps:
        amps[(1, 0)] = 1.0
    return HybridState(subs, amps).normalized()


def random_logical_state(rng, n_registers=2):
    """Random state of ensemble registers confined to the logical g/s pair."""
    subs = tuple(EnsembleQudit(f"q{i}") for i in range(n_registers))
    allowed = {i: ("g", "s") for i in range(n_registers)}
    return random_state(rng, subs, max_terms=2**n_registers, allowed_labels=allowed)


def binomial_sigma(trials, p):
    return math.sqrt(max(p * (1.0 - p), 1e-12) / trials)


def assert_within_3sigma(observed_rate, expected_p, trials, label=""):
    sigma = binomial_sigma(trials, expected_p)
    assert abs(observed_rate - expected_p) <= 3.0 * sigma, (
        f"{label}: observed {observed_rate} vs expected {expected_p} "
        f"(3 sigma = {3*sigma:.3g})"
    )
