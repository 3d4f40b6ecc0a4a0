"""Classical-shadow simulation with random single-qubit Pauli bases.

Each snapshot measures every qubit in a uniformly random basis from
``{X, Y, Z}`` and records the ``+1/-1`` outcomes.  A Pauli string ``P`` is
estimated per snapshot by ``3^|supp P| * prod(outcomes on supp P)`` when all
bases match ``P`` on its support, and ``0`` otherwise.  Estimates are medians
of ``K`` batch means.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .operators import LocalOperator, parse_pauli, product_state

BASIS_LETTERS = "XYZ"
MEDIAN_OF_MEANS_CONSTANT = 34.0

# rotations taking the +1/-1 eigenvectors of X, Y, Z to |0>, |1>
_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_ROTATIONS = (
    _HADAMARD,
    _HADAMARD @ np.diag([1, -1j]),
    np.eye(2, dtype=complex),
)


def default_batches(M: int, delta: float) -> int:
    """Number of median-of-means batches ``K = 2 ceil(log(2M/delta)) + 1``."""
    return 2 * math.ceil(math.log(2 * M / delta)) + 1


def default_delta(n: int) -> float:
    """Default failure probability ``1/n^2`` (``0.5`` for a single site)."""
    return 1.0 / n**2 if n > 1 else 0.5


def plan_samples(k: int, M: int, eps: float, delta: float, C: float = MEDIAN_OF_MEANS_CONSTANT) -> int:
    """Snapshot count ``ceil(C 4^k log(2M/delta) / eps^2)``.

    Parameters
    ----------
    k : int
        Largest locality among the observables.
    M : int
        Number of observables.
    eps : float
        Target additive accuracy in the max norm.
    delta : float
        Failure probability, in (0, 1).
    C : float, optional
        Median-of-means constant.
    """
    if k < 1 or M < 1:
        raise ValueError("k and M must be at least 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return math.ceil(C * 4**k * math.log(2 * M / delta) / eps**2)


@dataclass(frozen=True)
class ShadowScheme:
    """Measurement scheme metadata.

    Parameters
    ----------
    batches : int
        Odd number ``K`` of median-of-means batches.
    seed : int
    kind : str
        Only ``"random_pauli_basis"`` is supported.
    """

    batches: int = 1
    seed: int = 0
    kind: str = "random_pauli_basis"

    def __post_init__(self):
        if self.kind != "random_pauli_basis":
            raise ValueError(f"unsupported shadow scheme {self.kind!r}")
        if self.batches < 1 or self.batches % 2 == 0:
            raise ValueError("the number of batches must be a positive odd integer")


@dataclass(frozen=True, eq=False)
class ShadowBatch:
    """Snapshots as integer arrays.

    ``bases[t, j]`` is 0, 1, 2 for X, Y, Z and ``outcomes[t, j]`` is +1 or -1.
    """

    bases: np.ndarray
    outcomes: np.ndarray
    scheme: ShadowScheme
    state_id: str = ""

    def __post_init__(self):
        if self.bases.shape != self.outcomes.shape or self.bases.ndim != 2:
            raise ValueError("bases and outcomes must be equal-shaped N x n arrays")

    @property
    def n_snapshots(self) -> int:
        return self.bases.shape[0]

    @property
    def n_sites(self) -> int:
        return self.bases.shape[1]

    def __eq__(self, other):
        return (
            isinstance(other, ShadowBatch)
            and self.scheme == other.scheme
            and self.state_id == other.state_id
            and np.array_equal(self.bases, other.bases)
            and np.array_equal(self.outcomes, other.outcomes)
        )


def basis_distributions(state, n: int) -> np.ndarray:
    """Born distributions for every product measurement basis.

    Returns
    -------
    ndarray, shape (3**n, 2**n)
        Row ``b`` (base-3 digits, site 0 most significant) holds the outcome
        probabilities; outcome index bit ``j`` set means ``-1`` on site ``j``.
    """
    rho = np.asarray(state)
    if rho.shape != (2**n, 2**n):
        raise ValueError("state dimension does not match 2^n")
    probs = np.empty((3**n, 2**n))
    for b in range(3**n):
        digits = np.base_repr(b, 3).zfill(n) if n else ""
        U = product_state([_ROTATIONS[int(c)] for c in digits])
        probs[b] = np.clip(np.einsum("ij,jk,ik->i", U, rho, U.conj()).real, 0, None)
        probs[b] /= probs[b].sum()
    return probs


def _draw(probs, n, N, seed):
    rng = np.random.default_rng(seed)
    choice = rng.integers(0, 3**n, size=N)
    outcome_index = np.empty(N, dtype=np.int64)
    for b in np.unique(choice):
        sel = np.flatnonzero(choice == b)
        outcome_index[sel] = rng.choice(2**n, size=sel.size, p=probs[b])
    powers3 = 3 ** np.arange(n - 1, -1, -1)
    powers2 = 2 ** np.arange(n - 1, -1, -1)
    bases = ((choice[:, None] // powers3) % 3).astype(np.int8)
    bits = (outcome_index[:, None] // powers2) % 2
    outcomes = (1 - 2 * bits).astype(np.int8)
    return bases, outcomes


def sample(state, scheme: ShadowScheme, N: int, seed: int | None = None, n: int | None = None,
           workers: int = 1, state_id: str = "", max_sites: int = 8) -> ShadowBatch:
    """Simulate ``N`` random-Pauli-basis snapshots of a qubit state.

    Parameters
    ----------
    state : array_like or DensityOperator
        Density matrix on ``n`` qubits.
    scheme : ShadowScheme
    N : int
        Number of snapshots.
    seed : int, optional
        Defaults to ``scheme.seed``.
    n : int, optional
        Qubit count, inferred from the dimension if omitted.
    workers : int, optional
        Snapshots are split into ``workers`` contiguous chunks, each drawn from
        the stream seeded by ``(seed, worker_index)`` and concatenated in
        worker order; the result depends on ``workers`` but not on timing.
    max_sites : int, optional
        Cap on ``n`` (the simulator enumerates all ``3^n`` bases).
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    rho = np.asarray(state)
    if n is None:
        n = int(round(math.log2(rho.shape[0])))
    if n > max_sites:
        raise ValueError(f"shadow simulation limited to {max_sites} qubits")
    seed = scheme.seed if seed is None else seed
    probs = basis_distributions(rho, n)
    sizes = [N // workers + (1 if w < N % workers else 0) for w in range(workers)]
    seeds = [np.random.SeedSequence([seed, w]) for w in range(workers)]
    if workers == 1:
        parts = [_draw(probs, n, sizes[0], seeds[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda args: _draw(probs, n, *args), zip(sizes, seeds)))
    bases = np.concatenate([p[0] for p in parts])
    outcomes = np.concatenate([p[1] for p in parts])
    return ShadowBatch(bases, outcomes, ShadowScheme(scheme.batches, seed, scheme.kind), state_id)


@dataclass(frozen=True, eq=False)
class EstimateReport:
    """Estimated expectation values with per-observable standard errors."""

    labels: tuple
    estimates: np.ndarray
    stderr: np.ndarray
    N_used: int
    eps: float | None = None
    delta: float | None = None

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["observable", "estimate", "stderr", "N_used", "eps", "delta"])
            for lab, est, se in zip(self.labels, self.estimates, self.stderr):
                writer.writerow([lab, repr(float(est)), repr(float(se)), self.N_used,
                                 "" if self.eps is None else repr(self.eps),
                                 "" if self.delta is None else repr(self.delta)])


def _pauli_letters(obs):
    if isinstance(obs, str):
        return parse_pauli(obs)
    if isinstance(obs, LocalOperator) and obs.pauli is not None:
        return dict(obs.pauli)
    raise ValueError("shadow estimation needs Pauli-string observables")


def _label(obs):
    return obs if isinstance(obs, str) else obs.label


def median_of_means(values: np.ndarray, K: int) -> float:
    """Median over ``K`` contiguous, near-equal batch means."""
    if K == 1:
        return float(values.mean())
    return float(np.median([chunk.mean() for chunk in np.array_split(values, K)]))


def snapshot_values(batch: ShadowBatch, letters: dict) -> np.ndarray:
    """Per-snapshot single-shot estimates of one Pauli string."""
    if not letters:
        return np.ones(batch.n_snapshots)
    sites = np.array(sorted(letters))
    if sites.max() >= batch.n_sites:
        raise ValueError("observable support exceeds the number of measured sites")
    target = np.array([BASIS_LETTERS.index(letters[s]) for s in sites], dtype=np.int8)
    match = np.all(batch.bases[:, sites] == target, axis=1)
    prod = np.prod(batch.outcomes[:, sites], axis=1, dtype=np.int64)
    return np.where(match, 3.0 ** len(sites) * prod, 0.0)


def estimate(batch: ShadowBatch, observables: Sequence, eps=None, delta=None) -> EstimateReport:
    """Median-of-means shadow estimates of Pauli-string observables.

    Parameters
    ----------
    batch : ShadowBatch
    observables : sequence of str or LocalOperator
        Pauli strings (text or parsed operators).
    eps, delta : float, optional
        Planning targets, recorded in the report.
    """
    K = batch.scheme.batches
    ests, errs = [], []
    for obs in observables:
        vals = snapshot_values(batch, _pauli_letters(obs))
        ests.append(median_of_means(vals, K))
        errs.append(float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else float("nan"))
    return EstimateReport(tuple(_label(o) for o in observables), np.array(ests), np.array(errs),
                          batch.n_snapshots, eps, delta)


def estimate_classical(samples, observables: Sequence) -> EstimateReport:
    """Empirical means of diagonal Pauli strings over spin configurations.

    Parameters
    ----------
    samples : array_like, shape (N, n)
        Configurations with entries ``+1``/``-1``.
    observables : sequence of str or LocalOperator
        Strings over ``I`` and ``Z`` only.
    """
    samples = np.asarray(samples)
    if not np.all(np.abs(samples) == 1):
        raise ValueError("spin configurations must have entries +1 or -1")
    ests, errs = [], []
    for obs in observables:
        letters = _pauli_letters(obs)
        if any(v != "Z" for v in letters.values()):
            raise ValueError(f"observable {_label(obs)!r} is not diagonal")
        sites = sorted(letters)
        vals = np.prod(samples[:, sites], axis=1) if sites else np.ones(samples.shape[0])
        ests.append(float(vals.mean()))
        errs.append(float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else float("nan"))
    return EstimateReport(tuple(_label(o) for o in observables), np.array(ests), np.array(errs),
                          samples.shape[0])


def write_batch(path, batch: ShadowBatch):
    """Write a JSON header line followed by ``bases<TAB>outcomes`` records."""
    header = {"seed": batch.scheme.seed, "scheme": batch.scheme.kind, "batches": batch.scheme.batches,
              "state_id": batch.state_id, "n": batch.n_sites, "N": batch.n_snapshots}
    letters = np.array(list(BASIS_LETTERS))
    signs = np.array(["-", "", "+"])
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for b, o in zip(letters[batch.bases], signs[batch.outcomes + 1]):
            fh.write("".join(b) + "\t" + "".join(o) + "\n")


def read_batch(path) -> ShadowBatch:
    with open(path) as fh:
        header = json.loads(fh.readline())
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    bases = np.array([[BASIS_LETTERS.index(c) for c in r[0]] for r in rows], dtype=np.int8)
    outcomes = np.array([[1 if c == "+" else -1 for c in r[1]] for r in rows], dtype=np.int8)
    scheme = ShadowScheme(header["batches"], header["seed"], header["scheme"])
    return ShadowBatch(bases.reshape(-1, header["n"]), outcomes.reshape(-1, header["n"]),
                       scheme, header["state_id"])
