"""Transfer-matrix methods for classical 1D spin chains.

The chain distribution is ``p(s) ~ exp(-beta (sum_i J_i s_i s_{i+1} + sum_i h_i s_i))``
over ``s in {+1, -1}^n``, i.e. the diagonal Gibbs state of
``sum J_i Z_i Z_{i+1} + sum h_i Z_i``.  In arrays, index 0 stands for spin
``+1`` and index 1 for ``-1``, matching ``|0>`` and ``|1>``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import unitary_group

SPINS = np.array([1.0, -1.0])


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """Couplings ``J`` (length ``n-1`` open, ``n`` periodic) and fields ``h``."""

    n: int
    J: np.ndarray
    h: np.ndarray
    beta: float
    boundary: str = "open"

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float).copy()
        h = np.asarray(self.h, dtype=float).copy()
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.n < 2:
            raise ValueError("a chain needs at least two sites")
        bonds = self.n - 1 if self.boundary == "open" else self.n
        if J.shape != (bonds,) or h.shape != (self.n,):
            raise ValueError(f"expected {bonds} couplings and {self.n} fields")
        if np.abs(J).max(initial=0) > 1 + 1e-12 or np.abs(h).max(initial=0) > 1 + 1e-12:
            raise ValueError("couplings and fields must lie in [-1, 1]")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        J.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "beta", float(self.beta))

    def to_dict(self):
        return {"n": self.n, "beta": self.beta, "boundary": self.boundary,
                "J": [float(x) for x in self.J], "h": [float(x) for x in self.h]}

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["n"]), data["J"], data.get("h", [0.0] * int(data["n"])),
                   data["beta"], data.get("boundary", "open"))


def random_chain(n: int, beta: float, rng, boundary: str = "open", fields: bool = False) -> ChainSpec:
    """Couplings drawn uniformly from ``[-1, 1]``; fields likewise or zero."""
    bonds = n - 1 if boundary == "open" else n
    J = rng.uniform(-1, 1, bonds)
    h = rng.uniform(-1, 1, n) if fields else np.zeros(n)
    return ChainSpec(n, J, h, beta, boundary)


# ---------------------------------------------------------------------------
# transfer recursions


def _potentials(spec, last_extra=None):
    beta = spec.beta
    phi = np.exp(-beta * spec.h[:, None] * SPINS[None, :])  # (n, 2)
    if last_extra is not None:
        phi = phi.copy()
        phi[-1] *= last_extra
    bonds = spec.J[: spec.n - 1]
    psi = np.exp(-beta * bonds[:, None, None] * np.outer(SPINS, SPINS)[None])  # (n-1, 2, 2)
    return phi, psi


def _open_messages(phi, psi, pin=None):
    """Normalized forward/backward messages and ``log Z`` of an open chain."""
    n = phi.shape[0]
    alpha = np.empty((n, 2))
    back = np.empty((n, 2))
    a = phi[0].copy()
    if pin is not None:
        a[1 - pin] = 0.0
    logz = 0.0
    for i in range(n):
        if i > 0:
            a = (alpha[i - 1] @ psi[i - 1]) * phi[i]
        s = a.sum()
        logz += math.log(s)
        alpha[i] = a / s
    b = np.ones(2)
    back[n - 1] = 0.5
    for i in range(n - 2, -1, -1):
        b = psi[i] @ (phi[i + 1] * back[i + 1])
        back[i] = b / b.sum()
    return alpha, back, logz


def _components(spec):
    """Open-chain pieces: list of ``(weight_log, phi, psi, pin, closing_spin)``."""
    if spec.boundary == "open":
        phi, psi = _potentials(spec)
        return [(phi, psi, None, None)]
    parts = []
    for pin, s0 in ((0, 1.0), (1, -1.0)):
        extra = np.exp(-spec.beta * spec.J[-1] * SPINS * s0)
        phi, psi = _potentials(spec, extra)
        parts.append((phi, psi, pin, s0))
    return parts


def _solved(spec):
    out = []
    for phi, psi, pin, s0 in _components(spec):
        alpha, back, logz = _open_messages(phi, psi, pin)
        out.append((logz, phi, psi, alpha, back, pin, s0))
    logs = np.array([o[0] for o in out])
    weights = np.exp(logs - logsumexp(logs))
    return out, weights, float(logsumexp(logs))


def chain_log_partition(spec: ChainSpec) -> float:
    """``log Z`` from rescaled transfer recursions."""
    return _solved(spec)[2]


def chain_expectations(spec: ChainSpec) -> dict:
    """Exact ``<Z_i>`` (key ``"z"``) and ``<Z_i Z_{i+1}>`` (key ``"zz"``).

    For periodic chains the last entry of ``"zz"`` is ``<Z_n Z_1>``.
    """
    parts, weights, _ = _solved(spec)
    n = spec.n
    z = np.zeros(n)
    zz = np.zeros(len(spec.J))
    ss = np.outer(SPINS, SPINS)
    for w, (logz, phi, psi, alpha, back, pin, s0) in zip(weights, parts):
        marg = alpha * back
        marg /= marg.sum(axis=1, keepdims=True)
        z += w * (marg @ SPINS)
        pair = alpha[:-1, :, None] * psi * (phi[1:] * back[1:])[:, None, :]
        zz[: n - 1] += w * (pair * ss).sum(axis=(1, 2)) / pair.sum(axis=(1, 2))
        if s0 is not None:
            zz[-1] += w * s0 * float(marg[-1] @ SPINS)
    return {"z": z, "zz": zz}


def window_marginal(spec: ChainSpec, start: int, length: int, _solved_parts=None) -> np.ndarray:
    """Joint distribution of sites ``start .. start+length-1``.

    Returns
    -------
    ndarray, shape ``(2,) * length``
        Probabilities indexed by spin indices (0 for +1, 1 for -1).
    """
    if start < 0 or length < 1 or start + length > spec.n:
        raise ValueError("window out of range")
    parts, weights, _ = _solved(spec) if _solved_parts is None else _solved_parts
    total = np.zeros((2,) * length)
    for w, (logz, phi, psi, alpha, back, pin, s0) in zip(weights, parts):
        p = alpha[start].copy()
        for j in range(start, start + length - 1):
            p = p[..., None] * psi[j].reshape((1,) * (p.ndim - 1) + (2, 2)) * phi[j + 1]
        p = p * back[start + length - 1]
        total += w * p / p.sum()
    return total


@dataclass(frozen=True, eq=False)
class SpinSample:
    configurations: np.ndarray
    seed: int


def chain_sample(spec: ChainSpec, N: int, seed: int) -> SpinSample:
    """Exact i.i.d. samples by forward filtering / backward sampling.

    Backward messages give the conditionals ``p(s_{i+1} | s_i)``; spins are
    drawn left to right.  Periodic chains first draw ``s_1`` from its
    marginal and then sample the pinned open chain.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    rng = np.random.default_rng(seed)
    parts, weights, _ = _solved(spec)
    n = spec.n
    out = np.empty((N, n), dtype=np.int8)
    comp = rng.choice(len(parts), size=N, p=weights) if len(parts) > 1 else np.zeros(N, dtype=int)
    for c, (logz, phi, psi, alpha, back, pin, s0) in enumerate(parts):
        rows = np.flatnonzero(comp == c)
        if rows.size == 0:
            continue
        idx = np.empty((rows.size, n), dtype=np.int64)
        first = alpha[0] * back[0]
        first /= first.sum()
        idx[:, 0] = (rng.uniform(size=rows.size) >= first[0]).astype(np.int64)
        for i in range(n - 1):
            cond = psi[i] * (phi[i + 1] * back[i + 1])[None, :]
            p_plus = cond[:, 0] / cond.sum(axis=1)
            u = rng.uniform(size=rows.size)
            idx[:, i + 1] = (u >= p_plus[idx[:, i]]).astype(np.int64)
        out[rows] = (1 - 2 * idx).astype(np.int8)
    return SpinSample(out, seed)


def write_samples(path, sample: SpinSample, extra=None):
    """JSON header line, then ``np.packbits`` rows (bit set means spin -1)."""
    N, n = sample.configurations.shape
    header = {"N": N, "n": n, "seed": sample.seed, "encoding": "packbits, 1 = spin -1"}
    if extra:
        header.update(extra)
    packed = np.packbits(sample.configurations < 0, axis=1)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(packed.tobytes())


def read_samples(path) -> SpinSample:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        raw = np.frombuffer(fh.read(), dtype=np.uint8)
    N, n = header["N"], header["n"]
    bits = np.unpackbits(raw.reshape(N, -1), axis=1)[:, :n]
    return SpinSample((1 - 2 * bits.astype(np.int8)).astype(np.int8), header["seed"])


# ---------------------------------------------------------------------------
# max-entropy reconstruction


class ChainFamily:
    """Chain Gibbs family with parameters ``mu = (J, h)`` (``h`` only if ``fields``).

    Implements the protocol used by :func:`gibbs_maxent.solver.solve`.
    """

    def __init__(self, n: int, beta: float, boundary: str = "open", fields: bool = True):
        self.n = n
        self.beta = float(beta)
        self.boundary = boundary
        self.fields = fields
        self.bonds = n - 1 if boundary == "open" else n
        self.m = self.bonds + (n if fields else 0)

    def spec(self, mu) -> ChainSpec:
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (self.m,):
            raise ValueError(f"expected {self.m} parameters, got shape {mu.shape}")
        h = mu[self.bonds:] if self.fields else np.zeros(self.n)
        return ChainSpec(self.n, mu[: self.bonds], h, self.beta, self.boundary)

    def params(self, spec: ChainSpec) -> np.ndarray:
        return np.concatenate([spec.J, spec.h]) if self.fields else np.array(spec.J)

    def expectations(self, mu) -> np.ndarray:
        ex = chain_expectations(self.spec(mu))
        return np.concatenate([ex["zz"], ex["z"]]) if self.fields else ex["zz"]

    def log_partition(self, mu) -> float:
        return chain_log_partition(self.spec(mu))

    def symmetric_divergence(self, lam, mu) -> float:
        lam = np.asarray(lam, dtype=float)
        mu = np.asarray(mu, dtype=float)
        return -self.beta * float((lam - mu) @ (self.expectations(lam) - self.expectations(mu)))

    def relative_entropy_from(self, lam, mu) -> float:
        """``D(p_lam || p_mu) = log Z(mu) - log Z(lam) + beta <mu - lam, e(lam)>``."""
        lam = np.asarray(lam, dtype=float)
        mu = np.asarray(mu, dtype=float)
        return (self.log_partition(mu) - self.log_partition(lam)
                + self.beta * float((mu - lam) @ self.expectations(lam)))

    def hessian_upper_bound(self) -> float:
        """``beta^2`` for open chains without fields, else ``2 beta^2 m``.

        Without fields the bond variables ``s_i s_{i+1}`` of an open chain are
        independent, so the Hessian is diagonal with entries
        ``beta^2 (1 - tanh^2)``.
        """
        if self.boundary == "open" and not self.fields:
            return self.beta**2
        return 2 * self.beta**2 * self.m

    def observables(self):
        """Pauli labels in parameter order."""
        labels = [f"Z{i + 1}*Z{(i + 1) % self.n + 1}" for i in range(self.bonds)]
        if self.fields:
            labels += [f"Z{i + 1}" for i in range(self.n)]
        return labels


def chain_maxent_reconstruct(e_hat, n: int, beta: float, opts=None, boundary: str = "open",
                             fields: bool = True, grad_oracle=None, lambda_true=None):
    """Max-entropy reconstruction of a chain from pair (and field) estimates.

    Parameters
    ----------
    e_hat : array_like
        Estimates of ``<Z_i Z_{i+1}>`` followed, if ``fields``, by ``<Z_i>``.
    n, beta, boundary, fields
        Describe the family.
    opts : SolverOptions, optional

    Returns
    -------
    (ChainSpec, SolverResult)
    """
    from .solver import SolverOptions, solve

    family = ChainFamily(n, beta, boundary, fields)
    e_hat = np.asarray(e_hat, dtype=float)
    if e_hat.shape != (family.m,):
        raise ValueError(f"e_hat must have length {family.m}")
    result = solve(family, e_hat, grad_oracle, opts or SolverOptions(), lambda_true=lambda_true)
    return family.spec(result.mu_star), result


# ---------------------------------------------------------------------------
# brickwork circuits and windowed observables


@dataclass(frozen=True, eq=False)
class BrickworkCircuit:
    """Layers of nearest-neighbour two-qubit gates.

    Layer ``l`` acts on pairs ``(j, j+1)`` with ``j = l % 2, l % 2 + 2, ...``.
    ``gates[l]`` maps the left site ``j`` to a 4x4 unitary; the first layer is
    applied first, so the full unitary is ``U = L_last ... L_1``.
    """

    n: int
    gates: tuple

    @property
    def depth(self) -> int:
        return len(self.gates)

    def to_dict(self):
        return {"n": self.n, "layers": [
            [{"site": j, "re": g.real.tolist(), "im": g.imag.tolist()} for j, g in sorted(layer.items())]
            for layer in self.gates]}

    @classmethod
    def from_dict(cls, data):
        gates = tuple({int(e["site"]): np.array(e["re"]) + 1j * np.array(e["im"]) for e in layer}
                      for layer in data["layers"])
        return cls(int(data["n"]), gates)


def brickwork_circuit(n: int, depth: int, seed: int, shared: bool = True) -> BrickworkCircuit:
    """Haar-random brickwork circuit.

    With ``shared=True`` every gate of a layer is the same Haar-random unitary
    (one draw per layer), which makes the circuit translation invariant.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for l in range(depth):
        sites = range(l % 2, n - 1, 2)
        if shared:
            g = unitary_group.rvs(4, random_state=rng)
            layers.append({j: g for j in sites})
        else:
            layers.append({j: unitary_group.rvs(4, random_state=rng) for j in sites})
    return BrickworkCircuit(n, tuple(layers))


def identity_circuit(n: int, depth: int = 0) -> BrickworkCircuit:
    return BrickworkCircuit(n, tuple({} for _ in range(depth)))


def _light_cone(circuit, support):
    """Gates (layer, left site) in the backward light cone of ``support``."""
    lo, hi = min(support), max(support)
    cone = []
    for l, layer in enumerate(circuit.gates):
        for j in sorted(layer):
            if j + 1 >= lo and j <= hi:
                cone.append((l, j))
        touched = [j for (ll, j) in cone if ll == l]
        if touched:
            lo = min(lo, min(touched))
            hi = max(hi, max(touched) + 1)
    return cone, lo, hi


def _apply_gate(U, gate, pos, width):
    """Left-multiply the ``2^width`` matrix ``U`` by ``gate`` on sites ``pos, pos+1``."""
    T = U.reshape((2,) * width + (U.shape[1],))
    T = np.tensordot(gate.reshape(2, 2, 2, 2), T, axes=([2, 3], [pos, pos + 1]))
    T = np.moveaxis(T, (0, 1), (pos, pos + 1))
    return T.reshape(U.shape)


def evolved_diagonal(circuit: BrickworkCircuit, term: dict, max_width: int = 12):
    """Diagonal of ``U O U^dag`` on the light-cone window of a diagonal term.

    Parameters
    ----------
    term : dict
        ``{site: "Z"}`` map of a diagonal Pauli string.

    Returns
    -------
    (start, diag)
        ``diag`` has shape ``(2,) * width`` over the window starting at
        ``start``.
    """
    cone, lo, hi = _light_cone(circuit, list(term))
    width = hi - lo + 1
    if width > max_width:
        raise ValueError(f"light cone of width {width} exceeds the cap {max_width}")
    U = np.eye(2**width, dtype=complex)
    for l, j in cone:
        U = _apply_gate(U, circuit.gates[l][j], j - lo, width)
    o = np.ones((2,) * width)
    for s in term:
        shape = [1] * width
        shape[s - lo] = 2
        o = o * SPINS.reshape(shape)
    diag = (np.abs(U) ** 2) @ o.reshape(-1)
    return lo, diag.reshape((2,) * width)


def next_nearest_zz(n: int):
    """Terms ``Z_i Z_{i+2}`` for ``i = 0 .. n-3`` as ``{site: "Z"}`` maps."""
    return [{i: "Z", i + 2: "Z"} for i in range(n - 2)]


def windowed_observable_error(spec_true: ChainSpec, spec_rec: ChainSpec, circuit: BrickworkCircuit,
                              window_obs: Sequence | None = None, max_width: int = 12) -> float:
    """``|<O>_true - <O>_rec|`` for ``O = n^{-1} sum_t U O_t U^dag``.

    Each term is evolved through its light cone and evaluated on exact
    window marginals of both chains.  Evolved diagonals are cached by the
    local gate pattern, so translation-invariant circuits are cheap.
    """
    n = spec_true.n
    if spec_rec.n != n or circuit.n != n:
        raise ValueError("chain and circuit sizes differ")
    terms = next_nearest_zz(n) if window_obs is None else window_obs
    cache = {}
    solved_true, solved_rec = _solved(spec_true), _solved(spec_rec)
    total = 0.0
    for term in terms:
        cone, lo, hi = _light_cone(circuit, list(term))
        key = (tuple(s - lo for s in sorted(term)), hi - lo,
               tuple((l, j - lo, id(circuit.gates[l][j])) for l, j in cone))
        if key not in cache:
            cache[key] = evolved_diagonal(circuit, term, max_width)[1]
        diag = cache[key]
        width = hi - lo + 1
        p = window_marginal(spec_true, lo, width, solved_true)
        q = window_marginal(spec_rec, lo, width, solved_rec)
        total += float(((p - q) * diag).sum())
    return abs(total) / n
