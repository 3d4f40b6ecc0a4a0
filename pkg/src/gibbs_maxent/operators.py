"""Dense multi-qudit operator algebra.

Sites are indexed from 0 in the Python API (``support=(0, 2)`` means the
first and third site).  The Pauli-string text format, e.g. ``"Z1*Z2"``, is
1-indexed.  Site 0 is the leftmost (most significant) tensor factor, so
``Z`` on the last qubit of two is ``diag(1, -1, 1, -1)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
DEFAULT_MAX_DIM = 4096

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class SiteSystem:
    """A register of ``n`` sites of local dimension ``d``.

    Parameters
    ----------
    n : int
        Number of sites, at least 1.
    d : int, optional
        Local dimension, at least 2.
    max_dim : int, optional
        Cap on the total Hilbert-space dimension ``d**n``.
    """

    n: int
    d: int = 2
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"site count must be a positive integer, got {self.n}")
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"local dimension must be >= 2, got {self.d}")
        if self.d ** self.n > self.max_dim:
            raise ValueError(
                f"dimension {self.d}^{self.n} = {self.d ** self.n} exceeds the cap {self.max_dim}"
            )

    @property
    def dim(self) -> int:
        return self.d ** self.n


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """An operator acting on an ordered subset of sites.

    Parameters
    ----------
    support : tuple of int
        Distinct 0-based site indices, in the order the tensor factors of
        ``matrix`` refer to.
    matrix : ndarray
        Square matrix of size ``d**len(support)``.
    label : str, optional
        Pauli-string name when the operator was parsed from text.
    hermitian : bool, optional
        If True (default) the matrix is checked for Hermiticity and
        symmetrized.
    """

    support: tuple
    matrix: np.ndarray
    label: str | None = None
    hermitian: bool = True
    pauli: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        if len(set(support)) != len(support):
            raise ValueError(f"duplicate sites in support {support}")
        if any(s < 0 for s in support):
            raise ValueError(f"negative site index in support {support}")
        mat = np.array(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("operator matrix must be square")
        if self.hermitian:
            mat = symmetrize(mat)
        mat.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", mat)

    @property
    def locality(self) -> int:
        return len(self.support)

    @classmethod
    def from_pauli(cls, text: str) -> "LocalOperator":
        """Build a Pauli-string operator from text such as ``"X1*Z3"``."""
        letters = parse_pauli(text)
        support = tuple(sorted(letters))
        mat = np.eye(1, dtype=complex)
        for s in support:
            mat = np.kron(mat, PAULI_MATRICES[letters[s]])
        return cls(support, mat, label=pauli_label(letters), pauli=letters)


_PAULI_TOKEN = re.compile(r"^([IXYZ])(\d+)?$")


def parse_pauli(text: str) -> dict:
    """Parse a Pauli string into a ``{site: letter}`` map.

    Parameters
    ----------
    text : str
        Factors joined by ``*``, each a letter in ``IXYZ`` followed by a
        1-indexed site, e.g. ``"Z1*Z2"``.  Case-insensitive.  The strings
        ``"I"`` and ``""`` denote the identity.

    Returns
    -------
    dict
        Map from 0-based site to one of ``"X"``, ``"Y"``, ``"Z"``; identity
        factors are dropped.
    """
    cleaned = text.replace(" ", "").upper()
    if cleaned in ("", "I"):
        return {}
    letters = {}
    seen = set()
    for token in cleaned.split("*"):
        match = _PAULI_TOKEN.match(token)
        if match is None or match.group(2) is None:
            raise ValueError(f"malformed Pauli factor {token!r} in {text!r}")
        site = int(match.group(2))
        if site < 1:
            raise ValueError(f"Pauli sites are 1-indexed, got {site} in {text!r}")
        if site in seen:
            raise ValueError(f"duplicate site {site} in Pauli string {text!r}")
        seen.add(site)
        if match.group(1) != "I":
            letters[site - 1] = match.group(1)
    return letters


def pauli_label(letters: dict) -> str:
    """Inverse of :func:`parse_pauli`."""
    if not letters:
        return "I"
    return "*".join(f"{letters[s]}{s + 1}" for s in sorted(letters))


def symmetrize(mat, tol=HERMITIAN_TOL):
    """Return ``(M + M^dag)/2`` after checking ``M`` is Hermitian.

    Raises
    ------
    ValueError
        If ``||M - M^dag||_F > tol * max(1, ||M||_F)``.
    """
    mat = np.asarray(mat, dtype=complex)
    scale = max(1.0, np.linalg.norm(mat))
    if np.linalg.norm(mat - mat.conj().T) > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return (mat + mat.conj().T) / 2


class DensityOperator:
    """A validated density matrix on a :class:`SiteSystem`.

    Supports ``np.asarray(rho)``, so every function that takes a matrix also
    accepts a ``DensityOperator``.
    """

    def __init__(self, matrix, system: SiteSystem, tol=1e-10):
        mat = symmetrize(matrix)
        if mat.shape != (system.dim, system.dim):
            raise ValueError(f"expected a {system.dim}x{system.dim} matrix, got {mat.shape}")
        if abs(np.trace(mat).real - 1.0) > tol:
            raise ValueError(f"trace {np.trace(mat).real} differs from 1")
        if np.linalg.eigvalsh(mat).min() < -tol:
            raise ValueError("density matrix has a negative eigenvalue")
        mat.setflags(write=False)
        self.matrix = mat
        self.system = system

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.matrix
        return self.matrix.astype(dtype)

    def __repr__(self):
        return f"DensityOperator(n={self.system.n}, d={self.system.d})"


def _permuted_embedding(mat, support, system):
    n, d = system.n, system.d
    k = len(support)
    rest = [s for s in range(n) if s not in support]
    full = np.kron(mat, np.eye(d ** (n - k), dtype=complex))
    order = list(support) + rest
    # axis j of `full` (as a tensor) refers to site order[j]; move it to site order[j]
    perm = np.argsort(order)
    tensor = full.reshape([d] * (2 * n))
    tensor = tensor.transpose(list(perm) + [n + p for p in perm])
    return tensor.reshape(d**n, d**n)


def embed_local(op: LocalOperator, system: SiteSystem) -> np.ndarray:
    """Embed a local operator into the full space, identity elsewhere.

    Parameters
    ----------
    op : LocalOperator
    system : SiteSystem

    Returns
    -------
    ndarray
        ``system.dim x system.dim`` complex matrix.
    """
    support = op.support
    if any(s >= system.n for s in support):
        raise ValueError(f"support {support} out of range for n={system.n}")
    if op.matrix.shape[0] != system.d ** len(support):
        raise ValueError(
            f"matrix of size {op.matrix.shape[0]} does not match "
            f"d^{len(support)} = {system.d ** len(support)}"
        )
    return _permuted_embedding(op.matrix, support, system)


def herm_fn(H, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenbasis.

    Parameters
    ----------
    H : array_like
        Hermitian matrix.
    f : callable
        Vectorized function applied to the eigenvalues.

    Returns
    -------
    ndarray
        ``U f(diag(w)) U^dag``.
    """
    w, U = np.linalg.eigh(symmetrize(H))
    out = (U * f(w)) @ U.conj().T
    return (out + out.conj().T) / 2


def partial_trace(X, traced_sites: Iterable[int], system: SiteSystem) -> np.ndarray:
    """Trace out a subset of sites.

    Parameters
    ----------
    X : array_like
        Operator on the full space of ``system``.
    traced_sites : iterable of int
        0-based sites to trace out.
    system : SiteSystem

    Returns
    -------
    ndarray
        Operator on the remaining sites (in increasing site order).  Tracing
        every site gives a 1x1 matrix.
    """
    n, d = system.n, system.d
    traced = sorted(set(int(s) for s in traced_sites))
    if any(s < 0 or s >= n for s in traced):
        raise ValueError(f"traced sites {traced} out of range for n={n}")
    X = np.asarray(X)
    tensor = X.reshape([d] * (2 * n))
    # trace from the highest site down so the remaining axis numbers stay valid
    remaining = n
    for s in reversed(traced):
        tensor = np.trace(tensor, axis1=s, axis2=s + remaining)
        remaining -= 1
    k = d**remaining
    return tensor.reshape(k, k)


def operator_norm(X) -> float:
    """Largest singular value (``max |eigenvalue|`` for Hermitian ``X``)."""
    return float(np.linalg.norm(np.asarray(X), 2))


def trace_norm(X) -> float:
    """Sum of singular values."""
    return float(np.linalg.svd(np.asarray(X), compute_uv=False).sum())


def frobenius_norm(X) -> float:
    return float(np.linalg.norm(np.asarray(X)))


def weighted_two_norm(X, sigma) -> float:
    r"""The :math:`\sigma`-weighted 2-norm.

    .. math:: \|X\|_{2,\sigma}^2 = \mathrm{tr}\,|\sigma^{1/4} X \sigma^{1/4}|^2

    Parameters
    ----------
    X : array_like
    sigma : array_like
        Full-rank density matrix.
    """
    sigma = np.asarray(sigma)
    w, U = np.linalg.eigh(symmetrize(sigma))
    if w.min() <= 1e-12:
        raise ValueError("weighted norm requires a full-rank sigma")
    quarter = (U * w**0.25) @ U.conj().T
    Y = quarter @ np.asarray(X) @ quarter
    return float(np.sqrt(np.real(np.vdot(Y, Y))))


def norms(X, sigma=None) -> dict:
    """Collect the operator, trace, Frobenius and (optionally) weighted norms."""
    out = {
        "operator_norm": operator_norm(X),
        "trace_norm": trace_norm(X),
        "frobenius": frobenius_norm(X),
    }
    if sigma is not None:
        out["weighted_two_norm"] = weighted_two_norm(X, sigma)
    return out


def pauli_operator(text: str, system: SiteSystem) -> np.ndarray:
    """Full-space matrix of a Pauli string (convenience wrapper)."""
    if system.d != 2:
        raise ValueError("Pauli strings require qubits (d = 2)")
    return embed_local(LocalOperator.from_pauli(text), system)


def product_state(factors: Sequence) -> np.ndarray:
    """Kronecker product of single-site matrices."""
    out = np.eye(1, dtype=complex)
    for f in factors:
        out = np.kron(out, np.asarray(f, dtype=complex))
    return out
