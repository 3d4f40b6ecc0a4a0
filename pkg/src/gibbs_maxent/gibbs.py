"""Gibbs states of a basis family, the max-entropy dual and its derivatives.

The family is ``sigma(mu) = exp(-beta * sum_i mu_i E_i) / Z(mu)``.  The dual
objective is ``f(mu) = log Z(mu) + beta <mu, e_target>``, whose gradient is
``beta (e_target - e(mu))`` with ``e_i(mu) = tr[sigma(mu) E_i]``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .operators import (
    LocalOperator,
    SiteSystem,
    DensityOperator,
    embed_local,
    operator_norm,
    symmetrize,
)

COMMUTE_TOL = 1e-10
GRAM_WARN_CONDITION = 1e8


class BasisConditionWarning(UserWarning):
    """Raised (as a warning) when the basis Gram matrix is ill-conditioned."""


@dataclass(frozen=True, eq=False)
class GibbsModel:
    """A family of Gibbs states over a fixed basis of local observables.

    Parameters
    ----------
    basis : sequence of LocalOperator
        Hermitian observables ``E_i`` with ``||E_i|| <= 1``.
    beta : float
        Inverse temperature, positive.
    system : SiteSystem

    Attributes
    ----------
    commuting_flag : bool
        Whether all embedded basis elements pairwise commute (checked).
    gram_condition : float
        Condition number of the Hilbert-Schmidt Gram matrix.
    """

    basis: tuple
    beta: float
    system: SiteSystem
    commuting_flag: bool = field(init=False)
    gram_condition: float = field(init=False)
    dense: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        basis = tuple(self.basis)
        if len(basis) == 0:
            raise ValueError("the basis must contain at least one operator")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        dense = np.stack([embed_local(E, self.system) for E in basis])
        for i, E in enumerate(dense):
            if operator_norm(E) > 1 + 1e-10:
                raise ValueError(f"basis element {i} has operator norm above 1")
        dense.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "dense", dense)
        object.__setattr__(self, "commuting_flag", _all_commute(dense))
        cond = _gram_condition(dense)
        object.__setattr__(self, "gram_condition", cond)
        if cond > GRAM_WARN_CONDITION:
            warnings.warn(
                f"basis Gram matrix condition number {cond:.3g} exceeds {GRAM_WARN_CONDITION:.0g}",
                BasisConditionWarning,
                stacklevel=2,
            )

    @property
    def m(self) -> int:
        return len(self.basis)

    # Method forms used by the solver, which only needs this small protocol.
    def expectations(self, mu):
        return expectations(self, mu)

    def log_partition(self, mu):
        return log_partition(self, mu)

    def symmetric_divergence(self, lam, mu):
        return symmetric_divergence(self, lam, mu).direct

    def relative_entropy_from(self, lam, mu):
        """``D(sigma(lam) || sigma(mu))``."""
        return relative_entropy(gibbs_state(self, lam), gibbs_state(self, mu))

    def trace_distance(self, lam, mu):
        """Trace norm ``||sigma(lam) - sigma(mu)||_1`` (no factor 1/2)."""
        diff = np.asarray(gibbs_state(self, lam)) - np.asarray(gibbs_state(self, mu))
        return float(np.abs(np.linalg.eigvalsh(diff)).sum())


def _all_commute(dense):
    m = len(dense)
    for i in range(m):
        for j in range(i + 1, m):
            comm = dense[i] @ dense[j] - dense[j] @ dense[i]
            if np.abs(comm).max() > COMMUTE_TOL:
                return False
    return True


def _gram_condition(dense):
    flat = dense.reshape(len(dense), -1)
    gram = flat.conj() @ flat.T
    s = np.linalg.svd(gram, compute_uv=False)
    return float(np.inf) if s[-1] == 0 else float(s[0] / s[-1])


def _check_mu(model, mu):
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (model.m,):
        raise ValueError(f"expected a parameter vector of length {model.m}, got shape {mu.shape}")
    return mu


def hamiltonian(model: GibbsModel, mu) -> np.ndarray:
    """Full-space matrix ``H(mu) = sum_i mu_i E_i``."""
    mu = _check_mu(model, mu)
    return np.tensordot(mu, model.dense, axes=1)


def _spectrum(model, mu):
    H = hamiltonian(model, mu)
    w, U = np.linalg.eigh((H + H.conj().T) / 2)
    return -model.beta * w, U


def _probabilities(a):
    p = np.exp(a - a.max())
    return p / p.sum()


def gibbs_state(model: GibbsModel, mu) -> DensityOperator:
    """The Gibbs state ``sigma(mu)`` of the model."""
    a, U = _spectrum(model, mu)
    p = _probabilities(a)
    return DensityOperator((U * p) @ U.conj().T, model.system)


def log_partition(model: GibbsModel, mu) -> float:
    """``log tr exp(-beta H(mu))``, stabilized by log-sum-exp."""
    a, _ = _spectrum(model, mu)
    return float(logsumexp(a))


def expectations(model: GibbsModel, mu) -> np.ndarray:
    """Vector ``e_i(mu) = tr[sigma(mu) E_i]``."""
    a, U = _spectrum(model, mu)
    p = _probabilities(a)
    # diagonal of U^dag E_i U, weighted by the Boltzmann weights
    diag = np.einsum("ji,kjl,li->ki", U.conj(), model.dense, U, optimize=True).real
    return diag @ p


def dual_objective(model: GibbsModel, mu, e_target) -> float:
    """``f(mu) = log Z(mu) + beta <mu, e_target>``."""
    mu = _check_mu(model, mu)
    return log_partition(model, mu) + model.beta * float(mu @ np.asarray(e_target, dtype=float))


def dual_gradient(model: GibbsModel, mu, e_target) -> np.ndarray:
    """``grad f(mu) = beta (e_target - e(mu))``."""
    return model.beta * (np.asarray(e_target, dtype=float) - expectations(model, mu))


def _divided_differences(a):
    """First divided differences of ``exp`` on the points ``a``."""
    ak = a[:, None]
    al = a[None, :]
    diff = ak - al
    small = np.abs(diff) < 1e-3
    safe = np.where(small, 1.0, diff)
    far = (np.exp(ak) - np.exp(al)) / safe
    # near the diagonal use exp(a_l) * expm1(diff)/diff to avoid cancellation
    ratio = np.ones_like(diff)
    np.divide(np.expm1(diff), diff, out=ratio, where=small & (diff != 0))
    return np.where(small, np.exp(al) * ratio, far)


def dual_hessian(model: GibbsModel, mu, method: str = "spectral", step: float = 1e-5) -> np.ndarray:
    """Hessian of the dual objective, which equals the Hessian of ``log Z``.

    Parameters
    ----------
    model : GibbsModel
    mu : array_like
    method : {"spectral", "commuting", "finite_diff"}
        ``spectral`` differentiates ``exp`` in the eigenbasis of ``H(mu)``
        using divided differences (Daleckii-Krein).  ``commuting`` uses the
        covariance form ``beta^2 (tr[sigma E_i E_j] - e_i e_j)`` and needs a
        commuting basis.  ``finite_diff`` takes central differences of the
        gradient with the given step.

    Returns
    -------
    ndarray
        Symmetric ``m x m`` matrix.
    """
    mu = _check_mu(model, mu)
    beta = model.beta
    if method == "spectral":
        a, U = _spectrum(model, mu)
        a = a - a.max()
        Z = np.exp(a).sum()
        Et = np.einsum("ji,kjl,lm->kim", U.conj(), model.dense, U, optimize=True)
        F = _divided_differences(a)
        second = np.einsum("ilk,jkl,kl->ij", Et, Et, F, optimize=True).real / Z
        e = np.einsum("kii,i->k", Et, np.exp(a)).real / Z
        hess = beta**2 * (second - np.outer(e, e))
    elif method == "commuting":
        if not model.commuting_flag:
            raise ValueError("the commuting Hessian needs a commuting basis")
        sigma = np.asarray(gibbs_state(model, mu))
        SE = np.einsum("ab,kbc->kac", sigma, model.dense)
        second = np.einsum("iab,jba->ij", SE, model.dense).real
        e = np.einsum("kaa->k", SE).real
        hess = beta**2 * (second - np.outer(e, e))
    elif method == "finite_diff":
        zero = np.zeros(model.m)
        hess = np.empty((model.m, model.m))
        for j in range(model.m):
            dm = np.zeros(model.m)
            dm[j] = step
            hess[:, j] = (dual_gradient(model, mu + dm, zero) - dual_gradient(model, mu - dm, zero)) / (2 * step)
    else:
        raise ValueError(f"unknown Hessian method {method!r}")
    return (hess + hess.T) / 2


def relative_entropy(rho, sigma) -> float:
    """Umegaki relative entropy ``tr[rho (log rho - log sigma)]``.

    Eigenvalues of ``rho`` below 1e-14 are dropped from the ``rho log rho``
    term.  ``sigma`` must have all eigenvalues above 1e-12.
    """
    rho = symmetrize(np.asarray(rho))
    sigma = symmetrize(np.asarray(sigma))
    s, V = np.linalg.eigh(sigma)
    if s.min() <= 1e-12:
        raise ValueError("relative entropy needs a full-rank sigma")
    r = np.linalg.eigvalsh(rho)
    r = r[r > 1e-14]
    neg_entropy = float(np.sum(r * np.log(r)))
    rho_in_sigma_basis = np.einsum("ji,jk,ki->i", V.conj(), rho, V).real
    cross = float(rho_in_sigma_basis @ np.log(s))
    return max(neg_entropy - cross, 0.0)


class SymmetricDivergence(NamedTuple):
    direct: float
    formula: float
    residual: float


def symmetric_divergence(model: GibbsModel, lam, mu) -> SymmetricDivergence:
    """Compare ``D(s_mu||s_lam) + D(s_lam||s_mu)`` with ``-beta <lam-mu, e(lam)-e(mu)>``."""
    lam = _check_mu(model, lam)
    mu = _check_mu(model, mu)
    s_lam = gibbs_state(model, lam)
    s_mu = gibbs_state(model, mu)
    direct = relative_entropy(s_mu, s_lam) + relative_entropy(s_lam, s_mu)
    formula = -model.beta * float((lam - mu) @ (expectations(model, lam) - expectations(model, mu)))
    return SymmetricDivergence(direct, formula, abs(direct - formula))


# ---------------------------------------------------------------------------
# model files


def _parse_number(x):
    if isinstance(x, str):
        return float(Fraction(x))
    return float(x)


def _basis_from_entry(entry, system):
    if isinstance(entry, str):
        if system.d != 2:
            raise ValueError("Pauli-string basis entries require d = 2")
        return LocalOperator.from_pauli(entry)
    support = [int(s) - 1 for s in entry["support"]]
    re = np.asarray(entry["matrix"]["re"], dtype=float)
    im = np.asarray(entry["matrix"].get("im", np.zeros_like(re)), dtype=float)
    return LocalOperator(tuple(support), re + 1j * im, label=entry.get("label"))


def _basis_to_entry(op):
    if op.pauli is not None:
        return op.label
    entry = {
        "support": [s + 1 for s in op.support],
        "matrix": {"re": op.matrix.real.tolist(), "im": op.matrix.imag.tolist()},
    }
    if op.label:
        entry["label"] = op.label
    return entry


def model_from_dict(data: dict):
    """Build ``(model, lambda)`` from a parsed model file.

    The file holds ``beta``, ``sites: {n, d}``, ``basis`` (Pauli strings with
    1-indexed sites, or ``{support, matrix: {re, im}}`` entries) and an
    optional ``lambda`` vector.  Numbers may be written as fractions such as
    ``"1/3"``.
    """
    try:
        sites = data["sites"]
        system = SiteSystem(int(sites["n"]), int(sites.get("d", 2)))
        basis = [_basis_from_entry(b, system) for b in data["basis"]]
        beta = _parse_number(data["beta"])
    except KeyError as exc:
        raise ValueError(f"model file is missing field {exc}") from None
    model = GibbsModel(basis, beta, system)
    lam = data.get("lambda")
    if lam is not None:
        lam = np.array([_parse_number(x) for x in lam])
        if lam.shape != (model.m,):
            raise ValueError(f"lambda has length {lam.size}, basis has {model.m} elements")
    return model, lam


def model_to_dict(model: GibbsModel, lam=None) -> dict:
    data = {
        "beta": model.beta,
        "sites": {"n": model.system.n, "d": model.system.d},
        "basis": [_basis_to_entry(E) for E in model.basis],
    }
    if lam is not None:
        data["lambda"] = [float(x) for x in lam]
    return data


def load_model(path):
    """Read a model file (``.json`` or ``.toml``); returns ``(model, lambda)``."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        import tomli

        with open(path, "rb") as fh:
            data = tomli.load(fh)
    else:
        with open(path) as fh:
            data = json.load(fh)
    return model_from_dict(data)


def save_model(path, model: GibbsModel, lam=None):
    """Write a JSON model file.  Floats are stored with ``repr`` precision."""
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, lam), fh, indent=2)
        fh.write("\n")
