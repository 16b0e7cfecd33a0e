"""Kraus families for weak dichotomic and Gaussian measurements.

Also provides the readout/backaction superoperator pair of a dichotomic
measurement and a numerical checker for the discrimination-disturbance bound
``1 - Tr(rho' rho) >= Delta^2 / (c sigma^2)``, evaluated for both ``c = 4`` and
``c = 16``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import qcore
from .errors import DomainError, InvariantError, LabelMismatchError, ResolutionError

COMPLETENESS_TOL = 1e-10
GAUSSIAN_COMPLETENESS_TOL = 1e-6
GAUSSIAN_HALF_WIDTH = 6.0
GAUSSIAN_POINTS = 2001


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Outcome-labelled Kraus operators ``K(a)``, stacked as ``operators[i]`` for ``labels[i]``."""

    labels: np.ndarray
    operators: np.ndarray
    tol: float = COMPLETENESS_TOL

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=float).reshape(-1)
        ops = np.asarray(self.operators, dtype=complex)
        if ops.ndim != 3 or ops.shape[0] != labels.size or ops.shape[1] != ops.shape[2]:
            raise InvariantError(f"operators of shape {ops.shape} do not match {labels.size} labels")
        labels.setflags(write=False)
        ops.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "operators", ops)
        dev = self.completeness_deviation()
        if dev > self.tol:
            raise InvariantError(f"Kraus family is not complete (deviation {dev:.3e})")

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    def __len__(self) -> int:
        return self.labels.size

    def completeness_deviation(self) -> float:
        s = np.einsum("aji,ajk->ik", self.operators.conj(), self.operators)
        return float(np.max(np.abs(s - np.eye(self.dim))))

    def effect(self, weights) -> np.ndarray:
        """``sum_a w(a) K(a)^dagger K(a)`` for per-outcome weights."""
        w = np.asarray(weights, dtype=float)
        return np.einsum("a,aji,ajk->ik", w, self.operators.conj(), self.operators)

    def mean_operator(self) -> np.ndarray:
        return self.effect(self.labels)

    def second_moment_operator(self) -> np.ndarray:
        return self.effect(self.labels ** 2)

    def probabilities(self, rho) -> np.ndarray:
        rho = qcore.as_matrix(rho)
        return np.einsum("aij,jk,aik->a", self.operators, rho, self.operators.conj()).real

    def channel(self, rho) -> np.ndarray:
        """Outcome-ignored state ``sum_a K rho K^dagger``."""
        rho = qcore.as_matrix(rho)
        return np.einsum("aij,jk,alk->il", self.operators, rho, self.operators.conj())

    def weighted_channel(self, rho, weights) -> np.ndarray:
        rho = qcore.as_matrix(rho)
        w = np.asarray(weights, dtype=float)
        return np.einsum("a,aij,jk,alk->il", w, self.operators, rho, self.operators.conj())

    def transfer_matrix(self) -> np.ndarray:
        """``sum_a K(a) (x) conj(K(a))`` indexed as ``[(i,k),(j,l)]``.

        For a pure state ``psi``, ``Tr(rho' rho) = <psi psi*| T |psi psi*>``.
        """
        d = self.dim
        t = np.einsum("aij,akl->ikjl", self.operators, self.operators.conj())
        return t.reshape(d * d, d * d)


def dichotomic_kraus(A, strength: float) -> KrausSet:
    """``K(a) = sqrt((1 + strength * a * A) / 2)`` for ``a = +1, -1``."""
    A = qcore.as_matrix(A)
    if not qcore.is_hermitian(A):
        raise DomainError("observable must be Hermitian")
    if qcore.operator_norm(A) > 1 + 1e-12:
        raise DomainError("dichotomic scheme needs |A| <= 1")
    if abs(strength) > 1 + 1e-12:
        raise DomainError("dichotomic strength must satisfy |lambda| <= 1")
    eye = np.eye(A.shape[0])
    if np.max(np.abs(A @ A - eye)) <= 1e-12:
        # principal root in closed form, exact even at |lambda| = 1
        r = math.sqrt(max(0.0, 1 - strength * strength))
        c = math.sqrt((1 + r) / 2)
        s = strength / (2 * c)  # 2 c s = lambda, without cancellation in 1 - r
        ops = [(c * eye + a * s * A) / math.sqrt(2) for a in (1.0, -1.0)]
    else:
        ops = [qcore.matrix_sqrt_psd((eye + a * strength * A) / 2) for a in (1.0, -1.0)]
    return KrausSet(np.array([1.0, -1.0]), np.array(ops))


def dichotomic_kraus_theta(A, theta: float) -> KrausSet:
    """Angle form for ``A^2 = 1``: ``sqrt(2) K(a) = cos(theta/2) + a sin(theta/2) A``."""
    A = qcore.as_matrix(A)
    if np.max(np.abs(A @ A - np.eye(A.shape[0]))) > 1e-12 or not qcore.is_hermitian(A):
        raise DomainError("angle form needs a Hermitian involution A")
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    eye = np.eye(A.shape[0])
    ops = [(c * eye + a * s * A) / math.sqrt(2) for a in (1.0, -1.0)]
    return KrausSet(np.array([1.0, -1.0]), np.array(ops))


def gaussian_grid(A, points: int = GAUSSIAN_POINTS, half_width: float = GAUSSIAN_HALF_WIDTH) -> np.ndarray:
    r = half_width + qcore.operator_norm(A)
    return np.linspace(-r, r, points)


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def gaussian_kraus(A, grid: Sequence[float] | None = None) -> KrausSet:
    """Discretised ``k(a, A) = (2 pi)^(-1/4) exp(-(a - A)^2 / 4)`` with trapezoid weights.

    Each grid point ``a_j`` becomes an outcome with operator ``sqrt(w_j) k(a_j, A)``.
    """
    A = qcore.as_matrix(A)
    if not qcore.is_hermitian(A):
        raise DomainError("observable must be Hermitian")
    grid = gaussian_grid(A) if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3 or np.any(np.diff(grid) <= 0):
        raise ResolutionError("grid must be strictly increasing with at least three points")
    if not np.allclose(grid, -grid[::-1], atol=1e-12):
        raise ResolutionError("grid must be symmetric around zero")
    w = trapezoid_weights(grid)
    alphas, v = qcore.hermitian_eigh(A)
    amp = (2 * math.pi) ** -0.25 * np.exp(-((grid[:, None] - alphas[None, :]) ** 2) / 4)
    amp *= np.sqrt(w)[:, None]
    ops = np.einsum("ij,aj,kj->aik", v, amp, v.conj())
    try:
        return KrausSet(grid, ops, tol=GAUSSIAN_COMPLETENESS_TOL)
    except InvariantError as exc:
        raise ResolutionError(f"Gaussian grid too coarse or narrow: {exc}") from exc


def decoherence_superop_apply(A, rho) -> np.ndarray:
    """``G_A rho = [A, [A, rho]]``."""
    A, rho = qcore.as_matrix(A), qcore.as_matrix(rho)
    return qcore.commutator(A, qcore.commutator(A, rho))


@dataclass(frozen=True, eq=False)
class WeakChannelPair:
    """Readout and backaction maps of one weak dichotomic measurement of ``observable``.

    ``strength`` is ``lambda = sin(theta)``.
    """

    observable: np.ndarray
    strength: float
    kraus: KrausSet = field(init=False)

    def __post_init__(self):
        obs = qcore.as_matrix(self.observable).copy()
        obs.setflags(write=False)
        object.__setattr__(self, "observable", obs)
        object.__setattr__(self, "kraus", dichotomic_kraus(obs, self.strength))

    @classmethod
    def from_angle(cls, observable, theta: float) -> "WeakChannelPair":
        return cls(observable, math.sin(theta))

    @property
    def g(self) -> float:
        """Backaction coefficient ``(1 - sqrt(1 - lambda^2)) / 4``."""
        return g_from_strength(self.strength)

    def readout(self, rho) -> np.ndarray:
        return readout_superop_apply(self, rho)

    def backaction(self, rho) -> np.ndarray:
        return backaction_superop_apply(self, rho)


def readout_superop_apply(w: WeakChannelPair, rho) -> np.ndarray:
    """``sum_a a K(a) rho K(a)^dagger / lambda``; at ``lambda = 0`` returns ``{A, rho}/2``."""
    rho = qcore.as_matrix(rho)
    if abs(w.strength) < 1e-150:  # zero, or so small that lambda^2 underflows
        return qcore.anticommutator(w.observable, rho) / 2
    return w.kraus.weighted_channel(rho, w.kraus.labels) / w.strength


def backaction_superop_apply(w: WeakChannelPair, rho) -> np.ndarray:
    return w.kraus.channel(qcore.as_matrix(rho))


def g_from_theta(theta: float) -> float:
    return math.sin(theta / 2) ** 2 / 2


def g_from_strength(strength: float) -> float:
    """``(1 - sqrt(1 - lambda^2)) / 4``, evaluated without cancellation."""
    lam2 = strength * strength
    return lam2 / (4 * (1 + math.sqrt(max(0.0, 1 - lam2))))


def povm_equivalence(k1: KrausSet, k2: KrausSet, tol: float = 1e-10) -> dict:
    """Compare two Kraus families outcome by outcome, allowing a phase per outcome."""
    if k1.labels.shape != k2.labels.shape or np.any(np.abs(k1.labels - k2.labels) > 1e-12):
        raise LabelMismatchError(f"labels differ: {k1.labels} vs {k2.labels}")
    if k1.dim != k2.dim:
        raise LabelMismatchError("Kraus families act on different dimensions")
    dev = 0.0
    for a, b in zip(k1.operators, k2.operators):
        overlap = np.trace(a.conj().T @ b)
        phase = overlap / abs(overlap) if abs(overlap) > 1e-15 else 1.0
        dev = max(dev, float(np.max(np.abs(b - phase * a))))
    return {"equivalent": dev <= tol, "max_deviation": dev}


# ------------------------------------------------------------- bound checker


@dataclass(frozen=True)
class BoundReport:
    delta: float
    sigma2: float
    worst_disturbance: float
    constant_4_satisfied: bool
    constant_16_satisfied: bool
    dim: int = 0
    samples: int = 0

    @property
    def saturation_16(self) -> float:
        """``Delta^2 / (16 sigma^2 E)``; 1 means the constant-16 bound is tight."""
        denom = 16 * self.sigma2 * self.worst_disturbance
        return self.delta ** 2 / denom if denom > 0 else (0.0 if self.delta == 0 else math.inf)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "sigma2": self.sigma2,
            "worst_disturbance": self.worst_disturbance,
            "constant_4_satisfied": self.constant_4_satisfied,
            "constant_16_satisfied": self.constant_16_satisfied,
            "constant_4_discrepancy": not self.constant_4_satisfied,
            "saturation_16": self.saturation_16,
            "dim": self.dim,
            "samples": self.samples,
        }


def max_variance(k: KrausSet, basis: np.ndarray | None = None) -> float:
    """Largest outcome variance over all states supported on ``basis`` columns.

    Uses ``max_rho Var = min_t [lambda_max(M2 - 2 t M) + t^2]``, which is exact
    because the variance is concave in ``rho``.
    """
    m1, m2 = k.mean_operator(), k.second_moment_operator()
    if basis is not None:
        m1 = basis.conj().T @ m1 @ basis
        m2 = basis.conj().T @ m2 @ basis

    def dual(t: float) -> float:
        return float(np.linalg.eigvalsh((m2 - 2 * t * m1 + (m2 - 2 * t * m1).conj().T) / 2)[-1] + t * t)

    lo, hi = float(k.labels.min()), float(k.labels.max())
    if hi - lo < 1e-15:
        return max(0.0, dual(lo))
    res = minimize_scalar(dual, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return max(0.0, min(float(res.fun), dual(0.0), dual(lo), dual(hi)))


def _disturbance(transfer: np.ndarray, states: np.ndarray) -> np.ndarray:
    """``1 - Tr(rho' rho)`` for each pure state row of ``states``."""
    pp = np.einsum("si,sk->sik", states, states.conj()).reshape(states.shape[0], -1)
    return 1.0 - np.einsum("sa,ab,sb->s", pp.conj(), transfer, pp).real


def check_theorem1_bound(k: KrausSet, subspace_dim: int | None = None, samples: int = 256,
                         rng_seed: int = 0, tol: float = 1e-9) -> BoundReport:
    """Estimate ``Delta``, ``sigma^2`` and the worst disturbance, and test both constants.

    The subspace is spanned by the first ``subspace_dim`` basis vectors.  ``Delta``
    is maximised over random orthogonal pure pairs together with the extreme
    eigenvectors of the mean operator; the disturbance is maximised over random
    pure states together with the equal superpositions of that extreme pair.
    """
    if k.completeness_deviation() > k.tol:
        raise InvariantError("Kraus family is not complete")
    if samples < 1:
        raise DomainError("samples must be >= 1")
    d = k.dim if subspace_dim is None else int(subspace_dim)
    if not 2 <= d <= k.dim:
        raise DomainError(f"subspace dimension must lie in [2, {k.dim}]")
    rng = np.random.Generator(np.random.Philox(rng_seed))
    basis = np.eye(k.dim, dtype=complex)[:, :d]
    mean_op = basis.conj().T @ k.mean_operator() @ basis

    # extreme pair from the spectrum of the mean operator
    w, v = qcore.hermitian_eigh(mean_op)
    best_gap = float(w[-1] - w[0])
    hi, lo = v[:, -1], v[:, 0]

    # random orthogonal pairs by Gram-Schmidt on Haar vectors
    p = qcore.random_pure_states(rng, d, samples)
    m = qcore.random_pure_states(rng, d, samples)
    m = m - np.sum(p.conj() * m, axis=1, keepdims=True) * p
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    gaps = (np.einsum("si,ij,sj->s", p.conj(), mean_op, p) - np.einsum("si,ij,sj->s", m.conj(), mean_op, m)).real
    j = int(np.argmax(np.abs(gaps)))
    if abs(gaps[j]) > best_gap:
        best_gap = float(abs(gaps[j]))
        hi, lo = (p[j], m[j]) if gaps[j] > 0 else (m[j], p[j])

    candidates = [qcore.random_pure_states(rng, d, samples),
                  np.array([(hi + lo) / math.sqrt(2), (hi - lo) / math.sqrt(2)])]
    states = np.concatenate(candidates) @ basis.T
    worst = float(max(0.0, _disturbance(k.transfer_matrix(), states).max()))

    sigma2 = max_variance(k, basis)
    delta2 = best_gap ** 2
    return BoundReport(
        delta=best_gap,
        sigma2=sigma2,
        worst_disturbance=worst,
        constant_4_satisfied=bool(4 * sigma2 * worst - delta2 >= -tol),
        constant_16_satisfied=bool(16 * sigma2 * worst - delta2 >= -tol),
        dim=d,
        samples=samples,
    )


def random_dichotomic(rng: np.random.Generator, dim: int) -> KrausSet:
    """Dichotomic family for a random Hermitian ``A`` with ``|A| = 1`` and random strength."""
    a = qcore.random_hermitian(rng, dim)
    a /= qcore.operator_norm(a)
    return dichotomic_kraus(a, float(rng.uniform(0.0, 1.0)))


def random_gaussian(rng: np.random.Generator, dim: int, points: int = GAUSSIAN_POINTS) -> KrausSet:
    """Gaussian family for a random Hermitian ``A`` of operator norm up to 3."""
    a = qcore.random_hermitian(rng, dim)
    a *= float(rng.uniform(0.0, 3.0)) / qcore.operator_norm(a)
    return gaussian_kraus(a, gaussian_grid(a, points=points))


def theorem1_sweep(channels: int, dims: Sequence[int] = (2, 3, 4), samples: int = 64, seed: int = 0,
                   points: int = GAUSSIAN_POINTS, tol: float = 1e-9) -> dict:
    """Run the bound checker over alternating random dichotomic and Gaussian families.

    Returns violation counts for both constants and the smallest relative margin
    ``(16 sigma^2 E - Delta^2) / Delta^2`` seen over channels with ``Delta > 0``.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    v4 = v16 = 0
    min_margin = math.inf
    for i in range(channels):
        dim = int(dims[i % len(dims)])
        k = random_dichotomic(rng, dim) if i % 2 == 0 else random_gaussian(rng, dim, points)
        r = check_theorem1_bound(k, samples=samples, rng_seed=int(rng.integers(2**63)), tol=tol)
        v4 += not r.constant_4_satisfied
        v16 += not r.constant_16_satisfied
        if r.delta > 1e-12:
            min_margin = min(min_margin, (16 * r.sigma2 * r.worst_disturbance - r.delta ** 2) / r.delta ** 2)
    return {"channels": channels, "dims": list(dims), "samples": samples, "seed": seed,
            "constant_16_violations": v16, "constant_4_violations": v4,
            "min_relative_margin_16": min_margin if math.isfinite(min_margin) else None}
