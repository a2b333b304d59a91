"""Moment tensors of the shift-averaged signal and their empirical estimates.

The m-th population moment tensor of a signal is the average of its m-fold
outer powers over the shift orbit; entry (i_1..i_m) equals
(1/L) sum_g prod_a theta(i_a + g).  These tensors are fully symmetric and
circulant-invariant, and their pairwise differences drive every divergence
bound downstream.

Summation over the orbit is performed in a canonical row order (and, for even
orders, with a canonical global sign), so population tensors of two signals in
the same orbit — or differing by sign at even order — are bitwise identical,
making the orbit-invariance identities exact rather than approximate.

Empirical tensors subtract the Gaussian noise contribution using the standard
moment identities: E[X^(x)2] gains sigma^2 I and E[X^(x)3] gains the threefold
symmetrization of sigma^2 (mean (x) I).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .model import SampleSet, shift_inner_products
from .signals import Signal, _all_shifts

__all__ = [
    "MomentTensor",
    "population_moment",
    "moment_difference",
    "empirical_moment_corrected",
    "center_signal",
    "symmetrize3",
    "third_moment_decomposition_check",
    "delta_norm_sq",
    "tensor_power_distance_sq",
    "circulant_profile",
    "tensor_to_csv",
    "tensor_from_csv",
]

_CHUNK = 4096


@dataclass(frozen=True)
class MomentTensor:
    """Dense symmetric order-m tensor, m in {1, 2, 3}."""

    order: int
    entries: np.ndarray

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise ValueError(f"order must be 1, 2 or 3, got {self.order}")
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != self.order:
            raise ValueError(f"entries must have ndim {self.order}, got {e.ndim}")
        if len(set(e.shape)) != 1:
            raise ValueError(f"entries must be cubic, got shape {e.shape}")
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def L(self) -> int:
        return self.entries.shape[0]

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.entries.ravel()))


def _lex_greater(a: np.ndarray, b: np.ndarray) -> bool:
    for x, y in zip(a, b):
        if x != y:
            return x > y
    return False


def _canonical_orbit_rows(values: np.ndarray, order: int) -> np.ndarray:
    """All shifts of ``values`` as rows, in a canonical order.

    Rows are sorted lexicographically, which makes the summation order (and
    hence the float result) identical for every signal in the same orbit.
    For even orders the global sign is canonicalized too, since it cannot
    affect the tensor.
    """
    S = _all_shifts(values)
    if order % 2 == 0:
        Sneg = -S
        mx = S[np.lexsort(S.T[::-1])][-1]
        mxn = Sneg[np.lexsort(Sneg.T[::-1])][-1]
        if _lex_greater(mxn, mx):
            S = Sneg
    return S[np.lexsort(S.T[::-1])]


def population_moment(theta: Signal, order: int) -> MomentTensor:
    """Shift-averaged m-fold outer power of theta."""
    S = _canonical_orbit_rows(theta.values, order)
    L = theta.L
    if order == 1:
        out = S.mean(axis=0)
    elif order == 2:
        out = S.T @ S / L
    elif order == 3:
        out = np.einsum("gi,gj,gk->ijk", S, S, S) / L
    else:
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    return MomentTensor(order=order, entries=out)


def moment_difference(theta: Signal, phi: Signal, order: int) -> MomentTensor:
    """Difference of the two signals' population moment tensors."""
    if theta.L != phi.L:
        raise ValueError(f"length mismatch: {theta.L} vs {phi.L}")
    a = population_moment(theta, order)
    b = population_moment(phi, order)
    return MomentTensor(order=order, entries=a.entries - b.entries)


def empirical_moment_corrected(samples: SampleSet, order: int) -> MomentTensor:
    """Unbiased estimate of the population moment tensor from noisy samples.

    Gaussian debiasing: order 2 subtracts sigma^2 I; order 3 subtracts the
    threefold symmetrization sigma^2 (delta_jk mu_i + delta_ik mu_j +
    delta_ij mu_k) built from the sample mean.
    """
    X = samples.observations
    n, L = X.shape
    s2 = samples.sigma**2
    if order == 1:
        out = X.mean(axis=0)
    elif order == 2:
        out = X.T @ X / n - s2 * np.eye(L)
    elif order == 3:
        acc = np.zeros((L, L * L))
        for start in range(0, n, _CHUNK):
            chunk = X[start : start + _CHUNK]
            B = (chunk[:, :, None] * chunk[:, None, :]).reshape(len(chunk), L * L)
            acc += chunk.T @ B
        out = acc.reshape(L, L, L) / n
        mu = X.mean(axis=0)
        eye = np.eye(L)
        out -= s2 * (
            mu[:, None, None] * eye[None, :, :]
            + mu[None, :, None] * eye[:, None, :]
            + mu[None, None, :] * eye[:, :, None]
        )
    else:
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    return MomentTensor(order=order, entries=out)


def center_signal(theta: Signal) -> Signal:
    """Subtract the shift-averaged mean: theta - mean(theta) * ones.

    The result has zero mean but is generally dense; sparsity of the support
    is not preserved.
    """
    return Signal(theta.values - np.mean(theta.values))


def symmetrize3(T: np.ndarray) -> MomentTensor:
    """Average an order-3 array over all 6 index permutations (idempotent)."""
    T = np.asarray(T, dtype=float)
    if T.ndim != 3 or len(set(T.shape)) != 1:
        raise ValueError(f"expected a cubic order-3 array, got shape {T.shape}")
    out = (
        T
        + T.transpose(0, 2, 1)
        + T.transpose(1, 0, 2)
        + T.transpose(1, 2, 0)
        + T.transpose(2, 0, 1)
        + T.transpose(2, 1, 0)
    ) / 6.0
    return MomentTensor(order=3, entries=out)


def third_moment_decomposition_check(theta: Signal, phi: Signal) -> float:
    """Residual of the centering decomposition of the third moment difference.

    The identity splits Delta_3(theta, phi) into the centered difference plus
    3 Sym(ones (x) (mean_theta * M2(centered theta) - mean_phi * M2(centered
    phi))) plus (mean_theta^3 - mean_phi^3) ones^(x)3.  Returns the Frobenius
    norm of LHS minus RHS.
    """
    if theta.L != phi.L:
        raise ValueError(f"length mismatch: {theta.L} vs {phi.L}")
    L = theta.L
    tbar, pbar = theta.mean(), phi.mean()
    tc, pc = center_signal(theta), center_signal(phi)
    lhs = moment_difference(theta, phi, 3).entries
    ones = np.ones(L)
    mid = tbar * population_moment(tc, 2).entries - pbar * population_moment(pc, 2).entries
    rhs = (
        moment_difference(tc, pc, 3).entries
        + 3.0 * symmetrize3(ones[:, None, None] * mid[None, :, :]).entries
        + (tbar**3 - pbar**3) * np.ones((L, L, L))
    )
    return float(np.linalg.norm((lhs - rhs).ravel()))


def delta_norm_sq(theta: Signal, phi: Signal, order: int) -> float:
    """Squared Frobenius norm of the order-m moment difference tensor.

    Uses the correlation identity
        ||Delta_m||^2 = (1/L) sum_h [ c_tt(h)^m + c_pp(h)^m - 2 c_tp(h)^m ],
    where c_ab(h) = a . shift(b, h), valid for every m >= 1 — no dense tensor
    is built, so orders beyond 3 are available here.  Clamped at 0 against
    cancellation.
    """
    if theta.L != phi.L:
        raise ValueError(f"length mismatch: {theta.L} vs {phi.L}")
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    t, p = theta.values, phi.values
    ctt = shift_inner_products(t, t)
    cpp = shift_inner_products(p, p)
    ctp = shift_inner_products(t, p)
    val = float(np.mean(ctt**order) + np.mean(cpp**order) - 2.0 * np.mean(ctp**order))
    return max(val, 0.0)


def tensor_power_distance_sq(theta: Signal, phi: Signal, order: int) -> float:
    """||theta^(x)m - phi^(x)m||^2 for aligned (non-shift-averaged) powers:
    ||theta||^2m - 2 <theta, phi>^m + ||phi||^2m."""
    t2 = float(np.dot(theta.values, theta.values))
    p2 = float(np.dot(phi.values, phi.values))
    tp = float(np.dot(theta.values, phi.values))
    return max(t2**order - 2.0 * tp**order + p2**order, 0.0)


def circulant_profile(T: np.ndarray) -> np.ndarray:
    """Orbit-averaged (a, a, b) entries of an order-3 tensor, by lag.

    Returns e with e[d] = mean_b T[(b+d) % L, (b+d) % L, b].  For a population
    tensor this is exactly (1/L) sum_g theta(g+d)^2 theta(g); for an empirical
    tensor the averaging suppresses noise by a factor sqrt(L).
    """
    T = np.asarray(T, dtype=float)
    L = T.shape[0]
    b = np.arange(L)
    out = np.empty(L)
    for d in range(L):
        a = (b + d) % L
        out[d] = np.mean(T[a, a, b])
    return out


def tensor_to_csv(T: MomentTensor) -> str:
    """Flat CSV: header "L,order", its values, then row-major entries."""
    buf = io.StringIO()
    buf.write("L,order\n")
    buf.write(f"{T.L},{T.order}\n")
    for v in T.entries.ravel():
        buf.write(f"{v:.17g}\n")
    return buf.getvalue()


def tensor_from_csv(text: str) -> MomentTensor:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) < 2 or lines[0] != "L,order":
        raise ValueError('expected header "L,order"')
    L_s, order_s = lines[1].split(",")
    L, order = int(L_s), int(order_s)
    flat = np.array([float(v) for v in lines[2:]])
    if flat.size != L**order:
        raise ValueError(f"expected {L**order} entries, found {flat.size}")
    return MomentTensor(order=order, entries=flat.reshape((L,) * order))
