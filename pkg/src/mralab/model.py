"""The observation model: uniform cyclic shift plus isotropic Gaussian noise.

An observation is X = shift(theta, l) + sigma * xi with l uniform on Z/LZ and
xi standard normal, so the marginal density of X is a uniform mixture of L
Gaussians that share one covariance and one shift orbit of means.  Everything
here is expressed through the per-shift inner products x . shift(theta, l),
computed for all l in one pass (a circular cross-correlation); a direct O(L^2)
reference implementation is kept as the correctness oracle for that pass.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .signals import Signal, _all_shifts

__all__ = [
    "NoiseSpec",
    "SampleSet",
    "sample_observations",
    "log_density",
    "log_density_many",
    "shift_posterior",
    "empirical_nll",
    "kl_monte_carlo",
    "shift_inner_products",
    "shift_inner_products_direct",
    "sample_set_to_csv",
    "sample_set_from_csv",
]

_CHUNK = 8192  # fixed substream chunk so results never depend on worker count


@dataclass(frozen=True)
class NoiseSpec:
    """Noise level sigma > 0.  The constrained class is intended for the
    high-noise regime sigma >= ||theta||; that is audited, not enforced."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")


@dataclass(frozen=True)
class SampleSet:
    """n noisy observations of one signal orbit.

    true_shift_trace records the latent shifts (debugging only; estimators
    must never read it).
    """

    observations: np.ndarray
    sigma: float
    seed: int
    true_shift_trace: np.ndarray | None = None

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float)
        if obs.ndim != 2 or obs.shape[0] < 1:
            raise ValueError(f"observations must be a nonempty (n, L) array, got shape {obs.shape}")
        obs = obs.copy()
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)
        if self.true_shift_trace is not None:
            tr = np.asarray(self.true_shift_trace, dtype=int).copy()
            if tr.shape != (obs.shape[0],):
                raise ValueError("true_shift_trace length must match n")
            tr.setflags(write=False)
            object.__setattr__(self, "true_shift_trace", tr)
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def L(self) -> int:
        return self.observations.shape[1]


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index,)))


def sample_observations(
    theta: Signal, noise: NoiseSpec, n: int, seed: int, keep_shift_trace: bool = False
) -> SampleSet:
    """Draw n observations shift(theta, l_i) + sigma * xi_i.

    Deterministic given seed.  Generation is chunked with per-chunk derived
    substreams, so the output is identical no matter how the work would be
    split across workers.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    L = theta.L
    obs = np.empty((n, L))
    shifts = np.empty(n, dtype=int) if keep_shift_trace else None
    shift_matrix = _all_shifts(theta.values)
    for c, start in enumerate(range(0, n, _CHUNK)):
        stop = min(start + _CHUNK, n)
        rng = _chunk_rng(seed, c)
        ells = rng.integers(0, L, size=stop - start)
        xi = rng.standard_normal((stop - start, L))
        obs[start:stop] = shift_matrix[ells] + noise.sigma * xi
        if shifts is not None:
            shifts[start:stop] = ells
    return SampleSet(observations=obs, sigma=noise.sigma, seed=seed, true_shift_trace=shifts)


def shift_inner_products(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """All inner products x . shift(theta, l), l = 0..L-1, in one FFT pass.

    x may be a single vector (returns length-L) or an (n, L) batch.
    """
    L = theta.shape[-1]
    fx = np.fft.rfft(x, axis=-1)
    ft = np.fft.rfft(theta)
    return np.fft.irfft(np.conj(fx) * ft, n=L, axis=-1)


def shift_inner_products_direct(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """O(L^2) reference for shift_inner_products (correctness oracle)."""
    return np.asarray(x) @ _all_shifts(theta).T


def _log_mixture_weights(theta: Signal, x: np.ndarray, sigma: float) -> np.ndarray:
    """log of exp(-||x - shift(theta,l)||^2 / (2 sigma^2)) per shift, stabilized."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != theta.L:
        raise ValueError(f"dimension mismatch: x has {x.shape[-1]}, theta has {theta.L}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    inner = shift_inner_products(x, theta.values)
    sq = np.sum(x * x, axis=-1, keepdims=True)
    t2 = float(np.dot(theta.values, theta.values))
    return (-0.5 * sq + inner - 0.5 * t2) / sigma**2


def log_density_many(theta: Signal, x: np.ndarray, sigma: float) -> np.ndarray:
    """log f_theta for a batch of observations (shape (n, L) -> (n,))."""
    expo = _log_mixture_weights(theta, x, sigma)
    m = np.max(expo, axis=-1, keepdims=True)
    lme = m[..., 0] + np.log(np.mean(np.exp(expo - m), axis=-1))
    L = theta.L
    return -0.5 * L * np.log(2 * np.pi * sigma**2) + lme


def log_density(theta: Signal, x: np.ndarray, sigma: float) -> float:
    """log f_theta(x): Gaussian normalizer plus a stabilized log-mean-exp
    over the L aligned squared distances."""
    return float(log_density_many(theta, np.atleast_2d(x), sigma)[0])


def shift_posterior(theta: Signal, x: np.ndarray, sigma: float) -> np.ndarray:
    """Posterior over the latent shift given x; entries sum to 1.

    The norm terms cancel (||shift(theta,l)|| is constant in l), leaving
    weights proportional to exp(x . shift(theta,l) / sigma^2).
    """
    inner = shift_inner_products(np.asarray(x, dtype=float), theta.values) / sigma**2
    inner -= np.max(inner, axis=-1, keepdims=True)
    w = np.exp(inner)
    return w / np.sum(w, axis=-1, keepdims=True)


def empirical_nll(phi: Signal, samples: SampleSet) -> float:
    """Mean negative log density over the sample set; the restricted MLE
    minimizes this over the constrained class."""
    return float(-np.mean(log_density_many(phi, samples.observations, samples.sigma)))


def kl_monte_carlo(
    theta: Signal, phi: Signal, sigma: float, n_mc: int, seed: int, n_batches: int = 20
) -> tuple[float, float]:
    """Plug-in Monte Carlo estimate of KL(P_theta || P_phi).

    Averages log f_theta(X) - log f_phi(X) over X ~ P_theta; the standard
    error comes from ``n_batches`` equal batch means.  n_mc is rounded up to
    a multiple of n_batches.  Returns (estimate, std_error).
    """
    if n_mc < 100:
        raise ValueError(f"n_mc must be >= 100, got {n_mc}")
    if theta.L != phi.L:
        raise ValueError(f"length mismatch: {theta.L} vs {phi.L}")
    per = -(-n_mc // n_batches)  # ceil division
    n_mc = per * n_batches
    samples = sample_observations(theta, NoiseSpec(sigma), n_mc, seed)
    llr = log_density_many(theta, samples.observations, sigma) - log_density_many(
        phi, samples.observations, sigma
    )
    batch_means = llr.reshape(n_batches, per).mean(axis=1)
    estimate = float(np.mean(batch_means))
    std_error = float(np.std(batch_means, ddof=1) / np.sqrt(n_batches))
    return estimate, std_error


def sample_set_to_csv(samples: SampleSet) -> str:
    """CSV record: header "sigma,seed,n,L", its values, then one row per observation."""
    buf = io.StringIO()
    buf.write("sigma,seed,n,L\n")
    buf.write(f"{samples.sigma:.17g},{samples.seed},{samples.n},{samples.L}\n")
    for row in samples.observations:
        buf.write(",".join(f"{v:.17g}" for v in row))
        buf.write("\n")
    return buf.getvalue()


def sample_set_from_csv(text: str) -> SampleSet:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) < 2 or lines[0] != "sigma,seed,n,L":
        raise ValueError('expected header "sigma,seed,n,L"')
    sigma_s, seed_s, n_s, L_s = lines[1].split(",")
    sigma, seed, n, L = float(sigma_s), int(seed_s), int(n_s), int(L_s)
    if len(lines) != 2 + n:
        raise ValueError(f"expected {n} observation rows, found {len(lines) - 2}")
    obs = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
    if obs.shape != (n, L):
        raise ValueError(f"observation block has shape {obs.shape}, expected {(n, L)}")
    return SampleSet(observations=obs, sigma=sigma, seed=seed)
