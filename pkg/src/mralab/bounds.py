"""Evaluatable divergence bounds: the moment-series KL sandwich, Hermite
machinery, a quadratic-test (Donsker-Varadhan) lower bound, two-point minimax
calculus, chi-square tails, covering nets, and the MLE deviation tail.

Every bound is an explicit formula packaged as a BoundReport so audits can
compare it against Monte Carlo KL estimates.  Universal constants that the
theory leaves unspecified are explicit inputs with documented defaults,
recorded in the report's constant_policy — audits check inequality shapes and
fitted-constant stability, never fabricated constants.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .moments import delta_norm_sq, moment_difference
from .signals import Signal, SignalClassSpec, rho_distance

__all__ = [
    "BoundReport",
    "HermiteIndex",
    "TwoPointPair",
    "hermite_eval",
    "scaled_hermite_eval",
    "hermite_moment_tensor",
    "moment_series",
    "series_statistic",
    "default_series_upper_constant",
    "kl_series_upper",
    "delta2_collision_lower",
    "quadratic_test_supremand",
    "kl_quadratic_test_lower",
    "lecam_construct",
    "lecam_bound",
    "chi_square_tail",
    "net_cardinality_bound",
    "log_net_cardinality_bound",
    "build_sparse_net",
    "mle_deviation_tail_bound",
    "delta_norm_upper",
]


@dataclass(frozen=True)
class BoundReport:
    """One evaluated bound: its value, side, inputs, and constant choices."""

    name: str
    value: float
    side: str  # "lower" or "upper"
    inputs: dict = field(default_factory=dict)
    constant_policy: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.side not in ("lower", "upper"):
            raise ValueError(f"side must be 'lower' or 'upper', got {self.side!r}")
        if not np.isfinite(self.value):
            raise ValueError(f"bound value must be finite, got {self.value}")

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "side": self.side,
            "inputs": dict(self.inputs),
            "constant_policy": dict(self.constant_policy),
        }


@dataclass(frozen=True)
class HermiteIndex:
    """Multi-index over d coordinates."""

    alpha: tuple[int, ...]

    def __post_init__(self):
        a = tuple(int(x) for x in self.alpha)
        if any(x < 0 for x in a):
            raise ValueError(f"multi-index entries must be nonnegative, got {a}")
        object.__setattr__(self, "alpha", a)

    @property
    def degree(self) -> int:
        return sum(self.alpha)

    def factorial(self) -> int:
        out = 1
        for x in self.alpha:
            out *= math.factorial(x)
        return out


def hermite_eval(k: int, x) -> np.ndarray | float:
    """Probabilists' Hermite polynomial h_k via the three-term recurrence
    h_{k+1}(x) = x h_k(x) - k h_{k-1}(x)."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for j in range(1, k):
        prev, cur = cur, x * cur - j * prev
    return cur if cur.ndim else float(cur)


def scaled_hermite_eval(alpha: HermiteIndex, x, sigma: float) -> float:
    """Noise-rescaled multivariate Hermite polynomial
    sigma^|alpha| * prod_i h_{alpha_i}(x_i / sigma)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (len(alpha.alpha),):
        raise ValueError(f"x has shape {x.shape}, expected ({len(alpha.alpha)},)")
    out = sigma ** alpha.degree
    for xi, ai in zip(x, alpha.alpha):
        out *= hermite_eval(ai, xi / sigma)
    return float(out)


def hermite_moment_tensor(x: np.ndarray, order: int, sigma: float) -> np.ndarray:
    """Order-m tensor of rescaled Hermite polynomials at x (m in {1,2,3}).

    Entry (i_1..i_m) is the rescaled Hermite polynomial for the multi-index
    counting coordinate repetitions.  Its conditional mean under
    x = mu + sigma * xi is exactly mu^(x)m, which is what makes the sample
    average of these tensors an unbiased moment estimate.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("x must be a single vector")
    L = x.shape[0]
    s2 = sigma**2
    if order == 1:
        return x.copy()
    if order == 2:
        return np.outer(x, x) - s2 * np.eye(L)
    if order == 3:
        eye = np.eye(L)
        return (
            x[:, None, None] * x[None, :, None] * x[None, None, :]
            - s2
            * (
                x[:, None, None] * eye[None, :, :]
                + x[None, :, None] * eye[:, None, :]
                + x[None, None, :] * eye[:, :, None]
            )
        )
    raise ValueError(f"order must be 1, 2 or 3, got {order}")


def moment_series(theta: Signal, phi: Signal, sigma: float, k_max: int, base: float) -> float:
    """Weighted sum of squared moment-difference norms,
    sum_{m=1}^{k_max} ||Delta_m||^2 / ((base sigma^2)^m m!).

    base=3 gives the lower-envelope weighting, base=1 the upper one.  Only
    tensor orders up to 3 are built, so k_max <= 3 is enforced.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    if k_max > 3:
        raise ValueError(f"k_max={k_max} exceeds 3; higher tensor orders are not built")
    if base <= 0:
        raise ValueError(f"base must be positive, got {base}")
    total = 0.0
    for m in range(1, k_max + 1):
        total += delta_norm_sq(theta, phi, m) / ((base * sigma**2) ** m * math.factorial(m))
    return total


def series_statistic(theta: Signal, phi: Signal, x: np.ndarray, sigma: float, k: int) -> float:
    """Degree-k separating statistic sum_m <Delta_m, H_m(x)> / ((3 sigma^2)^m m!).

    Its mean gap between the two sample distributions equals
    moment_series(theta, phi, sigma, k, base=3); implemented for that identity
    check only, not as an estimator.
    """
    if not (1 <= k <= 3):
        raise ValueError(f"k must be in 1..3, got {k}")
    total = 0.0
    for m in range(1, k + 1):
        D = moment_difference(theta, phi, m).entries
        H = hermite_moment_tensor(np.asarray(x, dtype=float), m, sigma)
        total += float(np.sum(D * H)) / ((3.0 * sigma**2) ** m * math.factorial(m))
    return total


def default_series_upper_constant(K0: float, sigma_scaled: float) -> float:
    """Explicit remainder constant 12 exp(2 K0^2 / sigma^2 + 18 K0^2) for the
    series upper bound, at the noise level rescaled so ||theta|| = 1."""
    return 12.0 * math.exp(2.0 * K0**2 / sigma_scaled**2 + 18.0 * K0**2)


def _require(cond: bool, what: str):
    if not cond:
        raise ValueError(f"precondition failed: {what}")


def kl_series_upper(
    theta: Signal,
    phi: Signal,
    sigma: float,
    k: int,
    C_bar: float | None = None,
    K0: float = 3.0,
) -> BoundReport:
    """Series upper bound on KL(P_theta || P_phi) for mean-zero aligned pairs:

        2 sum_{m=1}^{k-1} ||Delta_m||^2 / (sigma^{2m} m!)
          + C_bar ||theta||^{2k-2} rho^2 / sigma^{2k}.

    Requires mean-zero aligned inputs with rho <= K0 ||theta|| <= K0 sigma.
    C_bar=None selects the explicit remainder constant (recorded in
    constant_policy).
    """
    t_norm = theta.norm()
    rho, _ = rho_distance(theta, phi)
    scale = max(1.0, t_norm)
    _require(abs(theta.mean()) <= 1e-10 * scale, f"theta mean {theta.mean()} is not zero")
    _require(abs(phi.mean()) <= 1e-10 * max(1.0, phi.norm()), f"phi mean {phi.mean()} is not zero")
    aligned = np.linalg.norm(theta.values - phi.values)
    _require(abs(rho - aligned) <= 1e-9 * (1.0 + aligned), "inputs are not aligned (rho != ||theta - phi||)")
    _require(rho <= K0 * t_norm + 1e-12, f"rho={rho} exceeds K0*||theta||={K0 * t_norm}")
    _require(t_norm <= sigma + 1e-12, f"||theta||={t_norm} exceeds sigma={sigma}")
    _require(2 <= k <= 4, f"k={k} outside 2..4")
    sigma_scaled = sigma / t_norm if t_norm > 0 else sigma
    policy = {"K0": K0}
    if C_bar is None:
        C_bar = default_series_upper_constant(K0, sigma_scaled)
        policy["C_bar"] = C_bar
        policy["C_bar_policy"] = "explicit-remainder"
    else:
        policy["C_bar"] = C_bar
        policy["C_bar_policy"] = "user"
    head = 2.0 * moment_series(theta, phi, sigma, k - 1, base=1.0) if k >= 2 else 0.0
    tail = C_bar * t_norm ** (2 * k - 2) * rho**2 / sigma ** (2 * k)
    return BoundReport(
        name="kl_series_upper",
        value=head + tail,
        side="upper",
        inputs={"sigma": sigma, "k": k, "rho": rho, "theta_norm": t_norm},
        constant_policy=policy,
    )


def delta2_collision_lower(theta: Signal, phi: Signal, spec: SignalClassSpec) -> BoundReport:
    """Lower bound on ||Delta_2|| for collision-free class pairs:
    sqrt(2 eps / (2 + eps)) * sqrt(s / L) * rho(theta, phi)."""
    rho, _ = rho_distance(theta, phi)
    value = math.sqrt(2.0 * spec.eps / (2.0 + spec.eps)) * math.sqrt(spec.s / spec.L) * rho
    return BoundReport(
        name="delta2_collision_lower",
        value=value,
        side="lower",
        inputs={"rho": rho, "s": spec.s, "L": spec.L, "eps": spec.eps},
    )


def quadratic_test_supremand(phi_norm_sq: float, sigma: float, L: int, lam: float) -> float:
    """Donsker-Varadhan objective at test f(x) = -lam ||x||^2 for a unit-norm
    reference signal: lam |phi|^2/(1+2 lam sigma^2) + (L/2) log(1+2 lam sigma^2)
    - lam (1 + sigma^2 L).  Any lam >= 0 certifies a KL lower bound."""
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    u = 2.0 * lam * sigma**2
    return lam * phi_norm_sq / (1.0 + u) + 0.5 * L * math.log1p(u) - lam * (1.0 + sigma**2 * L)


def kl_quadratic_test_lower(theta: Signal, phi: Signal, sigma: float) -> BoundReport:
    """Quadratic-test lower bound on KL(P_theta || P_phi) for far-apart pairs.

    Internally rescales (theta, phi, sigma) by ||theta|| so that the reference
    has unit norm; requires sigma >= ||theta|| and ||phi|| >= 2 ||theta||
    after rescaling.  Evaluates the full supremand at lam = 1/(4 sigma^4 L)
    and the simplified floor |phi|^2 / (32 sigma^4 L), returning the larger
    (the KL divergence is scale-invariant, so the bound applies unchanged).
    """
    t_norm = theta.norm()
    _require(t_norm > 0, "theta must be nonzero")
    L = theta.L
    sig = sigma / t_norm
    p2 = (phi.norm() / t_norm) ** 2
    _require(sig >= 1.0, f"rescaled sigma {sig} < 1 (need sigma >= ||theta||)")
    _require(p2 >= 4.0, f"rescaled ||phi||^2 = {p2} < 4 (need ||phi|| >= 2||theta||)")
    lam = 1.0 / (4.0 * sig**4 * L)
    full = quadratic_test_supremand(p2, sig, L, lam)
    floor = p2 / (32.0 * sig**4 * L)
    return BoundReport(
        name="kl_quadratic_test_lower",
        value=max(full, floor),
        side="lower",
        inputs={
            "sigma": sigma,
            "lam": lam,
            "floor": floor,
            "supremand": full,
            "rescaled_phi_norm_sq": p2,
        },
    )


@dataclass(frozen=True)
class TwoPointPair:
    """Hard-to-distinguish signal pair for the two-point minimax bound.

    rho is computed exactly; the aligned coordinate distance is sqrt(2) delta
    (two coordinates perturbed by delta each).
    """

    phi: Signal
    theta_n: Signal
    delta: float
    rho: float
    aligned_distance: float


def _first_collision_free_support(L: int, s: int) -> list[int] | None:
    """Lexicographically smallest collision-free size-s subset containing 0."""
    used = [False] * L
    chosen: list[int] = []

    def new_diffs(x):
        ds = set()
        for y in chosen:
            d1, d2 = (x - y) % L, (y - x) % L
            if used[d1] or used[d2] or d1 == d2 or d1 in ds or d2 in ds:
                return None
            ds.add(d1)
            ds.add(d2)
        return ds

    def dfs(start):
        if len(chosen) == s:
            return True
        for x in range(start, L):
            ds = new_diffs(x)
            if ds is None:
                continue
            for d in ds:
                used[d] = True
            chosen.append(x)
            if dfs(x + 1):
                return True
            chosen.pop()
            for d in ds:
                used[d] = False
        return False

    return chosen if dfs(0) else None


def lecam_construct(spec: SignalClassSpec, sigma: float, n: int, c: float) -> TwoPointPair:
    """Two-point construction: phi alternates +-1/sqrt(s) on a collision-free
    support; theta_n perturbs the last two entries outward by
    delta = c min(sigma^2/sqrt(n), 1).  Both signals are mean zero (s even)
    and ||phi|| = 1.  Deterministic: the support is the lexicographically
    smallest collision-free subset."""
    if spec.s % 2 != 0:
        raise ValueError(f"two-point construction requires even s, got {spec.s}")
    support = _first_collision_free_support(spec.L, spec.s)
    if support is None:
        raise ValueError(f"no collision-free support of size {spec.s} in Z/{spec.L}")
    support = sorted(support)
    delta = c * min(sigma**2 / math.sqrt(n), 1.0)
    amp = 1.0 / math.sqrt(spec.s)
    phi = np.zeros(spec.L)
    theta = np.zeros(spec.L)
    for k, idx in enumerate(support, start=1):
        phi[idx] = (-1) ** k * amp
        theta[idx] = (-1) ** k * amp
    theta[support[-2]] = -amp - delta  # k = s-1 is odd since s is even
    theta[support[-1]] = amp + delta
    phi_s, theta_s = Signal(phi), Signal(theta)
    rho, _ = rho_distance(phi_s, theta_s)
    return TwoPointPair(
        phi=phi_s,
        theta_n=theta_s,
        delta=delta,
        rho=rho,
        aligned_distance=float(np.linalg.norm(phi - theta)),
    )


def lecam_bound(rho_sep: float, kl_per_sample: float, n: int) -> float:
    """Two-point minimax lower bound rho * (2 - sqrt(2 n KL)) / 8, clamped at 0."""
    if rho_sep < 0 or kl_per_sample < 0 or n < 0:
        raise ValueError("all arguments must be nonnegative")
    return max(rho_sep * (2.0 - math.sqrt(2.0 * n * kl_per_sample)) / 8.0, 0.0)


def chi_square_tail(k: int, x: float) -> tuple[float, float, float]:
    """Chi-square deviation thresholds with probability bound exp(-x):

    P(X - k >= 2 sqrt(kx) + 2x) <= exp(-x),  P(k - X >= 2 sqrt(kx)) <= exp(-x).
    Returns (upper_dev, lower_dev, prob_bound)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    root = 2.0 * math.sqrt(k * x)
    return root + 2.0 * x, root, math.exp(-x)


def log_net_cardinality_bound(L: int, s: int, K: float, delta: float) -> float:
    """log of L^s (3K/delta)^s, safe against overflow."""
    if delta <= 0 or K <= 0:
        raise ValueError("K and delta must be positive")
    return s * (math.log(L) + math.log(3.0 * K / delta))


def net_cardinality_bound(L: int, s: int, K: float, delta: float) -> float:
    """Covering-net cardinality bound L^s (3K/delta)^s (inf on overflow)."""
    logv = log_net_cardinality_bound(L, s, K, delta)
    return math.exp(logv) if logv < 700 else math.inf


def build_sparse_net(L: int, s: int, K: float, delta: float, max_points: int = 1_000_000) -> np.ndarray:
    """Constructive delta-net for {phi : |supp(phi)| <= s, ||phi|| <= K}.

    Per size-s support, a cubic grid with spacing 2 delta / sqrt(s) covers the
    cube [-K, K]^s within delta.  Returns the stacked net points, whose count
    is checked against the L^s (3K/delta)^s bound.
    """
    if delta <= 0 or K <= 0:
        raise ValueError("K and delta must be positive")
    q = math.ceil(K * math.sqrt(s) / delta)
    n_supports = math.comb(L, s)
    total = n_supports * q**s
    if total > max_points:
        raise ValueError(f"net would have {total} points, above the {max_points} cap")
    if math.log(max(total, 1)) > log_net_cardinality_bound(L, s, K, delta):
        raise RuntimeError("constructed net exceeds the cardinality bound")
    h = 2.0 * delta / math.sqrt(s)
    axis = -K + h * (np.arange(q) + 0.5)
    points = []
    for supp in itertools.combinations(range(L), s):
        for combo in itertools.product(axis, repeat=s):
            v = np.zeros(L)
            v[list(supp)] = combo
            points.append(v)
    return np.array(points)


def mle_deviation_tail_bound(
    spec: SignalClassSpec,
    sigma: float,
    n: int,
    delta: float,
    C_s: float = 1.0,
    C_tilde_s: float = 1.0,
) -> BoundReport:
    """Deviation-tail expression C_s sigma^{5s} delta^{-2s}
    exp(-C_tilde_s n delta^4 / sigma^12) with user-supplied constants.

    Valid in the regime n >= C_s delta^{-4} sigma^12; violating it only flags
    the report (inputs["in_regime"]), it is not an error.
    """
    if not (0 < delta < 2.0 * math.sqrt(spec.L) * spec.M_hi):
        raise ValueError(f"delta={delta} outside (0, 2 sqrt(L) M_hi)")
    s = spec.s
    log_pref = math.log(C_s) + 5 * s * math.log(sigma) - 2 * s * math.log(delta)
    exponent = -C_tilde_s * n * delta**4 / sigma**12
    logv = log_pref + exponent
    value = math.exp(logv) if logv < 700 else math.inf
    if not np.isfinite(value):
        raise OverflowError("tail bound overflows; use the logarithm instead")
    return BoundReport(
        name="mle_deviation_tail",
        value=value,
        side="upper",
        inputs={
            "sigma": sigma,
            "n": n,
            "delta": delta,
            "in_regime": n >= C_s * delta**-4 * sigma**12,
        },
        constant_policy={"C_s": C_s, "C_tilde_s": C_tilde_s},
    )


def delta_norm_upper(theta: Signal, phi: Signal, K0: float, m: int) -> BoundReport:
    """Aligned-pair upper bound ||Delta_m||^2 <= 12 * 18^m K0^{2m} rho^2 for
    unit-norm theta with rho(theta, phi) <= K0."""
    _require(abs(theta.norm() - 1.0) <= 1e-9, f"||theta||={theta.norm()} is not 1")
    rho, _ = rho_distance(theta, phi)
    _require(rho <= K0 + 1e-12, f"rho={rho} exceeds K0={K0}")
    _require(1 <= m <= 3, f"m={m} outside 1..3")
    value = 12.0 * 18.0**m * K0 ** (2 * m) * rho**2
    return BoundReport(
        name="delta_norm_upper",
        value=value,
        side="upper",
        inputs={"m": m, "rho": rho},
        constant_policy={"K0": K0},
    )
