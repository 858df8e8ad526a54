"""Stationary Gaussian disorder fields with summable covariance.

A field omega_1..omega_n has Cov(omega_i, omega_j) = gamma_{|i-j|}.  Four
covariance families are supported; each knows its sequence gamma_k, its
absolute sum gamma_bar and its Toeplitz symbol

    g(theta) = gamma_0 + 2 sum_{k>=1} gamma_k cos(k theta),

whose positivity on a grid is used as the positive semi-definiteness
certificate.  Samples are drawn exactly by circulant embedding, with a dense
Cholesky fallback.
"""

from __future__ import annotations

import functools
import logging
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import zeta

from .errors import EmbeddingNotNonnegative, LengthMismatch, NotPositiveDefinite

log = logging.getLogger(__name__)

SYMBOL_GRID = 4096
DENSE_MAX = 4096
CHOLESKY_MAX = 8192
EMBEDDING_CLIP = 1e-12
_POWERLAW_TERMS = 1 << 20
DUMP_MAGIC = b"PINLABW1"


class CovarianceSpec:
    """Common interface of the covariance families."""

    family = "abstract"

    def gammas(self, k):
        raise NotImplementedError

    @property
    def gamma_bar(self):
        raise NotImplementedError

    def tail_abs_sum(self, r):
        """sum_{k > r} |gamma_k|."""
        raise NotImplementedError

    @property
    def gamma0(self):
        return float(self.gammas(np.array([0]))[0])

    @property
    def label(self):
        return self._label or self.default_label()

    def default_label(self):
        return self.family

    def symbol(self, grid=SYMBOL_GRID):
        """Symbol on theta_m = 2 pi m / grid, plus a bound on the neglected tail."""
        theta = 2 * np.pi * np.arange(grid) / grid
        k = np.arange(1, 4 * grid + 1)
        g = self.gamma0 + 2 * np.cos(np.outer(theta, k)) @ self.gammas(k)
        return g, 2 * self.tail_abs_sum(4 * grid)

    def symbol_min(self, grid=SYMBOL_GRID):
        """Certified lower bound for the grid minimum of the symbol."""
        g, tail = self.symbol(grid)
        return float(g.min() - tail)

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class IID(CovarianceSpec):
    sigma2: float = 1.0
    _label: str = field(default="", compare=False)
    family = "iid"

    def gammas(self, k):
        k = np.asarray(k)
        return np.where(k == 0, self.sigma2, 0.0).astype(float)

    @property
    def gamma_bar(self):
        return abs(self.sigma2)

    def tail_abs_sum(self, r):
        return 0.0

    def symbol(self, grid=SYMBOL_GRID):
        return np.full(grid, float(self.sigma2)), 0.0

    def default_label(self):
        return f"iid(sigma2={self.sigma2:g})"

    def to_dict(self):
        return {"family": "iid", "sigma2": self.sigma2, "label": self.label}


@dataclass(frozen=True)
class FiniteRange(CovarianceSpec):
    values: tuple = (1.0,)
    _label: str = field(default="", compare=False)
    family = "finite_range"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def range(self):
        return len(self.values) - 1

    def gammas(self, k):
        k = np.asarray(k)
        v = np.asarray(self.values)
        inside = k <= self.range
        return np.where(inside, v[np.minimum(k, self.range)], 0.0)

    @property
    def gamma_bar(self):
        return float(np.sum(np.abs(self.values)))

    def tail_abs_sum(self, r):
        return float(np.sum(np.abs(self.values[r + 1:])))

    def symbol(self, grid=SYMBOL_GRID):
        theta = 2 * np.pi * np.arange(grid) / grid
        k = np.arange(1, self.range + 1)
        return self.values[0] + 2 * np.cos(np.outer(theta, k)) @ np.asarray(self.values[1:]), 0.0

    def default_label(self):
        return f"finite_range(r={self.range})"

    def to_dict(self):
        return {"family": "finite_range", "values": list(self.values), "label": self.label}


@dataclass(frozen=True)
class ExpDecay(CovarianceSpec):
    g0: float = 1.0
    rho: float = 0.5
    _label: str = field(default="", compare=False)
    family = "exp_decay"

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise ValueError("ExpDecay needs |rho| < 1")

    def gammas(self, k):
        return self.g0 * np.power(self.rho, np.asarray(k, dtype=float))

    @property
    def gamma_bar(self):
        return abs(self.g0) / (1 - abs(self.rho))

    def tail_abs_sum(self, r):
        return abs(self.g0) * abs(self.rho) ** (r + 1) / (1 - abs(self.rho))

    def symbol(self, grid=SYMBOL_GRID):
        # Poisson kernel
        theta = 2 * np.pi * np.arange(grid) / grid
        rho = self.rho
        return self.g0 * (1 - rho**2) / (1 - 2 * rho * np.cos(theta) + rho**2), 0.0

    def default_label(self):
        return f"exp_decay(g0={self.g0:g},rho={self.rho:g})"

    def to_dict(self):
        return {"family": "exp_decay", "g0": self.g0, "rho": self.rho, "label": self.label}


@dataclass(frozen=True)
class PowerLaw(CovarianceSpec):
    """gamma_0 free, gamma_k = C k**(-1-a) for k >= 1."""

    g0: float = 1.0
    C: float = 0.2
    a: float = 0.5
    _label: str = field(default="", compare=False)
    family = "power_law"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("PowerLaw needs a > 0")

    def gammas(self, k):
        k = np.asarray(k, dtype=float)
        safe = np.where(k == 0, 1.0, k)
        return np.where(k == 0, self.g0, self.C * safe ** (-1.0 - self.a))

    @property
    def gamma_bar(self):
        return abs(self.g0) + abs(self.C) * float(zeta(1 + self.a))

    def tail_abs_sum(self, r):
        return abs(self.C) * float(zeta(1 + self.a, r + 1))

    def symbol(self, grid=SYMBOL_GRID):
        # fold k = 1..K onto residues mod grid, then one FFT
        k = np.arange(1, _POWERLAW_TERMS + 1)
        folded = np.bincount(k % grid, weights=self.gammas(k), minlength=grid)
        g = self.g0 + 2 * np.fft.fft(folded).real
        return g, 2 * self.tail_abs_sum(_POWERLAW_TERMS)

    def default_label(self):
        return f"power_law(g0={self.g0:g},C={self.C:g},a={self.a:g})"

    def to_dict(self):
        return {"family": "power_law", "g0": self.g0, "C": self.C, "a": self.a, "label": self.label}


def spec_from_dict(d):
    fam = str(d["family"]).lower().replace("-", "_")
    label = str(d.get("label", ""))
    if fam == "iid":
        return IID(float(d.get("sigma2", 1.0)), label)
    if fam in ("finite_range", "finiterange"):
        return FiniteRange(tuple(d["values"]), label)
    if fam in ("exp_decay", "expdecay"):
        return ExpDecay(float(d.get("g0", 1.0)), float(d["rho"]), label)
    if fam in ("power_law", "powerlaw"):
        return PowerLaw(float(d.get("g0", 1.0)), float(d["C"]), float(d["a"]), label)
    raise ValueError(f"unknown covariance family {fam!r}")


def gamma(spec, k):
    return float(spec.gammas(np.array([int(k)]))[0])


def gamma_bar_n(spec, n):
    """sum_{k=0}^{n-1} |gamma_k|."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    return spec.gamma_bar - spec.tail_abs_sum(n - 1)


def toeplitz_matrix(spec, n):
    return linalg.toeplitz(spec.gammas(np.arange(n)))


def truncate(spec, r):
    """Range-r covariance with the dropped tail moved onto the diagonal.

    gamma_r(0) = gamma_0 + 2 sum_{k>r} |gamma_k|, gamma_r(k) = gamma_k for
    1 <= k <= r and 0 beyond.  Every Toeplitz section of the result dominates
    the original one in the quadratic-form order (Gershgorin on the removed
    part), so it stays positive definite.
    """
    r = int(r)
    if r < 1:
        raise ValueError("r must be >= 1")
    if isinstance(spec, IID):
        return spec
    if isinstance(spec, FiniteRange) and spec.range <= r:
        return spec
    head = spec.gammas(np.arange(r + 1)).astype(float)
    head[0] = spec.gamma0 + 2 * spec.tail_abs_sum(r)
    return FiniteRange(tuple(head), f"{spec.label}|trunc{r}")


def spectral_bounds(spec, n):
    """(lambda_min, lambda_max) estimates for the n x n Toeplitz section.

    Dense eigenvalues for n <= DENSE_MAX, otherwise the symbol range on the
    grid.  lambda_max never exceeds 2 gamma_bar.
    """
    n = int(n)
    if isinstance(spec, IID):
        return float(spec.sigma2), float(spec.sigma2)
    if n <= DENSE_MAX:
        G = toeplitz_matrix(spec, n)
        try:
            linalg.cholesky(G, lower=True)
        except linalg.LinAlgError as exc:
            raise NotPositiveDefinite(f"Cholesky of Gamma_{n} failed for {spec.label}") from exc
        lo = linalg.eigvalsh(G, subset_by_index=[0, 0])[0]
        hi = linalg.eigvalsh(G, subset_by_index=[n - 1, n - 1])[0]
        return float(lo), float(min(hi, 2 * spec.gamma_bar))
    g, tail = spec.symbol()
    lo = float(g.min() - tail)
    if lo <= 0:
        raise NotPositiveDefinite(f"symbol of {spec.label} is not positive on the grid")
    return lo, float(min(g.max() + tail, 2 * spec.gamma_bar))


@dataclass
class DisorderSample:
    """One field realization; values[i - 1] holds omega_i."""

    n: int
    values: np.ndarray
    seed: int
    spec_label: str
    method: str = "circulant"

    def __post_init__(self):
        if len(self.values) != self.n:
            raise LengthMismatch(f"expected {self.n} values, got {len(self.values)}")


def replica_seed(base_seed, index):
    return (int(base_seed) + int(index)) % 2**64


@functools.lru_cache(maxsize=16)
def _embedding_sqrt(spec, n):
    m = 1
    while m < 2 * n:
        m *= 2
    half = m // 2
    g = spec.gammas(np.arange(half + 1))
    row = np.concatenate([g, g[1:half][::-1]])
    lam = np.fft.fft(row).real
    tol = EMBEDDING_CLIP * abs(spec.gamma0)
    if lam.min() < -tol:
        raise EmbeddingNotNonnegative(
            f"embedding of {spec.label} at n={n} has eigenvalue {lam.min():.3g}"
        )
    return np.sqrt(np.clip(lam, 0.0, None))


@functools.lru_cache(maxsize=4)
def _cholesky_factor(spec, n):
    if n > CHOLESKY_MAX:
        raise NotPositiveDefinite(f"Cholesky fallback limited to n <= {CHOLESKY_MAX}")
    try:
        return linalg.cholesky(toeplitz_matrix(spec, n), lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Gamma_{n} of {spec.label} is not positive definite") from exc


def _draw(spec, n, count, rng, method):
    if isinstance(spec, IID):
        return np.sqrt(spec.sigma2) * rng.standard_normal((count, n)), "iid"
    if method in ("auto", "circulant"):
        try:
            root = _embedding_sqrt(spec, n)
        except EmbeddingNotNonnegative:
            if method == "circulant":
                raise
            log.warning("circulant embedding failed for %s, n=%d; using Cholesky", spec.label, n)
            method = "cholesky-fallback"
        else:
            xi = rng.standard_normal((count, root.size))
            y = np.fft.ifft(root * np.fft.fft(xi, axis=1), axis=1).real
            return y[:, :n], "circulant"
    L = _cholesky_factor(spec, n)
    return rng.standard_normal((count, n)) @ L.T, ("cholesky" if method == "cholesky" else method)


def sample(spec, n, seed, method="auto"):
    """Draw omega ~ N(0, Gamma_n); identical (spec, n, seed, method) give identical bytes."""
    rng = np.random.default_rng(int(seed))
    values, used = _draw(spec, int(n), 1, rng, method)
    return DisorderSample(int(n), values[0], int(seed), spec.label, used)


def sample_batch(spec, n, count, seed, method="auto"):
    """``count`` independent fields from one generator, as a (count, n) array."""
    rng = np.random.default_rng(int(seed))
    values, _ = _draw(spec, int(n), int(count), rng, method)
    return values


def empirical_covariance(samples, k_max):
    """Lag-k covariance estimates for k = 0..k_max and their replica standard errors."""
    if isinstance(samples, np.ndarray):
        X = np.atleast_2d(samples)
    else:
        lengths = {s.n for s in samples}
        if len(lengths) != 1:
            raise LengthMismatch(f"samples have different lengths {sorted(lengths)}")
        X = np.stack([s.values for s in samples])
    n = X.shape[1]
    if n < k_max + 1:
        raise LengthMismatch(f"n={n} too short for k_max={k_max}")
    per = np.empty((X.shape[0], k_max + 1))
    for k in range(k_max + 1):
        per[:, k] = np.mean(X[:, : n - k] * X[:, k:], axis=1)
    point = per.mean(axis=0)
    se = per.std(axis=0, ddof=1) / np.sqrt(X.shape[0]) if X.shape[0] > 1 else np.zeros(k_max + 1)
    return point, se


def dump_sample(sample_, path):
    """Little-endian float64 payload behind a 16-byte header (8-byte magic, uint64 n)."""
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC + struct.pack("<Q", sample_.n))
        fh.write(np.asarray(sample_.values, dtype="<f8").tobytes())


def load_sample(path):
    with open(path, "rb") as fh:
        head = fh.read(16)
        if head[:8] != DUMP_MAGIC:
            raise ValueError(f"{path}: bad magic")
        (n,) = struct.unpack("<Q", head[8:])
        values = np.frombuffer(fh.read(), dtype="<f8")
    if values.size != n:
        raise LengthMismatch(f"{path}: header says {n}, payload has {values.size}")
    return values.astype(float)
