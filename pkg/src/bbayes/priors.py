"""Prior families on boundary functions and Hoelder test functions.

Three families: Brownian motion with a standard-normal random start, wavelet
series with level-decaying coefficient amplitudes, and the randomly truncated
wavelet series.  A finite-atom prior is provided for exact closed-form checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridFunction
from .wavelets import WaveletCoefficients, coefficient_count, haar_synthesis

__all__ = [
    "CoefficientDistribution",
    "PriorSpec",
    "BrownianStartPrior",
    "WaveletSeriesPrior",
    "TruncatedWaveletPrior",
    "FinitePrior",
    "build_prior",
    "density_at",
    "sample_brownian_prior",
    "sample_wavelet_prior",
    "sample_truncated_prior",
    "holder_test_function",
    "parse_kv",
    "parse_prior_config",
    "prior_spec_from_mapping",
    "format_prior_config",
]

_KINDS = ("gaussian", "laplace", "uniform")


@dataclass(frozen=True)
class CoefficientDistribution:
    """Symmetric unimodal coefficient law: gaussian, laplace or uniform.

    ``scale`` is the standard deviation (gaussian), the inverse rate (laplace)
    or the half-width (uniform).  ``tail_rate`` is a rate g with
    density(x) <= g^{-1} e^{-g|x|}; it is filled in automatically for the
    gaussian and laplace kinds.
    """

    kind: str
    scale: float = 1.0
    tail_rate: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.tail_rate is None and self.kind != "uniform":
            object.__setattr__(self, "tail_rate", _default_tail_rate(self.kind, self.scale))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        s = self.scale
        if self.kind == "gaussian":
            out = np.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2.0 * math.pi))
        elif self.kind == "laplace":
            out = np.exp(-np.abs(x) / s) / (2.0 * s)
        else:
            out = np.where(np.abs(x) <= s, 1.0 / (2.0 * s), 0.0)
        return float(out) if out.ndim == 0 else out

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        s = self.scale
        if self.kind == "gaussian":
            out = -0.5 * (x / s) ** 2 - math.log(s * math.sqrt(2.0 * math.pi))
        elif self.kind == "laplace":
            out = -np.abs(x) / s - math.log(2.0 * s)
        else:
            out = np.where(np.abs(x) <= s, -math.log(2.0 * s), -np.inf)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size=None):
        s = self.scale
        if self.kind == "gaussian":
            return rng.normal(0.0, s, size=size)
        if self.kind == "laplace":
            return rng.laplace(0.0, s, size=size)
        return rng.uniform(-s, s, size=size)


def _default_tail_rate(kind: str, scale: float) -> float:
    if kind == "laplace":
        # (2s)^{-1} e^{-|x|/s} <= g^{-1} e^{-g|x|} needs g <= 1/s and g <= 2s
        return min(1.0 / scale, 2.0 * scale)
    # gaussian: shrink the rate until the exponential envelope dominates
    grid = np.linspace(0.0, 20.0 * scale, 2001)
    pdf = np.exp(-0.5 * (grid / scale) ** 2) / (scale * math.sqrt(2.0 * math.pi))
    gamma = 1.0 / scale
    for _ in range(200):
        envelope = np.exp(-gamma * grid) / gamma
        if np.all(envelope >= pdf):
            return gamma
        gamma *= 0.8
    raise RuntimeError("could not calibrate a tail rate")


_VARIANTS = ("brownian_start", "wavelet_series", "truncated_wavelet")


@dataclass(frozen=True)
class PriorSpec:
    """Declarative description of one of the three prior families."""

    variant: str
    grid_level: int = 8
    alpha: float | None = None
    dist: CoefficientDistribution | None = None
    j_max: int | None = None
    j_cap: int | None = None

    def __post_init__(self) -> None:
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {_VARIANTS}")
        if self.grid_level < 1:
            raise ValueError("grid_level must be >= 1")
        if self.variant == "wavelet_series":
            if self.alpha is None or not self.alpha > 0:
                raise ValueError("wavelet_series needs alpha > 0")
            if self.dist is None:
                raise ValueError("wavelet_series needs a coefficient distribution")
            if self.j_max is None or not (0 <= self.j_max < self.grid_level):
                raise ValueError("wavelet_series needs 0 <= j_max < grid_level for exact synthesis")
        elif self.variant == "truncated_wavelet":
            if self.dist is None:
                raise ValueError("truncated_wavelet needs a coefficient distribution")
            if self.j_cap is None or not (0 <= self.j_cap < self.grid_level):
                raise ValueError("truncated_wavelet needs 0 <= j_cap < grid_level for exact synthesis")


def wavelet_amplitudes(alpha: float, j_max: int) -> np.ndarray:
    """Flat amplitude vector: 1 for the scaling slot, 2^{-(j/2)(2a+1)} on detail level j."""
    amps = [np.array([1.0])]
    for j in range(j_max + 1):
        amps.append(np.full(1 << j, 2.0 ** (-(j / 2.0) * (2.0 * alpha + 1.0))))
    return np.concatenate(amps)


class WaveletSeriesPrior:
    """Random wavelet series: coefficient (j,k) is d_{j,k} * xi with i.i.d. xi."""

    def __init__(self, alpha: float, dist: CoefficientDistribution, j_max: int, grid_level: int):
        self.alpha = alpha
        self.dist = dist
        self.j_max = j_max
        self.grid_level = grid_level
        self.amplitudes = wavelet_amplitudes(alpha, j_max)

    @property
    def latent_dim(self) -> int:
        return coefficient_count(self.j_max)

    def sample_latent(self, rng: np.random.Generator) -> np.ndarray:
        return self.dist.sample(rng, size=self.latent_dim)

    def latent_log_density(self, z: np.ndarray) -> float:
        return float(np.sum(self.dist.log_density(z)))

    def latent_log_density_1d(self, value: float) -> float:
        return float(self.dist.log_density(value))

    def to_function(self, z: np.ndarray) -> GridFunction:
        coeffs = WaveletCoefficients.from_flat(self.amplitudes * z, self.j_max)
        return haar_synthesis(coeffs, self.grid_level)

    def sample(self, rng: np.random.Generator) -> GridFunction:
        return self.to_function(self.sample_latent(rng))


class BrownianStartPrior:
    """Brownian motion plus an independent standard-normal starting value.

    The latent vector is standard normal: slot 0 is the start, slots 1..m are
    standardized increments; bin k carries X_0 + W((k+1)/m).
    """

    def __init__(self, grid_level: int):
        if grid_level < 1:
            raise ValueError("grid_level must be >= 1")
        self.grid_level = grid_level

    @property
    def latent_dim(self) -> int:
        return (1 << self.grid_level) + 1

    def sample_latent(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.latent_dim)

    def latent_log_density(self, z: np.ndarray) -> float:
        return float(-0.5 * np.dot(z, z) - 0.5 * z.size * math.log(2.0 * math.pi))

    def latent_log_density_1d(self, value: float) -> float:
        return -0.5 * value * value - 0.5 * math.log(2.0 * math.pi)

    def to_function(self, z: np.ndarray) -> GridFunction:
        m = 1 << self.grid_level
        values = z[0] + np.cumsum(z[1:]) / math.sqrt(m)
        return GridFunction(self.grid_level, values)

    def sample(self, rng: np.random.Generator) -> GridFunction:
        return self.to_function(self.sample_latent(rng))


class TruncatedWaveletPrior:
    """Randomly truncated wavelet series: P(J=j) proportional to 2^{-j}, unit amplitudes."""

    def __init__(self, dist: CoefficientDistribution, j_cap: int, grid_level: int):
        self.dist = dist
        self.j_cap = j_cap
        self.grid_level = grid_level
        probs = 2.0 ** (-np.arange(j_cap + 1, dtype=float))
        self.level_probabilities = probs / probs.sum()

    def level_prior(self, j: int) -> "WaveletSeriesPrior":
        """The conditional prior given J = j: unit amplitudes up to level j."""
        prior = WaveletSeriesPrior(0.0, self.dist, j, self.grid_level)
        prior.amplitudes = np.ones(coefficient_count(j))
        return prior

    def sample_with_level(self, rng: np.random.Generator) -> tuple[int, GridFunction]:
        j = int(rng.choice(self.j_cap + 1, p=self.level_probabilities))
        z = self.dist.sample(rng, size=coefficient_count(j))
        coeffs = WaveletCoefficients.from_flat(z, j)
        return j, haar_synthesis(coeffs, self.grid_level)

    def sample(self, rng: np.random.Generator) -> GridFunction:
        return self.sample_with_level(rng)[1]


class FinitePrior:
    """Finitely supported prior over a fixed list of grid functions."""

    def __init__(self, members, weights=None):
        self.members = list(members)
        if not self.members:
            raise ValueError("members must be nonempty")
        if weights is None:
            w = np.full(len(self.members), 1.0 / len(self.members))
        else:
            w = np.array(weights, dtype=float)
            if w.shape != (len(self.members),) or np.any(w < 0) or w.sum() <= 0:
                raise ValueError("invalid weights")
            w = w / w.sum()
        self.weights = w

    def sample_index(self, rng: np.random.Generator) -> int:
        return int(rng.choice(len(self.members), p=self.weights))

    def sample(self, rng: np.random.Generator) -> GridFunction:
        return self.members[self.sample_index(rng)]


def build_prior(spec: PriorSpec):
    if spec.variant == "brownian_start":
        return BrownianStartPrior(spec.grid_level)
    if spec.variant == "wavelet_series":
        return WaveletSeriesPrior(spec.alpha, spec.dist, spec.j_max, spec.grid_level)
    return TruncatedWaveletPrior(spec.dist, spec.j_cap, spec.grid_level)


# spec-facing convenience wrappers


def density_at(dist: CoefficientDistribution, x: float) -> float:
    return dist.density(x)


def sample_brownian_prior(grid_level: int, rng: np.random.Generator) -> GridFunction:
    return BrownianStartPrior(grid_level).sample(rng)


def sample_wavelet_prior(spec: PriorSpec, rng: np.random.Generator) -> GridFunction:
    if spec.variant != "wavelet_series":
        raise ValueError("spec must be a wavelet_series prior")
    return build_prior(spec).sample(rng)


def sample_truncated_prior(spec: PriorSpec, rng: np.random.Generator) -> tuple[int, GridFunction]:
    if spec.variant != "truncated_wavelet":
        raise ValueError("spec must be a truncated_wavelet prior")
    return build_prior(spec).sample_with_level(rng)


# ---------------------------------------------------------------------------
# Hoelder test functions

_TEST_KINDS = ("cusp", "hat", "smooth")


def holder_test_function(beta: float, R: float, kind: str, grid_level: int) -> GridFunction:
    """Named test functions with beta-Hoelder seminorm at most R (calibrated analytically).

    cusp: R |x - 1/2|^beta; hat: (R/2^beta)(1 - 2|x - 1/2|)_+^beta;
    smooth: (R/2pi) sin(2 pi x), beta = 1 only.  Sampled at bin midpoints.
    """
    if not (0.0 < beta <= 1.0):
        raise ValueError("beta must lie in (0, 1]")
    if not R > 0:
        raise ValueError("R must be positive")
    if kind not in _TEST_KINDS:
        raise ValueError(f"kind must be one of {_TEST_KINDS}")
    m = 1 << grid_level
    x = (np.arange(m) + 0.5) / m
    if kind == "cusp":
        vals = R * np.abs(x - 0.5) ** beta
    elif kind == "hat":
        vals = (R / 2.0**beta) * np.clip(1.0 - 2.0 * np.abs(x - 0.5), 0.0, None) ** beta
    else:
        if beta != 1.0:
            raise ValueError("smooth kind requires beta = 1")
        vals = (R / (2.0 * math.pi)) * np.sin(2.0 * math.pi * x)
    return GridFunction(grid_level, vals)


# ---------------------------------------------------------------------------
# flat key=value prior config files


def parse_kv(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    kv: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, val = line.split("=", 1)
        kv[key.strip()] = val.strip()
    return kv


def parse_prior_config(text: str) -> PriorSpec:
    """Parse a flat ``key = value`` prior description (see README for the schema)."""
    return prior_spec_from_mapping(parse_kv(text))


def prior_spec_from_mapping(kv: dict[str, str]) -> PriorSpec:
    kv = dict(kv)
    variant = kv.pop("variant")
    grid_level = int(kv.pop("grid_level", "8"))
    dist = None
    if "dist.kind" in kv:
        dist = CoefficientDistribution(
            kind=kv.pop("dist.kind"),
            scale=float(kv.pop("dist.scale", "1.0")),
            tail_rate=float(kv.pop("dist.tail_rate")) if "dist.tail_rate" in kv else kv.pop("dist.tail_rate", None),
        )
    spec = PriorSpec(
        variant=variant,
        grid_level=grid_level,
        alpha=float(kv.pop("alpha")) if "alpha" in kv else None,
        dist=dist,
        j_max=int(kv.pop("j_max")) if "j_max" in kv else None,
        j_cap=int(kv.pop("j_cap")) if "j_cap" in kv else None,
    )
    if kv:
        raise ValueError(f"unknown prior config keys: {sorted(kv)}")
    return spec


def format_prior_config(spec: PriorSpec) -> str:
    lines = [f"variant = {spec.variant}", f"grid_level = {spec.grid_level}"]
    if spec.alpha is not None:
        lines.append(f"alpha = {spec.alpha!r}")
    if spec.dist is not None:
        lines.append(f"dist.kind = {spec.dist.kind}")
        lines.append(f"dist.scale = {spec.dist.scale!r}")
        if spec.dist.tail_rate is not None:
            lines.append(f"dist.tail_rate = {spec.dist.tail_rate!r}")
    if spec.j_max is not None:
        lines.append(f"j_max = {spec.j_max}")
    if spec.j_cap is not None:
        lines.append(f"j_cap = {spec.j_cap}")
    return "\n".join(lines) + "\n"
