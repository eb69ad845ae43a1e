"""Problem instances, bounded-density channel sampling, and closed-form sum-GDoF formulas.

Channel strengths are exponents of the nominal SNR P (link amplitude scales as
sqrt(P**alpha_kl)); CSIT quality is an exponent beta_kl with estimation error
amplitude sqrt(P**-beta_kl).  All exponents are stored in P units; code that
works on the amplitude scale P_bar = sqrt(P) converts explicitly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GdofLabError",
    "ValidationError",
    "CapExceededError",
    "ChannelSpec2",
    "SymmetricSpecK",
    "GdofBreakdown",
    "BoundedDensitySpec",
    "ChannelRealization",
    "effective_csit",
    "sum_gdof_two_user",
    "sum_gdof_two_user_equivalent",
    "sum_gdof_k_symmetric",
    "classify_regime",
    "draw_channel",
    "dsum_value",
    "make_rng",
    "load_instance",
    "REGIME_SINGLE_USER_1",
    "REGIME_SINGLE_USER_2",
    "REGIME_SAME_PREFERRED",
    "REGIME_DIFFERENT_PREFERRED",
    "REGIME_BOUNDARY",
]


class GdofLabError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(GdofLabError, ValueError):
    """Invalid problem instance, density family, or configuration."""


class CapExceededError(GdofLabError, RuntimeError):
    """Requested enumeration exceeds the configured size cap."""


REGIME_SINGLE_USER_1 = "single_user_optimal_1"
REGIME_SINGLE_USER_2 = "single_user_optimal_2"
REGIME_SAME_PREFERRED = "same_preferred_user"
REGIME_DIFFERENT_PREFERRED = "different_preferred_users"
REGIME_BOUNDARY = "boundary"


def _as_matrix(name, value):
    try:
        (a, b), (c, d) = value
        m = ((float(a), float(b)), (float(c), float(d)))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} must be a finite 2x2 matrix") from exc
    if not all(math.isfinite(x) for row in m for x in row):
        raise ValidationError(f"{name} must be a finite 2x2 matrix")
    return m


@dataclass(frozen=True)
class ChannelSpec2:
    """2-user instance: 2x2 strength exponents alpha and CSIT exponents beta."""

    alpha: tuple
    beta: tuple

    def __post_init__(self):
        alpha = _as_matrix("alpha", self.alpha)
        beta = _as_matrix("beta", self.beta)
        for k in range(2):
            for l in range(2):
                if alpha[k][l] < 0:
                    raise ValidationError(f"alpha[{k}][{l}] must be >= 0")
                if not 0 <= beta[k][l] <= alpha[k][l]:
                    raise ValidationError(
                        f"beta[{k}][{l}] must lie in [0, alpha[{k}][{l}]]"
                    )
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    def alpha_array(self):
        return np.array(self.alpha)

    def beta_array(self):
        return np.array(self.beta)


@dataclass(frozen=True)
class SymmetricSpecK:
    """Symmetric K-user instance: unit direct links, cross strength alpha in [0,1]."""

    K: int
    alpha: float
    beta: float

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 2:
            raise ValidationError("K must be an integer >= 2")
        object.__setattr__(self, "K", int(self.K))
        if not 0 <= self.alpha <= 1:
            raise ValidationError("alpha must lie in [0, 1]")
        if not 0 <= self.beta <= self.alpha:
            raise ValidationError("beta must lie in [0, alpha]")

    def alpha_array(self):
        a = np.full((self.K, self.K), float(self.alpha))
        np.fill_diagonal(a, 1.0)
        return a

    def beta_array(self):
        return np.full((self.K, self.K), float(self.beta))


@dataclass(frozen=True)
class GdofBreakdown:
    """Evaluated sum-GDoF bounds for a 2-user instance."""

    beta1: float
    beta2: float
    D1: float
    D2: float
    d_sum: float
    binding: str  # "D1", "D2" or "tie"
    regime: str


_FAMILIES = {
    # entries of g_hat uniform on [lo, hi], g_tilde uniform on [-half, half]
    "uniform": {"lo": 1.0, "hi": 2.0, "half": 0.5, "peak": 1.0},
}


@dataclass(frozen=True)
class BoundedDensitySpec:
    """Sampling family with analytic bounds: |G| >= delta1, magnitudes <= delta2,
    all conditional densities <= f_max."""

    delta1: float = 0.5
    delta2: float = 2.0
    f_max: float = 1.0
    family: str = "uniform"

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValidationError(f"unknown density family {self.family!r}")
        fam = _FAMILIES[self.family]
        if not 0 < self.delta1:
            raise ValidationError("delta1 must be positive")
        if not np.isfinite(self.delta2) or self.delta2 <= 0:
            raise ValidationError("delta2 must be positive and finite")
        if not 0 < self.f_max < np.inf:
            raise ValidationError("f_max must be positive and finite")
        # For the uniform family: |G| >= lo - half * P^{-beta/2} >= lo - half for
        # P > 1, magnitudes <= max(hi, half), per-entry density peak == 1/(2*half).
        if self.delta1 > fam["lo"] - fam["half"]:
            raise ValidationError(
                "family cannot guarantee |G| >= delta1; "
                f"largest admissible delta1 is {fam['lo'] - fam['half']}"
            )
        if self.delta2 < max(fam["hi"], fam["half"]):
            raise ValidationError("family exceeds the requested delta2 magnitude cap")
        if self.f_max < fam["peak"]:
            raise ValidationError("family density peak exceeds f_max")

    def sample(self, rng, K):
        fam = _FAMILIES[self.family]
        g_hat = rng.uniform(fam["lo"], fam["hi"], size=(K, K))
        g_tilde = rng.uniform(-fam["half"], fam["half"], size=(K, K))
        return g_hat, g_tilde


@dataclass(frozen=True)
class ChannelRealization:
    """Estimate and error coefficient matrices at nominal SNR P."""

    g_hat: np.ndarray
    g_tilde: np.ndarray
    P: float

    def effective(self, beta):
        """Realized coefficients G = g_hat + P^{-beta/2} * g_tilde."""
        beta = np.asarray(beta, dtype=float)
        return self.g_hat + self.P ** (-beta / 2.0) * self.g_tilde


def make_rng(*entropy):
    """Deterministic generator from a seed plus an optional counter path."""
    flat = []
    for e in entropy:
        if isinstance(e, (tuple, list)):
            flat.extend(int(x) for x in e)
        else:
            flat.append(int(e))
    return np.random.default_rng(np.random.SeedSequence(flat))


def effective_csit(beta):
    """Row-wise minima of the CSIT matrix: the only betas the sum GDoF depends on."""
    (b11, b12), (b21, b22) = _as_matrix("beta", beta)
    return min(b11, b12), min(b21, b22)


def sum_gdof_two_user(spec: ChannelSpec2) -> GdofBreakdown:
    """Sum GDoF of the 2-user instance as min(D1, D2), evaluated verbatim."""
    (a11, a12), (a21, a22) = spec.alpha
    b1, b2 = effective_csit(spec.beta)
    D1 = max(a11, a12) + max(a21 - a11 + b1, a22 - a12 + b1, 0.0)
    D2 = max(a21, a22) + max(a11 - a21 + b2, a12 - a22 + b2, 0.0)
    if D1 < D2:
        binding = "D1"
    elif D2 < D1:
        binding = "D2"
    else:
        binding = "tie"
    return GdofBreakdown(
        beta1=b1,
        beta2=b2,
        D1=D1,
        D2=D2,
        d_sum=min(D1, D2),
        binding=binding,
        regime=classify_regime(spec),
    )


def sum_gdof_two_user_equivalent(spec: ChannelSpec2) -> float:
    """Same value through the equivalent max-form expressions; independent float path."""
    (a11, a12), (a21, a22) = spec.alpha
    b1, b2 = effective_csit(spec.beta)
    D1 = max(a11, a12, a21 + max(a12 - a11, 0.0) + b1, a22 + max(a11 - a12, 0.0) + b1)
    D2 = max(a22, a21, a12 + max(a21 - a22, 0.0) + b2, a11 + max(a22 - a21, 0.0) + b2)
    return min(D1, D2)


def sum_gdof_k_symmetric(spec: SymmetricSpecK) -> float:
    """Sum GDoF (alpha-beta) + K*(1-(alpha-beta)) for the symmetric K-user instance."""
    gap = spec.alpha - spec.beta
    return gap + spec.K * (1.0 - gap)


def classify_regime(spec: ChannelSpec2) -> str:
    """Label the instance by which transmission structure is optimal.

    Single-user optimality for user 1 requires every antenna to prefer user 1
    by at least beta1 (indices switched for user 2); when both hold with
    equality the tie is broken in favor of user 1.
    """
    (a11, a12), (a21, a22) = spec.alpha
    b1, b2 = effective_csit(spec.beta)
    if a11 >= a21 + b1 and a12 >= a22 + b1:
        return REGIME_SINGLE_USER_1
    if a21 >= a11 + b2 and a22 >= a12 + b2:
        return REGIME_SINGLE_USER_2
    p1 = a11 - a21  # antenna 1 preference, > 0 means user 1
    p2 = a12 - a22
    if p1 == 0.0 or p2 == 0.0:
        return REGIME_BOUNDARY
    if (p1 > 0) == (p2 > 0):
        return REGIME_SAME_PREFERRED
    return REGIME_DIFFERENT_PREFERRED


def dsum_value(alpha, b1, b2):
    """Broadcast-friendly min(D1, D2) over arrays of effective CSIT levels."""
    (a11, a12), (a21, a22) = _as_matrix("alpha", alpha)
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    zero = np.zeros(np.broadcast_shapes(b1.shape, b2.shape))
    d1 = max(a11, a12) + np.maximum(np.maximum(a21 - a11 + b1, a22 - a12 + b1), zero)
    d2 = max(a21, a22) + np.maximum(np.maximum(a11 - a21 + b2, a12 - a22 + b2), zero)
    return np.minimum(d1, d2)


def draw_channel(spec, density: BoundedDensitySpec, P, seed) -> ChannelRealization:
    """Sample one realization (g_hat, g_tilde) for the instance at SNR P.

    Deterministic given the seed; the realized coefficients are guaranteed to
    stay within the density spec's bounds for any beta matrix of the instance.
    """
    if not P > 1:
        raise ValidationError("P must exceed 1")
    alpha = spec.alpha_array()
    beta = spec.beta_array()
    K = alpha.shape[0]
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    g_hat, g_tilde = density.sample(rng, K)
    g = g_hat + float(P) ** (-beta / 2.0) * g_tilde
    if (
        np.min(np.abs(g)) < density.delta1
        or np.max(np.abs(g_hat)) > density.delta2
        or np.max(np.abs(g_tilde)) > density.delta2
    ):
        raise GdofLabError("sampled realization violates the density bounds")
    g_hat.setflags(write=False)
    g_tilde.setflags(write=False)
    return ChannelRealization(g_hat=g_hat, g_tilde=g_tilde, P=float(P))


def load_instance(source):
    """Parse a JSON instance file (or dict) into a spec; unknown keys are rejected."""
    if isinstance(source, dict):
        obj = source
    else:
        with open(source) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"malformed instance file: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValidationError("instance must be a JSON object")
    keys = set(obj)
    if keys == {"alpha", "beta"}:
        return ChannelSpec2(alpha=obj["alpha"], beta=obj["beta"])
    if keys == {"K", "alpha", "beta"}:
        return SymmetricSpecK(K=obj["K"], alpha=obj["alpha"], beta=obj["beta"])
    raise ValidationError(
        "instance must have exactly the keys {alpha, beta} or {K, alpha, beta}; "
        f"got {sorted(keys)}"
    )
