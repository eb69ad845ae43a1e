"""Outer-bound verification lab: deterministic model and aligned image sets.

Everything here lives on the amplitude scale pbar = sqrt(P): inputs are
integers up to ceil(pbar**max(row strength)), outputs are integer quantized
sums, and the CSIT exponent beta enters through coefficient densities with
peak f_max * pbar**beta.  Quantization uses the floor uniformly; the model
statement's ceiling differs by O(1) which is irrelevant to growth exponents.

Blocklength is fixed at one channel use: the alignment bound factorizes over
uses, so the single-use growth exponent is the per-symbol quantity of
interest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    _FAMILIES,
    BoundedDensitySpec,
    CapExceededError,
    ChannelSpec2,
    ValidationError,
    _as_matrix,
    draw_channel,
    effective_csit,
    make_rng,
)

__all__ = [
    "DeterministicInstance",
    "CodewordPair",
    "AlignmentProbe",
    "ImageSetStats",
    "deterministic_outputs",
    "alignment_probability_mc",
    "interval_condition_check",
    "image_set_sizes",
    "enumerate_aligned_pairs",
    "expected_size_curve",
    "DEFAULT_ENUM_CAP",
]

DEFAULT_ENUM_CAP = 10**7


@dataclass(frozen=True)
class DeterministicInstance:
    """Quantized channel at scale pbar with integer input alphabets."""

    p_bar: float
    alpha: tuple
    beta: tuple

    def __post_init__(self):
        if not self.p_bar > 1:
            raise ValidationError("p_bar must exceed 1")
        # reuse the admissibility checks on (alpha, beta)
        spec = ChannelSpec2(alpha=self.alpha, beta=self.beta)
        object.__setattr__(self, "alpha", spec.alpha)
        object.__setattr__(self, "beta", spec.beta)

    @property
    def row_max(self):
        (a11, a12), (a21, a22) = self.alpha
        return max(a11, a12), max(a21, a22)

    @property
    def x1_max(self):
        return int(np.ceil(self.p_bar ** self.row_max[0]))

    @property
    def x2_max(self):
        return int(np.ceil(self.p_bar ** self.row_max[1]))

    def spec(self):
        return ChannelSpec2(alpha=self.alpha, beta=self.beta)

    def realize(self, density, seed):
        """Effective 2x2 coefficient matrix G = g_hat + pbar**-beta * g_tilde."""
        real = draw_channel(self.spec(), density, self.p_bar**2, seed)
        return real.effective(np.array(self.beta))


@dataclass(frozen=True)
class CodewordPair:
    """Two distinct codewords (lambda, nu) of the deterministic channel."""

    lambda_pair: tuple
    nu_pair: tuple

    def __post_init__(self):
        lam = tuple(int(x) for x in self.lambda_pair)
        nu = tuple(int(x) for x in self.nu_pair)
        if lam == nu:
            raise ValidationError("codeword pair must be distinct")
        object.__setattr__(self, "lambda_pair", lam)
        object.__setattr__(self, "nu_pair", nu)

    def check_in_range(self, instance):
        for x1, x2 in (self.lambda_pair, self.nu_pair):
            if not (0 <= x1 <= instance.x1_max and 0 <= x2 <= instance.x2_max):
                raise ValidationError("codeword outside the input alphabet")


@dataclass(frozen=True)
class AlignmentProbe:
    estimate: float
    bound: float  # analytic bound, clipped to 1
    sigma: float  # binomial std of the estimate at the bound
    trials: int
    ok: bool


@dataclass(frozen=True)
class ImageSetStats:
    p_bar_grid: tuple
    mean_size: tuple
    fitted_exponent: float
    bound_exponent: float
    slack: float
    ok: bool


def _scales(instance):
    (a11, a12), (a21, a22) = instance.alpha
    m1, m2 = instance.row_max
    pb = instance.p_bar
    return (pb ** (a11 - m1), pb ** (a12 - m1)), (pb ** (a21 - m2), pb ** (a22 - m2))


def deterministic_outputs(x1, x2, g_row1, g_row2, instance):
    """Integer outputs of the quantized channel; accepts scalars or arrays."""
    (s11, s12), (s21, s22) = _scales(instance)
    y1 = np.floor(s11 * g_row1[0] * x1) + np.floor(s12 * g_row1[1] * x2)
    y2 = np.floor(s21 * g_row2[0] * x1) + np.floor(s22 * g_row2[1] * x2)
    if np.isscalar(x1) and np.isscalar(x2):
        return int(y1), int(y2)
    return y1.astype(np.int64), y2.astype(np.int64)


def alignment_probability_mc(
    pair, instance, density, trials, seed
) -> AlignmentProbe:
    """Empirical probability that the pair's images align at receiver 2.

    The estimate is drawn with g_hat fixed (from the seed) and fresh error
    terms per trial, and must not exceed the analytic interval bound plus a
    3-sigma Monte Carlo margin.  The bound uses each coordinate with a
    nonzero difference; when both differ the tighter of the two applies.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    pair.check_in_range(instance)
    (b11, b12), (b21, b22) = instance.beta
    pb = instance.p_bar
    (_, _), (s21, s22) = _scales(instance)
    l1, l2 = pair.lambda_pair
    n1, n2 = pair.nu_pair

    bounds = []
    if n1 != l1:
        bounds.append(4.0 * density.f_max * pb**b21 / (s21 * abs(n1 - l1)))
    if n2 != l2:
        bounds.append(4.0 * density.f_max * pb**b22 / (s22 * abs(n2 - l2)))
    bound = min(1.0, min(bounds))

    g_hat, _ = density.sample(make_rng(seed, 0), 2)
    rng = make_rng(seed, 1)
    fam_half = _FAMILIES[density.family]["half"]
    g21 = g_hat[1, 0] + pb ** (-b21) * rng.uniform(-fam_half, fam_half, trials)
    g22 = g_hat[1, 1] + pb ** (-b22) * rng.uniform(-fam_half, fam_half, trials)

    y2_nu = np.floor(s21 * g21 * n1) + np.floor(s22 * g22 * n2)
    y2_lam = np.floor(s21 * g21 * l1) + np.floor(s22 * g22 * l2)
    estimate = float(np.mean(y2_nu == y2_lam))
    sigma = float(np.sqrt(bound * (1.0 - bound) / trials))
    ok = estimate <= bound + 3.0 * sigma + 1e-12
    return AlignmentProbe(
        estimate=estimate, bound=bound, sigma=sigma, trials=trials, ok=ok
    )


def interval_condition_check(pair, instance, g, density) -> bool:
    """Both interval inequalities that every aligned pair must satisfy."""
    del g  # alignment is assumed; the inequalities involve only the bounds
    (_, _), (s21, s22) = _scales(instance)
    l1, l2 = pair.lambda_pair
    n1, n2 = pair.nu_pair
    d1, d2 = abs(n1 - l1), abs(n2 - l2)
    lhs1 = s21 * density.delta1 * d1 <= s22 * density.delta2 * d2 + 2.0
    lhs2 = s22 * density.delta1 * d2 <= s21 * density.delta2 * d1 + 2.0
    return bool(lhs1 and lhs2)


def _enumerate(instance, g, cap):
    n_pairs = (instance.x1_max + 1) * (instance.x2_max + 1)
    if n_pairs > cap:
        raise CapExceededError(
            f"enumeration needs {n_pairs} codeword pairs; cap is {cap}"
        )
    x1 = np.arange(instance.x1_max + 1)
    x2 = np.arange(instance.x2_max + 1)
    (s11, s12), (s21, s22) = _scales(instance)
    y1 = (
        np.floor(s11 * g[0][0] * x1)[:, None] + np.floor(s12 * g[0][1] * x2)[None, :]
    ).astype(np.int64)
    y2 = (
        np.floor(s21 * g[1][0] * x1)[:, None] + np.floor(s22 * g[1][1] * x2)[None, :]
    ).astype(np.int64)
    # lexicographically smallest preimage of each receiver-1 image: flattened
    # row-major order is (x1, x2)-lexicographic, and np.unique returns the
    # first occurrence
    _, rep_idx = np.unique(y1.ravel(), return_index=True)
    return y1, y2, rep_idx


def image_set_sizes(instance, g, cap=DEFAULT_ENUM_CAP):
    """Sizes of the aligned image sets under the representative-codeword map.

    Each distinct receiver-1 image is represented by its lexicographically
    smallest preimage codeword; representatives sharing a receiver-2 image
    form one aligned set.  Returns the multiset of set sizes (the sizes sum
    to the number of distinct receiver-1 images).
    """
    _, y2, rep_idx = _enumerate(instance, g, cap)
    _, sizes = np.unique(y2.ravel()[rep_idx], return_counts=True)
    return sizes


def enumerate_aligned_pairs(instance, g, cap=DEFAULT_ENUM_CAP, limit=None):
    """Distinct representative-codeword pairs whose images align at receiver 2."""
    y1, y2, rep_idx = _enumerate(instance, g, cap)
    y2_rep = y2.ravel()[rep_idx]
    order = np.argsort(y2_rep, kind="stable")
    shape = y1.shape
    pairs = []
    i = 0
    while i < order.size:
        j = i
        while j < order.size and y2_rep[order[j]] == y2_rep[order[i]]:
            j += 1
        group = [rep_idx[k] for k in order[i:j]]
        for a in range(len(group)):
            for b in range(a + 1, len(group)):
                ca = np.unravel_index(group[a], shape)
                cb = np.unravel_index(group[b], shape)
                pairs.append(
                    CodewordPair(
                        lambda_pair=(int(ca[0]), int(ca[1])),
                        nu_pair=(int(cb[0]), int(cb[1])),
                    )
                )
                if limit is not None and len(pairs) >= limit:
                    return pairs
        i = j
    return pairs


def _mean_size(sizes):
    # size-weighted: the expected |S_nu| for nu uniform over distinct images
    sizes = np.asarray(sizes, dtype=float)
    return float(np.sum(sizes**2) / np.sum(sizes))


def expected_size_curve(
    alpha,
    beta,
    p_bar_grid,
    draws,
    seed,
    density=BoundedDensitySpec(),
    cap=DEFAULT_ENUM_CAP,
    slack=0.15,
) -> ImageSetStats:
    """Fit the growth exponent of the mean aligned-set size over a pbar grid.

    The fitted exponent must stay below the bound exponent
    (max(a11-a21, a12-a22) + beta2)^+ plus a slack absorbing the bound's
    log(pbar) factor at small pbar.
    """
    alpha = _as_matrix("alpha", alpha)
    beta = _as_matrix("beta", beta)
    grid = tuple(float(p) for p in p_bar_grid)
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("p_bar grid must be ascending with >= 2 points")
    if grid[-1] / grid[0] < 8.0:
        raise ValidationError("p_bar grid should span at least three octaves")
    if draws < 1:
        raise ValidationError("draws must be >= 1")

    means = []
    for i, pb in enumerate(grid):
        inst = DeterministicInstance(p_bar=pb, alpha=alpha, beta=beta)
        vals = []
        for d in range(draws):
            g = inst.realize(density, (seed, i, d))
            vals.append(_mean_size(image_set_sizes(inst, g, cap)))
        means.append(float(np.mean(vals)))

    fitted = float(np.polyfit(np.log(grid), np.log(means), 1)[0])
    (a11, a12), (a21, a22) = alpha
    _, b2 = effective_csit(beta)
    bound = max(0.0, max(a11 - a21, a12 - a22) + b2)
    return ImageSetStats(
        p_bar_grid=grid,
        mean_size=tuple(means),
        fitted_exponent=fitted,
        bound_exponent=bound,
        slack=slack,
        ok=fitted <= bound + slack,
    )
