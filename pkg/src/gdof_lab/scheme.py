"""Layered zero-forcing transmission plans and finite-SNR SIC simulation.

A layout is a declarative list of power-layered codewords.  For the 2-user
cases each layer's per-antenna amplitude is a coefficient (a constant or an
entry of the channel estimate) times pbar**e with pbar = sqrt(P); the design
exponents e are recorded so measured SINR/leakage exponents can be checked
against their targets.  The symmetric K-user scheme computes its private
directions per realization by diagonalizing the scaled estimate matrix.

Achievability always runs at the row-minimum CSIT level of each receiver:
raising a non-minimal beta entry cannot change the result, which makes the
strongest-CSIT redundancy directly testable end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    BoundedDensitySpec,
    ChannelSpec2,
    GdofLabError,
    SymmetricSpecK,
    ValidationError,
    effective_csit,
    make_rng,
    sum_gdof_k_symmetric,
    sum_gdof_two_user,
)

__all__ = [
    "Transform",
    "LayerSpec",
    "SchemeLayout",
    "SimSnapshot",
    "SimResult",
    "PowerConstraintError",
    "normalize_instance",
    "build_layout",
    "build_layout_k",
    "plan",
    "simulate",
    "estimate_gdof_slope",
    "CASE1",
    "CASE2",
    "CASE3",
    "SINGLE_USER",
    "K_USER_SYMMETRIC",
]

CASE1 = "Case1"
CASE2 = "Case2"
CASE3 = "Case3"
SINGLE_USER = "SingleUser"
K_USER_SYMMETRIC = "KUserSymmetric"

# condition-number cap for the K-user diagonalizer; realizations above it are
# redrawn so the measured zero-forcing residual stays at float precision
COND_CAP = 1e6


class PowerConstraintError(GdofLabError):
    """Per-antenna average transmit power exceeded 1 + tolerance."""


@dataclass(frozen=True)
class Transform:
    """User and/or antenna permutation applied during normalization."""

    user_swap: bool = False
    antenna_swap: bool = False

    def apply_matrix(self, m):
        m = [list(row) for row in m]
        if self.user_swap:
            m = [m[1], m[0]]
        if self.antenna_swap:
            m = [[row[1], row[0]] for row in m]
        return tuple(tuple(row) for row in m)

    def apply_spec(self, spec: ChannelSpec2) -> ChannelSpec2:
        return ChannelSpec2(
            alpha=self.apply_matrix(spec.alpha), beta=self.apply_matrix(spec.beta)
        )

    def invert_users(self, values):
        """Map a per-user tuple of the normalized instance back to the original."""
        values = tuple(values)
        return (values[1], values[0]) if self.user_swap else values

    @property
    def is_identity(self):
        return not (self.user_swap or self.antenna_swap)


@dataclass(frozen=True)
class LayerSpec:
    """One power layer of a transmission plan.

    components encodes the per-antenna amplitude as (kind, ...) tuples:
    ("const", value, e) -> value * pbar**e, ("ghat", k, l, sign, e) ->
    sign * g_hat[k,l] * pbar**e (1-based k, l).  None for layers whose
    direction is computed per realization (K-user diagonalization).
    antenna_exponents are the design pbar-exponents (-inf for a silent
    antenna); power_exponent is their maximum, i.e. the layer's transmit
    power exponent in P relative to the unit per-antenna constraint.
    """

    message_id: str
    user: int
    gdof_load: float
    power_exponent: float
    precoder_rule: str
    decoded_by: tuple
    decode_rank: tuple  # ((receiver, rank), ...)
    antenna_exponents: tuple
    components: tuple | None = None

    def rank_at(self, receiver):
        for rx, rank in self.decode_rank:
            if rx == receiver:
                return rank
        return None


@dataclass(frozen=True)
class SchemeLayout:
    case_id: str
    transform: Transform
    reduction: float  # top-layer GDoF stripped onto antenna 1 (0 when unused)
    layers: tuple
    m: float
    target: tuple
    K: int = 2

    @property
    def target_sum(self):
        return float(sum(self.target))


def normalize_instance(spec: ChannelSpec2):
    """Permute users/antennas so alpha'[1][1] is the global maximum.

    Candidate transforms are tried in the fixed order identity, user swap,
    antenna swap, both; the first that succeeds wins, so layouts are
    deterministic on ties.
    """
    top = max(max(row) for row in spec.alpha)
    for user_swap in (False, True):
        for antenna_swap in (False, True):
            t = Transform(user_swap=user_swap, antenna_swap=antenna_swap)
            cand = t.apply_matrix(spec.alpha)
            if cand[0][0] == top:
                return t.apply_spec(spec), t
    raise AssertionError("unreachable: some permutation places the maximum at (1,1)")


def _ranks(*pairs):
    return tuple(pairs)


def _layer_2user(message_id, user, load, rule, decoded_by, ranks, components):
    exps = tuple(
        (comp[-1] if comp[0] != "const" or comp[1] != 0.0 else -np.inf)
        for comp in components
    )
    return LayerSpec(
        message_id=message_id,
        user=user,
        gdof_load=float(load),
        power_exponent=float(max(exps)),
        precoder_rule=rule,
        decoded_by=tuple(decoded_by),
        decode_rank=ranks,
        antenna_exponents=exps,
        components=tuple(components),
    )


def _single_user_layout(a11, transform):
    layer = _layer_2user(
        "W1p",
        1,
        a11,
        "antenna_one",
        (1,),
        _ranks((1, 1)),
        (("const", 1.0, 0.0), ("const", 0.0, 0.0)),
    )
    return SchemeLayout(
        case_id=SINGLE_USER,
        transform=transform,
        reduction=0.0,
        layers=(layer,),
        m=0.0,
        target=(a11, 0.0),
    )


def build_layout(spec: ChannelSpec2, transform: Transform = Transform()) -> SchemeLayout:
    """Layered plan for a normalized 2-user instance (alpha[1][1] maximal).

    Cases, with delta the top-layer load stripped onto antenna 1:
      Case 1: a21 > a22 and a11 - a12 > a21 - a22, delta = a21 - a22
      Case 2: a21 > a22 and a11 - a12 <= a21 - a22, delta = a11 - a12
      Case 3: a21 <= a22, delta = 0
    The remaining layers are the case's common/zero-forced/private split on
    the reduced exponents; m = 0 degenerates to serving user 1 alone.
    """
    (a11, a12), (a21, a22) = spec.alpha
    if a11 < max(a12, a21, a22):
        raise ValidationError("build_layout expects a normalized instance")
    b1, b2 = effective_csit(spec.beta)

    if a21 > a22 and a11 - a12 > a21 - a22:
        case = CASE1
        delta = a21 - a22
        ap11, ap12, ap21, ap22 = a11 - delta, a12, a22, a22
        m = min(max(ap21 - ap12 + b1, 0.0), b2)
    elif a21 > a22:
        case = CASE2
        delta = a11 - a12
        ap11, ap12, ap21, ap22 = a12, a12, a21 - delta, a22
        m = min(max(ap21 - ap11 + b1, 0.0), ap21 - ap22 + b2)
    else:
        case = CASE3
        delta = 0.0
        ap11, ap12, ap21, ap22 = a11, a12, a21, a22
        m = min(max(ap22 - ap12 + b1, 0.0), ap22 - ap21 + b2)

    if m <= 0.0:
        return _single_user_layout(a11, transform)

    layers = []
    first_rank = 1
    if delta > 0.0:
        layers.append(
            _layer_2user(
                "Wtop",
                1,
                delta,
                "antenna_one",
                (1, 2),
                _ranks((1, 1), (2, 1)),
                (("const", 1.0, 0.0), ("const", 0.0, 0.0)),
            )
        )
        first_rank = 2
    r = first_rank

    if case == CASE3:
        layers += [
            _layer_2user(
                "Wc", 1, ap22 - m, "generic", (1, 2), _ranks((1, r), (2, r)),
                (("const", 1.0, 0.0), ("const", 1.0, 0.0)),
            ),
            _layer_2user(
                "W1z", 1, m, "zero_force_user(2)", (1,), _ranks((1, r + 1)),
                (
                    ("ghat", 2, 2, 1.0, m - ap22),
                    ("ghat", 2, 1, -1.0, m + ap21 - 2 * ap22),
                ),
            ),
            _layer_2user(
                "W1p", 1, a11 - ap22, "generic", (1,), _ranks((1, r + 2)),
                (("const", 1.0, -ap22), ("const", 1.0, -ap22)),
            ),
            _layer_2user(
                "W2z", 2, m, "zero_force_user(1)", (2,), _ranks((2, r + 1)),
                (
                    ("ghat", 1, 2, 1.0, m - a11 + ap12 - ap22),
                    ("ghat", 1, 1, -1.0, m - ap22),
                ),
            ),
        ]
    else:
        # Cases 1-2 live on antenna 1's reduced power budget: every antenna-1
        # exponent carries the extra -delta from the Wtop reduction.
        if case == CASE1:
            w1z = (
                ("ghat", 2, 2, 1.0, m - ap21 - delta),
                ("ghat", 2, 1, -1.0, m - ap21),
            )
            w2z = (
                ("ghat", 1, 2, 1.0, m + ap12 - ap21 - ap11 - delta),
                ("ghat", 1, 1, -1.0, m - ap21),
            )
        else:
            w1z = (
                ("ghat", 2, 2, 1.0, m + ap22 - 2 * ap21 - delta),
                ("ghat", 2, 1, -1.0, m - ap21),
            )
            w2z = (
                ("ghat", 1, 2, 1.0, m - ap21 - delta),
                ("ghat", 1, 1, -1.0, m - ap21),
            )
        layers += [
            _layer_2user(
                "Wc", 1, ap21 - m, "generic", (1, 2), _ranks((1, r), (2, r)),
                (("const", 1.0, -delta), ("const", 0.0, 0.0)),
            ),
            _layer_2user(
                "W1z", 1, m, "zero_force_user(2)", (1,), _ranks((1, r + 1)), w1z
            ),
            _layer_2user(
                "W1p", 1, ap11 - ap21, "antenna_one", (1,), _ranks((1, r + 2)),
                (("const", 1.0, -ap21 - delta), ("const", 0.0, 0.0)),
            ),
            _layer_2user(
                "W2z", 2, m, "zero_force_user(1)", (2,), _ranks((2, r + 1)), w2z
            ),
        ]

    d1 = float(sum(l.gdof_load for l in layers if l.user == 1))
    d2 = float(sum(l.gdof_load for l in layers if l.user == 2))
    return SchemeLayout(
        case_id=case,
        transform=transform,
        reduction=delta,
        layers=tuple(layers),
        m=m,
        target=(d1, d2),
    )


def build_layout_k(spec: SymmetricSpecK) -> SchemeLayout:
    """Symmetric K-user plan: one common layer plus K diagonalized private layers."""
    K, a, b = spec.K, spec.alpha, spec.beta
    layers = []
    private_rank = 1
    if a - b > 0.0:
        layers.append(
            LayerSpec(
                message_id="Wc",
                user=1,
                gdof_load=a - b,
                power_exponent=0.0,
                precoder_rule="generic",
                decoded_by=tuple(range(1, K + 1)),
                decode_rank=tuple((rx, 1) for rx in range(1, K + 1)),
                antenna_exponents=(0.0,) * K,
                components=None,
            )
        )
        private_rank = 2
    for k in range(1, K + 1):
        exps = tuple(b - a if j == k else b - 1.0 for j in range(1, K + 1))
        layers.append(
            LayerSpec(
                message_id=f"W{k}p",
                user=k,
                gdof_load=1.0 - a + b,
                power_exponent=b - a,
                precoder_rule=f"diagonalize({k})",
                decoded_by=(k,),
                decode_rank=((k, private_rank),),
                antenna_exponents=exps,
                components=None,
            )
        )
    target = tuple(
        float(sum(l.gdof_load for l in layers if l.user == u)) for u in range(1, K + 1)
    )
    return SchemeLayout(
        case_id=K_USER_SYMMETRIC,
        transform=Transform(),
        reduction=0.0,
        layers=tuple(layers),
        m=1.0 - a + b,
        target=target,
        K=K,
    )


def plan(spec):
    """Normalize (2-user) and build the matching layout; K-user specs pass through."""
    if isinstance(spec, SymmetricSpecK):
        layout = build_layout_k(spec)
        return layout, spec
    norm, transform = normalize_instance(spec)
    return build_layout(norm, transform), norm


def _weights_2user(layout, g_hat, pbar):
    w = np.zeros((len(layout.layers), 2))
    for i, layer in enumerate(layout.layers):
        for j, comp in enumerate(layer.components):
            if comp[0] == "const":
                _, val, e = comp
                if val != 0.0:
                    w[i, j] = val * pbar**e
            else:
                _, k, l, sign, e = comp
                w[i, j] = sign * g_hat[k - 1, l - 1] * pbar**e
    return w


def _weights_k(layout, spec, g_hat, pbar):
    """Per-layer amplitude vectors for the K-user scheme.

    Returns None when the scaled estimate matrix is too ill conditioned and
    the realization should be redrawn.
    """
    K, a, b = spec.K, spec.alpha, spec.beta
    gs = g_hat * pbar ** (a - 1.0)
    np.fill_diagonal(gs, np.diag(g_hat))
    if np.linalg.cond(gs) > COND_CAP:
        return None
    v = np.linalg.inv(gs)
    v /= np.linalg.norm(v, axis=0, keepdims=True)
    w = np.zeros((len(layout.layers), K))
    for i, layer in enumerate(layout.layers):
        if layer.message_id == "Wc":
            w[i] = np.sqrt(max(1.0 - pbar ** (2.0 * (b - a)), 0.0)) / np.sqrt(K)
        else:
            k = layer.user
            w[i] = pbar ** (b - a) * v[:, k - 1]
    return w


def _nulled_receivers(layer, K):
    rule = layer.precoder_rule
    if rule.startswith("zero_force_user("):
        return (int(rule[len("zero_force_user(") : -1]),)
    if rule.startswith("diagonalize("):
        k = int(rule[len("diagonalize(") : -1])
        return tuple(rx for rx in range(1, K + 1) if rx != k)
    return ()


@dataclass
class SimSnapshot:
    """Trial-averaged statistics of one layout at a single SNR."""

    P: float
    per_user_rates: tuple
    # keyed (message_id, receiver); values are means over trials
    sinr_log2: dict
    signal_log2: dict
    rate: dict
    decode_success: dict
    leakage_log2: dict  # keyed (message_id, nulled receiver)
    max_zf_residual: float
    max_antenna_power: float
    redraws: int


@dataclass
class SimResult:
    """Per-P snapshots plus regression-based exponent and slope estimates."""

    p_grid: tuple
    per_user_rates: tuple  # one tuple of rates per P
    slope_estimates: tuple  # fitted d_k per user
    per_layer_sinr_exponents: dict  # (message_id, receiver) -> slope in P
    per_layer_signal_exponents: dict
    per_layer_leakage_exponents: dict
    decode_success: dict
    snapshots: tuple


def simulate(layout, spec, density, P, trials, seed) -> SimSnapshot:
    """Monte Carlo SIC evaluation of one layout at SNR P.

    Precoders are formed from the estimate g_hat only; receivers see the
    realized coefficients at their row-minimum CSIT level.  Layers already
    decoded in a receiver's chain are removed exactly; everything else is
    treated as noise.  Raises PowerConstraintError if any realization's
    per-antenna average power exceeds 1 + 1e-6.
    """
    if not P > 1:
        raise ValidationError("P must exceed 1")
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    k_user = isinstance(spec, SymmetricSpecK)
    K = spec.K if k_user else 2
    alpha = spec.alpha_array()
    if k_user:
        beta_rows = np.full(K, spec.beta)
    else:
        beta_rows = np.array(effective_csit(spec.beta))
    pbar = float(np.sqrt(P))

    acc_sinr, acc_sig, acc_rate, acc_leak = {}, {}, {}, {}
    user_rates = np.zeros(K)
    max_res = 0.0
    max_pow = 0.0
    redraws = 0

    for t in range(trials):
        attempt = 0
        while True:
            rng = make_rng(seed, t, attempt) if attempt else make_rng(seed, t)
            g_hat, g_tilde = density.sample(rng, K)
            if k_user:
                w = _weights_k(layout, spec, g_hat, pbar)
                if w is None:
                    attempt += 1
                    redraws += 1
                    continue
            else:
                w = _weights_2user(layout, g_hat, pbar)
            break

        co = 1.0 / np.sqrt(np.max(np.sum(w**2, axis=0)))
        antenna_power = float(np.max(np.sum((co * w) ** 2, axis=0)))
        max_pow = max(max_pow, antenna_power)
        if antenna_power > 1.0 + 1e-6:
            raise PowerConstraintError(
                f"per-antenna power {antenna_power} exceeds the unit constraint"
            )

        # channel rows: estimate + row-minimum-CSIT error, amplitude pbar**alpha
        scale = pbar**alpha
        h_hat = scale * g_hat
        h = scale * (g_hat + pbar ** (-beta_rows[:, None]) * g_tilde)
        amp = h @ (co * w).T  # (receiver, layer) received amplitudes
        power = amp**2

        for i, layer in enumerate(layout.layers):
            for rx in _nulled_receivers(layer, K):
                u = h_hat[rx - 1]
                res = abs(u @ w[i]) / (np.linalg.norm(u) * np.linalg.norm(w[i]))
                max_res = max(max_res, float(res))
                key = (layer.message_id, rx)
                acc_leak[key] = acc_leak.get(key, 0.0) + np.log2(
                    max(power[rx - 1, i], 1e-300)
                )

        layer_rate = {}
        for rx in range(1, K + 1):
            chain = sorted(
                (i for i, l in enumerate(layout.layers) if l.rank_at(rx) is not None),
                key=lambda i: layout.layers[i].rank_at(rx),
            )
            remaining = set(range(len(layout.layers)))
            for i in chain:
                noise = 1.0 + sum(power[rx - 1, j] for j in remaining if j != i)
                sinr = power[rx - 1, i] / noise
                rate = 0.5 * np.log2(1.0 + sinr)
                key = (layout.layers[i].message_id, rx)
                acc_sinr[key] = acc_sinr.get(key, 0.0) + np.log2(max(sinr, 1e-300))
                acc_sig[key] = acc_sig.get(key, 0.0) + np.log2(
                    max(power[rx - 1, i], 1e-300)
                )
                acc_rate[key] = acc_rate.get(key, 0.0) + rate
                layer_rate.setdefault(i, rate)
                layer_rate[i] = min(layer_rate[i], rate)
                remaining.discard(i)

        for i, layer in enumerate(layout.layers):
            if i in layer_rate:
                user_rates[layer.user - 1] += layer_rate[i]

    n = float(trials)
    sinr_log2 = {k: v / n for k, v in acc_sinr.items()}
    signal_log2 = {k: v / n for k, v in acc_sig.items()}
    rate = {k: v / n for k, v in acc_rate.items()}
    leakage_log2 = {k: v / n for k, v in acc_leak.items()}
    success = {
        (msg, rx): sinr_log2[(msg, rx)] / np.log2(P)
        >= _load_of(layout, msg) - 0.05
        for (msg, rx) in sinr_log2
    }
    return SimSnapshot(
        P=float(P),
        per_user_rates=tuple(user_rates / n),
        sinr_log2=sinr_log2,
        signal_log2=signal_log2,
        rate=rate,
        decode_success=success,
        leakage_log2=leakage_log2,
        max_zf_residual=max_res,
        max_antenna_power=max_pow,
        redraws=redraws,
    )


def _load_of(layout, message_id):
    for layer in layout.layers:
        if layer.message_id == message_id:
            return layer.gdof_load
    raise KeyError(message_id)


def estimate_gdof_slope(layout, spec, density, p_grid, trials, seed) -> SimResult:
    """Regress per-user rates and per-layer exponents against the SNR grid."""
    p_grid = tuple(float(p) for p in p_grid)
    if len(p_grid) < 2 or any(b <= a for a, b in zip(p_grid, p_grid[1:])):
        raise ValidationError("p_grid must be ascending with at least two points")
    if p_grid[-1] / p_grid[0] < 1e3:
        raise ValidationError("p_grid should span at least three decades")
    snapshots = tuple(
        simulate(layout, spec, density, p, trials, (seed, i))
        for i, p in enumerate(p_grid)
    )
    log2p = np.log2(p_grid)
    half = 0.5 * log2p
    K = layout.K
    rates = tuple(s.per_user_rates for s in snapshots)
    slopes = tuple(
        float(np.polyfit(half, [r[u] for r in rates], 1)[0]) for u in range(K)
    )

    def _fit(extract):
        out = {}
        keys = set().union(*(extract(s).keys() for s in snapshots))
        for key in keys:
            ys = [extract(s)[key] for s in snapshots]
            out[key] = float(np.polyfit(log2p, ys, 1)[0])
        return out

    success = {}
    for s in snapshots:
        if s.P >= 1e8:
            for key, ok in s.decode_success.items():
                success[key] = success.get(key, True) and ok
    return SimResult(
        p_grid=p_grid,
        per_user_rates=rates,
        slope_estimates=slopes,
        per_layer_sinr_exponents=_fit(lambda s: s.sinr_log2),
        per_layer_signal_exponents=_fit(lambda s: s.signal_log2),
        per_layer_leakage_exponents=_fit(lambda s: s.leakage_log2),
        decode_success=success,
        snapshots=snapshots,
    )
