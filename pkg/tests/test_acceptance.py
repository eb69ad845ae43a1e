"""Acceptance suite: one test per release criterion, one PASS line each.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
Tolerances are pinned in the assertions and must not be loosened.
"""

import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from gdof_lab import ais, budget, core, scheme
from gdof_lab.core import (
    BoundedDensitySpec,
    ChannelSpec2,
    SymmetricSpecK,
    effective_csit,
    sum_gdof_k_symmetric,
    sum_gdof_two_user,
    sum_gdof_two_user_equivalent,
)

DENS = BoundedDensitySpec()


def _report(n, text):
    print(f"\ncriterion {n}: PASS - {text}")


def spec2(alpha, b1, b2):
    return ChannelSpec2(alpha=alpha, beta=[[b1, b1], [b2, b2]])


def test_criterion_1_formula_suite():
    """Two formula forms agree to 1e-12 on 1e5 specs; invariants hold."""
    t0 = time.monotonic()
    rng = np.random.default_rng(1)
    n = 10**5
    A = rng.uniform(0.0, 1.0, (n, 2, 2))
    B = A * rng.uniform(0.0, 1.0, (n, 2, 2))
    shrink = rng.uniform(0.0, 1.0, n)
    for i in range(n):
        s = ChannelSpec2(alpha=A[i].tolist(), beta=B[i].tolist())
        d = sum_gdof_two_user(s).d_sum
        assert abs(d - sum_gdof_two_user_equivalent(s)) <= 1e-12
        # single-user sandwich
        lo = A[i].max()
        hi = A[i].max(axis=1).sum()
        assert lo - 1e-12 <= d <= hi + 1e-12
        if i % 20 == 0:
            # beta-monotonicity: uniformly shrinking beta cannot help
            weak = ChannelSpec2(
                alpha=A[i].tolist(), beta=(B[i] * shrink[i]).tolist()
            )
            assert sum_gdof_two_user(weak).d_sum <= d + 1e-12
            # strongest-CSIT redundancy: beta above the row minimum is inert
            full = ChannelSpec2(alpha=A[i].tolist(), beta=A[i].tolist())
            rowmin = np.minimum(A[i], A[i].min(axis=1, keepdims=True))
            capped = ChannelSpec2(alpha=A[i].tolist(), beta=rowmin.tolist())
            assert (
                abs(
                    sum_gdof_two_user(full).d_sum
                    - sum_gdof_two_user(capped).d_sum
                )
                <= 1e-12
            )
    elapsed = time.monotonic() - t0
    assert elapsed < 10.0, f"formula suite took {elapsed:.1f}s (limit 10s)"
    _report(1, f"1e5 specs, forms agree <=1e-12, invariants hold, {elapsed:.1f}s")


def test_criterion_2_prior_result_recovery():
    """Uniform-quality and no-CSIT specializations, K=2 cross-check."""
    # all-ones alpha with uniform beta: d_sum = 1 + beta exactly
    for b in np.linspace(0.0, 1.0, 21):
        s = spec2([[1, 1], [1, 1]], b, b)
        assert sum_gdof_two_user(s).d_sum == pytest.approx(1 + b, abs=0)
    # beta = 0: theorem reduces to its no-CSIT specialization
    rng = np.random.default_rng(2)
    for _ in range(1000):
        a = rng.uniform(0.0, 1.0, (2, 2))
        (a11, a12), (a21, a22) = a
        d1 = max(a11, a12) + max(a21 - a11, a22 - a12, 0.0)
        d2 = max(a21, a22) + max(a11 - a21, a12 - a22, 0.0)
        want = min(d1, d2)
        s = ChannelSpec2(alpha=a.tolist(), beta=[[0, 0], [0, 0]])
        assert sum_gdof_two_user(s).d_sum == want
    # K=2 symmetric instances: both theorems give 2 - alpha + beta
    for _ in range(1000):
        a = rng.uniform(0.0, 1.0)
        b = rng.uniform(0.0, a)
        dk = sum_gdof_k_symmetric(SymmetricSpecK(K=2, alpha=a, beta=b))
        d2u = sum_gdof_two_user(
            ChannelSpec2(alpha=[[1, a], [a, 1]], beta=[[b, b], [b, b]])
        ).d_sum
        assert dk == pytest.approx(2 - a + b, abs=1e-15)
        assert d2u == pytest.approx(dk, abs=1e-12)
    _report(2, "1+beta, no-CSIT specialization, and 2-alpha+beta all recovered")


def test_criterion_3_k_user_endpoints():
    """Perfect CSIT gives K, no CSIT collapses to 1, alpha=beta gives K."""
    for K in (2, 3, 5, 9):
        assert sum_gdof_k_symmetric(SymmetricSpecK(K=K, alpha=1, beta=1)) == K
        assert sum_gdof_k_symmetric(SymmetricSpecK(K=K, alpha=1, beta=0)) == 1
        for a in (0.1, 0.5, 1.0):
            assert (
                sum_gdof_k_symmetric(SymmetricSpecK(K=K, alpha=a, beta=a)) == K
            )
    _report(3, "all three endpoint families exact")


def _exhaustive_4d(alpha, total, step):
    """Independent oracle: brute force over all four beta entries.

    Uses its own inline copy of the sum-GDoF formula on a vectorized
    4-D grid; shares no code with the budget module's reduced search.
    """
    (a11, a12), (a21, a22) = alpha
    grids = []
    for cap in (a11, a12, a21, a22):
        g = np.arange(0.0, cap + step / 2, step)
        g = np.minimum(g, cap)
        grids.append(np.unique(np.append(g, cap)))
    b11, b12, b21, b22 = np.meshgrid(*grids, indexing="ij", sparse=True)
    cost = b11 + b12 + b21 + b22
    beta1 = np.minimum(b11, b12)
    beta2 = np.minimum(b21, b22)
    d1 = np.maximum(a11, a12) + np.maximum(
        np.maximum(a21 - a11 + beta1, a22 - a12 + beta1), 0.0
    )
    d2 = np.maximum(a21, a22) + np.maximum(
        np.maximum(a11 - a21 + beta2, a12 - a22 + beta2), 0.0
    )
    d = np.minimum(d1, d2)
    return float(np.max(np.where(cost <= total + 1e-9, d, -np.inf)))


def test_criterion_4_budget_optimizer():
    """Reduction equals the 4-D oracle; curve shapes match closed forms."""
    t0 = time.monotonic()
    rng = np.random.default_rng(4)
    for _ in range(100):
        a = np.round(rng.uniform(0.1, 1.0, (2, 2)), 1)
        total = float(rng.integers(0, 11) * 0.2)
        reduced = budget.optimize_allocation(a, total, step=0.1).achieved
        oracle = _exhaustive_4d(a.tolist(), total, 0.1)
        assert reduced == pytest.approx(oracle, abs=1e-12)
    # all-ones alpha: d(B) = 1 + B/4, saturating at 2
    budgets = np.arange(0.0, 4.01, 0.2)
    curve = budget.budget_curve([[1, 1], [1, 1]], budgets, step=0.01)
    for b, d, _ in curve.points:
        assert d == pytest.approx(min(1 + b / 4, 2.0), abs=0.01)
    # two-slope regime: slope 1/2 then 1/4, breakpoint at B = 2(a12 - a21)
    budgets = np.arange(0.0, 2.41, 0.2)
    curve = budget.budget_curve([[1, 0.6], [0.4, 1]], budgets, step=0.01)
    pts = {round(b, 10): d for b, d, _ in curve.points}
    for b, d in pts.items():
        want = min(1.4 + b / 2, 1.5 + b / 4, 2.0)
        assert d == pytest.approx(want, abs=0.01)
    assert any(abs(b - 0.4) <= 0.2 + 1e-9 for b in curve.breakpoints)
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0, f"budget suite took {elapsed:.1f}s (limit 60s)"
    _report(4, f"oracle match on 100 alphas, both curve shapes, {elapsed:.1f}s")


# fixed achievability suite: cases 1-3, single-user, two K-user points
SLOPE_SUITE = [
    ("case1", spec2([[1, 0.4], [0.7, 0.5]], 0.3, 0.4), (1.0, 0.4)),
    ("case2", spec2([[1, 0.8], [0.9, 0.4]], 0.3, 0.2), (1.0, 0.2)),
    ("case3", spec2([[1, 0.5], [0.3, 0.7]], 0.4, 0.3), (1.0, 0.6)),
    ("single_user", spec2([[1, 1], [0.3, 0.3]], 0.2, 0.1), (1.0, 0.0)),
    ("k3", SymmetricSpecK(K=3, alpha=0.6, beta=0.3), None),
    ("k4", SymmetricSpecK(K=4, alpha=1.0, beta=0.5), None),
]

P_GRID = [1e6, 1e8, 1e10, 1e12]


def _run_suite():
    results = []
    for name, spec, target in SLOPE_SUITE:
        layout, sim_spec = scheme.plan(spec)
        res = scheme.estimate_gdof_slope(
            layout, sim_spec, DENS, P_GRID, 200, 2026
        )
        results.append((name, spec, layout, sim_spec, target, res))
    return results


@pytest.fixture(scope="module")
def suite_results():
    t0 = time.monotonic()
    results = _run_suite()
    return results, time.monotonic() - t0


def test_criterion_5_achievability_slopes(suite_results):
    """Per-user rate slopes match theorem targets within 0.1 (0.15 K-sum)."""
    results, elapsed = suite_results
    for name, spec, layout, _, target, res in results:
        if isinstance(spec, SymmetricSpecK):
            want = sum_gdof_k_symmetric(spec)
            got = sum(res.slope_estimates)
            assert got == pytest.approx(want, abs=0.15), name
        else:
            want = target
            assert sum(layout.target) == pytest.approx(
                sum_gdof_two_user(spec).d_sum, abs=1e-9
            ), name
            for u in range(2):
                assert res.slope_estimates[u] == pytest.approx(
                    want[u], abs=0.1
                ), (name, u)
    assert elapsed < 300.0, f"slope suite took {elapsed:.1f}s (limit 300s)"
    _report(5, f"6-instance slope suite within tolerance, {elapsed:.1f}s")


def test_criterion_6_sinr_exponents():
    """Layer SINR/power exponents match their designed values within 0.05."""
    # case 3 receiver-1 chain: (a22 - m, m, a11 - a22) = (0.1, 0.6, 0.3)
    layout, sim_spec = scheme.plan(spec2([[1, 0.5], [0.3, 0.7]], 0.4, 0.3))
    res = scheme.estimate_gdof_slope(
        layout, sim_spec, DENS, [1e8, 1e10, 1e12], 200, 7
    )
    exps = res.per_layer_sinr_exponents
    assert exps[("Wc", 1)] == pytest.approx(0.1, abs=0.05)
    assert exps[("W1z", 1)] == pytest.approx(0.6, abs=0.05)
    assert exps[("W1p", 1)] == pytest.approx(0.3, abs=0.05)
    # K-user: common layer received at full power, privates at 1 + beta - alpha
    layout, sim_spec = scheme.plan(SymmetricSpecK(K=3, alpha=0.6, beta=0.3))
    res = scheme.estimate_gdof_slope(
        layout, sim_spec, DENS, [1e8, 1e10, 1e12], 200, 8
    )
    sig = res.per_layer_signal_exponents
    assert sig[("Wc", 1)] == pytest.approx(1.0, abs=0.05)
    assert sig[("W1p", 1)] == pytest.approx(1 + 0.3 - 0.6, abs=0.05)
    _report(6, "case-3 chain (0.1, 0.6, 0.3) and K-user (1, 1+beta-alpha)")


def test_criterion_7_zero_forcing(suite_results):
    """ZF residual <= 1e-9 everywhere; leakage within design + 0.05."""
    results, _ = suite_results
    checked = 0
    for name, _, layout, sim_spec, _, res in results:
        for snap in res.snapshots:
            assert snap.max_zf_residual <= 1e-9, name
        beff = effective_csit(sim_spec.beta) if hasattr(
            sim_spec, "beta"
        ) and not isinstance(sim_spec, SymmetricSpecK) else None
        if isinstance(sim_spec, SymmetricSpecK):
            continue
        an = np.asarray(sim_spec.alpha)
        layers = {l.message_id: l for l in layout.layers}
        for (msg, rx), measured in res.per_layer_leakage_exponents.items():
            exp = layers[msg].antenna_exponents
            received = max(
                an[rx - 1][j] + exp[j]
                for j in range(2)
                if np.isfinite(exp[j])
            )
            designed = received - beff[rx - 1]
            assert measured <= designed + 0.05, (name, msg, rx)
            checked += 1
    assert checked > 0
    _report(7, f"all residuals <= 1e-9, {checked} leakage exponents in design")


AIS_SUITE = [
    ([[1, 1], [1, 1]], [[0, 0], [0, 0]], 0.0),
    ([[1, 1], [0.5, 0.5]], [[0, 0], [0, 0]], 0.5),
    ([[1, 1], [1, 1]], [[0, 0], [1, 1]], 1.0),
]


def test_criterion_8_ais_lab():
    """Alignment bounds, interval conditions, and E|S| growth exponents."""
    t0 = time.monotonic()
    rng = np.random.default_rng(88)
    for alpha, beta, bound in AIS_SUITE:
        inst = ais.DeterministicInstance(p_bar=32.0, alpha=alpha, beta=beta)
        # 1e3 sampled pairs: estimate never beats the bound + 3 sigma
        for t in range(1000):
            lam = (
                rng.integers(0, inst.x1_max + 1),
                rng.integers(0, inst.x2_max + 1),
            )
            nu = (
                rng.integers(0, inst.x1_max + 1),
                rng.integers(0, inst.x2_max + 1),
            )
            if tuple(lam) == tuple(nu):
                continue
            probe = ais.alignment_probability_mc(
                ais.CodewordPair(lambda_pair=lam, nu_pair=nu),
                inst,
                DENS,
                1000,
                (99, t),
            )
            assert probe.ok, (alpha, beta, lam, nu)
        # interval conditions hold for every enumerated aligned pair
        g = inst.realize(DENS, 55)
        pairs = ais.enumerate_aligned_pairs(inst, g, limit=2000)
        assert all(
            ais.interval_condition_check(p, inst, g, DENS) for p in pairs
        ), (alpha, beta)
        # fitted growth exponent stays under the analytic bound + 0.15
        stats = ais.expected_size_curve(
            alpha, beta, [8, 16, 32, 64], draws=20, seed=321
        )
        assert stats.bound_exponent == pytest.approx(bound, abs=1e-12)
        assert stats.fitted_exponent <= bound + 0.15, (alpha, beta)
    elapsed = time.monotonic() - t0
    assert elapsed < 300.0, f"AIS suite took {elapsed:.1f}s (limit 300s)"
    _report(8, f"bounds, intervals, growth exponents on 3 instances, {elapsed:.1f}s")


def test_criterion_9_determinism(tmp_path):
    """Stochastic commands are byte-identical across runs and worker counts."""
    inst2 = tmp_path / "i2.json"
    inst2.write_text(
        json.dumps(
            {"alpha": [[1.0, 0.5], [0.3, 0.7]], "beta": [[0.4, 0.4], [0.3, 0.3]]}
        )
    )
    instk = tmp_path / "ik.json"
    instk.write_text(json.dumps({"K": 3, "alpha": 0.6, "beta": 0.3}))

    def run(args, threads):
        env = dict(os.environ, GDOF_LAB_THREADS=str(threads))
        res = subprocess.run(
            [sys.executable, "-m", "gdof_lab.cli", *args],
            capture_output=True,
            text=True,
            env=env,
        )
        assert res.returncode == 0, res.stderr
        return res.stdout

    commands = [
        ["achieve", "--instance", str(inst2), "--p-grid", "1e6,1e8,1e10",
         "--trials", "30", "--seed", "5"],
        ["achieve", "--instance", str(instk), "--p-grid", "1e6,1e8,1e10",
         "--trials", "30", "--seed", "5", "--format", "csv"],
        ["ais-prob", "--instance", str(inst2), "--p-bar", "16",
         "--pairs", "30", "--trials", "400", "--seed", "6"],
        ["ais-size", "--instance", str(inst2), "--draws", "5", "--seed", "7"],
        ["sweep", "--axis", "P", "--instance", str(inst2),
         "--grid", "1e6,1e8,1e10", "--trials", "30", "--seed", "8"],
    ]
    for args in commands:
        outputs = {run(args, t) for t in (1, 4, 1)}
        assert len(outputs) == 1, args
    _report(9, "5 stochastic commands byte-identical across worker counts")
