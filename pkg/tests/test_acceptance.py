"""Acceptance criteria 1-9. Each test prints one ``ACCEPTANCE n: PASS/FAIL`` line."""
import math
import time

import numpy as np
import pytest

from conftest import random_body, random_contextual_instance, random_unit
from grid_oracle import GridOracle
from pabandits.bandit import corollary1_bound
from pabandits.binsearch import binary_search_arm, estimate_incentive, search_steps
from pabandits.cipa import CipaConfig, cut_count_bound, regret_curve_ctx, run_cipa
from pabandits.env import TABLE3, MabInstance, TieBreak, agent_choice_mab, optimal_incentives_mab
from pabandits.geometry import (
    centroid_cyl,
    in_cylindrification,
    projected_diameter,
    sample_projected,
    support,
)
from pabandits.harness import figure1_config, run_seed
from pabandits.ipa import BANDIT

TIES = (TieBreak.ADVERSARIAL, TieBreak.LEXICOGRAPHIC)


def random_mab_instances(n: int, seed: int = 2024):
    """Random instances with K <= 10; a third use dyadic rewards so midpoint offers hit exact ties."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        K = int(rng.integers(1, 11))
        if i % 3 == 0:
            s = rng.integers(0, 9, size=K) / 8.0
        elif i % 3 == 1:
            s = np.round(rng.random(K), 2)
        else:
            s = rng.random(K)
        out.append(MabInstance(s=s, theta=rng.random(K)))
    return out


INSTANCES = random_mab_instances(1000)


def _search_all(inst, n_steps, tie):
    oracle = lambda offer: agent_choice_mab(inst, offer, tie)  # noqa: E731
    return [binary_search_arm(oracle, a, n_steps, K=inst.K) for a in range(inst.K)]


def test_criterion_1_binary_search_precision(report):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    failures = []
    checked = 0
    for idx, inst in enumerate(INSTANCES):
        n_steps = int(rng.integers(1, 21))
        pi_star = optimal_incentives_mab(inst)
        for tie in TIES:
            for a, br in enumerate(_search_all(inst, n_steps, tie)):
                checked += 1
                if not (br.lower <= pi_star[a] <= br.upper) or br.width > 2.0**-n_steps + 1e-12:
                    failures.append((idx, tie.value, a, n_steps, br, pi_star[a]))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 5.0
    report(1, ok, f"{checked} brackets, {len(failures)} failures, {elapsed:.2f}s (limit 5s)")
    assert not failures, failures[:5]
    assert elapsed < 5.0


@pytest.mark.parametrize("T", [100, 10_000])
def test_criterion_2_estimate_sandwich(report, T):
    n_steps = search_steps(T)
    worst_low, worst_high, bad = math.inf, -math.inf, []
    for idx, inst in enumerate(INSTANCES):
        pi_star = optimal_incentives_mab(inst)
        for tie in TIES:
            for a, br in enumerate(_search_all(inst, n_steps, tie)):
                gap = estimate_incentive(br, T) - pi_star[a]
                worst_low, worst_high = min(worst_low, gap), max(worst_high, gap)
                if not (0 < gap <= 2.0 / T):
                    bad.append((idx, tie.value, a, gap))
    ok = not bad
    report(2, ok, f"T={T}: pi_hat - pi* in [{worst_low:.3e}, {worst_high:.3e}], bound 2/T={2.0 / T:.1e}, {len(bad)} violations")
    assert not bad, bad[:5]


# ---------------------------------------------------------------------------
# TABLE3 runs shared by criteria 3-5


@pytest.fixture(scope="module")
def figure1_runs():
    cfg = figure1_config()
    runs, times = {}, {}
    for algo in cfg.algorithms:
        start = time.perf_counter()
        runs[algo] = [run_seed(cfg, algo, i) for i in range(cfg.seed_count)]
        times[algo] = time.perf_counter() - start
    return cfg, runs, times


def test_criterion_3_compliance(report, figure1_runs):
    cfg, runs, times = figure1_runs
    exceptions = 0
    bandit_rounds = 0
    for traj, _ in runs["ipa+ucb"]:
        mask = traj.phase == BANDIT
        bandit_rounds += int(mask.sum())
        exceptions += int(np.sum(traj.chosen_arm[mask] != traj.offer_arm[mask]))
    elapsed = times["ipa+ucb"]
    ok = exceptions == 0 and elapsed < 30.0
    report(3, ok, f"{exceptions} non-compliant rounds out of {bandit_rounds} bandit rounds over {cfg.seed_count} seeds, {elapsed:.1f}s (limit 30s)")
    assert exceptions == 0
    assert elapsed < 30.0


def test_criterion_4_regret_decomposition(report, figure1_runs):
    cfg, runs, _ = figure1_runs
    T, K = cfg.T, TABLE3.K
    ipa = np.mean([c[-1] for _, c in runs["ipa+ucb"]])
    oracle = np.mean([c[-1] for _, c in runs["oracle-ucb"]])
    offset = 2 + (1 + TABLE3.theta_range) * (1 + K * math.log2(T))
    bound = corollary1_bound(TABLE3, T)
    ok = ipa <= oracle + offset and ipa <= bound
    report(4, ok, f"IPA {ipa:.1f} <= oracle {oracle:.1f} + offset {offset:.1f} = {oracle + offset:.1f}; IPA <= UCB-subroutine regret bound {bound:.1f}")
    assert ipa <= oracle + offset
    assert ipa <= bound


def test_criterion_5_figure1_ordering(report, figure1_runs):
    cfg, runs, times = figure1_runs
    means = {algo: float(np.mean([c[-1] for _, c in runs[algo]])) for algo in runs}
    total = sum(times.values())
    gap = means["ipa+ucb"] - means["oracle-ucb"]
    ok = means["eps-greedy"] > means["ipa+ucb"] >= means["oracle-ucb"] and gap <= 150 and total < 120
    report(
        5, ok,
        f"eps-greedy {means['eps-greedy']:.1f} > ipa+ucb {means['ipa+ucb']:.1f} >= oracle-ucb {means['oracle-ucb']:.1f}; "
        f"gap {gap:.1f} (limit 150); {total:.1f}s (limit 120s)",
    )
    assert means["eps-greedy"] > means["ipa+ucb"] >= means["oracle-ucb"]
    assert gap <= 150
    assert total < 120


# ---------------------------------------------------------------------------
# contextual runs shared by criteria 6 and 9

CTX_SEEDS = 20


@pytest.fixture(scope="module")
def contextual_runs():
    cfg = CipaConfig(strict=False)
    runs, elapsed = {}, 0.0
    for d in (2, 3):
        for seed in range(CTX_SEEDS):
            inst = random_contextual_instance(d, seed)
            start = time.perf_counter()
            runs[d, seed] = (inst, run_cipa(inst, 2000, seed=[seed], config=cfg))
            elapsed += time.perf_counter() - start
    return runs, elapsed


def test_criterion_6_contextual_soundness(report, contextual_runs):
    runs, elapsed = contextual_runs
    T = 2000
    problems = []
    worst_eps, worst_sum, worst_cut_ratio = 0.0, 0.0, 0.0
    for (d, seed), (_, traj) in runs.items():
        eps = np.abs(traj.epsilon[traj.phase == BANDIT])
        max_eps = float(eps.max()) if eps.size else 0.0
        worst_eps = max(worst_eps, max_eps)
        worst_sum = max(worst_sum, traj.corruption_sum)
        cuts = int(traj.cut_count[-1])
        worst_cut_ratio = max(worst_cut_ratio, cuts / cut_count_bound(d, T))
        if not traj.s_star_inside.all():
            problems.append((d, seed, "s* left S_t at t", int(np.argmin(traj.s_star_inside)) + 1))
        if traj.violations:
            problems.append((d, seed, "non-compliant E_t rounds", traj.violations))
        if max_eps > 4.0 / T:
            problems.append((d, seed, "max |eps_t|", max_eps))
        if traj.corruption_sum > 4.0:
            problems.append((d, seed, "sum |eps_t|", traj.corruption_sum))
        if cuts > cut_count_bound(d, T):
            problems.append((d, seed, "non-E_t rounds", cuts))
    ok = not problems and elapsed < 300
    report(
        6, ok,
        f"{len(runs)} runs: max|eps_t|={worst_eps:.2e} (limit {4.0 / T:.0e}), max sum|eps_t|={worst_sum:.3f} (limit 4), "
        f"max non-E_t/bound={worst_cut_ratio:.3f}, {len(problems)} problems, {elapsed:.1f}s (limit 300s)",
    )
    assert not problems, problems[:5]
    assert elapsed < 300


def test_criterion_9_sublinear_growth(report, contextual_runs):
    runs, _ = contextual_runs
    r2000, r4000 = [], []
    for seed in range(CTX_SEEDS):
        inst, traj = runs[2, seed]
        r2000.append(regret_curve_ctx(traj, inst)[-1])
        long = run_cipa(inst, 4000, seed=[seed], config=CipaConfig(strict=False))
        r4000.append(regret_curve_ctx(long, inst)[-1])
    ratio = float(np.mean(r4000) / np.mean(r2000))
    ok = ratio < 1.9
    report(9, ok, f"d=2 mean regret T=2000 {np.mean(r2000):.1f}, T=4000 {np.mean(r4000):.1f}, ratio {ratio:.3f} (limit 1.9)")
    assert ratio < 1.9


# ---------------------------------------------------------------------------
# geometry


def test_criterion_7_geometry_oracle(report):
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    err_sup, err_diam, err_cen = [], [], []
    for _ in range(200):
        body = random_body(2, rng)
        grid = GridOracle(body)
        w = random_unit(2, rng)
        err_sup.append(abs(support(body, w) - grid.support(w)))
        err_diam.append(abs(projected_diameter(body, w) - grid.width(w)))
        err_cen.append(float(np.linalg.norm(centroid_cyl(body, None, rng) - grid.centroid)))
    elapsed = time.perf_counter() - start
    ms, md, mc = max(err_sup), max(err_diam), max(err_cen)
    ok = ms <= 1e-3 and md <= 1e-3 and mc <= 2e-2 and elapsed < 120
    report(7, ok, f"200 bodies: max errors support {ms:.2e} / diameter {md:.2e} / centroid {mc:.2e} (limits 1e-3/1e-3/2e-2), {elapsed:.1f}s (limit 120s)")
    assert ms <= 1e-3
    assert md <= 1e-3
    assert mc <= 2e-2
    assert elapsed < 120


def test_criterion_8_cylindrification_containment(report):
    rng = np.random.default_rng(8)
    outside, total = 0, 0
    for _ in range(100):
        d = int(rng.integers(2, 5))
        k = int(rng.integers(1, d))
        body = random_body(d, rng)
        V = np.linalg.qr(rng.standard_normal((d, k)))[0].T
        X = sample_projected(body, None, rng, 10_000)
        assert body.contains_many(X, 1e-9).all()
        inside = in_cylindrification(body, V, X)
        outside += int(np.sum(~inside))
        total += X.shape[0]
    ok = outside == 0
    report(8, ok, f"{total} body points over 100 (body, V) pairs, {outside} outside the cylindrification")
    assert outside == 0
