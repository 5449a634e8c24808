"""Acceptance gate: twelve criteria at their stated tolerances.

Each test records one ``criterion NN ... PASS|FAIL`` line, printed in the
terminal summary.
"""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from emlab import harness
from emlab.channels import depolarizing, random_isometry_channel, stinespring, werner_holevo
from emlab.measures import e_f, e_m, entanglement, s_min
from emlab.optimizer import OptimizerConfig, SphereProblem, certify_pure, entanglement_gradient
from emlab.sampling import haar_state, haar_subspace, haar_vector, random_density
from emlab.tensor_core import (
    BipartiteCut,
    DensityMatrix,
    FactoredSpace,
    PureState,
    Subspace,
    entanglement_entropy,
    reduced_state,
    support,
)

import oracles

CFG = OptimizerConfig()
CUT = BipartiteCut(("A",), ("B",))


def record(number, name, ok, detail, started):
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append(
        f"criterion {number:02d} {name}: {status} ({detail}; {time.perf_counter() - started:.1f}s)")
    assert ok, detail


def test_01_pure_state_collapse():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_m = worst_f = 0.0
    for da, db in ((2, 2), (2, 3), (3, 3)):
        space = FactoredSpace.of(("A", da), ("B", db))
        for _ in range(50):
            psi = haar_state(space, rng)
            e = oracles.pure_entropy(psi.vector, da, db)
            rho = psi.projector()
            worst_m = max(worst_m, abs(e_m(rho, CUT, CFG).value - e))
            worst_f = max(worst_f, abs(e_f(rho, CUT, CFG).value - e))
    record(1, "pure-state collapse", worst_m <= 1e-6 and worst_f <= 1e-4,
           f"max|e_m-E|={worst_m:.1e}, max|e_f-E|={worst_f:.1e}", t0)


def test_02_output_entropy_equals_dilated_entanglement():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(50):
        d_in, d_env, d_out = rng.integers(1, 4, size=3)
        d_in = min(d_in, d_env * d_out)
        ch = random_isometry_channel(int(d_in), int(d_env), int(d_out), int(rng.integers(2**32)))
        v = stinespring(ch)
        phi = haar_vector(int(d_in), rng)
        s_out = oracles.entropy_bits(ch(np.outer(phi, phi.conj())))
        e = entanglement_entropy(PureState.normalized(v.space, v.isometry @ phi),
                                 BipartiteCut((v.env_label,), (v.out_label,)))
        worst = max(worst, abs(s_out - e))
    record(2, "E-S relation", worst <= 1e-9, f"max gap={worst:.1e}", t0)


def test_03_smin_route_agreement():
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(20):
        d_in, d_env, d_out = (int(x) for x in rng.integers(2, 4, size=3))
        ch = random_isometry_channel(d_in, d_env, d_out, int(rng.integers(2**32)))
        a = s_min(ch, CFG, "direct").value
        b = s_min(ch, CFG, "via_duality").value
        worst = max(worst, abs(a - b))
    record(3, "S_min route agreement", worst <= 1e-6, f"max|direct-dual|={worst:.1e}", t0)


def test_04_depolarizing_oracle():
    t0 = time.perf_counter()
    grid = oracles.qubit_depolarizing_smin_grid(0.5)
    analytic = -(0.75 * np.log2(0.75) + 0.25 * np.log2(0.25))
    dep = depolarizing(2, 0.5)
    value = s_min(dep, CFG).value
    rep = harness.check_smin_additivity(dep, dep, CFG)
    ok = (abs(value - analytic) <= 1e-6 and abs(grid - analytic) <= 1e-6
          and abs(rep.lhs_bits - 1.622556) <= 1e-3)
    record(4, "depolarizing oracle", ok,
           f"s_min={value:.7f}, grid={grid:.7f}, tensor lhs={rep.lhs_bits:.6f}", t0)


def test_05_antisymmetric_benchmark():
    t0 = time.perf_counter()
    space = FactoredSpace.of(("A", 3), ("B", 3))
    anti = Subspace(space, oracles.antisymmetric_basis(3))
    rho = DensityMatrix.from_subspace(anti)
    oracle = oracles.min_entropy_by_sampling(anti.basis, 3, 3, 2000, np.random.default_rng(105))
    single = e_m(rho, CUT, CFG).value
    dual = harness.duality_crosscheck(werner_holevo(3), CFG)
    pair = harness.check_em_additivity(rho, rho, CUT, cfg=CFG)
    ok = (abs(oracle - 1.0) <= 1e-4 and abs(single - oracle) <= 1e-4
          and abs(dual.gap_bits) <= 1e-4 and abs(pair.lhs_bits - 2.0) <= 1e-3)
    record(5, "antisymmetric benchmark", ok,
           f"e_m={single:.6f}, oracle={oracle:.6f}, duality gap={dual.gap_bits:.1e}, "
           f"tensor e_m={pair.lhs_bits:.6f}", t0)


def test_06_two_qubit_ef_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(106)
    space = FactoredSpace.of(("A", 2), ("B", 2))
    worst = worst_oracle = 0.0
    for _ in range(20):
        rho = random_density(space, rng)
        direct = e_f(rho, CUT, CFG, route="direct").value
        closed = e_f(rho, CUT, CFG, route="closed_form").value
        worst = max(worst, abs(direct - closed))
        worst_oracle = max(worst_oracle, abs(closed - oracles.ef_two_qubit(rho.matrix)))
    record(6, "two-qubit E_f oracle", worst <= 1e-3 and worst_oracle <= 1e-6,
           f"max|optimizer-closed form|={worst:.1e}, closed form vs oracle={worst_oracle:.1e}", t0)


def test_07_gradient_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(107)
    worst = 0.0
    h = 1e-5
    for _ in range(30):
        da, db = (int(x) for x in rng.integers(2, 4, size=2))
        space = FactoredSpace.of(("A", da), ("B", db))
        k = int(rng.integers(2, da * db + 1))
        s = haar_subspace(space, k, rng)
        c = haar_vector(k, rng)
        g = entanglement_gradient(c, SphereProblem(s, CUT))

        def f(x):
            v = s.basis @ x
            w = np.linalg.eigvalsh(oracles.ptrace_first(np.outer(v, v.conj()), da, db))
            w = w[w > 1e-15]
            return float(-np.sum(w * np.log2(w)))

        g_fd = np.zeros(k, dtype=complex)
        for i in range(k):
            e = np.zeros(k, dtype=complex)
            e[i] = h
            g_fd[i] = (f(c + e) - f(c - e)) / (2 * h) + 1j * (f(c + 1j * e) - f(c - 1j * e)) / (2 * h)
        worst = max(worst, np.linalg.norm(g - g_fd) / np.linalg.norm(g_fd))
    record(7, "gradient correctness", worst <= 1e-5, f"max relative error={worst:.1e}", t0)


def test_08_constructive_subadditivity():
    t0 = time.perf_counter()
    em = harness.CampaignSpec("em_add", "haar_state", (2, 3), 20, master_seed=108, cfg=CFG, rank=2)
    sm = harness.CampaignSpec("smin_add", "family", (2, 2, 2), 20, master_seed=108, cfg=CFG)
    reports = harness.run_campaign(em)[0] + harness.run_campaign(sm)[0]
    done = [r for r in reports if isinstance(r, harness.GapReport)]
    worst = max(r.gap_bits for r in done)
    flags = sum(r.flagged for r in done)
    ok = len(done) == 40 and worst <= 1e-9 and flags == 0
    record(8, "constructive subadditivity", ok,
           f"{len(done)}/40 completed, max gap={worst:.1e}, flags={flags}", t0)


def test_09_hierarchy_and_convexity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(109)
    space = FactoredSpace.of(("A", 2), ("B", 2))
    worst_h = -np.inf
    for _ in range(20):
        rho = random_density(space, rng, rank=int(rng.integers(1, 4)))
        worst_h = max(worst_h, e_m(rho, CUT, CFG).value - e_f(rho, CUT, CFG).value)
    spec = harness.CampaignSpec("convexity", "haar_state", (2, 2), 20, master_seed=109, cfg=CFG, rank=2)
    conv = [r for r in harness.run_campaign(spec)[0] if isinstance(r, harness.GapReport)]
    ps = [r.extras["p"] for r in conv]
    worst_c = max(r.gap_bits for r in conv)
    ok = worst_h <= 1e-9 and len(conv) == 20 and worst_c <= 1e-4 and 0.1 <= min(ps) and max(ps) <= 0.9
    record(9, "hierarchy and convexity", ok,
           f"max(e_m-e_f)={worst_h:.1e}, max convexity gap={worst_c:.1e}", t0)


def test_10_discontinuity():
    t0 = time.perf_counter()
    rep = harness.discontinuity_demo(1e-3, CFG)
    ok = rep.lhs_bits <= 1e-6 and abs(rep.rhs_terms_bits[0] - 1.0) <= 1e-9
    record(10, "discontinuity demo", ok,
           f"e_m(eps)={rep.lhs_bits:.1e}, e_m(0)={rep.rhs_terms_bits[0]:.12f}, "
           f"trace distance={rep.extras['trace_distance']:.1e}", t0)


def test_11_determinism():
    t0 = time.perf_counter()
    spec = harness.CampaignSpec("em_superadd", "haar_state", (2, 2, 2, 2), 6, master_seed=111,
                                cfg=CFG.replace(restarts=8), rank=3)
    a = harness.run_campaign(spec, jobs=1)[0]
    b = harness.run_campaign(spec, jobs=2)[0]
    c = harness.run_campaign(spec, jobs=1)[0]
    diffs = [max(abs(x.gap_bits - y.gap_bits), abs(x.gap_bits - z.gap_bits)) for x, y, z in zip(a, b, c)]
    ok = all(isinstance(x, harness.GapReport) for x in a + b + c) and max(diffs) <= 1e-12
    record(11, "determinism", ok, f"max rerun difference={max(diffs):.1e}", t0)


def test_12_pure_strong_superadditivity_campaign():
    t0 = time.perf_counter()
    spec = harness.CampaignSpec("pure_superadd", "haar_state", (2, 2, 2, 2), 50, master_seed=112, cfg=CFG)
    results, summary = harness.run_campaign(spec)
    done = [r for r in results if isinstance(r, harness.GapReport)]
    valid = 0
    for r in done:
        lhs = r.witnesses[0]
        psi = lhs["witness"]
        h1, h2, h1p, h2p = psi.space.labels
        certify_pure(lhs["value_bits"], psi, BipartiteCut((h1, h1p), (h2, h2p)))
        ok_terms = all(np.isfinite(t) for t in r.rhs_terms_bits)
        ok_sum = abs(r.gap_bits - (r.lhs_bits - sum(r.rhs_terms_bits))) <= 1e-12
        valid += ok_terms and ok_sum and r.extras["support_containment"]
    ok = len(done) == 50 and valid == 50
    record(12, "pure-state superadditivity campaign", ok,
           f"{valid}/50 valid signed-gap reports, gaps in [{summary['min_gap_bits']:.3f}, "
           f"{summary['max_gap_bits']:.3f}]", t0)
