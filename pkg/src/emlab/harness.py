"""Both sides of every additivity and superadditivity relation, as gap reports.

Sign convention everywhere: ``gap = lhs - sum(rhs)``. Superadditivity
relations predict ``gap >= 0``; additivity relations predict ``gap = 0``.
Nothing here assumes a conjecture is true; reports only measure.

For the additivity checks the product of the single-system witnesses is
always injected as a warm start, which bounds the gap above by rounding
error. A gap below ``-FLAG_TOL`` marks a counterexample candidate.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .channels import KrausChannel, dual_subspace, random_isometry_channel, stinespring, tensor_channels
from .errors import DimensionError, EmlabError, LabelError, ValidationError
from .measures import MeasureResult, e_f, e_m, s_min
from .optimizer import OptimizerConfig
from .sampling import derived_seed, haar_state, haar_subspace, random_density
from .tensor_core import (
    BipartiteCut,
    DensityMatrix,
    Ensemble,
    FactoredSpace,
    PureState,
    Subspace,
    mix,
    partial_trace,
    reduced_state,
    regroup,
    relabel,
    support,
    tensor,
    trace_distance,
)

CHECK_IDS = ("em_add", "em_superadd", "smin_add", "eof_add", "eof_superadd", "duality",
             "pure_superadd", "convexity", "discontinuity")
SAMPLERS = ("haar_state", "haar_subspace", "family")
FLAG_TOL = 1e-6
CONVEXITY_TOL = 1e-4
EF_DIM_CAP = 16


@dataclass
class GapReport:
    check_id: str
    lhs_bits: float
    rhs_terms_bits: list
    gap_bits: float
    witnesses: list = field(default_factory=list)
    cfg: OptimizerConfig | None = None
    seeds: list = field(default_factory=list)
    wall_time: float = 0.0
    flagged: bool = False
    extras: dict = field(default_factory=dict)


@dataclass
class TrialFailure:
    check_id: str
    trial: int
    seeds: list
    error: str


def _report(check_id, lhs: float, rhs: list, witnesses, cfg, started, seeds=(), flagged=None,
            extras=None) -> GapReport:
    rhs = [float(x) for x in rhs]
    gap = float(lhs) - math.fsum(rhs)
    if flagged is None:
        flagged = gap < -FLAG_TOL
    return GapReport(check_id, float(lhs), rhs, gap, list(witnesses), cfg, list(seeds),
                     time.perf_counter() - started, bool(flagged), dict(extras or {}))


def _w(role: str, res: MeasureResult) -> dict:
    return {"role": role, "quantity": res.quantity, "value_bits": res.value, "witness": res.witness,
            "converged": bool(res.diagnostics.get("converged", True))}


def _disjoint(rho, other):
    """Relabel ``other`` with primes until its labels avoid ``rho``'s."""
    while set(rho.space.labels) & set(other.space.labels):
        other = relabel(other, "'")
    return other


def _joint(x, cut: BipartiteCut, y, cut2: BipartiteCut):
    """``x (x) y`` regrouped as (side_a, side_a', side_b, side_b') with the matching cut."""
    y2 = _disjoint(x, y)
    mapping = dict(zip(y.space.labels, y2.space.labels))
    a = tuple(cut.side_a) + tuple(mapping[lab] for lab in cut2.side_a)
    b = tuple(cut.side_b) + tuple(mapping[lab] for lab in cut2.side_b)
    joint = regroup(tensor(x, y2), a + b)
    return joint, BipartiteCut(a, b), mapping


# ------------------------------------------------------------------ E_m


def check_em_additivity(rho: DensityMatrix, rho2: DensityMatrix, cut: BipartiteCut,
                        cut2: BipartiteCut | None = None, cfg: OptimizerConfig | None = None,
                        seeds=()) -> GapReport:
    """``E_m(rho (x) rho') = E_m(rho) + E_m(rho')`` across the combined cut."""
    cfg = cfg or OptimizerConfig()
    cut2 = cut2 or cut
    t0 = time.perf_counter()
    r1 = e_m(rho, cut, cfg)
    r2 = e_m(rho2, cut2, cfg)
    joint, jcut, mapping = _joint(rho, cut, rho2, cut2)
    w2 = relabel(r2.witness, mapping)
    warm = regroup(tensor(r1.witness, w2), jcut.side_a + jcut.side_b)
    lhs = e_m(joint, jcut, cfg.replace(warm_starts=(warm,)))
    return _report("em_add", lhs.value, [r1.value, r2.value],
                   [_w("lhs", lhs), _w("rhs0", r1), _w("rhs1", r2)], cfg, t0, seeds,
                   extras={"lhs_support_dim": lhs.diagnostics["support_dim"]})


def _four_labels(rho):
    if len(rho.space.factors) != 4:
        raise DimensionError(
            f"superadditivity checks need four factors (H1, H2, H1', H2'), got {rho.space.labels}")
    return rho.space.labels


def _support_contained(inner: DensityMatrix, outer: DensityMatrix, tol: float = 1e-8) -> bool:
    return support(outer).contains(support(inner), tol)


def check_em_superadd(rho, cfg: OptimizerConfig | None = None, seeds=(),
                      check_id: str = "em_superadd") -> GapReport:
    """``E_m(rho) >= E_m(tr_H' rho) + E_m(tr_H rho)`` for ``rho`` on ``(H1, H2, H1', H2')``.

    Also records whether the reductions of the lhs witness have supports
    inside the corresponding reductions of ``rho``.
    """
    cfg = cfg or OptimizerConfig()
    if isinstance(rho, PureState):
        rho = rho.projector()
    h1, h2, h1p, h2p = _four_labels(rho)
    t0 = time.perf_counter()
    lhs = e_m(rho, BipartiteCut((h1, h1p), (h2, h2p)), cfg)
    red = partial_trace(rho, (h1, h2))
    red_p = partial_trace(rho, (h1p, h2p))
    r1 = e_m(red, BipartiteCut((h1,), (h2,)), cfg)
    r2 = e_m(red_p, BipartiteCut((h1p,), (h2p,)), cfg)
    contained = (_support_contained(reduced_state(lhs.witness, (h1, h2)), red)
                 and _support_contained(reduced_state(lhs.witness, (h1p, h2p)), red_p))
    return _report(check_id, lhs.value, [r1.value, r2.value],
                   [_w("lhs", lhs), _w("rhs0", r1), _w("rhs1", r2)], cfg, t0, seeds,
                   extras={"support_containment": contained})


def check_pure_superadd(psi: PureState, cfg: OptimizerConfig | None = None, seeds=()) -> GapReport:
    """Strong superadditivity of ``E_m`` restricted to a pure four-factor state."""
    return check_em_superadd(psi.projector(), cfg, seeds, check_id="pure_superadd")


# ---------------------------------------------------------------- S_min


def check_smin_additivity(a: KrausChannel, b: KrausChannel, cfg: OptimizerConfig | None = None,
                          route: str = "direct", seeds=()) -> GapReport:
    """``S_min(a (x) b) = S_min(a) + S_min(b)`` with the product witness as warm start."""
    cfg = cfg or OptimizerConfig()
    t0 = time.perf_counter()
    ra = s_min(a, cfg, "direct")
    rb = s_min(b, cfg, "direct")
    space = FactoredSpace.of(("in", a.in_dim * b.in_dim))
    warm = PureState.normalized(space, np.kron(ra.witness.vector, rb.witness.vector))
    lhs = s_min(tensor_channels(a, b), cfg.replace(warm_starts=(warm,)), route)
    return _report("smin_add", lhs.value, [ra.value, rb.value],
                   [_w("lhs", lhs), _w("rhs0", ra), _w("rhs1", rb)], cfg, t0, seeds)


# ------------------------------------------------------------------ E_f


def _ef_cap(rho, cap):
    if rho.dim > cap:
        raise DimensionError(f"E_f checks are capped at total dimension {cap}, got {rho.dim}")


def check_eof(rho: DensityMatrix, rho2: DensityMatrix | None = None, mode: str = "superadd",
              cut: BipartiteCut | None = None, cut2: BipartiteCut | None = None,
              cfg: OptimizerConfig | None = None, dim_cap: int = EF_DIM_CAP, seeds=()) -> GapReport:
    """Strong superadditivity (``mode="superadd"``) or additivity (``"add"``) of ``E_f``."""
    cfg = cfg or OptimizerConfig()
    t0 = time.perf_counter()
    if mode == "superadd":
        _ef_cap(rho, dim_cap)
        h1, h2, h1p, h2p = _four_labels(rho)
        lhs = e_f(rho, BipartiteCut((h1, h1p), (h2, h2p)), cfg)
        r1 = e_f(partial_trace(rho, (h1, h2)), BipartiteCut((h1,), (h2,)), cfg)
        r2 = e_f(partial_trace(rho, (h1p, h2p)), BipartiteCut((h1p,), (h2p,)), cfg)
        return _report("eof_superadd", lhs.value, [r1.value, r2.value],
                       [_w("lhs", lhs), _w("rhs0", r1), _w("rhs1", r2)], cfg, t0, seeds)
    if mode != "add":
        raise ValidationError(f"unknown E_f check mode {mode!r}", "mode")
    if rho2 is None or cut is None:
        raise ValidationError("E_f additivity needs two states and a cut", "inputs")
    cut2 = cut2 or cut
    r1 = e_f(rho, cut, cfg)
    r2 = e_f(rho2, cut2, cfg)
    joint, jcut, mapping = _joint(rho, cut, rho2, cut2)
    _ef_cap(joint, dim_cap)
    order = jcut.side_a + jcut.side_b
    members = []
    for p, s in r1.witness.members:
        for q, t in r2.witness.members:
            members.append((p * q, regroup(tensor(s, relabel(t, mapping)), order)))
    total = math.fsum(p for p, _ in members)
    warm = Ensemble(tuple((p / total, s) for p, s in members))
    lhs = e_f(joint, jcut, cfg, route="auto", warm_ensembles=(warm,))
    return _report("eof_add", lhs.value, [r1.value, r2.value],
                   [_w("lhs", lhs), _w("rhs0", r1), _w("rhs1", r2)], cfg, t0, seeds)


# -------------------------------------------------------------- duality


def duality_crosscheck(ch: KrausChannel, cfg: OptimizerConfig | None = None,
                       ch2: KrausChannel | None = None, seeds=()) -> GapReport:
    """``E_m(rho_K) = S_min(ch)`` for ``rho_K`` the normalized projector on the dual subspace.

    With ``ch2`` also compares ``E_m(rho_K (x) rho_K')`` with ``S_min(ch (x) ch2)``.
    The flag marks ``|gap| > FLAG_TOL``.
    """
    cfg = cfg or OptimizerConfig()
    t0 = time.perf_counter()
    v = stinespring(ch)
    rho_k = DensityMatrix.from_subspace(dual_subspace(v))
    cut = BipartiteCut((v.env_label,), (v.out_label,))
    em = e_m(rho_k, cut, cfg)
    sm = s_min(ch, cfg, "direct")
    gap = em.value - sm.value
    extras = {"subspace_dim": ch.in_dim, "env_dim": v.env_dim}
    witnesses = [_w("lhs", em), _w("rhs0", sm)]
    flagged = abs(gap) > FLAG_TOL
    if ch2 is not None:
        v2 = stinespring(ch2, env_label="env'", out_label="out'")
        rho_k2 = DensityMatrix.from_subspace(dual_subspace(v2))
        em2 = e_m(rho_k2, BipartiteCut(("env'",), ("out'",)), cfg)
        sm2 = s_min(ch2, cfg, "direct")
        joint, jcut, _ = _joint(rho_k, cut, rho_k2, BipartiteCut(("env'",), ("out'",)))
        warm_em = regroup(tensor(em.witness, em2.witness), jcut.side_a + jcut.side_b)
        t_em = e_m(joint, jcut, cfg.replace(warm_starts=(warm_em,)))
        in_space = FactoredSpace.of(("in", ch.in_dim * ch2.in_dim))
        warm_sm = PureState.normalized(in_space, np.kron(sm.witness.vector, sm2.witness.vector))
        t_sm = s_min(tensor_channels(ch, ch2), cfg.replace(warm_starts=(warm_sm,)), "direct")
        extras.update(tensor_lhs_bits=t_em.value, tensor_rhs_bits=t_sm.value,
                      tensor_gap_bits=t_em.value - t_sm.value)
        witnesses += [_w("tensor_lhs", t_em), _w("tensor_rhs", t_sm)]
        flagged = flagged or abs(t_em.value - t_sm.value) > FLAG_TOL
    return _report("duality", em.value, [sm.value], witnesses, cfg, t0, seeds, flagged, extras)


# ------------------------------------------------------- properties of E_m


def check_convexity(rho1: DensityMatrix, rho2: DensityMatrix, p: float, cut: BipartiteCut,
                    cfg: OptimizerConfig | None = None, seeds=()) -> GapReport:
    """``E_m(p rho1 + (1-p) rho2) <= min(E_m(rho1), E_m(rho2))``.

    The better single-state witness warm-starts the mixture problem, so the
    gap is certified nonpositive up to rounding. Flagged when above
    ``CONVEXITY_TOL``.
    """
    cfg = cfg or OptimizerConfig()
    if not 0.0 < p < 1.0:
        raise ValidationError(f"mixing weight must lie in (0, 1), got {p}", "p")
    t0 = time.perf_counter()
    r1 = e_m(rho1, cut, cfg)
    r2 = e_m(rho2, cut, cfg)
    best = r1 if r1.value <= r2.value else r2
    lhs = e_m(mix(p, rho1, rho2), cut, cfg.replace(warm_starts=(best.witness,)))
    return _report("convexity", lhs.value, [best.value], [_w("lhs", lhs), _w("rhs0", best)], cfg, t0,
                   seeds, flagged=lhs.value - best.value > CONVEXITY_TOL,
                   extras={"p": p, "em_1": r1.value, "em_2": r2.value,
                           "convex_combination_bits": p * r1.value + (1 - p) * r2.value})


def discontinuity_state(epsilon: float) -> DensityMatrix:
    """``(1 - eps) |Phi+><Phi+| + eps |00><00|`` on two qubits ``H1, H2``."""
    space = FactoredSpace.of(("H1", 2), ("H2", 2))
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    zz = np.zeros(4)
    zz[0] = 1.0
    return DensityMatrix(space, (1 - epsilon) * np.outer(phi, phi) + epsilon * np.outer(zz, zz))


def discontinuity_demo(epsilon: float, cfg: OptimizerConfig | None = None, seeds=()) -> GapReport:
    """``E_m`` drops from 1 bit to 0 under an ``epsilon``-small admixture of ``|00>``.

    lhs is ``E_m(rho_eps)``, the single rhs term is ``E_m(rho_0)``; the trace
    distance between the two states is in ``extras``.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValidationError(f"epsilon must lie in (0, 1), got {epsilon}", "epsilon")
    cfg = cfg or OptimizerConfig()
    t0 = time.perf_counter()
    cut = BipartiteCut(("H1",), ("H2",))
    rho_eps = discontinuity_state(epsilon)
    rho_0 = discontinuity_state(0.0)
    lo = e_m(rho_eps, cut, cfg)
    hi = e_m(rho_0, cut, cfg)
    return _report("discontinuity", lo.value, [hi.value], [_w("lhs", lo), _w("rhs0", hi)], cfg, t0,
                   seeds, flagged=False,
                   extras={"epsilon": epsilon, "trace_distance": trace_distance(rho_eps, rho_0),
                           "em_jump_bits": hi.value - lo.value})


# ------------------------------------------------------------- campaigns


@dataclass(frozen=True)
class CampaignSpec:
    check_id: str
    sampler: str
    dims: tuple
    trials: int
    master_seed: int = 0
    cfg: OptimizerConfig = field(default_factory=OptimizerConfig)
    rank: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.check_id not in CHECK_IDS or self.check_id == "discontinuity":
            raise ValidationError(f"no campaign for check {self.check_id!r}", "check_id")
        if self.sampler not in SAMPLERS:
            raise ValidationError(f"unknown sampler {self.sampler!r}", "sampler")
        if self.trials < 1 or any(d < 1 for d in self.dims):
            raise ValidationError("trials and dims must be >= 1", "campaign")
        need = {"pure_superadd": 4, "em_superadd": 4, "eof_superadd": 4, "em_add": 2, "eof_add": 2,
                "convexity": 2, "smin_add": 3, "duality": 3}[self.check_id]
        if len(self.dims) != need:
            raise DimensionError(f"{self.check_id} campaigns need {need} dims, got {self.dims}")
        if self.check_id in ("smin_add", "duality") and self.sampler != "family":
            raise ValidationError("channel campaigns use the 'family' sampler", "sampler")
        if self.check_id not in ("smin_add", "duality") and self.sampler == "family":
            raise ValidationError("the 'family' sampler only produces channels", "sampler")


FOUR = ("H1", "H2", "H1'", "H2'")


def _sample_state(space: FactoredSpace, sampler: str, rank, rng) -> DensityMatrix:
    if sampler == "haar_subspace":
        return DensityMatrix.from_subspace(haar_subspace(space, rank or 2, rng))
    return random_density(space, rng, rank)


def trial_inputs(spec: CampaignSpec, trial_seed: int) -> dict:
    """Inputs for one trial, drawn from a generator seeded by ``trial_seed``."""
    rng = np.random.default_rng(trial_seed)
    d = spec.dims
    cid = spec.check_id
    if cid == "pure_superadd":
        return {"psi": haar_state(FactoredSpace(tuple(zip(FOUR, d))), rng)}
    if cid in ("em_superadd", "eof_superadd"):
        return {"rho": _sample_state(FactoredSpace(tuple(zip(FOUR, d))), spec.sampler, spec.rank, rng)}
    if cid in ("em_add", "eof_add", "convexity"):
        space = FactoredSpace.of(("A", d[0]), ("B", d[1]))
        out = {"rho": _sample_state(space, spec.sampler, spec.rank, rng),
               "rho2": _sample_state(space, spec.sampler, spec.rank, rng),
               "cut": BipartiteCut(("A",), ("B",))}
        if cid == "convexity":
            out["p"] = float(rng.uniform(0.1, 0.9))
        return out
    a_in, env, out_d = d
    seeds = rng.integers(0, 2 ** 32, size=2)
    chans = {"a": random_isometry_channel(a_in, env, out_d, int(seeds[0]))}
    if cid == "smin_add":
        chans["b"] = random_isometry_channel(a_in, env, out_d, int(seeds[1]))
    return chans


def run_check(check_id: str, inputs: dict, cfg: OptimizerConfig, seeds=()) -> GapReport:
    if check_id == "pure_superadd":
        return check_pure_superadd(inputs["psi"], cfg, seeds)
    if check_id == "em_superadd":
        return check_em_superadd(inputs["rho"], cfg, seeds)
    if check_id == "eof_superadd":
        return check_eof(inputs["rho"], mode="superadd", cfg=cfg, seeds=seeds)
    if check_id == "em_add":
        return check_em_additivity(inputs["rho"], inputs["rho2"], inputs["cut"], cfg=cfg, seeds=seeds)
    if check_id == "eof_add":
        return check_eof(inputs["rho"], inputs["rho2"], mode="add", cut=inputs["cut"], cfg=cfg, seeds=seeds)
    if check_id == "convexity":
        return check_convexity(inputs["rho"], inputs["rho2"], inputs["p"], inputs["cut"], cfg, seeds)
    if check_id == "smin_add":
        return check_smin_additivity(inputs["a"], inputs["b"], cfg, seeds=seeds)
    if check_id == "duality":
        return duality_crosscheck(inputs["a"], cfg, seeds=seeds)
    raise ValidationError(f"unknown check {check_id!r}", "check_id")


def run_trial(spec: CampaignSpec, trial: int):
    seed = derived_seed(spec.master_seed, trial)
    seeds = [spec.master_seed, trial, seed]
    try:
        inputs = trial_inputs(spec, seed)
        report = run_check(spec.check_id, inputs, spec.cfg.replace(master_seed=seed), seeds)
        report.extras["trial"] = trial
        return report
    except (EmlabError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return TrialFailure(spec.check_id, trial, seeds, f"{type(exc).__name__}: {exc}")


def _run_trial_star(args):
    return run_trial(*args)


def iter_campaign(spec: CampaignSpec, jobs: int = 1) -> Iterator:
    """Yield trial results in trial order as they become available."""
    tasks = [(spec, i) for i in range(spec.trials)]
    if jobs > 1 and spec.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            yield from pool.map(_run_trial_star, tasks)
    else:
        for t in tasks:
            yield _run_trial_star(t)


def summarize(spec: CampaignSpec, results: list) -> dict:
    done = [r for r in results if isinstance(r, GapReport)]
    gaps = [r.gap_bits for r in done]
    return {
        "summary": True,
        "check_id": spec.check_id,
        "trials": spec.trials,
        "completed": len(done),
        "failed": len(results) - len(done),
        "min_gap_bits": min(gaps) if gaps else None,
        "mean_gap_bits": math.fsum(gaps) / len(gaps) if gaps else None,
        "max_gap_bits": max(gaps) if gaps else None,
        "flagged_trials": [r.extras.get("trial") for r in done if r.flagged],
    }


def run_campaign(spec: CampaignSpec, jobs: int = 1, on_result: Callable | None = None):
    """Run every trial; returns ``(results, summary)``.

    One trial's failure is recorded as a :class:`TrialFailure` and does not
    stop the campaign.
    """
    results = []
    for r in iter_campaign(spec, jobs):
        results.append(r)
        if on_result is not None:
            on_result(r)
    return results, summarize(spec, results)
