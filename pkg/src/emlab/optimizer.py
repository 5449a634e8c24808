"""Multistart minimization of entanglement entropy.

Three problems share one descent engine:

* :func:`minimize_entanglement` - minimize ``E(Bc)`` over unit ``c`` for a
  subspace with orthonormal basis ``B`` (the support form of ``E_m``);
* :func:`minimize_channel_output` - minimize ``S(Lambda(|psi><psi|))`` over
  input states, working directly from the Kraus operators;
* :func:`minimize_ef` - minimize the average entanglement over ensembles
  ``w_i = sum_j U_ij sqrt(lambda_j) e_j`` with ``U`` an ``m x r`` isometry.

All searches are projected gradient descent with Barzilai-Borwein initial
steps and Armijo backtracking. Each restart is seeded from
``(master_seed, restart_index)`` so the result never depends on how
restarts are scheduled. Warm starts run first and win ties.

Returned values are upper bounds on the true minima: every value is
realized by the attached witness.
"""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channels import KrausChannel, apply
from .errors import DimensionError, EmptySupportError, ValidationError
from .sampling import as_rng, haar_isometry, haar_vector
from .tensor_core import (
    ENTROPY_CLIP,
    LN2,
    BipartiteCut,
    DensityMatrix,
    Ensemble,
    FactoredSpace,
    PureState,
    Subspace,
    entanglement_entropy,
    entropy_of_spectrum,
    hermitian_eig,
    von_neumann_entropy,
)

# eigenvalue floor inside gradients only
GRAD_FLOOR = 1e-12
CERTIFICATE_TOL = 1e-9
# stop reasons that count as convergence
# below this tangent-gradient norm a failed line search is round-off, not a stall
PRECISION_GRAD = 1e-6
CONVERGED = ("trivial", "gradient", "zero_value", "precision")


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 32
    max_iters: int = 500
    grad_tol: float = 1e-9
    master_seed: int = 0
    armijo: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 60
    initial_step: float = 1.0
    warm_starts: tuple = ()
    jobs: int = 1

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1:
            raise ValidationError("restarts and max_iters must be >= 1", "optimizer_config")
        if self.grad_tol <= 0 or self.armijo <= 0 or not 0 < self.shrink < 1:
            raise ValidationError("optimizer tolerances must be positive", "optimizer_config")
        object.__setattr__(self, "warm_starts", tuple(self.warm_starts))

    def replace(self, **changes) -> "OptimizerConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class OptimResult:
    value: float
    witness: object
    converged: bool
    iterations_per_restart: list = field(default_factory=list)
    best_restart_index: int = 0
    restart_values: list = field(default_factory=list)
    n_warm: int = 0
    stop_reasons: list = field(default_factory=list)

    def diagnostics(self) -> dict:
        return {
            "converged": self.converged,
            "stop_reasons": list(self.stop_reasons),
            "iterations_per_restart": list(self.iterations_per_restart),
            "best_restart_index": self.best_restart_index,
            "restart_values": [float(v) for v in self.restart_values],
            "n_warm_starts": self.n_warm,
        }


@dataclass(frozen=True, eq=False)
class SphereProblem:
    """Minimize entanglement across ``cut`` over unit vectors of ``subspace``."""

    subspace: Subspace
    cut: BipartiteCut

    def __post_init__(self):
        self.cut.check(self.subspace.space)
        space = self.subspace.space
        a_ax = [space.index(lab) for lab in space.labels if lab in self.cut.side_a]
        b_ax = [space.index(lab) for lab in space.labels if lab in self.cut.side_b]
        d_a = space.dim_of(self.cut.side_a)
        d_b = space.dim // d_a
        k = self.subspace.k
        t = self.subspace.basis.reshape(space.dims + (k,)).transpose(a_ax + b_ax + [len(a_ax) + len(b_ax)])
        t = t.reshape(d_a, d_b, k)
        if d_a > d_b:
            t = t.transpose(1, 0, 2)
            d_a, d_b = d_b, d_a
        # basis reshaped so that (t @ c) is the coefficient matrix, smaller side first
        object.__setattr__(self, "_t", np.ascontiguousarray(t))
        object.__setattr__(self, "_dims", (d_a, d_b))

    @property
    def k(self) -> int:
        return self.subspace.k

    def coeff_matrix(self, c: np.ndarray) -> np.ndarray:
        return self._t @ c

    def value(self, c: np.ndarray) -> float:
        m = self._t @ c
        return entropy_of_spectrum(np.linalg.eigvalsh(m @ m.conj().T) / np.vdot(c, c).real)

    def value_and_grad(self, c: np.ndarray):
        m = self._t @ c
        w, v = np.linalg.eigh(m @ m.conj().T)
        f = entropy_of_spectrum(w)
        logw = np.log2(np.maximum(w, GRAD_FLOOR))
        gm = (v * (-logw - 1.0 / LN2)) @ (v.conj().T @ m)
        g = 2.0 * np.einsum("abk,ab->k", self._t.conj(), gm)
        return f, g

    def coords_of(self, psi: PureState) -> np.ndarray:
        if psi.space.dim != self.subspace.space.dim:
            raise DimensionError("warm start lives on a space of the wrong dimension")
        return self.subspace.basis.conj().T @ psi.vector


class ChannelOutputProblem:
    """Minimize ``S(Lambda(|psi><psi|))`` over unit ``psi`` in the input space."""

    def __init__(self, ch: KrausChannel):
        self.channel = ch
        self._a = ch.stacked()
        self.space = FactoredSpace.of(("in", ch.in_dim))

    @property
    def k(self) -> int:
        return self.channel.in_dim

    def _output(self, c):
        y = self._a @ c
        return y.T @ y.conj()

    def value(self, c: np.ndarray) -> float:
        out = self._output(c)
        return entropy_of_spectrum(np.linalg.eigvalsh(out) / np.vdot(c, c).real)

    def value_and_grad(self, c: np.ndarray):
        out = self._output(c)
        w, v = np.linalg.eigh(out)
        f = entropy_of_spectrum(w)
        logw = np.log2(np.maximum(w, GRAD_FLOOR))
        gop = (v * (-logw - 1.0 / LN2)) @ v.conj().T
        # 2 sum_k A_k^dag G A_k c
        g = 2.0 * np.einsum("kji,jm,kml,l->i", self._a.conj(), gop, self._a, c, optimize=True)
        return f, g

    def coords_of(self, psi: PureState) -> np.ndarray:
        if psi.space.dim != self.k:
            raise DimensionError("warm start lives on a space of the wrong dimension")
        return np.array(psi.vector)


def entanglement_gradient(coords, problem: SphereProblem) -> np.ndarray:
    """Euclidean gradient ``df/dRe(c) + i df/dIm(c)`` in bits.

    ``f(c) = -tr(rho log2 rho)`` with ``rho = tr_B |Bc><Bc|`` left unnormalized,
    which equals ``E(Bc)`` on the unit sphere. The radial component is not
    meaningful for the sphere problem; callers project with :func:`tangent`.
    """
    return problem.value_and_grad(np.asarray(coords, dtype=np.complex128))[1]


def tangent(c: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Project ``g`` onto the tangent space of the unit sphere at ``c``."""
    return g - np.vdot(c, g).real * c


def _sphere_descent(problem, c0: np.ndarray, cfg: OptimizerConfig):
    c = c0 / np.linalg.norm(c0)
    if problem.k == 1:
        return c, problem.value(c), 0, "trivial"
    f, g = problem.value_and_grad(c)
    gt = tangent(c, g)
    step = cfg.initial_step
    status = "max_iters"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        gnorm2 = np.vdot(gt, gt).real
        if math.sqrt(gnorm2) <= cfg.grad_tol or f <= 0.0:
            status = "gradient" if f > 0.0 else "zero_value"
            it -= 1
            break
        t = step
        for _ in range(cfg.max_backtracks):
            trial = c - t * gt
            trial /= np.linalg.norm(trial)
            f_new = problem.value(trial)
            if f_new <= f - cfg.armijo * t * gnorm2:
                break
            t *= cfg.shrink
        else:
            status = "precision" if math.sqrt(gnorm2) <= PRECISION_GRAD else "stalled"
            it -= 1
            break
        f_new, g_new = problem.value_and_grad(trial)
        gt_new = tangent(trial, g_new)
        s = trial - c
        y = gt_new - gt
        sy = np.vdot(s, y).real
        step = min(max(np.vdot(s, s).real / sy, 1e-8), 1e4) if sy > 0 else min(2.0 * t, 1e4)
        c, f, gt = trial, f_new, gt_new
    return c, f, it, status


def _restart_starts(k: int, cfg: OptimizerConfig, warm: list) -> list:
    starts = [np.asarray(w, dtype=np.complex128) for w in warm]
    for j in range(cfg.restarts):
        rng = as_rng(np.random.SeedSequence([cfg.master_seed, j]))
        starts.append(haar_vector(k, rng))
    return starts


def _run_restarts(fn: Callable, starts: list, jobs: int):
    if jobs > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, starts))
    return [fn(s) for s in starts]


def _best(results) -> int:
    # lowest index wins ties
    best = 0
    for i, r in enumerate(results):
        if r[1] < results[best][1]:
            best = i
    return best


def _sphere_minimize(problem, cfg: OptimizerConfig, warm_coords: list):
    warm = []
    for c in warm_coords:
        n = np.linalg.norm(c)
        if n > 1e-12:
            warm.append(c / n)
    starts = _restart_starts(problem.k, cfg, warm)
    results = _run_restarts(lambda s: _sphere_descent(problem, s, cfg), starts, cfg.jobs)
    best = _best(results)
    return results, best, len(warm)


def minimize_entanglement(problem: SphereProblem, cfg: OptimizerConfig | None = None) -> OptimResult:
    """Smallest entanglement found over unit vectors of ``problem.subspace``.

    Warm starts in ``cfg.warm_starts`` are ambient :class:`PureState` objects;
    they are projected onto the subspace and descended like any restart.
    """
    cfg = cfg or OptimizerConfig()
    if problem.k < 1:
        raise EmptySupportError("empty subspace")
    warm = [problem.coords_of(w) for w in cfg.warm_starts]
    results, best, n_warm = _sphere_minimize(problem, cfg, warm)
    c, f, _, conv = results[best]
    return OptimResult(
        value=float(f),
        witness=problem.subspace.state(c),
        converged=conv in CONVERGED,
        stop_reasons=[r[3] for r in results],
        iterations_per_restart=[r[2] for r in results],
        best_restart_index=best,
        restart_values=[r[1] for r in results],
        n_warm=n_warm,
    )


def minimize_channel_output(ch: KrausChannel, cfg: OptimizerConfig | None = None) -> OptimResult:
    """Smallest output entropy found over pure inputs of ``ch``."""
    cfg = cfg or OptimizerConfig()
    problem = ChannelOutputProblem(ch)
    warm = [problem.coords_of(w) for w in cfg.warm_starts]
    results, best, n_warm = _sphere_minimize(problem, cfg, warm)
    c, f, _, conv = results[best]
    return OptimResult(
        value=float(f),
        witness=PureState.normalized(problem.space, c),
        converged=conv in CONVERGED,
        stop_reasons=[r[3] for r in results],
        iterations_per_restart=[r[2] for r in results],
        best_restart_index=best,
        restart_values=[r[1] for r in results],
        n_warm=n_warm,
    )


# ------------------------------------------------------------------- E_f


class EnsembleProblem:
    """Average entanglement of the ensemble generated by an ``m x r`` isometry ``U``.

    Members are ``w_i = sum_j U_ij sqrt(lambda_j) e_j`` with ``(lambda_j, e_j)``
    the nonzero eigenpairs of ``rho``; any isometry ``U`` reproduces ``rho``.
    """

    def __init__(self, rho: DensityMatrix, cut: BipartiteCut, ensemble_size: int | None = None,
                 support_tol: float = 1e-10):
        cut.check(rho.space)
        self.rho = rho
        self.cut = cut
        w, v = hermitian_eig(rho.matrix)
        keep = w > support_tol * w[-1]
        lam = w[keep][::-1]
        vecs = v[:, keep][:, ::-1]
        self.rank = lam.size
        self.m = ensemble_size or self.rank ** 2
        if self.m < self.rank:
            raise ValidationError("ensemble size must be >= rank", "ensemble_size")
        self.eigvals = lam
        self.eigvecs = vecs
        space = rho.space
        a_ax = [space.index(lab) for lab in space.labels if lab in cut.side_a]
        b_ax = [space.index(lab) for lab in space.labels if lab in cut.side_b]
        d_a = space.dim_of(cut.side_a)
        d_b = space.dim // d_a
        amp = (vecs * np.sqrt(lam)).T  # rows sqrt(lambda_j) e_j
        t = amp.reshape((self.rank,) + space.dims).transpose([0] + [1 + i for i in a_ax + b_ax])
        t = t.reshape(self.rank, d_a, d_b)
        if d_a > d_b:
            t = t.transpose(0, 2, 1)
            d_a, d_b = d_b, d_a
        self._dims = (d_a, d_b)
        self._amp = t.reshape(self.rank, d_a * d_b)

    def _members(self, u):
        m = (u @ self._amp).reshape(u.shape[0], *self._dims)
        red = m @ m.conj().transpose(0, 2, 1)
        return m, red

    def value(self, u: np.ndarray) -> float:
        _, red = self._members(u)
        mu = np.linalg.eigvalsh(red)
        return _weighted_entropy(mu)

    def value_and_grad(self, u: np.ndarray):
        m, red = self._members(u)
        mu, vec = np.linalg.eigh(red)
        f = _weighted_entropy(mu)
        p = mu.sum(axis=1)
        live = p > 0
        logp = np.zeros_like(p)
        logp[live] = np.log2(p[live])
        floor = np.maximum(GRAD_FLOOR * p, 1e-300)[:, None]
        diag = -np.log2(np.maximum(mu, floor)) + logp[:, None]
        diag[~live] = 0.0
        gm = 2.0 * (vec * diag[:, None, :]) @ (vec.conj().transpose(0, 2, 1) @ m)
        grad = gm.reshape(u.shape[0], -1) @ self._amp.conj().T
        return f, grad

    def ensemble(self, u: np.ndarray, drop: float = 1e-15) -> Ensemble:
        """Witness ensemble in the original factor ordering."""
        w = u @ (self.eigvecs * np.sqrt(self.eigvals)).T
        p = np.sum(np.abs(w) ** 2, axis=1)
        keep = p > drop
        p_kept = p[keep] / p[keep].sum()
        members = tuple((float(pi), PureState.normalized(self.rho.space, wi))
                        for pi, wi in zip(p_kept, w[keep]))
        return Ensemble(members)

    def isometry_of(self, ens: Ensemble) -> np.ndarray:
        """Mixing matrix reproducing ``ens`` (rows padded with zeros up to ``m``)."""
        rows = [np.sqrt(p) * s.vector for p, s in ens.members]
        u = np.array(rows) @ self.eigvecs.conj() / np.sqrt(self.eigvals)
        if u.shape[0] < self.m:
            u = np.vstack([u, np.zeros((self.m - u.shape[0], self.rank))])
        return _polar(u)


def _weighted_entropy(mu: np.ndarray) -> float:
    """``sum_i p_i S(mu_i / p_i)`` over rows of unnormalized spectra."""
    mu = np.clip(mu, 0.0, None)
    p = mu.sum(axis=1)
    live = p > 0
    q = mu[live] / p[live, None]
    h = np.where(q > ENTROPY_CLIP, -q * np.log2(np.where(q > ENTROPY_CLIP, q, 1.0)), 0.0)
    return float(max(np.sum(p[live] * h.sum(axis=1)), 0.0))


def _polar(x: np.ndarray) -> np.ndarray:
    w, _, vh = np.linalg.svd(x, full_matrices=False)
    return w @ vh


def _stiefel_tangent(u, g):
    s = u.conj().T @ g
    return g - u @ (0.5 * (s + s.conj().T))


def _stiefel_descent(problem: EnsembleProblem, u0: np.ndarray, cfg: OptimizerConfig):
    u = _polar(u0)
    if problem.rank == 1 and problem.m == 1:
        return u, problem.value(u), 0, "trivial"
    f, g = problem.value_and_grad(u)
    xi = _stiefel_tangent(u, g)
    step = cfg.initial_step
    status = "max_iters"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        gnorm2 = np.vdot(xi, xi).real
        if math.sqrt(gnorm2) <= cfg.grad_tol or f <= 0.0:
            status = "gradient" if f > 0.0 else "zero_value"
            it -= 1
            break
        t = step
        for _ in range(cfg.max_backtracks):
            trial = _polar(u - t * xi)
            f_new = problem.value(trial)
            if f_new <= f - cfg.armijo * t * gnorm2:
                break
            t *= cfg.shrink
        else:
            status = "precision" if math.sqrt(gnorm2) <= PRECISION_GRAD else "stalled"
            it -= 1
            break
        f_new, g_new = problem.value_and_grad(trial)
        xi_new = _stiefel_tangent(trial, g_new)
        s = trial - u
        y = xi_new - xi
        sy = np.vdot(s, y).real
        step = min(max(np.vdot(s, s).real / sy, 1e-8), 1e4) if sy > 0 else min(2.0 * t, 1e4)
        u, f, xi = trial, f_new, xi_new
    return u, f, it, status


def minimize_ef(rho: DensityMatrix, cut: BipartiteCut, cfg: OptimizerConfig | None = None,
                warm_ensembles: Sequence[Ensemble] = (), ensemble_size: int | None = None) -> OptimResult:
    """Smallest average entanglement found over ensembles realizing ``rho``.

    Restart 0 is always the eigen-ensemble, followed by ``warm_ensembles``
    and ``cfg.restarts`` Haar-random mixing isometries.
    """
    cfg = cfg or OptimizerConfig()
    sizes = [ensemble_size or 0] + [len(e.members) for e in warm_ensembles]
    probe = EnsembleProblem(rho, cut)
    problem = EnsembleProblem(rho, cut, ensemble_size=max([probe.m] + sizes))
    r, m = problem.rank, problem.m
    eye = np.zeros((m, r), dtype=np.complex128)
    eye[:r, :r] = np.eye(r)
    starts = [eye] + [problem.isometry_of(e) for e in warm_ensembles]
    n_warm = len(starts)
    if not (r == 1 and m == 1):
        for j in range(cfg.restarts):
            rng = as_rng(np.random.SeedSequence([cfg.master_seed, j]))
            starts.append(haar_isometry(m, r, rng))
    results = _run_restarts(lambda s: _stiefel_descent(problem, s, cfg), starts, cfg.jobs)
    best = _best(results)
    u, f, _, conv = results[best]
    return OptimResult(
        value=float(f),
        witness=problem.ensemble(u),
        converged=conv in CONVERGED,
        stop_reasons=[x[3] for x in results],
        iterations_per_restart=[x[2] for x in results],
        best_restart_index=best,
        restart_values=[x[1] for x in results],
        n_warm=n_warm,
    )


# ------------------------------------------------------------ certificates


def certify_pure(value: float, witness: PureState, cut: BipartiteCut, tol: float = CERTIFICATE_TOL) -> float:
    """Re-evaluate a pure witness along an independent path; return the discrepancy."""
    err = abs(entanglement_entropy(witness, cut) - value)
    if err > tol:
        raise ValidationError(f"witness re-evaluates {err:.3e} away from reported value", "certificate")
    return err


def certify_channel(value: float, witness: PureState, ch: KrausChannel, tol: float = CERTIFICATE_TOL) -> float:
    err = abs(von_neumann_entropy(apply(ch, witness.projector())) - value)
    if err > tol:
        raise ValidationError(f"witness re-evaluates {err:.3e} away from reported value", "certificate")
    return err


def certify_ensemble(value: float, witness: Ensemble, rho: DensityMatrix, cut: BipartiteCut,
                     tol: float = CERTIFICATE_TOL) -> float:
    recon = np.max(np.abs(witness.density() - rho.matrix))
    if recon > tol:
        raise ValidationError(f"ensemble reconstructs rho only to {recon:.3e}", "certificate")
    err = abs(witness.average_entanglement(cut) - value)
    if err > tol:
        raise ValidationError(f"ensemble re-evaluates {err:.3e} away from reported value", "certificate")
    return max(err, recon)
