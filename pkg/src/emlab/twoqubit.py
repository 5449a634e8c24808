"""Closed-form entanglement of formation for two qubits, with an optimal ensemble.

The value follows from the concurrence. The ensemble is built
constructively: Takagi-factorize the symmetric matrix
``tau_ij = <v_i|sigma_y sigma_y|v_j*>`` of subnormalized eigenvectors, then
either equalize preconcurrences with real rotations (entangled case) or
cancel them with phases (separable case).
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, NumericalError
from .tensor_core import DensityMatrix, Ensemble, PureState, entropy_of_spectrum, hermitian_eig

SIGMA_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def _check(rho: DensityMatrix):
    if rho.space.dims != (2, 2):
        raise DimensionError(f"closed form needs a 2x2 space, got dims {rho.space.dims}")


def binary_entropy(x: float) -> float:
    return entropy_of_spectrum([x, 1.0 - x])


def ef_of_concurrence(c: float) -> float:
    c = min(max(c, 0.0), 1.0)
    return binary_entropy(0.5 * (1.0 + np.sqrt(1.0 - c * c)))


def spin_flip(v: np.ndarray) -> np.ndarray:
    return SIGMA_YY @ np.conj(v)


def takagi(a: np.ndarray, tol: float = 1e-12):
    """Factor complex symmetric ``a = Q diag(s) Q^T`` with ``Q`` unitary, ``s`` descending.

    Uses the real symmetric embedding ``[[Re a, Im a], [Im a, -Re a]]`` whose
    positive eigenpairs ``(s, [x; y])`` give Takagi vectors ``x + i y``.
    """
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[0]
    big = np.block([[a.real, a.imag], [a.imag, -a.real]])
    w, v = np.linalg.eigh(big)
    order = np.argsort(w)[::-1]
    scale = max(np.max(np.abs(a), initial=0.0), 1e-300)
    pos = [i for i in order[:n] if w[i] > tol * scale]
    q = v[:n, pos] + 1j * v[n:, pos]
    s = w[pos]
    if q.shape[1] < n:
        # null block: any orthonormal completion
        full, _, _ = np.linalg.svd(np.hstack([q, np.eye(n)]), full_matrices=True)
        comp = full[:, q.shape[1]:n] if q.shape[1] else full[:, :n]
        comp = comp - q @ (q.conj().T @ comp)
        comp, _ = np.linalg.qr(comp)
        q = np.hstack([q, comp[:, : n - q.shape[1]]])
        s = np.concatenate([s, np.zeros(n - s.size)])
    return q, s


def concurrence(rho: DensityMatrix) -> float:
    _check(rho)
    lam = wootters_lambdas(rho)[0]
    return float(max(0.0, lam[0] - lam[1:].sum()))


def wootters_lambdas(rho: DensityMatrix):
    """Descending ``lambda_i`` and the vectors ``x_i`` with ``<x_i|x~_j> = lambda_i delta_ij``."""
    w, v = hermitian_eig(rho.matrix)
    keep = w > 1e-14
    vs = v[:, keep] * np.sqrt(w[keep])
    tau = vs.conj().T @ SIGMA_YY @ vs.conj()  # <v_i|v~_j>, complex symmetric
    tau = 0.5 * (tau + tau.T)
    q, s = takagi(tau)
    x = vs @ q
    lam = np.zeros(4)
    lam[: s.size] = s
    xs = np.zeros((4, 4), dtype=np.complex128)
    xs[:, : x.shape[1]] = x
    return lam, xs


def _equalize(ys: np.ndarray, target: float) -> np.ndarray:
    """Real rotations of the columns of ``ys`` until every preconcurrence equals ``target``."""
    z = ys.copy()
    n = z.shape[1]

    def excess(col):
        return np.real(col @ SIGMA_YY @ col) - target * np.vdot(col, col).real

    for _ in range(n):
        ex = np.array([excess(z[:, i]) for i in range(n)])
        scale = max(np.abs(ex).max(), 1e-300)
        if scale < 1e-15:
            break
        a = int(np.argmax(ex))
        b = int(np.argmin(ex))
        if ex[a] <= 1e-15 or ex[b] >= -1e-15:
            break
        za, zb = z[:, a].copy(), z[:, b].copy()

        def g(theta):
            return excess(np.cos(theta) * za + np.sin(theta) * zb)

        lo, hi = 0.0, np.pi / 2
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) > 0:
                lo = mid
            else:
                hi = mid
        th = 0.5 * (lo + hi)
        z[:, a] = np.cos(th) * za + np.sin(th) * zb
        z[:, b] = -np.sin(th) * za + np.cos(th) * zb
        # the rotated column is pinned exactly at the target
    return z


def _cancel_phases(lam: np.ndarray) -> np.ndarray:
    """Angles ``t`` with ``lam_0 + sum_j lam_j exp(i t_j) = 0`` (polygon closure)."""
    l1, l2, l3, l4 = lam
    if l1 <= 0:
        return np.zeros(3)
    s = max(l1 - l4, l2 - l3)
    gamma = 0.0 if l4 == 0 else np.arccos(np.clip((s * s - l1 * l1 - l4 * l4) / (2 * l1 * l4), -1, 1))
    w = l1 + l4 * np.exp(1j * gamma)
    phi = np.angle(-w)
    delta = 0.0 if (s == 0 or l2 == 0) else np.arccos(np.clip((s * s + l2 * l2 - l3 * l3) / (2 * s * l2), -1, 1))
    alpha = phi + delta
    rest = -w - l2 * np.exp(1j * alpha)
    beta = np.angle(rest) if l3 > 0 else 0.0
    return np.array([alpha, beta, gamma])


def wootters_ensemble(rho: DensityMatrix) -> Ensemble:
    """Ensemble attaining the two-qubit entanglement of formation."""
    _check(rho)
    lam, xs = wootters_lambdas(rho)
    c = lam[0] - lam[1:].sum()
    if c > 0:
        ys = xs * np.array([1, 1j, 1j, 1j])
        zs = _equalize(ys, c)
    else:
        t = _cancel_phases(lam)
        # preconcurrence of z is sum_j lam_j exp(-2i theta_j) / 4, theta_j = -t_j / 2
        ph = np.concatenate([[1.0], np.exp(-0.5j * t)])
        signs = np.array([[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]])
        zs = 0.5 * (xs * ph) @ signs.T
    p = np.sum(np.abs(zs) ** 2, axis=0)
    keep = p > 1e-15
    members = tuple((float(pi), PureState.normalized(rho.space, zs[:, i]))
                    for i, pi in zip(np.flatnonzero(keep), p[keep] / p[keep].sum()))
    ens = Ensemble(members)
    err = np.max(np.abs(ens.density() - rho.matrix))
    if err > 1e-9:
        raise NumericalError(f"Wootters ensemble reconstructs rho only to {err:.3e}")
    return ens
