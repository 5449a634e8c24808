"""User-facing entanglement quantities, each returned with a witness.

``E``     entropy of entanglement of a pure state
``Ef``    entanglement of formation (average over the best ensemble)
``Em``    minimum entanglement over pure states in the support
``Smin``  minimum output entropy of a channel

Optimized values are upper bounds realized by their witness; nothing is
reported without one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import KrausChannel, dual_subspace, stinespring
from .errors import ValidationError
from .optimizer import (
    OptimizerConfig,
    SphereProblem,
    certify_channel,
    certify_ensemble,
    certify_pure,
    minimize_channel_output,
    minimize_ef,
    minimize_entanglement,
)
from .tensor_core import (
    BipartiteCut,
    DensityMatrix,
    Ensemble,
    FactoredSpace,
    PureState,
    entanglement_entropy,
    hermitian_eig,
    support,
)
from .twoqubit import concurrence, ef_of_concurrence, wootters_ensemble

QUANTITIES = ("E", "Ef", "Em", "Smin")
ROUTES = ("direct", "via_duality", "closed_form")


@dataclass
class MeasureResult:
    quantity: str
    value: float
    witness: object
    route: str = "direct"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValidationError(f"unknown quantity {self.quantity!r}", "quantity")
        if self.route not in ROUTES:
            raise ValidationError(f"unknown route {self.route!r}", "route")
        if self.value < -1e-12:
            raise ValidationError(f"negative entropy {self.value}", "value")


def entanglement(phi: PureState, cut: BipartiteCut) -> MeasureResult:
    return MeasureResult("E", entanglement_entropy(phi, cut), phi, "direct")


def _is_pure(rho: DensityMatrix, tol: float = 1e-10) -> bool:
    w = np.linalg.eigvalsh(rho.matrix)
    return bool(np.sum(w > tol * w[-1]) == 1)


def e_m(rho: DensityMatrix, cut: BipartiteCut, cfg: OptimizerConfig | None = None,
        support_tol: float = 1e-10) -> MeasureResult:
    """Minimum entanglement over pure states in the support of ``rho``."""
    cfg = cfg or OptimizerConfig()
    cut.check(rho.space)
    s = support(rho, support_tol)
    res = minimize_entanglement(SphereProblem(s, cut), cfg)
    err = certify_pure(res.value, res.witness, cut)
    diag = res.diagnostics() | {"support_dim": s.k, "certificate_error": err}
    return MeasureResult("Em", res.value, res.witness, "direct", diag)


def is_two_qubit(rho: DensityMatrix, cut: BipartiteCut) -> bool:
    return rho.space.dims == (2, 2) and len(cut.side_a) == 1


def e_f(rho: DensityMatrix, cut: BipartiteCut, cfg: OptimizerConfig | None = None,
        route: str = "auto", warm_ensembles=()) -> MeasureResult:
    """Entanglement of formation with an ensemble witness.

    ``route="auto"`` uses the closed form for two qubits and the ensemble
    optimizer otherwise; ``"direct"`` forces the optimizer.
    """
    cfg = cfg or OptimizerConfig()
    cut.check(rho.space)
    if route == "auto":
        route = "closed_form" if is_two_qubit(rho, cut) else "direct"
    if route == "closed_form":
        if not is_two_qubit(rho, cut):
            raise ValidationError("the closed form applies to two qubits only", "dimensions")
        ens = wootters_ensemble(rho)
        value = ens.average_entanglement(cut)
        c = concurrence(rho)
        formula = ef_of_concurrence(c)
        err = certify_ensemble(value, ens, rho, cut)
        diag = {"concurrence": c, "formula_value": formula,
                "formula_minus_witness": formula - value, "certificate_error": err}
        return MeasureResult("Ef", value, ens, "closed_form", diag)
    if route != "direct":
        raise ValidationError(f"route {route!r} not available for Ef", "route")
    if _is_pure(rho):
        psi = PureState(rho.space, support(rho).basis[:, 0])
        value = entanglement_entropy(psi, cut)
        return MeasureResult("Ef", value, Ensemble(((1.0, psi),)), "direct",
                             {"rank": 1, "certificate_error": 0.0})
    res = minimize_ef(rho, cut, cfg, warm_ensembles=warm_ensembles)
    err = certify_ensemble(res.value, res.witness, rho, cut)
    return MeasureResult("Ef", res.value, res.witness, "direct",
                         res.diagnostics() | {"certificate_error": err})


def s_min(ch: KrausChannel, cfg: OptimizerConfig | None = None, route: str = "direct") -> MeasureResult:
    """Minimum output entropy.

    ``direct`` searches input states through the Kraus operators;
    ``via_duality`` minimizes entanglement across ``env|out`` over the image
    of the Stinespring isometry. The witness is an input state or a state in
    the dual subspace respectively.
    """
    cfg = cfg or OptimizerConfig()
    if route == "direct":
        res = minimize_channel_output(ch, cfg)
        err = certify_channel(res.value, res.witness, ch)
        return MeasureResult("Smin", res.value, res.witness, "direct",
                             res.diagnostics() | {"certificate_error": err})
    if route == "via_duality":
        v = stinespring(ch)
        cut = BipartiteCut((v.env_label,), (v.out_label,))
        warm = tuple(PureState.normalized(v.space, v.isometry @ w.vector) for w in cfg.warm_starts)
        res = minimize_entanglement(SphereProblem(dual_subspace(v), cut), cfg.replace(warm_starts=warm))
        err = certify_pure(res.value, res.witness, cut)
        return MeasureResult("Smin", res.value, res.witness, "via_duality",
                             res.diagnostics() | {"certificate_error": err, "env_dim": v.env_dim})
    raise ValidationError(f"route {route!r} not available for Smin", "route")


def eigen_ensemble(rho: DensityMatrix, tol: float = 1e-10) -> Ensemble:
    w, v = hermitian_eig(rho.matrix)
    keep = w > tol * w[-1]
    p = w[keep] / w[keep].sum()
    return Ensemble(tuple((float(pi), PureState.normalized(rho.space, v[:, i]))
                          for pi, i in zip(p, np.flatnonzero(keep))))


# ----------------------------------------------------- local operations

def apply_local_unitaries(rho: DensityMatrix, unitaries: dict) -> DensityMatrix:
    """Conjugate by ``(x)_f U_f`` with ``U_f`` given per factor label (identity elsewhere)."""
    u = np.ones((1, 1))
    for lab, d in rho.space.factors:
        u = np.kron(u, unitaries.get(lab, np.eye(d)))
    return DensityMatrix(rho.space, u @ rho.matrix @ u.conj().T)


def attach_ancilla(rho: DensityMatrix, label: str, dim: int, level: int = 0) -> DensityMatrix:
    """``rho (x) |level><level|`` on a new factor appended last."""
    a = np.zeros((dim, dim))
    a[level, level] = 1.0
    space = rho.space + FactoredSpace.of((label, dim))
    return DensityMatrix(space, np.kron(rho.matrix, a))
