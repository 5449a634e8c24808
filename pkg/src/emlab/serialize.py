"""JSON value formats.

Complex scalars are ``[re, im]`` pairs; matrices are
``{"rows": r, "cols": c, "entries": [[re, im], ...]}`` in row-major order;
states, subspaces, ensembles and channels wrap these with a ``"kind"`` tag.
"""
from __future__ import annotations

import json

import numpy as np

from .channels import ChannelFamilySpec, KrausChannel, StinespringIsometry, make_family
from .errors import ValidationError
from .harness import GapReport, TrialFailure
from .measures import MeasureResult
from .optimizer import OptimizerConfig
from .tensor_core import LN2, DensityMatrix, Ensemble, FactoredSpace, PureState, Subspace


def complex_to_json(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _complex_from_json(x) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if not (isinstance(x, (list, tuple)) and len(x) == 2):
        raise ValidationError(f"complex scalar must be [re, im], got {x!r}", "json_format")
    return complex(float(x[0]), float(x[1]))


def matrix_to_json(m) -> dict:
    m = np.atleast_2d(np.asarray(m))
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]),
            "entries": [complex_to_json(z) for z in m.reshape(-1)]}


def matrix_from_json(obj) -> np.ndarray:
    try:
        rows, cols, entries = int(obj["rows"]), int(obj["cols"]), obj["entries"]
    except (KeyError, TypeError):
        raise ValidationError("matrix needs rows, cols and entries", "json_format") from None
    if len(entries) != rows * cols:
        raise ValidationError(f"matrix has {len(entries)} entries, expected {rows}x{cols}", "entries_length")
    return np.array([_complex_from_json(z) for z in entries], dtype=np.complex128).reshape(rows, cols)


def space_to_json(space: FactoredSpace) -> dict:
    return {"factors": [{"label": lab, "dim": d} for lab, d in space.factors]}


def space_from_json(obj) -> FactoredSpace:
    try:
        return FactoredSpace(tuple((f["label"], int(f["dim"])) for f in obj["factors"]))
    except (KeyError, TypeError):
        raise ValidationError("space needs factors: [{label, dim}, ...]", "json_format") from None


def to_json(x):
    """JSON-ready form of any emlab value."""
    if isinstance(x, DensityMatrix):
        return {"kind": "density_matrix", "space": space_to_json(x.space), "matrix": matrix_to_json(x.matrix)}
    if isinstance(x, PureState):
        return {"kind": "pure_state", "space": space_to_json(x.space),
                "vector": [complex_to_json(z) for z in x.vector]}
    if isinstance(x, Subspace):
        return {"kind": "subspace", "space": space_to_json(x.space), "basis": matrix_to_json(x.basis)}
    if isinstance(x, Ensemble):
        return {"kind": "ensemble",
                "members": [{"weight": p, "state": to_json(s)} for p, s in x.members]}
    if isinstance(x, KrausChannel):
        return {"kind": "kraus", "in_dim": x.in_dim, "out_dim": x.out_dim,
                "ops": [matrix_to_json(a) for a in x.kraus_ops]}
    if isinstance(x, StinespringIsometry):
        return {"kind": "stinespring", "space": space_to_json(x.space), "env_label": x.env_label,
                "isometry": matrix_to_json(x.isometry)}
    if isinstance(x, OptimizerConfig):
        return config_to_json(x)
    if isinstance(x, MeasureResult):
        return measure_to_json(x)
    if isinstance(x, GapReport):
        return report_to_json(x)
    if isinstance(x, TrialFailure):
        return {"check_id": x.check_id, "trial": x.trial, "seeds": x.seeds, "error": x.error}
    if isinstance(x, dict):
        return {str(k): to_json(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_json(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return complex_to_json(x)
    if isinstance(x, np.ndarray):
        return to_json(x.tolist())
    return x


def from_json(obj):
    """Inverse of :func:`to_json` for kind-tagged states, subspaces, ensembles and channels."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("expected an object with a 'kind' tag", "json_format")
    kind = obj["kind"]
    try:
        if kind == "density_matrix":
            return DensityMatrix(space_from_json(obj["space"]), matrix_from_json(obj["matrix"]))
        if kind == "pure_state":
            vec = [_complex_from_json(z) for z in obj["vector"]]
            return PureState(space_from_json(obj["space"]), vec)
        if kind == "subspace":
            return Subspace(space_from_json(obj["space"]), matrix_from_json(obj["basis"]))
        if kind == "ensemble":
            return Ensemble(tuple((float(m["weight"]), from_json(m["state"])) for m in obj["members"]))
        if kind == "kraus":
            ops = tuple(matrix_from_json(m) for m in obj["ops"])
            return KrausChannel(int(obj["in_dim"]), int(obj["out_dim"]), ops)
        if kind == "family":
            seed = obj.get("seed")
            return make_family(ChannelFamilySpec(obj["family"], dict(obj.get("params", {})),
                                                 None if seed is None else int(seed)))
        if kind == "stinespring":
            return StinespringIsometry(space_from_json(obj["space"]), matrix_from_json(obj["isometry"]),
                                       obj["env_label"])
    except KeyError as exc:
        raise ValidationError(f"{kind} object missing field {exc}", "json_format") from None
    raise ValidationError(f"unknown kind {kind!r}", "json_format")


def config_to_json(cfg: OptimizerConfig) -> dict:
    return {"restarts": cfg.restarts, "max_iters": cfg.max_iters, "grad_tol": cfg.grad_tol,
            "seed": cfg.master_seed, "warm_starts": [to_json(w) for w in cfg.warm_starts]}


def config_from_json(obj: dict, base: OptimizerConfig | None = None) -> OptimizerConfig:
    base = base or OptimizerConfig()
    changes = {}
    for key, attr, cast in (("restarts", "restarts", int), ("max_iters", "max_iters", int),
                            ("grad_tol", "grad_tol", float), ("seed", "master_seed", int)):
        if key in obj:
            changes[attr] = cast(obj[key])
    if "warm_starts" in obj:
        changes["warm_starts"] = tuple(from_json(w) for w in obj["warm_starts"])
    return base.replace(**changes)


def _scale(units: str) -> float:
    if units not in ("bits", "nats"):
        raise ValidationError(f"unknown units {units!r}", "units")
    return 1.0 if units == "bits" else LN2


def measure_to_json(res: MeasureResult, units: str = "bits") -> dict:
    k = _scale(units)
    return {"quantity": res.quantity, f"value_{units}": res.value * k, "route": res.route,
            "witness": to_json(res.witness), "diagnostics": to_json(res.diagnostics)}


def report_to_json(rep: GapReport, units: str = "bits") -> dict:
    k = _scale(units)
    witnesses = []
    for w in rep.witnesses:
        witnesses.append({"role": w["role"], "quantity": w["quantity"],
                          f"value_{units}": w["value_bits"] * k, "converged": w.get("converged", True),
                          "witness": to_json(w["witness"])})
    return {
        "check_id": rep.check_id,
        f"lhs_{units}": rep.lhs_bits * k,
        f"rhs_terms_{units}": [x * k for x in rep.rhs_terms_bits],
        f"gap_{units}": rep.gap_bits * k,
        "flagged": rep.flagged,
        "seeds": to_json(rep.seeds),
        "cfg": config_to_json(rep.cfg) if rep.cfg is not None else None,
        "wall_time": rep.wall_time,
        "extras": to_json(rep.extras),
        "witnesses": witnesses,
    }


def dumps(obj, **kw) -> str:
    return json.dumps(to_json(obj), **kw)


def load_file(path):
    """Parse a JSON file into an emlab value (or a raw dict if untagged)."""
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed JSON in {path}: {exc}", "json_syntax") from None
    return from_json(obj) if isinstance(obj, dict) and "kind" in obj else obj
