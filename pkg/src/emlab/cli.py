"""Command-line front end.

    emlab measure {e,ef,em,smin} [INPUT] [--cut A:B] [--family F --d D --p P]
    emlab dilate [CHANNEL] [--family F ...]
    emlab check CHECK [INPUT ...] [--cut A:B] [--family F ...]
    emlab campaign CHECK --dims 2,2,2,2 --trials 50 --seed 7 --out results.jsonl
    emlab demo-discontinuity [--epsilon 1e-3]

Exit codes: 0 success, 1 validation error, 2 numerical failure (``--strict``
non-convergence), 3 I/O error. Errors are reported as a JSON object on
standard output.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from importlib import metadata

from . import harness
from .channels import ChannelFamilySpec, KrausChannel, dilation_roundtrip_error, dual_subspace, make_family, stinespring
from .errors import EmlabError, NumericalError, ValidationError
from .measures import e_f, e_m, entanglement, s_min
from .optimizer import OptimizerConfig
from .serialize import config_from_json, config_to_json, load_file, measure_to_json, report_to_json, to_json
from .tensor_core import BipartiteCut, DensityMatrix, PureState

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class OutputError(OSError):
    """Writing a result file failed."""


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def manifest(args, inputs, cfg: OptimizerConfig) -> dict:
    return {
        "command": " ".join(["emlab"] + list(args.argv)),
        "inputs": list(inputs),
        "cfg": config_to_json(cfg),
        "master_seed": cfg.master_seed,
        "tool_version": tool_version(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _jobs(args) -> int:
    if args.jobs is not None:
        return args.jobs
    return int(os.environ.get("EMLAB_JOBS", "1"))


def build_config(args) -> OptimizerConfig:
    cfg = OptimizerConfig()
    if args.config:
        cfg = config_from_json(load_file(args.config))
    changes = {"jobs": 1}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.restarts is not None:
        changes["restarts"] = args.restarts
    if args.max_iters is not None:
        changes["max_iters"] = args.max_iters
    if args.tol is not None:
        changes["grad_tol"] = args.tol
    return cfg.replace(**changes)


def _family_channel(args) -> KrausChannel:
    params = {}
    for key in ("d", "p"):
        val = getattr(args, key)
        if val is not None:
            params[key] = val
    for key, attr in (("in", "in_dim"), ("env", "env_dim"), ("out", "out_dim")):
        val = getattr(args, attr)
        if val is not None:
            params[key] = val
    return make_family(ChannelFamilySpec(args.family, params, args.family_seed))


def _load_channel(path_or_none, args) -> KrausChannel:
    if path_or_none is None:
        if not args.family:
            raise ValidationError("give a channel file or --family", "inputs")
        return _family_channel(args)
    obj = load_file(path_or_none)
    if not isinstance(obj, KrausChannel):
        raise ValidationError(f"{path_or_none} does not hold a channel", "kind")
    return obj


def _load_state(path, density=True):
    obj = load_file(path)
    if isinstance(obj, PureState):
        return obj.projector() if density else obj
    if isinstance(obj, DensityMatrix):
        if not density:
            raise ValidationError(f"{path} holds a density matrix; a pure state is required", "kind")
        return obj
    raise ValidationError(f"{path} does not hold a state", "kind")


def _cut(text, space) -> BipartiteCut:
    if text:
        cut = BipartiteCut.parse(text)
    elif len(space.factors) == 2:
        cut = BipartiteCut.first_factor(space)
    else:
        raise ValidationError("--cut is required for spaces with more than two factors", "cut")
    cut.check(space)
    return cut


def _emit(obj: dict, args, lines=None):
    text = json.dumps(obj, indent=2)
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            raise OutputError(str(exc)) from None
    else:
        print(text)


def _strict(args, converged: bool):
    if args.strict and not converged:
        raise NumericalError("optimizer did not converge (--strict)")


def cmd_measure(args) -> int:
    cfg = build_config(args)
    q = args.quantity
    inputs = [args.input] if args.input else []
    if q == "smin":
        ch = _load_channel(args.input, args)
        route = args.route or "direct"
        res = s_min(ch, cfg, route)
    else:
        if not args.input:
            raise ValidationError(f"measure {q} needs an input state file", "inputs")
        if q == "e":
            psi = _load_state(args.input, density=False)
            res = entanglement(psi, _cut(args.cut, psi.space))
        else:
            rho = _load_state(args.input)
            cut = _cut(args.cut, rho.space)
            if q == "em":
                res = e_m(rho, cut, cfg)
            else:
                res = e_f(rho, cut, cfg, route=args.route or "auto")
    _strict(args, res.diagnostics.get("converged", True))
    out = measure_to_json(res, args.units)
    out["manifest"] = manifest(args, inputs, cfg)
    _emit(out, args)
    return EXIT_OK


def cmd_dilate(args) -> int:
    ch = _load_channel(args.input, args)
    v = stinespring(ch)
    err = dilation_roundtrip_error(ch, v)
    if err > 1e-10:
        raise NumericalError(f"dilation round trip error {err:.3e} exceeds 1e-10")
    out = {"isometry": to_json(v), "dual_subspace": to_json(dual_subspace(v)),
           "env_dim": v.env_dim, "roundtrip_max_err": err,
           "manifest": manifest(args, [args.input] if args.input else [], build_config(args))}
    _emit(out, args)
    return EXIT_OK


def _write_stream(args, head: dict, items):
    """Write a manifest line, then one JSON object per item as it arrives."""
    fh = sys.stdout
    if args.out:
        try:
            fh = open(args.out, "w")
        except OSError as exc:
            raise OutputError(str(exc)) from None
    try:
        fh.write(json.dumps({"manifest": head}) + "\n")
        fh.flush()
        for obj in items:
            fh.write(json.dumps(obj) + "\n")
            fh.flush()
    finally:
        if fh is not sys.stdout:
            fh.close()


def _report_line(r, units, timing=True):
    if not isinstance(r, harness.GapReport):
        return to_json(r)
    obj = report_to_json(r, units)
    if not timing:
        obj["wall_time"] = None
    return obj


def cmd_check(args) -> int:
    cfg = build_config(args)
    cid = args.check_id
    files = list(args.inputs)
    if cid == "discontinuity":
        rep = harness.discontinuity_demo(args.epsilon, cfg)
    elif cid in ("em_superadd", "pure_superadd", "eof_superadd"):
        if len(files) != 1:
            raise ValidationError(f"{cid} takes one four-factor state file", "inputs")
        if cid == "pure_superadd":
            rep = harness.check_pure_superadd(_load_state(files[0], density=False), cfg)
        elif cid == "em_superadd":
            rep = harness.check_em_superadd(_load_state(files[0]), cfg)
        else:
            rep = harness.check_eof(_load_state(files[0]), mode="superadd", cfg=cfg)
    elif cid in ("em_add", "eof_add", "convexity"):
        if len(files) != 2:
            raise ValidationError(f"{cid} takes two state files", "inputs")
        rho, rho2 = _load_state(files[0]), _load_state(files[1])
        cut = _cut(args.cut, rho.space)
        cut2 = _cut(args.cut2 or args.cut, rho2.space)
        if cid == "em_add":
            rep = harness.check_em_additivity(rho, rho2, cut, cut2, cfg)
        elif cid == "eof_add":
            rep = harness.check_eof(rho, rho2, mode="add", cut=cut, cut2=cut2, cfg=cfg)
        else:
            rep = harness.check_convexity(rho, rho2, args.mix_p, cut, cfg)
    elif cid == "smin_add":
        if files:
            if len(files) != 2:
                raise ValidationError("smin_add takes two channel files (or --family)", "inputs")
            a, b = _load_channel(files[0], args), _load_channel(files[1], args)
        else:
            a = b = _load_channel(None, args)
        rep = harness.check_smin_additivity(a, b, cfg, route=args.route or "direct")
    elif cid == "duality":
        chans = [_load_channel(f, args) for f in files] if files else [_load_channel(None, args)]
        if len(chans) > 2:
            raise ValidationError("duality takes one or two channels", "inputs")
        rep = harness.duality_crosscheck(chans[0], cfg, chans[1] if len(chans) == 2 else None)
    else:
        raise ValidationError(f"unknown check {cid!r}", "check_id")
    _strict(args, all(w.get("converged", True) for w in rep.witnesses))
    _write_stream(args, manifest(args, files, cfg), [_report_line(rep, args.units)])
    return EXIT_OK


def campaign_spec(args, cfg) -> harness.CampaignSpec:
    if args.spec:
        obj = load_file(args.spec)
        return harness.CampaignSpec(
            check_id=obj["check_id"], sampler=obj.get("sampler", "haar_state"), dims=obj["dims"],
            trials=int(obj["trials"]), master_seed=int(obj.get("seed", 0)),
            cfg=config_from_json(obj.get("cfg", {}), cfg), rank=obj.get("rank"))
    if not args.dims or not args.check_id:
        raise ValidationError("campaign needs CHECK and --dims (or --spec)", "inputs")
    sampler = args.sampler or ("family" if args.check_id in ("smin_add", "duality") else "haar_state")
    return harness.CampaignSpec(args.check_id, sampler, tuple(int(x) for x in args.dims.split(",")),
                                args.trials, args.seed or 0, cfg, args.rank)


def cmd_campaign(args) -> int:
    cfg = build_config(args)
    spec = campaign_spec(args, cfg)
    jobs = _jobs(args)
    results = []

    def lines():
        for r in harness.iter_campaign(spec, jobs):
            results.append(r)
            yield _report_line(r, args.units, args.timing)
        yield to_json(harness.summarize(spec, results))

    head = manifest(args, [args.spec] if args.spec else [], spec.cfg)
    head["master_seed"] = spec.master_seed
    _write_stream(args, head, lines())
    if args.strict and any(isinstance(r, harness.TrialFailure) for r in results):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_demo(args) -> int:
    cfg = build_config(args)
    rep = harness.discontinuity_demo(args.epsilon, cfg)
    _write_stream(args, manifest(args, [], cfg), [_report_line(rep, args.units)])
    return EXIT_OK


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--tol", type=float, default=None, help="gradient-norm tolerance")
    p.add_argument("--config", default=None, help="OptimizerConfig JSON block")
    p.add_argument("--out", default=None, help="write output here instead of stdout")
    p.add_argument("--strict", action="store_true", help="exit 2 on non-convergence")
    p.add_argument("--units", choices=("bits", "nats"), default="bits")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (env EMLAB_JOBS)")


def _family_flags(p):
    p.add_argument("--family", default=None, help="built-in channel family")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--in-dim", type=int, default=None)
    p.add_argument("--env-dim", type=int, default=None)
    p.add_argument("--out-dim", type=int, default=None)
    p.add_argument("--family-seed", type=int, default=None)
    p.add_argument("--route", default=None, choices=("direct", "via_duality", "closed_form", "auto"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emlab", description="Entanglement minimization laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="compute E, Ef, Em or Smin")
    p.add_argument("quantity", choices=("e", "ef", "em", "smin"))
    p.add_argument("input", nargs="?")
    p.add_argument("--cut", default=None, help="bipartite cut, e.g. A,A2:B,B2")
    _family_flags(p)
    _common(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("dilate", help="Stinespring dilation and dual subspace of a channel")
    p.add_argument("input", nargs="?")
    _family_flags(p)
    _common(p)
    p.set_defaults(func=cmd_dilate)

    p = sub.add_parser("check", help="run one additivity/superadditivity check")
    p.add_argument("check_id", choices=harness.CHECK_IDS)
    p.add_argument("inputs", nargs="*")
    p.add_argument("--cut", default=None)
    p.add_argument("--cut2", default=None)
    p.add_argument("--mix-p", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=1e-3)
    _family_flags(p)
    _common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("campaign", help="run a batch of seeded checks")
    p.add_argument("check_id", nargs="?", choices=harness.CHECK_IDS)
    p.add_argument("--spec", default=None, help="CampaignSpec JSON file")
    p.add_argument("--dims", default=None, help="comma-separated factor dims")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--sampler", default=None, choices=harness.SAMPLERS)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--timing", action="store_true",
                   help="record per-trial wall time (makes reruns differ byte-wise)")
    _common(p)
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("demo-discontinuity", help="E_m jump under a small admixture")
    p.add_argument("--epsilon", type=float, default=1e-3)
    _common(p)
    p.set_defaults(func=cmd_demo)
    return parser


def _fail(code: int, exc: BaseException, invariant=None) -> int:
    print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc),
                                "invariant": invariant, "exit_code": code}}))
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    for name in ("in_dim", "env_dim", "out_dim", "d", "p", "family", "family_seed", "route"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        return args.func(args)
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, exc, exc.invariant)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    except (EmlabError, KeyError, TypeError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, exc)


if __name__ == "__main__":
    sys.exit(main())
