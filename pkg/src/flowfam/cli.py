"""Command-line front end: JSON configs in, NDJSON reports out.

One command per concern: flow (point evaluation), interval (escape
interval), verify (condition suite), reconstruct (tabulated field +
export), autonomous (shift detection + group law), decompose (Sincov),
mollify (window average + smoothing check).  Reports are one JSON object
per line with sorted keys; given the same config and seed, and
--no-timestamp, output is byte-identical across runs.  Exit codes: 0 on
success/pass, 1 when a verification fails or a point query leaves the
domain, 2 on usage or config errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from datetime import datetime, timezone

import numpy as np

from . import catalog as _catalog
from . import expr as ex
from .autonomous import NotAutonomous, check_group_law, check_time_shift, to_group
from .core import DomainSpec, DomainViolation, FlowFamily, VectorField
from .core import closed_form_family
from .integrate import IntegratorConfig, escape_interval, numeric_family
from .linear import NotAffine, NotInvertible, SingularWronskian, mollify, sincov_decompose, smooth_apply
from .reconstruct import ReconstructionConfig, ReconstructionFailed, field_from_family
from .verify import ConditionReport, SamplePlan, SuiteTolerances, default_plan, run_suite

__all__ = ["ConfigError", "RunSpec", "load_config", "main"]


class ConfigError(Exception):
    """A config file could not be turned into a runnable spec."""

    def __init__(self, path: str, field: str, message: str):
        self.path = path
        self.field = field
        self.message = message
        super().__init__(f"{path}: {field}: {message}")


@dataclasses.dataclass
class RunSpec:
    """Everything a command needs: the system plus shared knobs."""

    n: int
    system_name: str
    field: VectorField | None
    family: FlowFamily | None
    integrator: IntegratorConfig
    plan: SamplePlan
    tolerances: SuiteTolerances


def _field_names(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def load_config(path: str) -> RunSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(path, "<file>", str(err)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(path, "<json>", f"invalid JSON at offset {err.pos}: {err.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(path, "<json>", "top level must be an object")

    system = data.get("system")
    if not isinstance(system, dict):
        raise ConfigError(path, "system", "missing or not an object")
    sources = [k for k in ("catalog", "field", "family") if k in system]
    if len(sources) != 1:
        raise ConfigError(path, "system", "exactly one system source (catalog, field, or family)")

    field_obj: VectorField | None = None
    family_obj: FlowFamily | None = None
    if sources[0] == "catalog":
        name = system["catalog"]
        try:
            entry = _catalog.get(name)
        except KeyError as err:
            raise ConfigError(path, "system.catalog", str(err)) from None
        n = entry.n
        system_name = f"catalog:{entry.name}"
        field_obj = entry.field()
        family_obj = entry.family()
    elif sources[0] == "field":
        fdef = system["field"]
        if not isinstance(fdef, dict):
            raise ConfigError(path, "system.field", "must be an object")
        try:
            n = int(fdef["n"])
            rhs = list(fdef["rhs"])
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(path, "system.field", f"needs integer n and rhs list ({err})") from None
        dom = fdef.get("domain", {})
        time_box = tuple(dom["time"]) if "time" in dom else (-math.inf, math.inf)
        try:
            spec = DomainSpec(n, time_box=time_box, space_predicate=dom.get("predicate"))
            field_obj = VectorField.from_strings(rhs, spec)
        except ex.ParseError as err:
            raise ConfigError(
                path, "system.field", f"expression error at offset {err.offset}: {err.message}"
            ) from None
        except (ex.ValidationError, ValueError) as err:
            raise ConfigError(path, "system.field", str(err)) from None
        system_name = "field"
    else:
        fdef = system["family"]
        if not isinstance(fdef, dict):
            raise ConfigError(path, "system.family", "must be an object")
        try:
            n = int(fdef["n"])
            components = list(fdef["components"])
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(path, "system.family", f"needs integer n and components list ({err})") from None
        try:
            family_obj = closed_form_family(n, components, predicate=fdef.get("domain_predicate"))
        except ex.ParseError as err:
            raise ConfigError(
                path, "system.family", f"expression error at offset {err.offset}: {err.message}"
            ) from None
        except (ex.ValidationError, ValueError) as err:
            raise ConfigError(path, "system.family", str(err)) from None
        system_name = "family"

    integrator_cfg = data.get("integrator", {})
    if not isinstance(integrator_cfg, dict):
        raise ConfigError(path, "integrator", "must be an object")
    unknown = set(integrator_cfg) - _field_names(IntegratorConfig)
    if unknown:
        raise ConfigError(path, "integrator", f"unknown keys: {sorted(unknown)}")
    if "window" in integrator_cfg:
        integrator_cfg = {**integrator_cfg, "window": tuple(integrator_cfg["window"])}
    try:
        integrator = IntegratorConfig(**integrator_cfg)
    except (TypeError, ValueError) as err:
        raise ConfigError(path, "integrator", str(err)) from None

    plan_cfg = data.get("plan")
    if plan_cfg is None:
        plan = default_plan(n)
    else:
        if not isinstance(plan_cfg, dict):
            raise ConfigError(path, "plan", "must be an object")
        unknown = set(plan_cfg) - _field_names(SamplePlan)
        if unknown:
            raise ConfigError(path, "plan", f"unknown keys: {sorted(unknown)}")
        try:
            plan = SamplePlan(
                tuple(plan_cfg.get("time_grid", ())),
                tuple(tuple(s) for s in plan_cfg.get("state_grid", ())),
                random_count=int(plan_cfg.get("random_count", 25)),
                seed=int(plan_cfg.get("seed", 12345)),
            )
        except (TypeError, ValueError) as err:
            raise ConfigError(path, "plan", str(err)) from None
        if plan.n != n:
            raise ConfigError(path, "plan", f"state dimension {plan.n} does not match system n={n}")

    tol_cfg = data.get("tolerances", {})
    if not isinstance(tol_cfg, dict):
        raise ConfigError(path, "tolerances", "must be an object")
    unknown = set(tol_cfg) - _field_names(SuiteTolerances)
    if unknown:
        raise ConfigError(path, "tolerances", f"unknown keys: {sorted(unknown)}")
    try:
        tolerances = SuiteTolerances(**tol_cfg)
    except (TypeError, ValueError) as err:
        raise ConfigError(path, "tolerances", str(err)) from None

    return RunSpec(
        n=n,
        system_name=system_name,
        field=field_obj,
        family=family_obj,
        integrator=integrator,
        plan=plan,
        tolerances=tolerances,
    )


# --- report emission ---------------------------------------------------------


def _jsonable(obj):
    """JSON-safe copy; non-finite floats become strings so every line parses."""
    if obj is None or isinstance(obj, (bool, str, int)):
        return obj
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def _emit(stream, record: dict):
    stream.write(json.dumps(_jsonable(record), sort_keys=True, separators=(",", ":")) + "\n")


def _condition_record(rep: ConditionReport) -> dict:
    return {
        "kind": "condition",
        "name": rep.condition_name,
        "max_residual": rep.max_residual,
        "worst_case": rep.worst_case,
        "pass": rep.passed,
        "samples_checked": rep.samples_checked,
        "samples_skipped": rep.samples_skipped,
        "tolerance": rep.tolerance,
        "note": rep.note,
    }


def _meta_record(args, spec: RunSpec) -> dict:
    record = {
        "kind": "meta",
        "command": args.command,
        "config": args.config,
        "system": spec.system_name,
        "seed": spec.plan.seed,
    }
    if not args.no_timestamp:
        record["timestamp"] = datetime.now(timezone.utc).isoformat()
    return record


def _parse_state(text: str) -> list:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got '{text}'") from None


def _resolve_family(spec: RunSpec) -> FlowFamily:
    if spec.family is not None:
        return spec.family
    return numeric_family(spec.field, spec.integrator)


def _scaled_tol(hint: float) -> float:
    return 1e-9 if hint == 0.0 else 50.0 * hint


# --- CSV artifacts -----------------------------------------------------------


def _write_field_csv(field, path: str):
    n = field.n
    header = ["t"] + [f"x{k + 1}" for k in range(n)] + [f"f{k + 1}" for k in range(n)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for it, t in enumerate(field.times):
            for idx in np.ndindex(*[len(ax) for ax in field.axes]):
                xs = [field.axes[k][idx[k]] for k in range(n)]
                fs = field.table[(it, *idx)]
                row = [float(t), *map(float, xs), *map(float, fs)]
                fh.write(",".join(repr(v) for v in row) + "\n")


def _write_decomposition_csv(dec, path: str):
    n = dec.n
    header = (
        ["tau"]
        + [f"w{r + 1}{c + 1}" for r in range(n) for c in range(n)]
        + [f"h{k + 1}" for k in range(n)]
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i, tau in enumerate(dec.grid):
            row = [float(tau), *map(float, dec.W[i].reshape(-1)), *map(float, dec.h[i])]
            fh.write(",".join(repr(v) for v in row) + "\n")


# --- commands ----------------------------------------------------------------


def _cmd_flow(args, spec: RunSpec, out) -> int:
    family = _resolve_family(spec)
    try:
        value = family.evaluate(args.tau, args.sigma, args.a)
    except DomainViolation as err:
        _emit(out, {"kind": "error", "message": err.kind, "detail": str(err)})
        return 2 if err.kind == "dimension_mismatch" else 1
    _emit(out, {"kind": "value", "value": list(map(float, value))})
    return 0


def _cmd_interval(args, spec: RunSpec, out) -> int:
    if spec.field is None:
        _emit(out, {"kind": "error", "message": "interval requires a vector field (catalog or field config)"})
        return 2
    try:
        interval = escape_interval(spec.field, args.rho, args.a, spec.integrator)
    except (ValueError, DomainViolation) as err:
        _emit(out, {"kind": "error", "message": str(err)})
        return 1
    _emit(
        out,
        {
            "kind": "interval",
            "lower": interval.lower,
            "upper": interval.upper,
            "lower_kind": interval.lower_kind,
            "upper_kind": interval.upper_kind,
        },
    )
    fully_open = interval.lower_kind == "window_limit" and interval.upper_kind == "window_limit"
    return 0 if fully_open else 1


def _cmd_verify(args, spec: RunSpec, out) -> int:
    family = _resolve_family(spec)
    report = run_suite(family, spec.plan, spec.tolerances)
    for rep in report.conditions:
        _emit(out, _condition_record(rep))
    failed = [rep.condition_name for rep in report.conditions if not rep.passed]
    _emit(out, {"kind": "summary", "pass": report.passed, "failed": failed})
    return 0 if report.passed else 1


def _cmd_reconstruct(args, spec: RunSpec, out) -> int:
    family = _resolve_family(spec)
    # tabulation needs strictly increasing knots; configs may list times in any order
    grid = dataclasses.replace(
        spec.plan, time_grid=tuple(sorted(set(map(float, spec.plan.time_grid))))
    )
    cfg = ReconstructionConfig(h=args.h, richardson=not args.no_richardson, grid=grid)
    try:
        field = field_from_family(family, cfg)
    except ReconstructionFailed as err:
        _emit(out, {"kind": "error", "message": str(err)})
        return 1
    total = int(len(field.times) * np.prod([len(ax) for ax in field.axes]))
    summary = {
        "kind": "summary",
        "command": "reconstruct",
        "sites": total,
        "skipped": field.skipped_sites,
        "time_span": [float(field.times[0]), float(field.times[-1])],
        "knots": [len(field.times)] + [len(ax) for ax in field.axes],
    }
    if spec.field is not None:
        worst = -math.inf
        compared = 0
        for it, t in enumerate(field.times):
            for idx in np.ndindex(*[len(ax) for ax in field.axes]):
                site = field.table[(it, *idx)]
                if not np.all(np.isfinite(site)):
                    continue
                x = np.array([field.axes[k][idx[k]] for k in range(field.n)])
                if not spec.field.domain.contains(float(t), x):
                    continue
                try:
                    ref = spec.field(float(t), x)
                except ex.EvalError:
                    continue
                compared += 1
                worst = max(worst, float(np.max(np.abs(site - ref))))
        summary["max_field_gap"] = worst if compared else None
        summary["compared_sites"] = compared
    _emit(out, summary)
    if args.out:
        _write_field_csv(field, args.out)
    return 0


def _cmd_autonomous(args, spec: RunSpec, out) -> int:
    family = _resolve_family(spec)
    shift = check_time_shift(family, spec.plan, args.tol)
    _emit(out, _condition_record(shift))
    if not shift.passed:
        _emit(out, {"kind": "summary", "pass": False, "failed": ["time_shift"]})
        return 1
    group = to_group(family, spec.plan, args.tol)
    law = check_group_law(group, spec.plan, tol=_scaled_tol(group.tol_hint))
    _emit(out, _condition_record(law))
    _emit(
        out,
        {"kind": "summary", "pass": law.passed, "failed": [] if law.passed else ["group_law"]},
    )
    return 0 if law.passed else 1


def _cmd_decompose(args, spec: RunSpec, out) -> int:
    family = _resolve_family(spec)
    try:
        dec = sincov_decompose(family, args.tau0, spec.plan.time_grid)
    except (NotAffine, SingularWronskian) as err:
        _emit(out, {"kind": "error", "message": str(err)})
        return 1
    _emit(
        out,
        {
            "kind": "summary",
            "command": "decompose",
            "tau0": dec.tau0,
            "grid": list(dec.grid),
            "n": dec.n,
        },
    )
    if args.out:
        _write_decomposition_csv(dec, args.out)
    return 0


def _cmd_mollify(args, spec: RunSpec, out) -> int:
    family = _resolve_family(spec)
    try:
        group = to_group(family, spec.plan)
        average = mollify(group, args.eps, args.panels)
    except (NotAutonomous, NotAffine, NotInvertible) as err:
        _emit(out, {"kind": "error", "message": str(err)})
        return 1
    _emit(
        out,
        {
            "kind": "summary",
            "command": "mollify",
            "eps": average.eps,
            "panels": average.panels,
            "H_A": average.H.A,
            "H_b": average.H.b,
            "error_bound": average.error_bound,
        },
    )
    if not args.alpha:
        return 0
    worst = -math.inf
    checked = 0
    for alpha in args.alpha:
        mapped = smooth_apply(group, average, alpha)
        for s in spec.plan.state_grid:
            a = np.asarray(s, dtype=float)
            if not group.in_domain(alpha, a):
                continue
            checked += 1
            worst = max(worst, float(np.max(np.abs(mapped(a) - group.evaluate(alpha, a)))))
    tol = max(1e-8, _scaled_tol(group.tol_hint))
    passed = checked > 0 and worst <= tol
    _emit(
        out,
        {
            "kind": "condition",
            "name": "smoothing",
            "max_residual": worst if checked else 0.0,
            "worst_case": None,
            "pass": passed,
            "samples_checked": checked,
            "samples_skipped": 0,
            "tolerance": tol,
            "note": None,
        },
    )
    return 0 if passed else 1


_COMMANDS = {
    "flow": _cmd_flow,
    "interval": _cmd_interval,
    "verify": _cmd_verify,
    "reconstruct": _cmd_reconstruct,
    "autonomous": _cmd_autonomous,
    "decompose": _cmd_decompose,
    "mollify": _cmd_mollify,
}

# commands whose --out is a CSV artifact; their report always goes to stdout
_CSV_COMMANDS = {"reconstruct", "decompose"}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowfam",
        description="evaluate, verify, and decompose two-parameter evolution families",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", help="output path (CSV for reconstruct/decompose, NDJSON otherwise)")
        p.add_argument("--seed", type=int, help="override the sample plan seed")
        p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for reproducible output")

    p = sub.add_parser("flow", help="evaluate F_{tau,sigma}(a)")
    common(p)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--a", type=_parse_state, required=True)

    p = sub.add_parser("interval", help="escape interval through (rho, a)")
    common(p)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--a", type=_parse_state, required=True)

    p = sub.add_parser("verify", help="run the flow-condition suite")
    common(p)

    p = sub.add_parser("reconstruct", help="tabulate the generating vector field")
    common(p)
    p.add_argument("--h", type=float, default=1e-4, help="finite-difference step")
    p.add_argument("--no-richardson", action="store_true", help="plain central differences")

    p = sub.add_parser("autonomous", help="detect time-shift invariance and check the group law")
    common(p)
    p.add_argument("--tol", type=float, help="override the autonomy tolerance")

    p = sub.add_parser("decompose", help="Sincov decomposition of an affine family")
    common(p)
    p.add_argument("--tau0", type=float, default=0.0, help="gauge base time")

    p = sub.add_parser("mollify", help="window-average an affine group")
    common(p)
    p.add_argument("--eps", type=float, required=True, help="window half-width")
    p.add_argument("--panels", type=int, default=256, help="Simpson panel count (even)")
    p.add_argument("--alpha", type=_parse_state, default=[], help="parameters for the smoothing check")

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        spec = load_config(args.config)
    except ConfigError as err:
        _emit(sys.stdout, {"kind": "error", "message": str(err)})
        return 2
    if args.seed is not None:
        spec.plan = dataclasses.replace(spec.plan, seed=args.seed)

    report_path = args.out if args.out and args.command not in _CSV_COMMANDS else None
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            _emit(fh, _meta_record(args, spec))
            return _COMMANDS[args.command](args, spec, fh)
    _emit(sys.stdout, _meta_record(args, spec))
    return _COMMANDS[args.command](args, spec, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
