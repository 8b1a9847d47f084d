"""Command-line front end.

Usage::

    ham-levy COMMAND [--config run.json] [--seed N] [--paths N] [--threads N]
                     [--gate] [--out DIR] [--t T ...] [--s S] [--R R ...]
                     [--alpha A] [--m2 M] [--<block>.<key> VALUE ...]

A run configuration is a JSON object with blocks ``law``, ``targets``,
``mc`` and ``output``. Every leaf can be overridden from the command line
by its dotted name (``--mc.paths 10``); flags win over the file. Each run
writes ``<out>/<command>.csv`` and ``<out>/<command>.json``.

Exit codes: 0 success, 1 execution or configuration error, 2 statistical
gate failure (only with ``--gate``).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import subprocess
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import __version__, kernels
from .errors import ConflictError, HamLevyError, SchemaError
from .field import lemma24_report
from .fuzz import ONE_COST_TOL, TWO_COST_TOL, identity_fuzz
from .levy import check_assumptions, law_from_dict, mean_jump
from .rng import path_generator
from .stats import (
    McConfig,
    default_threads,
    distance_report,
    ks_standard_error,
    lln_halving,
    loglog_slope,
    mean_with_se,
    run_mc,
    shape_stats,
    variance_diagnostic,
)
from .theory import (
    CovarianceModel,
    chaos_term_exact,
    chaos_term_norm,
    clt_rate_prediction,
    cosh_tail_bound,
    poincare_scaling_integrals,
    second_moment_theory,
    sigma_limit,
)

COMMANDS = ("moments", "simulate", "variance", "clt", "derivatives", "chaos", "bounds", "covariance")
NEEDS_PATHS = ("simulate", "variance", "clt")

_num = {"type": "number"}
_num_list = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 1}]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "gate": {"type": "boolean"},
        "law": {
            "type": "object",
            "additionalProperties": False,
            "required": ["family"],
            "properties": {
                "family": {"type": "string"},
                "a": _num,
                "lambda": _num,
                "a_plus": _num,
                "a_minus": _num,
                "p_up": _num,
                "atoms": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
                "c1": _num,
                "exp_a": _num,
                "c2": _num,
                "exp_b": _num,
                "eps": _num,
            },
        },
        "targets": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t": _num_list,
                "s": {"type": ["number", "null"]},
                "R": _num_list,
                "probes": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
                "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "m2": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "paths": {"type": "integer", "minimum": 1},
                "threads": {"type": "integer", "minimum": 1},
                "cases": {"type": "integer", "minimum": 1},
                "samples": {"type": "integer", "minimum": 2},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "uniqueItems": True},
            },
        },
    },
}

SHORTCUTS = {
    "seed": ("mc", "seed"),
    "paths": ("mc", "paths"),
    "threads": ("mc", "threads"),
    "cases": ("mc", "cases"),
    "samples": ("mc", "samples"),
    "out": ("output", "directory"),
    "t": ("targets", "t"),
    "s": ("targets", "s"),
    "R": ("targets", "R"),
    "alpha": ("targets", "alpha"),
    "m2": ("targets", "m2"),
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    law: dict
    targets: dict
    mc: dict
    output: dict
    gate: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _defaults() -> dict:
    return {
        "law": {"family": "symmetric-two-point", "a": 1.0, "lambda": 1.0},
        "targets": {"t": [1.0], "s": None, "R": [5.0], "probes": [], "alpha": 1.0, "m2": None},
        "mc": {"seed": 0, "threads": default_threads(), "cases": 1000, "samples": 1_000_000},
        "output": {"directory": "ham_levy_out", "formats": ["csv", "json"]},
        "gate": False,
    }


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(tree: dict, path: tuple[str, ...], value: Any) -> None:
    node = tree
    for key in path[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise SchemaError("is not an object", path)
    node[path[-1]] = value


def _dotted_flags(extra: list[str]) -> dict[tuple[str, ...], Any]:
    out: dict[tuple[str, ...], Any] = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok:
            raise SchemaError(f"unrecognised argument {tok!r}")
        key, eq, val = tok[2:].partition("=")
        if not eq:
            if i + 1 >= len(extra):
                raise SchemaError("flag needs a value", tuple(key.split(".")))
            val = extra[i + 1]
            i += 1
        path = tuple(key.split("."))
        value = _parse_value(val)
        if path in out and out[path] != value:
            raise ConflictError(f"--{key} given twice with different values")
        out[path] = value
        i += 1
    return out


def _schema_error(err: jsonschema.ValidationError) -> SchemaError:
    path = tuple(err.absolute_path)
    if err.validator == "additionalProperties":
        known = set(err.schema.get("properties", {}))
        unknown = sorted(set(err.instance) - known)
        if unknown:
            return SchemaError(f"unknown key {unknown[0]!r}", (*path, unknown[0]))
    return SchemaError(err.message, path)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "law":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_config(
    config_path: str | os.PathLike | None = None,
    command: str | None = None,
    flags: dict[str, Any] | None = None,
    dotted: dict[tuple[str, ...], Any] | None = None,
) -> RunConfig:
    """Resolve a run configuration from an optional JSON file plus overrides.

    ``flags`` holds the shortcut flags (``paths``, ``t``, ...) and ``dotted``
    the mirrored leaf keys. A shortcut and its dotted twin with different
    values, or a subcommand that contradicts the file, raise
    :class:`ConflictError`.
    """
    raw: dict = {}
    if config_path is not None:
        try:
            raw = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise SchemaError(f"config file {config_path} not found") from None
        except json.JSONDecodeError as exc:
            raise SchemaError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise SchemaError("config file must hold a JSON object")
    if command is not None:
        if "command" in raw and raw["command"] != command:
            raise ConflictError(f"subcommand {command!r} contradicts config command {raw['command']!r}")
        raw["command"] = command

    overrides: dict[tuple[str, ...], Any] = dict(dotted or {})
    for name, value in (flags or {}).items():
        if value is None:
            continue
        path = SHORTCUTS[name]
        if path in overrides and overrides[path] != value:
            raise ConflictError(f"--{name} and --{'.'.join(path)} disagree")
        overrides[path] = value
    for path, value in overrides.items():
        _set_dotted(raw, path, value)

    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as err:
        raise _schema_error(jsonschema.exceptions.best_match([err])) from None

    cmd = raw["command"]
    if cmd in NEEDS_PATHS and "paths" not in raw.get("mc", {}):
        raise SchemaError(f"required for command {cmd!r}", ("mc", "paths"))

    merged = _merge(_defaults(), raw)
    tg = merged["targets"]
    for key in ("t", "R"):
        if not isinstance(tg[key], list):
            tg[key] = [tg[key]]
        tg[key] = [float(v) for v in tg[key]]
        if any(v <= 0 for v in tg[key]):
            raise SchemaError("must be positive", ("targets", key))
    merged["law"] = law_from_dict(merged["law"]).to_dict()  # validates and fills family defaults
    return RunConfig(
        command=cmd,
        law=merged["law"],
        targets=tg,
        mc=merged["mc"],
        output=merged["output"],
        gate=bool(merged["gate"]),
    )


# -- execution -----------------------------------------------------------------


def _git_describe() -> str:
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        return res.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _cell(v: Any) -> str:
    if isinstance(v, bool) or v is None:
        return str(v).lower() if v is not None else ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.writer(buf, lineterminator="\r\n")
    header = list(rows[0])
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(row.get(k)) for k in header])
    return buf.getvalue()


def _jsonable(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _model(cfg: RunConfig, law) -> CovarianceModel:
    m2 = cfg.targets.get("m2")
    return CovarianceModel(float(m2)) if m2 is not None else CovarianceModel.from_law(law)


def _mc_config(cfg: RunConfig, law, times, radii, probes=()) -> McConfig:
    return McConfig(
        master_seed=cfg.mc["seed"],
        n_paths=cfg.mc["paths"],
        law=law,
        times=tuple(times),
        radii=tuple(radii),
        point_probes=tuple(tuple(p) for p in probes),
        threads=cfg.mc["threads"],
    )


def _cmd_moments(cfg, law):
    alpha = cfg.targets["alpha"]
    rows = []
    for p in sorted({1.0, 1.0 + alpha, 2.0, 2.0 + 2.0 * alpha, 3.0, 4.0}):
        rows.append({"p": p, "m_p": law.moment_m(p), "M_p": law.tail_moment_M(p)})
    try:
        mu: Any = mean_jump(law)
    except HamLevyError as exc:
        mu = f"error: {exc.code}"
    rep = check_assumptions(law, alpha)
    summary = {
        "total_rate": law.total_rate,
        "mean_jump": mu,
        "truncated_variance": law.truncated_variance,
        "assumptions": asdict(rep),
    }
    return rows, summary, True


def _cmd_simulate(cfg, law):
    tg = cfg.targets
    mc = _mc_config(cfg, law, tg["t"], tg["R"], tg["probes"])
    sset = run_mc(mc)
    columns = {}
    for name in sset.columns:
        col = sset.column(name)
        mean, se = mean_with_se(col)
        skew, kurt = shape_stats(col) if np.std(col) > 0 else (math.nan, math.nan)
        columns[name] = {"mean": mean, "se": se, "var": float(np.var(col, ddof=1)), "skewness": skew, "excess_kurtosis": kurt}
    summary = {"columns": columns, "mean_atoms": sset.mean_atoms, "n_paths": mc.n_paths}
    ok = all(abs(c["mean"] - (1.0 if n.startswith("u_") else 0.0)) <= 5 * c["se"] for n, c in columns.items() if c["se"] > 0)
    return sset.to_csv(), summary, ok


def _cmd_variance(cfg, law):
    tg = cfg.targets
    model = _model(cfg, law)
    sset = run_mc(_mc_config(cfg, law, tg["t"], tg["R"]))
    rows = variance_diagnostic(sset, model)
    radii = sorted(tg["R"])
    halving = []
    for R, R2 in zip(radii[:-1], radii[1:]):
        for t in tg["t"]:
            ratio, se = lln_halving(sset, t, R, R2)
            halving.append({"t": t, "R": R, "R2": R2, "ratio": ratio, "se": se, "expected": R2 / R})
    big = [r for r in rows if r["R"] == radii[-1] and r["kind"] in ("var", "cov")]
    ok = all(abs(r["z"]) <= 3 for r in big)
    summary = {"lln_halving": halving, "mean_atoms": sset.mean_atoms, "largest_R_within_3se": ok}
    return rows, summary, ok


def _cmd_clt(cfg, law):
    tg = cfg.targets
    model = _model(cfg, law)
    radii = sorted(tg["R"])
    sset = run_mc(_mc_config(cfg, law, tg["t"], radii))
    rows = []
    ok = True
    n = cfg.mc["paths"]
    for t in tg["t"]:
        kol = []
        for R in radii:
            F = sset.F(t, R)
            studentized = distance_report(F, "sample-sd")
            theo = distance_report(F, "theoretical-sd", math.sqrt(sigma_limit(model, t, t) * R))
            skew, kurt = shape_stats(F)
            rows.append({
                "t": t, "R": R,
                "d_kol_sample_sd": studentized.d_kol, "d_w1_sample_sd": studentized.d_w1,
                "d_kol_theoretical_sd": theo.d_kol, "d_w1_theoretical_sd": theo.d_w1,
                "kol_se": ks_standard_error(n), "skewness": skew, "excess_kurtosis": kurt,
            })
            kol.append(studentized.d_kol)
        tol = 2.0 * ks_standard_error(n)
        ok &= all(b <= a + tol for a, b in zip(kol[:-1], kol[1:]))
    slopes = {}
    if len(radii) >= 2:
        for t in tg["t"]:
            ds = [r["d_kol_sample_sd"] for r in rows if r["t"] == t]
            slopes[_cell(t)] = loglog_slope(radii, ds)
    summary = {
        "kolmogorov_loglog_slope": slopes,
        "predicted_rate_exponent": clt_rate_prediction(tg["alpha"]),
        "note": "the predicted rate is an upper bound with unknown constant; the slope is not gated",
        "monotone_within_2se": ok,
    }
    return rows, summary, ok


def _cmd_derivatives(cfg, law):
    rep = identity_fuzz(law, cfg.mc["cases"], cfg.mc["seed"], name=law.family)
    rows = [
        {
            "case": c.index, "atoms": c.atoms,
            "one_cost": c.one_cost, "one_factorized": c.one_factorized, "one_residual": c.one_residual,
            "two_cost": c.two_cost, "two_factorized": c.two_factorized, "two_residual": c.two_residual,
            "outside_value": c.outside_value, "half_residual": c.half_residual,
        }
        for c in rep.cases
    ]
    summary = {
        "cases": len(rep.cases),
        "nontrivial_cases": rep.nontrivial,
        "max_one_residual": rep.max_one_residual,
        "max_two_residual": rep.max_two_residual,
        "max_outside_value": rep.max_outside,
        "max_half_residual": rep.max_half,
        "tolerances": {"one": ONE_COST_TOL, "two": TWO_COST_TOL, "outside": 0.0, "half": 0.0},
        "passed": rep.passed,
    }
    return rows, summary, rep.passed


def _cmd_chaos(cfg, law):
    model = _model(cfg, law)
    rng = path_generator(cfg.mc["seed"], 0, stream=11)
    rows = []
    partial, var = 1.0, 0.0
    ok = True
    for t in cfg.targets["t"]:
        partial, var = 1.0, 0.0
        for n in (1, 2, 3):
            est = chaos_term_norm(model, n, t, cfg.mc["samples"], rng)
            exact = chaos_term_exact(model, n, t)
            z = (est.estimate - exact) / est.std_error if est.std_error > 0 else 0.0
            ok &= (est.estimate == exact) if n == 1 else abs(z) <= 3
            partial += est.estimate
            var += est.std_error**2
            rows.append({"t": t, "n": n, "estimate": est.estimate, "se": est.std_error, "target": exact, "z": z, "remainder_bound": None})
        target = second_moment_theory(model, t)
        remainder = cosh_tail_bound(model, t, 4)
        gap = abs(target - partial)
        ok &= gap <= remainder + 3.0 * math.sqrt(var)
        rows.append({
            "t": t, "n": "partial<=3", "estimate": partial, "se": math.sqrt(var), "target": target,
            "z": (partial - target) / math.sqrt(var), "remainder_bound": remainder,
        })
    summary = {"second_moment": {_cell(t): second_moment_theory(model, t) for t in cfg.targets["t"]}, "m2": model.m2, "passed": ok}
    return rows, summary, ok


def _cmd_bounds(cfg, law):
    tg = cfg.targets
    alpha = tg["alpha"]
    rows = []
    ok = True
    for t in tg["t"]:
        s = tg["s"] if tg["s"] is not None else t / 2
        for R in tg["R"]:
            p = poincare_scaling_integrals(t, R, alpha)
            ok &= p.I1 <= p.I1_bound
            rows.append({"kind": "poincare", **asdict(p)})
            if 0 <= s <= t:
                rep = lemma24_report(t, s, R)
                ok &= rep.ok
                rows.append({"kind": "phi_integrals", **asdict(rep), "ok": rep.ok})
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    rows = [{k: r.get(k) for k in keys} for r in rows]
    return rows, {"passed": ok}, ok


def _cmd_covariance(cfg, law):
    model = _model(cfg, law)
    rows = []
    for t in cfg.targets["t"]:
        s = cfg.targets["s"] if cfg.targets["s"] is not None else t
        rows.append({
            "t": t, "s": s, "m2": model.m2,
            "sigma_tt": sigma_limit(model, t, t),
            "sigma_ts": sigma_limit(model, t, s),
            "sigma_ss": sigma_limit(model, s, s),
            "second_moment": second_moment_theory(model, t),
        })
    first = rows[0]
    summary = {"m2": model.m2, "second_moment": first["second_moment"], "sigma_tt": first["sigma_tt"], "sigma_ts": first["sigma_ts"]}
    return rows, summary, True


_DISPATCH = {
    "moments": _cmd_moments,
    "simulate": _cmd_simulate,
    "variance": _cmd_variance,
    "clt": _cmd_clt,
    "derivatives": _cmd_derivatives,
    "chaos": _cmd_chaos,
    "bounds": _cmd_bounds,
    "covariance": _cmd_covariance,
}


def _write(cfg: RunConfig, csv_text: str | None, summary: dict) -> None:
    out = Path(cfg.output["directory"])
    out.mkdir(parents=True, exist_ok=True)
    if csv_text is not None and "csv" in cfg.output["formats"]:
        (out / f"{cfg.command}.csv").write_text(csv_text, newline="")
    if "json" in cfg.output["formats"]:
        (out / f"{cfg.command}.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")


def execute(cfg: RunConfig) -> int:
    summary: dict[str, Any] = {
        "command": cfg.command,
        "config": cfg.to_dict(),
        "version": __version__,
        "git_describe": _git_describe(),
        "backend": kernels.BACKEND,
        "error": None,
    }
    csv_text = None
    try:
        law = law_from_dict(cfg.law)
        table, results, ok = _DISPATCH[cfg.command](cfg, law)
        csv_text = table if isinstance(table, str) else table_csv(table)
        summary["results"] = results
        summary["gate"] = {"enabled": cfg.gate, "passed": bool(ok)}
        code = 2 if (cfg.gate and not ok) else 0
    except HamLevyError as exc:
        summary["error"] = {"code": exc.code, "message": str(exc)}
        code = 1
    except (ValueError, ArithmeticError) as exc:
        summary["error"] = {"code": "execution_error", "message": str(exc)}
        code = 1
    summary["exit_code"] = code
    _write(cfg, csv_text, summary)
    if summary["error"]:
        print(f"error [{summary['error']['code']}]: {summary['error']['message']}", file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ham-levy", description=__doc__.split("\n")[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS)
    ap.add_argument("--config", metavar="PATH")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--paths", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--cases", type=int)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--gate", action="store_true", default=None)
    ap.add_argument("--out", metavar="DIR")
    ap.add_argument("--t", type=float, nargs="+")
    ap.add_argument("--s", type=float)
    ap.add_argument("--R", type=float, nargs="+")
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--m2", type=float)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    flags = {k: getattr(args, k) for k in SHORTCUTS}
    try:
        dotted = _dotted_flags(extra)
        if args.gate is not None:
            dotted[("gate",)] = True
        if args.command is None and args.config is None:
            raise SchemaError("give a subcommand or --config")
        cfg = parse_config(args.config, args.command, flags, dotted)
    except HamLevyError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
