"""Command-line front end.

Every command prints one JSON report (or a CSV table for row-shaped results) that embeds
the run configuration, seed, ``git describe`` string and tolerance ladder. Reports carry
no timestamps, so the same arguments give byte-identical output.

Exit codes: 0 success, 2 validation failure, 3 solver failure, 64 usage error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import athermality as ath
from . import eplt
from . import linalg as la
from .errors import BadParameter, PreservaError, SolverError
from .monotones import THEORIES, axiom_harness
from .quantum import channel_from_json, identity

REPORT_VERSION = 1
EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_USAGE = 0, 2, 3, 64
SIG_DIGITS = 12


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "json"
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(obj) - known
        if extra:
            raise UsageError(f"unknown config fields: {sorted(extra)}")
        cfg = cls(**obj)
        if not 0 <= int(cfg.seed) < 2 ** 64:
            raise UsageError(f"seed {cfg.seed} is not a 64-bit unsigned integer")
        if cfg.format not in ("json", "csv"):
            raise UsageError(f"unknown format {cfg.format!r}")
        return cfg

    def ladder(self) -> la.Tolerances:
        try:
            return dataclasses.replace(la.TOL, **self.tolerances)
        except TypeError as exc:
            raise UsageError(f"unknown tolerance name in {sorted(self.tolerances)}") from exc

    def as_dict(self) -> dict:
        return {"command": self.command, "seed": self.seed, "tolerances": dict(self.tolerances),
                "out": self.out, "format": self.format, "options": dict(self.options)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def git_describe() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def worker_cap() -> int:
    """Worker count from PRESERVA_THREADS (default 1); sweeps here run in-process."""
    raw = os.environ.get("PRESERVA_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"PRESERVA_THREADS={raw!r} is not an integer") from None
    if n < 1:
        raise UsageError("PRESERVA_THREADS must be at least 1")
    return n


def _round(x):
    # 12 significant digits keeps reports diffable across BLAS builds
    if isinstance(x, dict):
        return {str(k): _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{SIG_DIGITS}g}")
    return x


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_round(report), sort_keys=True, indent=2) + "\n"
    rows = report.get("rows")
    if not rows:
        raise UsageError("csv output is only available for commands that produce a table")
    rows = _round(rows)
    cols = sorted({k for r in rows for k in r})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: json.dumps(v) if isinstance(v, (dict, list)) else v for k, v in r.items()})
    return buf.getvalue()


def _load_json(path: str) -> object:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadParameter(f"{path} is not valid JSON: {exc}") from exc


def load_gamma(path: str | None, default) -> ath.ThermalSpec:
    """A gamma file holds either a diagonal matrix literal or {"energies": [...], "beta": b}."""
    if path is None:
        return default
    obj = _load_json(path)
    if isinstance(obj, dict) and "energies" in obj:
        return ath.thermal_state(obj["energies"], float(obj.get("beta", 1.0)))
    if isinstance(obj, dict):
        g = la.matrix_from_json(obj)
    else:
        g = np.asarray(obj, dtype=complex)
        g = np.diag(g) if g.ndim == 1 else g
    if np.max(np.abs(g - np.diag(np.diag(g)))) > la.TOL.structural:
        raise BadParameter("gamma must be diagonal in the energy basis")
    return ath.ThermalSpec.from_populations(np.real(np.diag(g)))


def _spec_json(spec: ath.ThermalSpec) -> dict:
    return {"energies": list(spec.energies), "beta": spec.beta, "populations": spec.populations.tolist()}


def _as_dict(dc) -> dict:
    return {f.name: getattr(dc, f.name) for f in dataclasses.fields(dc)
            if f.repr and not isinstance(getattr(dc, f.name), np.ndarray)}


def cmd_preservability(args, cfg) -> tuple[dict, bool]:
    spec = load_gamma(args.gamma, ath.ThermalSpec.from_populations([0.5, 0.5]))
    if args.channel is None:
        channel = identity(spec.d)
    else:
        channel = channel_from_json(_load_json(args.channel))
    rep = ath.p_dmax_report(channel, spec, seed=cfg.seed)
    sb = ath.smooth_p_bar_bounds(channel, spec, args.delta)
    return {
        "gamma": _spec_json(spec),
        "p_dmax": rep.value,
        "p_dmax_grid": rep.grid_value,
        "p_dmax_certified": rep.certified,
        "p_bar_dmax": ath.p_bar_dmax(channel, spec),
        "smooth_p_bar_dmax": {"delta": args.delta, "lower": sb.lower, "upper": sb.upper},
    }, True


def cmd_bath(args, cfg) -> tuple[dict, bool]:
    spec = load_gamma(args.gamma, ath.ThermalSpec.from_populations([0.75, 0.25]))
    channel = ath.gibbs_channel("energy_dephasing", spec)
    rep = ath.bath_bounds(channel, spec, args.epsilon, seed=cfg.seed)
    return {"gamma": _spec_json(spec), "channel": "energy_dephasing", **_as_dict(rep)}, True


def cmd_comm(args, cfg) -> tuple[dict, bool]:
    spec = load_gamma(args.gamma, ath.ThermalSpec.from_populations([0.75, 0.25]))
    audit = ath.comm_audit(spec, m=args.messages, trials=args.trials, delta=args.delta, seed=cfg.seed)
    return {"gamma": _spec_json(spec), "M": audit.M, "trials": audit.trials, "delta": audit.delta,
            "violations": audit.violations, "min_margin": audit.min_margin, "rows": audit.rows}, \
        audit.violations == 0


def cmd_destroy(args, cfg) -> tuple[dict, bool]:
    spec = load_gamma(args.gamma, ath.ThermalSpec.from_populations([0.5, 0.5]))
    channel = ath.gibbs_channel("partial_thermalization", spec, args.lam)
    rep = ath.convex_split_experiment(channel, spec, args.n)
    ok = rep.bound_holds and rep.choi_identity_error <= cfg.ladder().derived
    return {"gamma": _spec_json(spec), "lambda": args.lam, **_as_dict(rep)}, ok


def cmd_build(args, cfg) -> tuple[dict, bool]:
    ga = load_gamma(args.gammaA, ath.ThermalSpec.from_populations([0.5, 0.5])).gamma.op
    gb = load_gamma(args.gammaB, ath.ThermalSpec.from_populations([0.5, 0.5])).gamma.op
    eps = eplt.eplt_params(ga, gb, args.eps).eps
    bundle = eplt.bundle_to_json(ga, gb, eps, args.family)
    if args.bundle_out:
        # full precision so that verification can re-solve the ladders exactly
        Path(args.bundle_out).write_text(json.dumps(bundle, sort_keys=True, indent=2) + "\n")
    return {"bundle": args.bundle_out, "family": args.family, "eps": eps,
            "deltas_A": bundle["deltas_A"], "deltas_B": bundle["deltas_B"]}, True


def cmd_verify(args, cfg) -> tuple[dict, bool]:
    obj = _load_json(args.bundle)
    if not isinstance(obj, dict):
        raise BadParameter("bundle must be a JSON object")
    channel, params, family = eplt.bundle_from_json(obj)
    tol = cfg.ladder().derived
    ok = eplt.verify_local_thermalization(channel, params.gamma_A, params.gamma_B, tol=tol, seed=cfg.seed)
    d = params.gamma_A.shape[0]
    out = channel(la.projector(la.max_entangled(d)))
    return {"family": family, "eps": params.eps, "eps_star": params.eps_star,
            "locally_thermalizing": ok, "singlet_fraction": eplt.singlet_fraction(out),
            "npt": eplt.is_npt(out)}, ok


def cmd_theorem6(args, cfg) -> tuple[dict, bool]:
    ga = load_gamma(args.gammaA, ath.ThermalSpec.from_populations([0.5, 0.5])).gamma.op
    gb = load_gamma(args.gammaB, ath.ThermalSpec.from_populations([0.5, 0.5])).gamma.op
    audit = eplt.theorem6_audit(ga, gb, seed=cfg.seed)
    rows = [{"kind": "diamond", **r} for r in audit.candidates]
    rows += [{"kind": "twirl_induced", **r} for r in audit.twirl_candidates]
    return {"d": audit.d, "p_min": audit.p_min, "bound": audit.bound, "vacuous": audit.vacuous,
            "violations": audit.violations, "twirl_bound": audit.twirl_bound,
            "twirl_violations": audit.twirl_violations, "rows": rows}, \
        audit.violations == 0 and audit.twirl_violations == 0


def cmd_theorem7(args, cfg) -> tuple[dict, bool]:
    ga = load_gamma(args.gammaA, ath.ThermalSpec.from_populations([0.5, 0.5])).gamma.op
    gb = load_gamma(args.gammaB, ath.ThermalSpec.from_populations([0.5, 0.5])).gamma.op
    rep = eplt.small_preservability_search(ga, gb, args.delta, seed=cfg.seed)
    ok = rep.upper_bound < rep.delta and (rep.witness_npt or ga.shape[0] > 2)
    return _as_dict(rep), ok


def cmd_activation(args, cfg) -> tuple[dict, bool]:
    w = eplt.activation_window(args.d)
    return _as_dict(w), w.nonempty and w.midpoint_fef > 1.0 / args.d


def cmd_harness(args, cfg) -> tuple[dict, bool]:
    rep = axiom_harness(args.theory, trials=args.trials, seed=cfg.seed, tol=cfg.ladder().optimization)
    rows = [{"axiom": k, **v.as_dict()} for k, v in rep.axioms.items()]
    return {"theory": rep.theory, "evaluator": rep.evaluator, "exact": rep.exact, "trials": rep.trials,
            "total_violations": rep.total_violations, "failing_violations": rep.failing_violations,
            "free_point_max": rep.free_point_max, "rows": rows}, rep.failing_violations == 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    if "--out" not in p._option_string_actions:
        p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                   help="override a tolerance ladder entry")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="preserva", description="Channel preservability experiments.")
    top = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    th = top.add_parser("athermality").add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = th.add_parser("preservability", help="p_dmax, p_bar_dmax and smooth brackets")
    p.add_argument("--channel", help="channel JSON (Kraus literal); default identity")
    p.add_argument("--gamma", help="gamma JSON; default I/2")
    p.add_argument("--delta", type=float, default=0.01, help="smoothing for the bracket")
    p.set_defaults(func=cmd_preservability)
    p = th.add_parser("bath", help="bath-size bounding quantities for energy dephasing")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--gamma", help="gamma JSON; default diag(3/4, 1/4)")
    p.set_defaults(func=cmd_bath)
    p = th.add_parser("comm", help="communication bound audit")
    p.add_argument("--messages", type=int, default=2)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--gamma", help="gamma JSON; default diag(3/4, 1/4)")
    p.set_defaults(func=cmd_comm)
    p = th.add_parser("destroy", help="convex-split destruction experiment")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--lam", type=float, default=1.0 / 3.0, help="partial thermalization weight")
    p.add_argument("--gamma", help="gamma JSON; default I/2")
    p.set_defaults(func=cmd_destroy)

    ep = top.add_parser("eplt").add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = ep.add_parser("build", help="write an EPLT bundle")
    p.add_argument("--family", choices=("W", "E"), default="W")
    p.add_argument("--eps", type=float, default=None, help="default eps_star")
    p.add_argument("--gammaA")
    p.add_argument("--gammaB")
    # here --out names the bundle; the report always goes to stdout
    p.add_argument("--out", dest="bundle_out", help="bundle file")
    p.set_defaults(func=cmd_build)
    p = ep.add_parser("verify", help="check a bundle's local thermalization")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_verify)
    p = ep.add_parser("theorem6", help="distance audit at eps_star")
    p.add_argument("--gammaA")
    p.add_argument("--gammaB")
    p.set_defaults(func=cmd_theorem6)
    p = ep.add_parser("theorem7", help="small-preservability search")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--gammaA")
    p.add_argument("--gammaB")
    p.set_defaults(func=cmd_theorem7)
    p = ep.add_parser("activation", help="activation window")
    p.add_argument("--d", type=int, required=True)
    p.set_defaults(func=cmd_activation)

    mo = top.add_parser("monotone").add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = mo.add_parser("harness", help="monotone axiom harness")
    p.add_argument("--theory", choices=THEORIES, default="athermality")
    p.add_argument("--trials", type=int, default=200)
    p.set_defaults(func=cmd_harness)

    for sub in (th, ep, mo):
        for child in sub.choices.values():
            _common(child)
    return parser


def _parse_tols(items) -> dict:
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects NAME=VALUE, got {item!r}")
        try:
            out[name] = float(value)
        except ValueError:
            raise UsageError(f"--tol value {value!r} is not a number") from None
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    options = {k: v for k, v in sorted(vars(args).items())
               if k not in ("func", "group", "command", "seed", "out", "format", "tol")}
    try:
        cfg = RunConfig.from_dict({
            "command": f"{args.group} {args.command}", "seed": args.seed,
            "tolerances": _parse_tols(args.tol), "out": getattr(args, "out", None), "format": args.format,
            "options": options,
        })
        ladder = cfg.ladder()
        threads = worker_cap()
        result, ok = args.func(args, cfg)
        report = {"report_version": REPORT_VERSION, "config": cfg.as_dict(), "seed": cfg.seed,
                  "git_describe": git_describe(), "tolerances": ladder.as_dict(),
                  "workers": threads, "ok": ok, **result}
        text = render(report, cfg.format)
    except UsageError as exc:
        print(f"preserva: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PreservaError as exc:
        print(f"preserva: validation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"preserva: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
