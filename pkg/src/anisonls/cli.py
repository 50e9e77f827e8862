"""Command-line interface: ``anisonls <command> [options]``.

Commands: ``solve-scalar``, ``solve-system``, ``constants``, ``fiber-scan``,
``verify``. Settings come from a JSON config (``--config``) with flag
overrides; flags win. Exit codes: 0 success, 1 usage or configuration
error, 2 numerical non-convergence (or a failed checklist for ``verify``).
"""

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import grid as gs
from . import io
from .functionals import ModelParams, StatePair, coercivity_constants, delta_branches, delta_lower_bound
from .options import SolverOptions
from .scalar import (
    alpha_ratio,
    beta_threshold,
    gn_constants,
    mass_threshold,
    scaled_solution,
    scalar_level,
    solve_scalar_base,
)
from .system import (
    _report_from_state,
    fiber_path_scan,
    solve_system,
    verify_ground_state,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

_PARAM_DEFAULTS = {"s": 0.75, "p": 5.0, "q": 5.0, "r1": 1.5, "r2": 3.0}


class ConfigError(ValueError):
    """Invalid configuration or usage; maps to exit code 1."""


@dataclass
class RunConfig:
    """Everything a command needs, validated before any computation."""

    params: dict
    grid: gs.Grid | None
    options: SolverOptions
    out: Path
    extra: dict = field(default_factory=dict)

    def model_params(self):
        values = dict(_PARAM_DEFAULTS)
        values.update(self.params)
        try:
            return ModelParams(**values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model parameters: {exc}") from exc

    def scalar_setup(self):
        """``(s, p, mu, mass)`` for the single equation."""
        section = dict(self.extra.get("scalar", {}))
        s = section.get("s", self.params.get("s", _PARAM_DEFAULTS["s"]))
        p = section.get("p", self.params.get("p", _PARAM_DEFAULTS["p"]))
        mu = section.get("mu", self.params.get("mu1", 1.0))
        mass = section.get("mass", self.params.get("a", 1.0))
        for name, value in (("mu", mu), ("mass", mass)):
            if not isinstance(value, (int, float)) or not value > 0:
                raise ConfigError(f"{name} must be a positive number, got {value!r}")
        return s, p, mu, mass


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_grid(text):
    parts = text.split(",")
    if len(parts) != 4:
        raise ConfigError(f"--grid expects NX,NY,LX,LY, got {text!r}")
    try:
        nx, ny = int(parts[0]), int(parts[1])
        lx, ly = float(parts[2]), float(parts[3])
        return gs.Grid(lx, ly, nx, ny)
    except ValueError as exc:
        raise ConfigError(f"invalid --grid {text!r}: {exc}") from exc


def _grid_from_dict(data):
    try:
        return gs.Grid(float(data["half_length_x"]), float(data["half_length_y"]), int(data["nx"]), int(data["ny"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid section {data!r}: {exc}") from exc


def load_config(args):
    """Merge the JSON config file with command-line overrides."""
    raw = {}
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        section, _, name = key.partition(".")
        if not name:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        raw.setdefault(section, {})[name] = _parse_value(value)
    params = dict(raw.get("params", {}))
    option_values = dict(raw.get("options", {}))
    if args.seed is not None:
        option_values["seed"] = args.seed
    if getattr(args, "max_iters", None) is not None:
        option_values["max_iters"] = args.max_iters
    known = {f.name for f in fields(SolverOptions)}
    unknown = set(option_values) - known
    if unknown:
        raise ConfigError(f"unknown solver options: {sorted(unknown)}")
    try:
        options = SolverOptions(**option_values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver options: {exc}") from exc
    grid = None
    if args.grid is not None:
        grid = _parse_grid(args.grid)
    elif raw.get("grid"):
        grid = _grid_from_dict(raw["grid"])
    extra = {k: v for k, v in raw.items() if k not in ("params", "options", "grid")}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return RunConfig(params=params, grid=grid, options=options, out=out, extra=extra)


def cmd_solve_scalar(config):
    s, p, mu, mass = config.scalar_setup()
    try:
        base = solve_scalar_base(s, p, config.grid, config.options)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    io.write_agf1(config.out / "base_profile.agf", base.profile, s)
    payload = base.summary()
    payload.update({"mu": mu, "target_mass": mass, "seed": config.options.seed, "files": {"base_profile": "base_profile.agf"}})
    if base.converged:
        solution = scaled_solution(base, mu, mass)
        io.write_agf1(config.out / "scaled_profile.agf", solution.field, s)
        level = scalar_level(base, mu, mass)
        payload["scaled"] = {
            "lambda": solution.lam,
            "level": level.direct,
            "level_closed_form": level.closed_form,
            "grid": solution.field.grid.as_dict(),
        }
        payload["files"]["scaled_profile"] = "scaled_profile.agf"
    io.write_json(config.out / "scalar_report.json", payload)
    status = "converged" if base.converged else "not converged"
    print(
        f"solve-scalar s={s:g} p={p:g}: {status}; level {base.level:.12g}, "
        f"Pohozaev {base.pohozaev_residual:.3e}, Euler-Lagrange {base.el_residual:.3e}"
    )
    return EXIT_OK if base.converged else EXIT_NUMERICAL


def _write_state(out, stem, state, s):
    io.write_agf1(out / f"{stem}_u.agf", state.u, s)
    io.write_agf1(out / f"{stem}_v.agf", state.v, s)
    return {"u": f"{stem}_u.agf", "v": f"{stem}_v.agf"}


def cmd_solve_system(config):
    params = config.model_params()
    sweep = bool(config.extra.get("sweep", False))
    report = solve_system(params, config.grid, config.options)
    files = _write_state(config.out, "state", report.state, params.s)
    payload = report.as_dict()
    payload["files"] = files
    io.write_json(config.out / "report.json", payload)
    if sweep:
        summary = {"seeds": {}, "level_estimate": report.level_estimate, "level_spread": report.level_spread}
        for single in report.runs:
            seed = single.seed
            stem = f"seed_{seed}"
            single_files = _write_state(config.out, stem, single.state, params.s)
            single_payload = single.as_dict()
            single_payload["files"] = single_files
            io.write_json(config.out / f"report_{stem}.json", single_payload)
            summary["seeds"][str(seed)] = {"level": single.energy, "converged": single.converged, "report": f"report_{stem}.json"}
        io.write_json(config.out / "summary.json", summary)
    _print_checklist(report.checklist)
    print(
        f"solve-system: {'converged' if report.converged else 'not converged'} ({report.status}); "
        f"level {report.level_estimate:.12g}, lambda = ({report.lambda1:.6g}, {report.lambda2:.6g})"
    )
    return EXIT_OK if report.converged else EXIT_NUMERICAL


def _gn_table(g):
    return {"c_sp": g.c_sp, "c_h": g.c_h, "nu_l2": g.nu_l2}


def cmd_constants(config):
    params = config.model_params()
    opts = config.options
    bases = {}
    for exponent in sorted({params.p, params.q, params.r1 + params.r2}):
        bases[exponent] = solve_scalar_base(params.s, exponent, None, opts)
    base_p, base_q = bases[params.p], bases[params.q]
    gn = {"p": gn_constants(base_p), "q": gn_constants(base_q), "r": gn_constants(bases[params.r1 + params.r2])}
    coercive = coercivity_constants(params)
    level_p = scalar_level(base_p, params.mu1, params.a)
    level_q = scalar_level(base_q, params.mu2, params.b)
    threshold = mass_threshold(base_p, base_q, params)
    beta_p = beta_threshold(base_p, params.mu1, params.a, params.r1)
    beta_q = beta_threshold(base_q, params.mu2, params.b, params.r2)
    payload = {
        "params": params.as_dict(),
        "tau": coercive.tau,
        "c0": coercive.c0,
        "delta": delta_lower_bound(params, gn),
        "delta_branches": delta_branches(params, gn),
        "gn": {"p": _gn_table(gn["p"]), "q": _gn_table(gn["q"]), "r": _gn_table(gn["r"])},
        "m_p": level_p.direct,
        "m_p_closed_form": level_p.closed_form,
        "m_q": level_q.direct,
        "m_q_closed_form": level_q.closed_form,
        "mass_threshold": {
            "b": threshold.b,
            "printed_closed_form": threshold.printed_closed_form,
            "printed_deviation": threshold.printed_deviation,
            "derived_closed_form": threshold.derived_closed_form,
            "derived_deviation": threshold.derived_deviation,
            "alpha": alpha_ratio(params),
        },
        "beta_threshold": {
            "p_mu1_a_r1": _beta_table(beta_p),
            "q_mu2_b_r2": _beta_table(beta_q),
        },
        "base_residuals": {
            f"{k:g}": {"pohozaev": v.pohozaev_residual, "euler_lagrange": v.el_residual, "converged": v.converged}
            for k, v in bases.items()
        },
    }
    io.write_json(config.out / "constants.json", payload)
    print(io.dumps(payload), end="")
    return EXIT_OK if all(v.converged for v in bases.values()) else EXIT_NUMERICAL


def _beta_table(result):
    return {
        "value": result.value,
        "raw_value": result.raw_value,
        "quotient": result.quotient,
        "operator_applications": result.iterations,
        "caveat": result.caveat,
    }


def _load_state(paths):
    try:
        u, s_u = io.read_agf1(paths[0])
        v, s_v = io.read_agf1(paths[1])
    except FileNotFoundError as exc:
        raise ConfigError(f"state file not found: {exc.filename}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if u.grid != v.grid:
        raise ConfigError("state files live on different grids")
    return StatePair(u, v), s_u


def _state_paths(args, config):
    if args.report is not None:
        report_path = Path(args.report)
        if not report_path.is_file():
            raise ConfigError(f"report file not found: {report_path}")
        data = io.read_json(report_path)
        files = data.get("files")
        if not files:
            raise ConfigError(f"report {report_path} names no state files")
        params = data.get("params")
        if params:
            merged = dict(params)
            merged.update(config.params)
            config.params = merged
        return report_path.parent / files["u"], report_path.parent / files["v"]
    if args.u is None or args.v is None:
        raise ConfigError("give --report, or both --u and --v")
    return Path(args.u), Path(args.v)


def cmd_fiber_scan(config, args):
    state, s = _load_state(_state_paths(args, config))
    config.params.setdefault("s", s)
    params = config.model_params()
    try:
        scan = fiber_path_scan(state, params, args.t_lo, args.t_hi, args.n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    path = config.out / "fiber_scan.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "phi", "phi_prime"])
        for t, value, slope in zip(scan.t_values, scan.energies, scan.derivatives):
            writer.writerow([format(t, ".17g"), format(value, ".17g"), format(slope, ".17g")])
    summary = {
        "argmax_t": scan.argmax_t,
        "max_energy": scan.max_energy,
        "projection_time": scan.projection_time,
        "projection_energy": scan.projection_energy,
        "csv": path.name,
    }
    io.write_json(config.out / "fiber_scan.json", summary)
    print(f"fiber-scan: argmax t = {scan.argmax_t:.10g}, max phi = {scan.max_energy:.12g}, t0 = {scan.projection_time:.12g}")
    return EXIT_OK


def cmd_verify(config, args):
    state, s = _load_state(_state_paths(args, config))
    config.params.setdefault("s", s)
    params = config.model_params()
    report = _report_from_state(state, params, 0, "loaded", config.options.seed, "", config.options)
    checklist = verify_ground_state(report, params, opts=config.options)
    io.write_json(config.out / "verify.json", {"params": params.as_dict(), "checklist": checklist})
    _print_checklist(checklist)
    return EXIT_OK if all(item["pass"] for item in checklist.values()) else EXIT_NUMERICAL


def _print_checklist(checklist):
    if not checklist:
        return
    width = max(len(name) for name in checklist)
    for index, (name, item) in enumerate(checklist.items(), start=1):
        mark = "PASS" if item["pass"] else "FAIL"
        value = item["value"]
        shown = f"{value:.6e}" if isinstance(value, float) and math.isfinite(value) else str(value)
        print(f"{index}. {name:<{width}}  {mark}  value={shown}  threshold={item['threshold']}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--grid", help="NX,NY,LX,LY (sample counts and box half-lengths)")
    common.add_argument("--seed", type=int, help="seed of the initial perturbation")
    common.add_argument("--max-iters", type=int, dest="max_iters", help="iteration cap per descent")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config entry")

    parser = argparse.ArgumentParser(prog="anisonls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve-scalar", parents=[common], help="base scalar ground state and its scaled copy")
    system = sub.add_parser("solve-system", parents=[common], help="coupled ground state and checklist")
    system.add_argument("--sweep", action="store_true", help="also write one report per seed and a summary")
    sub.add_parser("constants", parents=[common], help="sharp constants, levels and thresholds")
    for name, text in (("fiber-scan", "tabulate phi along the fiber of a stored state"), ("verify", "checklist of a stored state")):
        cmd = sub.add_parser(name, parents=[common], help=text)
        cmd.add_argument("--report", help="report JSON naming the state files")
        cmd.add_argument("--u", help="AGF1 file of the first component")
        cmd.add_argument("--v", help="AGF1 file of the second component")
        if name == "fiber-scan":
            cmd.add_argument("--t-lo", type=float, default=1e-2, dest="t_lo")
            cmd.add_argument("--t-hi", type=float, default=1e2, dest="t_hi")
            cmd.add_argument("--n", type=int, default=2001)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 is reserved for non-convergence
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        config = load_config(args)
        if args.command == "solve-system" and args.sweep:
            config.extra["sweep"] = True
        if args.command == "solve-scalar":
            return cmd_solve_scalar(config)
        if args.command == "solve-system":
            return cmd_solve_system(config)
        if args.command == "constants":
            return cmd_constants(config)
        if args.command == "fiber-scan":
            return cmd_fiber_scan(config, args)
        return cmd_verify(config, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
