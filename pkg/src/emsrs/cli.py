"""Command-line interface: ``emsrs <subcommand> [options]``.

Data goes to ``--out`` (or stdout) as CSV or JSON; a short summary is
printed to stdout when ``--out`` is given and to stderr otherwise. Errors
are reported on stderr as one JSON object and mapped to exit codes:
2 for usage and config errors, 3 for physical-domain errors, 4 for
numerical-convergence failures.
"""

import argparse
import json
import math
import sys
import warnings

import numpy as np

from . import __version__
from .config import ScenarioConfig, evaluate_expression, load_config, parse_assignments, \
    parse_grid
from .exceptions import ConfigError, DomainError, EmsrsError
from .protocols import (
    beta_sweep,
    estimate_study,
    fringe_sweep,
    phase_report,
    phase_table,
    resonance_scan,
    run_protocol_a,
    run_protocol_b,
    validity_report,
)

# command-line flag -> config key
_SCENARIO_FLAGS = {
    "species": "species", "preset": "preset", "d": "d", "B0": "B0", "axis": "bias_axis",
    "T": "temperature", "NS": "N_S", "Ne": "N_e", "polarization": "polarization",
    "pulses": "pulses", "t0_grid": "t0_grid", "phi_grid": "phi_grid",
    "energy": "beam_energy", "t_life": "t_life", "dz": "dz", "dr_perp": "dr_perp",
}


class UsageError(ConfigError):
    """Bad command line (unknown flag, missing argument)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _scenario_parent():
    p = _Parser(add_help=False)
    g = p.add_argument_group("scenario (override the config file; values take units)")
    g.add_argument("--species", help="electron, proton or custom")
    g.add_argument("--preset", help="gyromagnetic ratios: paper or codata")
    g.add_argument("--d", help="beam-spin distance, e.g. 0.1nm")
    g.add_argument("--B0", help="bias field, e.g. 1.8T")
    g.add_argument("--axis", help="bias axis: x, y, z or [nx, ny, nz]")
    g.add_argument("--T", help="temperature, e.g. 10K, or 'pure'")
    g.add_argument("--NS", help="number of spins in the column")
    g.add_argument("--Ne", help="electrons per scan point")
    g.add_argument("--polarization", help="override polarization, e.g. 12%%")
    g.add_argument("--pulses", help="e.g. 'y:pi rad' or 'x:pi/2 rad'")
    g.add_argument("--t0-grid", dest="t0_grid", help="Larmor phases omega0*t0, e.g. 'periodic(0, 2*pi, 8) rad'")
    g.add_argument("--phi-grid", dest="phi_grid", help="external phases, e.g. 'periodic(0, 2*pi, 12) rad'")
    g.add_argument("--energy", help="beam kinetic energy, e.g. 200keV")
    g.add_argument("--t-life", dest="t_life", help="spin lifetime gate, e.g. 1ms")
    g.add_argument("--dz", help="longitudinal wave-packet size, e.g. 1um")
    g.add_argument("--dr-perp", dest="dr_perp", help="transverse beam size, e.g. 10pm")
    return p


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="scenario file (key = value unit)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, help="unsigned 64-bit RNG seed")
    common.add_argument("--quiet", action="store_true", help="suppress the summary")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    scenario = _scenario_parent()

    parser = _Parser(prog="emsrs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"emsrs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_, **kw):
        return sub.add_parser(name, help=help_, parents=[common, scenario], **kw)

    add("phase", "AB phase (closed form and quadrature) and deflection angle")
    add("fringe", "fringe phase and visibility versus Larmor phase")
    add("protocol-a", "pi / pi-2 pulse protocol, bias along the normal")
    add("protocol-b", "pi-2 pulse precession protocol, bias along z")
    r = add("resonance", "integrated signal versus electron pulse rate")
    r.add_argument("--omega-grid", help="pulse rates, unit rad/s, Hz... or omega0 "
                   "(default: linspace(0.5, 1.5, 101) omega0)")
    r.add_argument("--mode", choices=("magnitude", "coherent"), default="magnitude")
    r.add_argument("--n-pulses", type=int, default=50)
    b = add("beta-sweep", "phase and visibility versus spin tilt beta")
    b.add_argument("--points", type=int, default=360)
    add("table", "differential phases for the standard scenarios")
    e = add("estimate", "Monte Carlo maximum-likelihood study against the CRB")
    e.add_argument("--phi", default="0", help="external phase in rad (expression)")
    e.add_argument("--theta", default="0.2", help="true coupling theta in rad (expression)")
    e.add_argument("--sx", default="1", help="<sigma_x(t0)> of the spin")
    e.add_argument("--trials", type=int, default=1000)
    c = add("check", "validity limits of the semiclassical model (exit 3 if violated)")
    c.add_argument("--margin", type=float, default=10.0)
    return parser


_Z_DEFAULT = ("protocol-b", "resonance")


def build_config(args):
    base = ScenarioConfig(bias_axis=(0.0, 0.0, 1.0)) if args.command in _Z_DEFAULT \
        else ScenarioConfig()
    cfg = load_config(args.config, base) if args.config else base
    pairs = [(key, getattr(args, flag)) for flag, key in _SCENARIO_FLAGS.items()
             if getattr(args, flag, None) is not None]
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        pairs.append(tuple(item.split("=", 1)))
    if args.seed is not None:
        pairs.append(("seed", str(args.seed)))
    return parse_assignments(pairs, cfg) if pairs else cfg


def _omega_grid(text, omega0):
    if text is None:
        return np.linspace(0.5, 1.5, 101) * omega0
    body = text.strip()
    if body.endswith("omega0"):
        # bare multiples of omega0
        return np.asarray(parse_grid(body[: -len("omega0")], "fraction", "omega_grid")) * omega0
    return np.asarray(parse_grid(body, "angular_frequency", "omega_grid"))


def run(args):
    cfg = build_config(args)
    cmd = args.command
    if cmd == "phase":
        return phase_report(cfg)
    if cmd == "fringe":
        return fringe_sweep(cfg)
    if cmd == "protocol-a":
        return run_protocol_a(cfg)
    if cmd == "protocol-b":
        return run_protocol_b(cfg)
    if cmd == "resonance":
        omega0 = cfg.spin_species().gamma * cfg.B0
        return resonance_scan(cfg, _omega_grid(args.omega_grid, omega0), args.mode, args.n_pulses)
    if cmd == "beta-sweep":
        if args.points < 1:
            raise UsageError("--points must be positive")
        return beta_sweep(cfg, np.linspace(0, 2 * math.pi, args.points, endpoint=False))
    if cmd == "table":
        return phase_table(preset=cfg.preset, cfg=cfg)
    if cmd == "estimate":
        theta = float(evaluate_expression(args.theta))
        phi = float(evaluate_expression(args.phi))
        sx = float(evaluate_expression(args.sx))
        if abs(sx) > 1:
            raise DomainError("|sx| must not exceed 1")
        return estimate_study(cfg, theta, phi, sx, args.trials)
    if cmd == "check":
        return validity_report(cfg, args.margin)
    raise UsageError(f"unknown command {cmd!r}")


def _summary_text(result):
    lines = []
    for key, value in result.summary.items():
        if isinstance(value, float):
            value = format(value, ".6g")
        elif isinstance(value, list):
            continue
        lines.append(f"{key} = {value}")
    return "\n".join(lines)


def _report_error(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.quiet:
            warnings.simplefilter("ignore")
        result = run(args)
        text = result.to_json() if args.format == "json" else result.to_csv()
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if not args.quiet:
            print(_summary_text(result), file=sys.stdout if args.out else sys.stderr)
        if args.command == "check" and not result.summary["ok"]:
            return DomainError.exit_code
        return 0
    except EmsrsError as exc:
        return _report_error(exc, exc.exit_code)
    except OSError as exc:
        return _report_error(exc, ConfigError.exit_code)
    except ValueError as exc:
        return _report_error(exc, DomainError.exit_code)


if __name__ == "__main__":
    sys.exit(main())
