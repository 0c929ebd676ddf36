"""Command-line front end.

Subcommands: simulate, cal-solr, cal-mtrl, characterize, correct, report,
check. Exit codes are part of the contract:

    0  success
    2  file/config parse errors (also argparse usage errors)
    3  calibration solver errors
    4  threshold / validity failure ("cal invalid", not a crash)

If a --config path does not exist as given, it is retried relative to
$QUADCAL_CONFIG_DIR.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .configfile import read_config_file
from .errormodel import read_cal_model
from .errors import ConfigError, QuadcalError, SolverError, TouchstoneError
from .harness import (DEFAULT_THRESHOLD_DB, check_network, run_cal,
                      run_characterize, run_correct, scenario_from_config,
                      simulate_measurements)
from .standards import threshold_report
from .touchstone import ports_from_path, read_touchstone_file

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SOLVER = 3
EXIT_THRESHOLD = 4

CONFIG_DIR_ENV = "QUADCAL_CONFIG_DIR"


def _locate_config(path):
    if os.path.exists(path):
        return path
    base = os.environ.get(CONFIG_DIR_ENV)
    if base:
        alt = os.path.join(base, path)
        if os.path.exists(alt):
            return alt
    raise ConfigError(f"config file not found: {path}"
                      + (f" (also tried under ${CONFIG_DIR_ENV})" if base else ""))


def _read_net(path, ports):
    n = ports if ports is not None else ports_from_path(path)
    if n is None:
        raise ConfigError(f"cannot infer port count of {path}; pass --ports")
    return read_touchstone_file(path, n)


def _cmd_simulate(args):
    doc = read_config_file(_locate_config(args.config))
    scn = scenario_from_config(doc, os.path.dirname(os.path.abspath(doc.source)))
    if args.seed is not None:
        scn = replace(scn, seed=args.seed)
    sim = simulate_measurements(scn, args.out)
    print(f"wrote {len(sim.files)} raw files and session.cfg to {args.out}")
    return EXIT_OK


def _run_cal_cmd(args, method):
    result = run_cal(_locate_config(args.config), method, args.out,
                     threshold_db=args.threshold_db)
    print(result.report)
    if not result.load_threshold.full_grid and \
            result.load_threshold.valid_up_to is None:
        print("cal invalid: load definition fails the threshold at the "
              "first grid point", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def _cmd_characterize(args):
    cal, characterized = run_characterize(_locate_config(args.config), args.out)
    for p, ch in sorted(characterized.items()):
        print(f"port {p}: open C0 = {ch.open_fit.model.coeffs[0] * 1e15:.6g} fF, "
              f"short L0 = {ch.short_fit.model.coeffs[0] * 1e12:.6g} pH")
    print(f"definitions and session_characterized.cfg written to {args.out}")
    return EXIT_OK


def _cmd_correct(args):
    model = read_cal_model(args.cal)
    raw = _read_net(args.dut, args.ports or model.n_ports)
    result = run_correct(model, raw, args.out)
    print(f"corrected network written to {args.out}")
    if result.reciprocity is not None:
        print(f"corrected reciprocity error: max {result.reciprocity.max():.3g}")
    return EXIT_OK


def _cmd_report(args):
    net = _read_net(args.file, args.ports)
    quantity = {"s11": "s11_below", "reciprocity": "s21_reciprocity"}[args.quantity]
    rep = threshold_report(net, args.threshold_db, quantity)
    print(f"{args.file}: {rep.describe()}")
    print(f"worst margin: {rep.margin_db.min():.4g} dB")
    if args.require_to is not None:
        need = args.require_to * 1e9
        ok = rep.full_grid or (rep.valid_up_to is not None
                               and rep.valid_up_to >= need)
        if not ok:
            print(f"cal invalid: required validity to {args.require_to:g} GHz "
                  "not met", file=sys.stderr)
            return EXIT_THRESHOLD
    return EXIT_OK


def _cmd_check(args):
    net = _read_net(args.file, args.ports)
    info = check_network(net)
    print(f"{args.file}: {info['n_ports']}-port")
    print(f"passivity margin (min): {info['passivity_min_margin']:.6g}")
    if "reciprocity_max" in info:
        print(f"reciprocity error (max): {info['reciprocity_max']:.6g}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="quadcal",
        description="Multiport VNA calibration toolkit: synthetic "
                    "measurements, SOLR/mTRL solves, correction and reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate raw synthetic measurements")
    p.add_argument("--config", required=True, help="scenario config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override seed")
    p.set_defaults(func=_cmd_simulate)

    for name, method in (("cal-solr", "solr"), ("cal-mtrl", "mtrl")):
        p = sub.add_parser(name, help=f"run a {method} calibration session")
        p.add_argument("--config", required=True, help="session config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threshold-db", type=float, default=None,
                       help=f"load validity threshold (default {DEFAULT_THRESHOLD_DB:g})")
        p.set_defaults(func=lambda a, m=method: _run_cal_cmd(a, m))

    p = sub.add_parser("characterize",
                       help="virtual-mTRL characterization of the standards")
    p.add_argument("--config", required=True, help="session config file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_characterize)

    p = sub.add_parser("correct", help="apply a cal model to a raw DUT")
    p.add_argument("--cal", required=True, help="cal-model file")
    p.add_argument("--dut", required=True, help="raw DUT Touchstone file")
    p.add_argument("--out", required=True, help="corrected Touchstone path")
    p.add_argument("--ports", type=int, default=None)
    p.set_defaults(func=_cmd_correct)

    p = sub.add_parser("report", help="threshold/validity report of a file")
    p.add_argument("--file", required=True)
    p.add_argument("--threshold-db", type=float, default=DEFAULT_THRESHOLD_DB)
    p.add_argument("--quantity", choices=("s11", "reciprocity"), default="s11")
    p.add_argument("--require-to", type=float, default=None,
                   help="fail (exit 4) unless valid to this frequency in GHz")
    p.add_argument("--ports", type=int, default=None)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("check", help="reciprocity/passivity of a Touchstone file")
    p.add_argument("--file", required=True)
    p.add_argument("--ports", type=int, default=None)
    p.set_defaults(func=_cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TouchstoneError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except QuadcalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
