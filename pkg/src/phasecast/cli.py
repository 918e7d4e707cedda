"""Command-line front end.

    phasecast scan          one row per N for a setting
    phasecast nopt-contour  optimal round estimate over a (phi, kappa) grid
    phasecast trajectory    Bloch vector and SLD angle of the sequential probe
    phasecast channel-info  channel parameters at one (phi, kappa)
    phasecast validate      run every registered cross-check

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 numeric-domain error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import checks
from . import estimation as est
from . import settings as st
from .channel import ChannelParams, VmfParams, channel_params_mc, channel_params_vmf, liouville_mc, make_rng
from .linalg import SIGMA_X, bloch_from_state

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERIC = 0, 1, 2, 3

SETTINGS = ("sequential", "ancilla", "parallel")
OBSERVABLES = ("sld-optimal", "sigma-x", "sigma-x-tensor", "bell-projector")
FORMATS = ("csv", "json")
SCAN_COLUMNS = ("setting", "N", "phi", "kappa", "qfi", "f_lower", "sens_sigma_x", "sens_bell",
                "sens_opt", "n_opt", "seed")
TRAJECTORY_COLUMNS = ("N", "r_x", "r_y", "r_z", "sld_angle", "sens_sigma_x", "qfi", "seed")
INFO_COLUMNS = ("phi", "kappa", "lambda_par", "lambda_perp", "g", "d_lambda_par", "d_lambda_perp", "d_g",
                "S_re", "S_im", "mu", "nu", "n_opt", "seed")
PARALLEL_N_CAP = 10**6
PARALLEL_VERIFY_N = 8
BOUND_SLACK = 1e-9
SEED_ENV = "PHASECAST_SEED"
NA, INF = "NA", "INF"

CONFIG_KEYS = {"setting", "phi", "kappa", "n_min", "n_max", "observables", "mc_samples", "seed",
               "format", "phi_grid", "kappa_grid"}
DEFAULTS = {"setting": "sequential", "phi": 0.1, "kappa": 1.0, "n_min": 1, "n_max": 200,
            "observables": ",".join(OBSERVABLES), "mc_samples": 0, "format": "csv",
            "phi_grid": None, "kappa_grid": None}


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class ScanConfig:
    setting: str
    phi: float
    kappa: float
    n_min: int
    n_max: int
    observables: tuple
    mc_samples: int
    seed: int
    format: str
    phi_grid: list = field(default_factory=list)
    kappa_grid: list = field(default_factory=list)

    @property
    def vmf(self) -> VmfParams:
        return VmfParams(self.kappa, self.phi)


# -- formatting -----------------------------------------------------------

def fmt(x) -> str:
    """15 significant digits, lowercase exponent; ``NA`` for missing/indeterminate, ``INF`` for infinite."""
    if x is None or isinstance(x, str):
        return NA if x is None else x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return NA
    if math.isinf(x):
        return INF
    return format(x, ".15g")


def _json_value(x):
    s = fmt(x)
    if s in (NA, INF) or isinstance(x, str):
        return s
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(s)


def write_table(rows: list[dict], columns, out_format: str, stream) -> None:
    if out_format == "json":
        json.dump([{c: _json_value(r[c]) for c in columns} for r in rows], stream, indent=1)
        stream.write("\n")
        return
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])


# -- configuration --------------------------------------------------------

def _parse_grid(text, name) -> list[float]:
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        text = str(text).strip()
        try:
            if ":" in text:
                start, stop, num = text.split(":")
                vals = list(np.linspace(float(start), float(stop), int(num)))
            else:
                vals = [float(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise UsageError(f"cannot parse {name} {text!r}: use 'a,b,c' or 'start:stop:count'") from exc
    if not vals:
        raise UsageError(f"{name} is empty")
    return vals


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config file must hold a single flat JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    for k, v in data.items():
        if isinstance(v, dict):
            raise UsageError(f"config key {k!r} must not be nested")
    return data


def _parse_seed(value, origin) -> int:
    try:
        seed = int(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{origin} seed {value!r} is not an integer") from exc
    if not 0 <= seed < 2**64:
        raise UsageError(f"{origin} seed must lie in [0, 2^64)")
    return seed


def resolve_config(args) -> ScanConfig:
    """Defaults, then the JSON config file, then explicit flags (flags win)."""
    merged = dict(DEFAULTS)
    file_cfg = _load_config(args.config) if args.config else {}
    merged.update(file_cfg)
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v

    if "seed" in merged and merged["seed"] is not None:
        seed = _parse_seed(merged["seed"], "flag/config")
    elif os.environ.get(SEED_ENV, "").strip():
        seed = _parse_seed(os.environ[SEED_ENV], SEED_ENV)
    else:
        seed = 0

    try:
        phi, kappa = float(merged["phi"]), float(merged["kappa"])
        n_min, n_max, mc = int(merged["n_min"]), int(merged["n_max"]), int(merged["mc_samples"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid numeric option: {exc}") from exc
    obs = merged["observables"]
    obs = tuple(o.strip() for o in (obs.split(",") if isinstance(obs, str) else obs) if o.strip())

    if merged["setting"] not in SETTINGS:
        raise UsageError(f"setting must be one of {', '.join(SETTINGS)}")
    if merged["format"] not in FORMATS:
        raise UsageError(f"format must be one of {', '.join(FORMATS)}")
    if not math.isfinite(phi):
        raise UsageError("phi must be finite")
    if not (kappa > 0 and math.isfinite(kappa)):
        raise UsageError("kappa must be a positive number")
    if n_min < 1 or n_max < n_min:
        raise UsageError("need 1 <= n-min <= n-max")
    if mc < 0:
        raise UsageError("mc-samples must be >= 0")
    bad = set(obs) - set(OBSERVABLES)
    if bad:
        raise UsageError(f"unknown observable(s) {', '.join(sorted(bad))}; choose from {', '.join(OBSERVABLES)}")

    cfg = ScanConfig(merged["setting"], phi, kappa, n_min, n_max, obs, mc, seed, merged["format"])
    if merged.get("phi_grid") is not None:
        cfg.phi_grid = _parse_grid(merged["phi_grid"], "phi grid")
    if merged.get("kappa_grid") is not None:
        cfg.kappa_grid = _parse_grid(merged["kappa_grid"], "kappa grid")
    return cfg


def channel_for(cfg: ScanConfig) -> ChannelParams:
    if cfg.mc_samples > 0:
        return channel_params_mc(cfg.vmf, cfg.mc_samples, cfg.seed)
    return channel_params_vmf(cfg.vmf)


# -- commands -------------------------------------------------------------

def scan_rows(cfg: ScanConfig) -> list[dict]:
    c = channel_for(cfg)
    n = np.arange(cfg.n_min, cfg.n_max + 1)
    want = set(cfg.observables)
    none = [None] * len(n)
    f_lower = est.lower_bound_f(n, c)
    bell = none
    if cfg.setting == "sequential":
        qfi = est.qfi_sequential_vmf(n, c)
        sx = est.sigma_x_sensitivity_closed(n, c)
    elif cfg.setting == "ancilla":
        qfi = st.qfi_ancilla_closed(n, c)
        sx = est.sigma_x_sensitivity_closed(n, c)
        if "bell-projector" in want:
            bell = st.bell_sensitivity_closed(n, c)
    else:
        if cfg.n_max > PARALLEL_N_CAP:
            raise UsageError(f"parallel scans are capped at N = {PARALLEL_N_CAP}")
        qfi = st.qfi_parallel_closed(n, c)
        sx = np.array([st.sigma_x_tensor_sensitivity(int(k), c) for k in n])
        f_lower = none          # the sequential bound does not apply to the GHZ probe
        if cfg.mc_samples == 0:
            _verify_parallel(cfg, c)
    if not want & {"sigma-x", "sigma-x-tensor"}:
        sx = none
    opt = qfi if "sld-optimal" in want else none
    try:
        n_opt = est.n_opt_estimate(c)
    except ValueError:
        n_opt = math.inf
    return [
        {"setting": cfg.setting, "N": int(k), "phi": cfg.phi, "kappa": cfg.kappa, "qfi": qfi[i],
         "f_lower": f_lower[i], "sens_sigma_x": sx[i], "sens_bell": bell[i], "sens_opt": opt[i],
         "n_opt": n_opt, "seed": cfg.seed}
        for i, k in enumerate(n)
    ]


def _verify_parallel(cfg: ScanConfig, c: ChannelParams) -> None:
    for k in range(max(cfg.n_min, 2), min(cfg.n_max, PARALLEL_VERIFY_N) + 1):
        oracle = est.qfi_eigen(st.ghz_state(k, cfg.vmf))
        closed = st.qfi_parallel_closed(k, c)
        if abs(oracle - closed) > 1e-6:
            raise ValidationFailure(f"GHZ QFI at N={k}: closed form {closed:.15g} vs oracle {oracle:.15g}")


def check_rows(rows: list[dict]) -> None:
    """Refuse to emit a row whose lower bound exceeds its QFI."""
    for r in rows:
        f, q = r.get("f_lower"), r["qfi"]
        if f is None or not (np.isfinite(f) and np.isfinite(q)):
            continue
        if f > q + BOUND_SLACK:
            raise ValidationFailure(f"row N={r['N']}: lower bound {f:.15g} exceeds QFI {q:.15g}")


def trajectory_rows(cfg: ScanConfig) -> list[dict]:
    if cfg.setting != "sequential":
        raise UsageError("trajectory is only defined for the sequential setting")
    family = None
    if cfg.mc_samples > 0:
        def family(x):
            return liouville_mc(cfg.vmf.with_phi(x), cfg.mc_samples, make_rng(cfg.seed))
    rows = []
    for n, s in enumerate(st.sequential_states(cfg.n_max, cfg.vmf, family=family)):
        r = bloch_from_state(s.rho)
        fallback = math.atan2(r[1], r[0])
        rows.append({"N": n, "r_x": r[0], "r_y": r[1], "r_z": r[2],
                     "sld_angle": st.sld_angle(s, fallback=fallback),
                     "sens_sigma_x": est.observable_sensitivity(s, SIGMA_X),
                     "qfi": est.qfi_eigen(s), "seed": cfg.seed})
    return rows


def info_row(cfg: ScanConfig) -> dict:
    c = channel_for(cfg)
    try:
        n_opt = est.n_opt_estimate(c)
    except ValueError:
        n_opt = math.inf
    return {"phi": cfg.phi, "kappa": cfg.kappa, "lambda_par": c.lambda_par, "lambda_perp": c.lambda_perp,
            "g": c.g, "d_lambda_par": c.d_lambda_par, "d_lambda_perp": c.d_lambda_perp, "d_g": c.d_g,
            "S_re": c.S.real, "S_im": c.S.imag, "mu": c.mu, "nu": c.nu, "n_opt": n_opt, "seed": cfg.seed}


def nopt_grid(cfg: ScanConfig):
    phis = cfg.phi_grid or [cfg.phi]
    kappas = cfg.kappa_grid or [cfg.kappa]
    if any(not p > 0 for p in phis) or any(not k > 0 for k in kappas):
        raise UsageError("grid values of phi and kappa must be positive")
    grid = []
    for phi in phis:
        row = []
        for kappa in kappas:
            c = channel_params_vmf(VmfParams(kappa, phi))
            row.append(math.inf if c.lambda_perp >= 1 else est.n_opt_estimate(c))
        grid.append(row)
    return phis, kappas, grid


def write_grid(phis, kappas, grid, out_format, stream) -> None:
    if out_format == "json":
        payload = {"phi": [_json_value(p) for p in phis], "kappa": [_json_value(k) for k in kappas],
                   "n_opt": [[_json_value(v) for v in row] for row in grid]}
        json.dump(payload, stream, indent=1)
        stream.write("\n")
        return
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["phi\\kappa", *(fmt(k) for k in kappas)])
    for phi, row in zip(phis, grid):
        w.writerow([fmt(phi), *(fmt(v) for v in row)])


def _parse_overrides(items) -> dict[str, float]:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"tolerance override {item!r} must look like NAME=VALUE")
        try:
            out[name] = float(value)
        except ValueError as exc:
            raise UsageError(f"tolerance override {item!r} has a non-numeric value") from exc
    return out


def run_validate(args, cfg: ScanConfig, stream) -> int:
    overrides = _parse_overrides(args.inject_tolerance)
    if overrides and not args.test_mode:
        raise UsageError("--inject-tolerance is only accepted together with --test-mode")
    try:
        results = checks.run_checks(cfg.seed, overrides)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from exc
    if cfg.format == "json":
        json.dump([{"name": r.name, "passed": r.passed, "deviation": _json_value(r.deviation),
                    "tolerance": _json_value(r.tolerance), "error": r.error} for r in results],
                  stream, indent=1)
        stream.write("\n")
    else:
        for r in results:
            extra = f"  error={r.error}" if r.error else ""
            stream.write(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  deviation={fmt(r.deviation)}  "
                         f"tolerance={fmt(r.tolerance)}{extra}\n")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"all {len(results)} checks passed (seed {cfg.seed})", file=sys.stderr)
    return EXIT_OK


# -- argument parsing -----------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--setting", choices=SETTINGS, help="estimation architecture (default sequential)")
    common.add_argument("--phi", type=float, help="phase in radians (default 0.1)")
    common.add_argument("--kappa", type=float, help="vMF concentration, > 0 (default 1)")
    common.add_argument("--n-min", dest="n_min", type=int, help="first round/probe count (default 1)")
    common.add_argument("--n-max", dest="n_max", type=int, help="last round/probe count (default 200)")
    common.add_argument("--observables", help="comma list from: " + ", ".join(OBSERVABLES) + " (default all)")
    common.add_argument("--mc-samples", dest="mc_samples", type=int,
                        help="0 = exact Kraus path (default); > 0 = Monte Carlo channel with that many axes")
    common.add_argument("--seed", help=f"64-bit seed (fallback: ${SEED_ENV}, then 0)")
    common.add_argument("--format", choices=FORMATS, help="output format (default csv)")
    common.add_argument("--config", help="flat JSON object with any of the options above; flags override it")

    parser = _Parser(prog="phasecast", description="Phase estimation under unital phase-covariant noise.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("scan", parents=[common], help="one row per N for the chosen setting")
    contour = sub.add_parser("nopt-contour", parents=[common], help="optimal round estimate on a grid")
    contour.add_argument("--phi-grid", dest="phi_grid", help="'a,b,c' or 'start:stop:count'")
    contour.add_argument("--kappa-grid", dest="kappa_grid", help="'a,b,c' or 'start:stop:count'")
    sub.add_parser("trajectory", parents=[common], help="Bloch trajectory of the sequential probe")
    sub.add_parser("channel-info", parents=[common], help="channel parameters at one point")
    val = sub.add_parser("validate", parents=[common], help="run all cross-checks")
    val.add_argument("--test-mode", action="store_true", help="allow tolerance injection (failure-path testing)")
    val.add_argument("--inject-tolerance", action="append", metavar="NAME=VALUE",
                     help="replace a check's tolerance (requires --test-mode)")
    return parser


def main(argv=None, stdout=None) -> int:
    stream = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        if args.command == "validate":
            return run_validate(args, cfg, stream)
        if args.command == "scan":
            rows = scan_rows(cfg)
            check_rows(rows)
            write_table(rows, SCAN_COLUMNS, cfg.format, stream)
        elif args.command == "trajectory":
            write_table(trajectory_rows(cfg), TRAJECTORY_COLUMNS, cfg.format, stream)
        elif args.command == "channel-info":
            write_table([info_row(cfg)], INFO_COLUMNS, cfg.format, stream)
        elif args.command == "nopt-contour":
            write_grid(*nopt_grid(cfg), cfg.format, stream)
        return EXIT_OK
    except UsageError as exc:
        print(f"phasecast: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailure as exc:
        print(f"phasecast: validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, ArithmeticError) as exc:
        print(f"phasecast: numeric-domain error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
