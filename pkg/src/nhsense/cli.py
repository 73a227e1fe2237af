"""
Command-line front-end: ``nhsense <command> --config run.toml``.

Config schema (TOML)::

    command = "scaling"          # response | scaling | phase-diagram | stability | verify

    [chain]                      # ChainSpec fields
    n_cells = 5
    t1 = 1.0
    t2 = 1.0
    gamma1 = 1.5
    gamma2 = 2.5
    kappa = 0.05
    m = 1
    parity = "odd"

    [drive]                      # DriveSpec fields; angles in radians or "pi/4"
    beta_abs = 1.0
    theta = "pi/2"
    phi_meas = 0.0
    tau = 100.0
    n_th = 0.0

    [perturbation]
    kind = "onsite"              # onsite | nhse
    epsilon = 1e-6
    phi = "pi/2"

    [grid]                       # scaling: one n_cells axis; phase-diagram: t1 and t2
    axes = [{name = "n_cells", min = 1, max = 25, steps = 25}]
    mode = "all_orders"          # scaling only: linear | all_orders
    alpha = 0.2                  # optional drive-placement override
    window = [4, 8]              # phase-diagram only: N range for slopes

    [response]
    order = "exact"              # exact | linear

    [verify]
    quick = false

    [output]
    path = "out/fig5.csv"
    format = "csv"

    [[series]]                   # optional; one output file per entry
    label = "eps1e-4"
    perturbation = {epsilon = 1e-4}

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 unstable chain, 4 singular dynamical matrix.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import re
import sys
from dataclasses import asdict
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .analysis import Axis, PhaseCell, ScalingRow, ScanGrid, ScanMode, phase_diagram_scan, scaling_scan
from .errors import ConfigError, InstabilityError, NHSenseError, SingularMatrixError
from .lattice import ChainSpec, check_stability
from .perturbation import PertKind, PerturbationSpec
from .response import DriveSpec, Order, compute_report

__all__ = ["main", "load_config", "parse_angle", "RunConfig", "run", "format_float", "EXIT"]

EXIT = {"ok": 0, "verify_failed": 1, "config": 2, "unstable": 3, "singular": 4}
COMMANDS = ("response", "scaling", "phase-diagram", "stability", "verify")
DEFAULT_FORMAT = {"response": "json", "stability": "json", "verify": "json", "scaling": "csv", "phase-diagram": "csv"}

SCALING_COLUMNS = (
    "N", "m",
    "signal_numeric", "signal_analytic",
    "noise_numeric", "noise_analytic",
    "n_tot_numeric", "n_tot_analytic",
    "snr", "snr_per_photon",
    "log10_signal", "log10_snr", "log10_snr_per_photon",
    "flags",
)
PHASE_COLUMNS = ("t1", "t2", "regime", "onsite_winner", "nhse_enhanced", "stable", "odd_slope", "even_slope", "nhse_slope")

_ANGLE = re.compile(r"^\s*([+-])?\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)?\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(value) -> float:
    """Radians from a number or a string such as ``"pi/4"``, ``"-3pi/2"`` or ``"0.5*pi"``."""
    if isinstance(value, bool):
        raise ConfigError(f"not an angle: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    s = str(value).strip()
    mt = _ANGLE.match(s)
    if mt:
        sign, coef, den = mt.groups()
        x = (float(coef) if coef else 1.0) * math.pi / (float(den) if den else 1.0)
        return -x if sign == "-" else x
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot parse angle {value!r}") from None


def format_float(x) -> str:
    """17 significant digits; ``nan``/``inf``/``-inf`` spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


class RunConfig:
    """Validated run description."""

    def __init__(self, command, chain, drive, pert, grid=None, output_path=None, output_format=None,
                 alpha_override=None, mode=ScanMode.LINEAR, window=(4, 8), order=Order.EXACT,
                 quick=False, series=()):
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
        needs_grid = command in ("scaling", "phase-diagram")
        if needs_grid and grid is None:
            raise ConfigError(f"command {command!r} needs a [grid] table")
        if not needs_grid and grid is not None:
            raise ConfigError(f"command {command!r} does not take a [grid] table")
        fmt = output_format or DEFAULT_FORMAT[command]
        if fmt not in ("csv", "json"):
            raise ConfigError(f"unknown output format {fmt!r}")
        self.command = command
        self.chain = chain
        self.drive = drive
        self.pert = pert
        self.grid = grid
        self.output_path = output_path
        self.output_format = fmt
        self.alpha_override = alpha_override
        self.mode = ScanMode(mode)
        self.window = tuple(window)
        self.order = Order(order)
        self.quick = quick
        self.series = tuple(series)


def _table(raw: dict, key: str) -> dict:
    t = raw.get(key, {})
    if not isinstance(t, dict):
        raise ConfigError(f"[{key}] must be a table")
    return dict(t)


def _build(kind, raw: dict, angle_keys=()):
    kw = dict(raw)
    for k in angle_keys:
        if k in kw:
            kw[k] = parse_angle(kw[k])
    try:
        return kind(**kw)
    except TypeError as exc:
        raise ConfigError(f"{kind.__name__}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{kind.__name__}: {exc}") from None


def _chain(raw):
    if not raw:
        return None
    return _build(ChainSpec, raw)


def _drive(raw):
    return _build(DriveSpec, raw, ("theta", "phi_meas"))


def _pert(raw):
    raw = dict(raw)
    raw.setdefault("kind", "onsite")
    if raw["kind"] not in [k.value for k in PertKind]:
        raise ConfigError(f"unknown perturbation kind {raw['kind']!r}")
    return _build(PerturbationSpec, raw, ("phi",))


def config_from_dict(raw: dict, command: str | None = None) -> RunConfig:
    command = command or raw.get("command")
    if command is None:
        raise ConfigError("no command given (config key 'command' or CLI argument)")
    known = {"command", "chain", "drive", "perturbation", "grid", "response", "verify", "output", "series"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    chain = _chain(_table(raw, "chain"))
    if chain is None and command != "verify":
        raise ConfigError("a [chain] table is required")
    drive = _drive(_table(raw, "drive"))
    pert = _pert(_table(raw, "perturbation"))
    g = _table(raw, "grid")
    grid = None
    mode, window, alpha = ScanMode.LINEAR, (4, 8), None
    if g:
        axes_raw = g.pop("axes", None)
        if not axes_raw:
            raise ConfigError("[grid] needs a non-empty 'axes' list")
        try:
            axes = tuple(Axis(a["name"], float(a["min"]), float(a["max"]), int(a["steps"])) for a in axes_raw)
            grid = ScanGrid(axes, chain, drive, pert)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"[grid]: {exc}") from None
        try:
            mode = ScanMode(g.pop("mode", "linear"))
        except ValueError as exc:
            raise ConfigError(f"[grid]: {exc}") from None
        window = tuple(g.pop("window", (4, 8)))
        alpha = g.pop("alpha", None)
        if g:
            raise ConfigError(f"unknown [grid] keys: {', '.join(sorted(g))}")
        names = [a.name for a in axes]
        if command == "scaling" and names != ["n_cells"]:
            raise ConfigError("scaling grid must have exactly one axis named n_cells")
        if command == "phase-diagram" and sorted(names) != ["t1", "t2"]:
            raise ConfigError("phase-diagram grid must have axes t1 and t2")
        if len(window) != 2 or window[0] >= window[1]:
            raise ConfigError("window must be [n_first, n_last] with n_first < n_last")
    out = _table(raw, "output")
    resp = _table(raw, "response")
    ver = _table(raw, "verify")
    series = raw.get("series", [])
    for s in series:
        if "label" not in s or not re.fullmatch(r"[A-Za-z0-9_.-]+", str(s["label"])):
            raise ConfigError("every [[series]] needs a filename-safe 'label'")
    try:
        return RunConfig(
            command, chain, drive, pert, grid,
            output_path=out.get("path"),
            output_format=out.get("format"),
            alpha_override=alpha,
            mode=mode,
            window=window,
            order=resp.get("order", "exact"),
            quick=bool(ver.get("quick", False)),
            series=series,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike, command: str | None = None) -> tuple[RunConfig, dict]:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    return config_from_dict(raw, command), raw


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------


def _json_value(v, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        return format(v, ".17g")
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(x, indent, level + 1)}" for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        items = [pad + _json_value(x, indent, level + 1) for x in v]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(v, "item"):  # numpy scalar
        return _json_value(v.item(), indent, level)
    if hasattr(v, "value"):  # enum
        return json.dumps(v.value)
    raise TypeError(f"cannot serialise {type(v).__name__}")


def dumps_json(obj: dict) -> str:
    """JSON with 17-significant-digit floats; non-finite values use the ``NaN``/``Infinity`` tokens Python's json accepts."""
    return _json_value(obj, 2, 0) + "\n"


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    if hasattr(v, "item"):
        return _csv_cell(v.item())
    return str(v)


def dumps_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_csv_cell(r[c]) for c in columns])
    return buf.getvalue()


def _scaling_record(row: ScalingRow) -> dict:
    d = asdict(row)
    d["N"] = d.pop("n")
    return d


def _phase_record(cell: PhaseCell) -> dict:
    return asdict(cell)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _resolve_threads(cli_value: int | None) -> int:
    if cli_value is not None:
        return max(1, cli_value)
    env = os.environ.get("NHSENSE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"NHSENSE_THREADS must be an integer, got {env!r}") from None
    return 1


def run(cfg: RunConfig, threads: int = 1) -> tuple[int, list, dict | None]:
    """Execute one configuration.

    Returns ``(exit_code, columns, payload)`` where ``payload`` is either a
    dict (single JSON object) or ``{"rows": [...]}`` for tabular commands.
    """
    cmd = cfg.command
    if cmd == "response":
        rep = compute_report(cfg.chain, cfg.drive, cfg.pert, order=cfg.order)
        d = rep.to_dict()
        return 0, list(d), d
    if cmd == "stability":
        st = check_stability(cfg.chain)
        d = st.to_dict()
        return 0, list(d), d
    if cmd == "scaling":
        _require_stable_range(cfg)
        ax = cfg.grid.axes[0]
        ns = sorted({int(round(v)) for v in ax.values})
        rows = scaling_scan(cfg.chain, cfg.drive, cfg.pert, None, ns, cfg.mode, cfg.alpha_override, threads)
        recs = [_scaling_record(r) for r in rows]
        return 0, list(SCALING_COLUMNS), {"rows": recs}
    if cmd == "phase-diagram":
        lo, hi = cfg.window
        cells = phase_diagram_scan(cfg.grid, range(int(lo), int(hi) + 1), threads)
        return 0, list(PHASE_COLUMNS), {"rows": [_phase_record(c) for c in cells]}
    if cmd == "verify":
        from .verify import run_all

        suites = run_all(quick=cfg.quick)
        recs = [
            {"suite": s.name, "passed": s.passed, "checks": s.checks, "failures": s.failures,
             "worst": s.worst, "tol": s.tol}
            for s in suites
        ]
        for s in suites:
            print(s.line(), file=sys.stderr)
        ok = all(s.passed for s in suites)
        payload = {"passed": ok, "suites": recs}
        return (0 if ok else EXIT["verify_failed"]), ["suite", "passed", "checks", "failures", "worst", "tol"], payload
    raise ConfigError(f"unknown command {cmd!r}")


def _require_stable_range(cfg: RunConfig) -> None:
    n_max = int(round(max(cfg.grid.axes[0].values)))
    st = check_stability(cfg.chain.with_(n_cells=max(n_max, cfg.chain.m)))
    if not st.stable:
        raise InstabilityError(
            f"chain is dynamically unstable (max Re lambda = {st.max_real_eigenvalue:.3e}); "
            "stability requires gamma1 > |t1| and gamma2 > |t2|"
        )


def render(fmt: str, columns, payload) -> str:
    if fmt == "json":
        return dumps_json(payload)
    rows = payload["rows"] if "rows" in payload else payload.get("suites", [payload])
    return dumps_csv(columns, rows)


def _write(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(dumps_json({"error": kind, "message": message, "exit_code": code}))
    return code


def _series_path(path, label: str, fmt: str):
    if path is None or str(path) == "-":
        return None
    p = Path(path)
    return p.with_name(f"{p.stem}_{label}{p.suffix or '.' + fmt}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nhsense", description="Steady-state sensing figures of merit for driven squeezed SSH chains.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="TOML run configuration (optional for verify)")
    ap.add_argument("--out", help="output path ('-' for stdout); overrides [output].path")
    ap.add_argument("--format", choices=("csv", "json"), help="overrides [output].format")
    ap.add_argument("--alpha", type=float, help="drive placement fraction m = floor(alpha N) for skin-effect scans")
    ap.add_argument("--threads", type=int, help="worker threads for scans (default: $NHSENSE_THREADS or 1)")
    ap.add_argument("--quick", action="store_true", help="verify: reduced suite sizes")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg, raw = load_config(args.config, args.command)
        elif args.command == "verify":
            raw = {}
            cfg = config_from_dict(raw, "verify")
        else:
            raise ConfigError(f"{args.command} needs --config")
        if raw.get("command") not in (None, args.command):
            raise ConfigError(f"config is for {raw['command']!r}, not {args.command!r}")
        threads = _resolve_threads(args.threads)
        if args.quick:
            cfg.quick = True
        jobs = [(cfg, args.out or cfg.output_path)]
        if cfg.series:
            base = {k: v for k, v in raw.items() if k != "series"}
            jobs = []
            for s in cfg.series:
                over = {k: v for k, v in s.items() if k != "label"}
                sub = config_from_dict(_merge(base, over), args.command)
                jobs.append((sub, _series_path(args.out or cfg.output_path, s["label"], args.format or sub.output_format)))
        code = 0
        for sub, path in jobs:
            if args.alpha is not None:
                sub.alpha_override = args.alpha
            fmt = args.format or sub.output_format
            c, cols, payload = run(sub, threads)
            _write(render(fmt, cols, payload), path)
            code = max(code, c)
        return code
    except ConfigError as exc:
        return _error("ConfigError", str(exc), EXIT["config"])
    except InstabilityError as exc:
        return _error("InstabilityError", str(exc), EXIT["unstable"])
    except SingularMatrixError as exc:
        return _error("SingularMatrixError", str(exc), EXIT["singular"])
    except NHSenseError as exc:
        # no optimal placement, untabulated closed form, ...: the request is not meaningful for this config
        return _error(type(exc).__name__, str(exc), EXIT["config"])


if __name__ == "__main__":
    raise SystemExit(main())
