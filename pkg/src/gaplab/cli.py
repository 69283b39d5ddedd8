"""Command-line entry point: ``gaplab <command> --config <json> [--out DIR] [--seed N]``.

Exit codes: 0 all certifications pass, 1 certification failure, 2 parse or
configuration error, 3 numeric error, 4 unwritable output path.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .airy import airy_zeros, model_integral
from .errors import ConfigError, GaplabError, NumericError
from .gap_experiments import SweepConfig, epsilon_sweep, gap_rows, pde_rows
from .geometry import builtin_profile
from .tolerances import load_tolerances

SCHEMA_VERSION = 1
COMMANDS = ("airy", "model-ode", "pde", "gap", "sweep", "certify")

EXIT_OK, EXIT_CERT, EXIT_PARSE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4

AIRY_COLUMNS = ["k", "a_k"]
MODEL_COLUMNS = ["epsilon", "k", "lambda_ode", "offset_vs_airy", "h1_norm"]
PDE_COLUMNS = ["epsilon", "delta", "k", "lambda_tilde", "lambda_tilde0", "lambda_ode", "guess_distance",
               "decay_slope"]
GAP_COLUMNS = ["epsilon", "delta", "gamma0", "gamma_r1", "I_eps", "rescaled_I", "hf_deriv", "target", "pass"]
CERT_COLUMNS = ["epsilon", "check", "passed"]


class ParseError(ConfigError):
    pass


# ----------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    geometry: str = "G1"
    geometry_params: list = field(default_factory=list)
    t0: float = 1.0
    eps_list: list = field(default_factory=lambda: [0.2, 0.1, 0.05])
    n_y_intervals: int = 60
    nx_min: int = 1200
    nx_per_unit: float = 30.0
    tP_fraction: float = 0.4
    r_steps: list = field(default_factory=lambda: [1.0, 2.0, 4.0])
    output: str = "gaplab_out"
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ParseError("config: top level must be an object")
        known = {"schema_version", "geometry", "t0", "eps_list", "grid", "tP_fraction", "r_steps", "output", "seed"}
        extra = sorted(set(d) - known)
        if extra:
            raise ParseError(f"config: unknown key(s) {extra}")
        sv = d.get("schema_version", SCHEMA_VERSION)
        if sv != SCHEMA_VERSION:
            raise ParseError(f"config.schema_version: expected {SCHEMA_VERSION}, got {sv!r}")
        cfg = cls()
        geo = d.get("geometry", {"name": "G1"})
        if isinstance(geo, str):
            geo = {"name": geo}
        if not isinstance(geo, dict) or "name" not in geo:
            raise ParseError("config.geometry: expected {'name': ..., 'params': [...]}")
        cfg.geometry = str(geo["name"])
        cfg.geometry_params = [_real(v, f"config.geometry.params[{i}]") for i, v in enumerate(geo.get("params", []))]
        cfg.t0 = _real(d.get("t0", cfg.t0), "config.t0", positive=True)
        eps = d.get("eps_list", cfg.eps_list)
        if not isinstance(eps, list):
            raise ParseError("config.eps_list: expected a list")
        cfg.eps_list = [_real(v, f"config.eps_list[{i}]", positive=True) for i, v in enumerate(eps)]
        for i in range(1, len(cfg.eps_list)):
            if not cfg.eps_list[i] < cfg.eps_list[i - 1]:
                raise ParseError(f"config.eps_list[{i}]: list must be strictly decreasing")
        grid = d.get("grid", {})
        if not isinstance(grid, dict):
            raise ParseError("config.grid: expected an object")
        for key, conv in (("n_y_intervals", int), ("nx_min", int), ("nx_per_unit", float)):
            if key in grid:
                val = _real(grid[key], f"config.grid.{key}", positive=True)
                if conv is int and val != int(val):
                    raise ParseError(f"config.grid.{key}: expected an integer")
                setattr(cfg, key, conv(val))
        if cfg.n_y_intervals % 2:
            raise ParseError("config.grid.n_y_intervals: must be even")
        cfg.tP_fraction = _real(d.get("tP_fraction", cfg.tP_fraction), "config.tP_fraction")
        if not 0.25 < cfg.tP_fraction < 0.5:
            raise ParseError("config.tP_fraction: must lie in (0.25, 0.5)")
        rs = d.get("r_steps", cfg.r_steps)
        if not isinstance(rs, list) or not rs:
            raise ParseError("config.r_steps: expected a non-empty list")
        cfg.r_steps = [_real(v, f"config.r_steps[{i}]", positive=True) for i, v in enumerate(rs)]
        cfg.output = str(d.get("output", cfg.output))
        seed = d.get("seed", cfg.seed)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ParseError("config.seed: expected a non-negative integer")
        cfg.seed = seed
        try:
            builtin_profile(cfg.geometry, cfg.geometry_params or None)
        except ConfigError as exc:
            raise ParseError(f"config.geometry: {exc}") from exc
        return cfg

    def sweep_config(self) -> SweepConfig:
        return SweepConfig(t0=self.t0, tP_fraction=self.tP_fraction, n_y_intervals=self.n_y_intervals,
                           nx_min=self.nx_min, nx_per_unit=self.nx_per_unit, seed=self.seed,
                           r_multiples=tuple(self.r_steps))

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "geometry": {"name": self.geometry, "params": self.geometry_params},
            "t0": self.t0, "eps_list": self.eps_list,
            "grid": {"n_y_intervals": self.n_y_intervals, "nx_min": self.nx_min, "nx_per_unit": self.nx_per_unit},
            "tP_fraction": self.tP_fraction, "r_steps": self.r_steps, "seed": self.seed,
        }


def _real(v, where: str, positive: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ParseError(f"{where}: expected a finite number, got {v!r}")
    if positive and v <= 0:
        raise ParseError(f"{where}: must be positive")
    return float(v)


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return ExperimentConfig.from_dict(data)


# ----------------------------------------------------------------------------
# emission


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return f"{v:.12g}"
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    return buf.getvalue()


def _clean(o):
    """JSON-safe copy: NaN/inf -> None, numpy scalars -> Python, tuples -> lists."""
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, (bool, np.bool_)):
        return bool(o)
    if isinstance(o, (int, np.integer)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        o = float(o)
        return o if math.isfinite(o) else None
    return o


def json_text(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def emit(files: dict[str, str], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(out_dir / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _check_writable(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".gaplab_write_test"
    with open(probe, "w") as fh:
        fh.write("")
    probe.unlink()


# ----------------------------------------------------------------------------
# commands


def _workers(n_jobs: int) -> int:
    raw = os.environ.get("GAPLAB_THREADS", "1")
    try:
        cap = max(1, int(raw))
    except ValueError:
        cap = 1
    return max(1, min(cap, n_jobs))


def cmd_airy(cfg: ExperimentConfig):
    a = airy_zeros()
    rows = [{"k": k + 1, "a_k": a[k]} for k in range(len(a))]
    text = csv_text(AIRY_COLUMNS, rows) + f"model_integral,{fmt(model_integral())}\n"
    summary = {"zeros": list(a), "model_integral": model_integral(), "target": 2.0 / 3.0 * (a[1] - a[0])}
    return {"airy.csv": text}, summary, True


def cmd_model_ode(cfg: ExperimentConfig):
    from .cross_section import make_params
    from .geometry import build_metric
    from .sturm_liouville import assemble_model_ode, solve_model_ode, verify_airy_asymptotics

    profile = builtin_profile(cfg.geometry, cfg.geometry_params or None)
    rows, reports = [], []
    for eps in cfg.eps_list:
        metric = build_metric(profile, cfg.t0, eps, n_s=3)
        params = make_params(metric, cfg.t0, eps, cfg.tP_fraction)
        spec = solve_model_ode(assemble_model_ode(metric, params), 4)
        rep = verify_airy_asymptotics(spec, params=params)
        for k in (1, 2):
            rows.append({"epsilon": eps, "k": k, "lambda_ode": spec.eigenvalues[k - 1],
                         "offset_vs_airy": rep.offsets[k - 1], "h1_norm": rep.h1_norms[k - 1]})
        reports.append({"epsilon": eps, "delta": params.delta, "offsets": rep.offsets,
                        "key_integral": rep.key_integral, "h1_norms": rep.h1_norms,
                        "tail_violation": rep.tail_violation})
    return {"model_ode.csv": csv_text(MODEL_COLUMNS, rows)}, {"rows": reports}, True


def _sweep(cfg: ExperimentConfig, run_gap: bool):
    profile = builtin_profile(cfg.geometry, cfg.geometry_params or None)
    sc = cfg.sweep_config()
    sc.run_gap = run_gap
    return epsilon_sweep(profile, cfg.eps_list, sc, workers=_workers(len(cfg.eps_list)))


def _status(result) -> tuple[bool, bool]:
    """(numeric_ok, certified)."""
    numeric_ok = all(r.get("status") != "error" for r in result.rows)
    certified = numeric_ok and all(r.get("status") == "ok" and all(r["checks"].values()) for r in result.rows)
    return numeric_ok, certified


def _summary(cfg, result, command):
    return {
        "command": command,
        "profile": result.profile,
        "rows": result.rows,
        "slopes": result.slopes,
        "certificates": [{"epsilon": r["epsilon"], **r.get("certificates", {})} for r in result.rows],
        "checks": [{"epsilon": r["epsilon"], "status": r.get("status"), **r.get("checks", {})} for r in result.rows],
    }


def cmd_pde(cfg):
    res = _sweep(cfg, run_gap=False)
    return {"pde.csv": csv_text(PDE_COLUMNS, pde_rows(res))}, _summary(cfg, res, "pde"), res


def cmd_gap(cfg):
    res = _sweep(cfg, run_gap=True)
    return {"gap.csv": csv_text(GAP_COLUMNS, gap_rows(res))}, _summary(cfg, res, "gap"), res


def cmd_sweep(cfg):
    res = _sweep(cfg, run_gap=True)
    files = {"pde.csv": csv_text(PDE_COLUMNS, pde_rows(res)), "gap.csv": csv_text(GAP_COLUMNS, gap_rows(res))}
    return files, _summary(cfg, res, "sweep"), res


def cmd_certify(cfg):
    res = _sweep(cfg, run_gap=True)
    rows = []
    for r in res.rows:
        checks = r.get("checks") or {"status_" + str(r.get("status")): False}
        for name in sorted(checks):
            rows.append({"epsilon": r["epsilon"], "check": name, "passed": checks[name]})
    return {"certificates.csv": csv_text(CERT_COLUMNS, rows)}, _summary(cfg, res, "certify"), res


HANDLERS = {"airy": cmd_airy, "model-ode": cmd_model_ode, "pde": cmd_pde, "gap": cmd_gap,
            "sweep": cmd_sweep, "certify": cmd_certify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaplab", description="Fundamental-gap numerics on negatively curved surfaces.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", help="output directory (overrides config.output)")
    p.add_argument("--seed", type=int, help="seed for randomized checks (overrides config.seed)")
    p.add_argument("--version", action="version", version=f"gaplab {__version__}")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ParseError("--seed: must be non-negative")
            cfg.seed = args.seed
    except ConfigError as exc:
        print(f"gaplab: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    out_dir = Path(args.out or cfg.output)
    try:
        _check_writable(out_dir)
    except OSError as exc:
        print(f"gaplab: cannot write to {out_dir}: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        files, summary, res = HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"gaplab: configuration error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (NumericError, GaplabError, np.linalg.LinAlgError) as exc:
        print(f"gaplab: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    if res is True:
        numeric_ok, certified = True, True
    else:
        numeric_ok, certified = _status(res)
    doc = {"schema_version": SCHEMA_VERSION, "gaplab_version": __version__, "config": cfg.as_dict(),
           "tolerances_version": load_tolerances()["version"], "certified": certified, **summary}
    files["summary.json"] = json_text(doc)
    try:
        emit(files, out_dir)
    except OSError as exc:
        print(f"gaplab: cannot write to {out_dir}: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "airy":
        sys.stdout.write(files["airy.csv"])
    if not numeric_ok:
        bad = [r for r in res.rows if r.get("status") == "error"]
        print(f"gaplab: numeric error in {len(bad)} row(s): " + "; ".join(r["error"] for r in bad), file=sys.stderr)
        return EXIT_NUMERIC
    if not certified:
        failed = [(r["epsilon"], sorted(k for k, v in r.get("checks", {}).items() if not v) or [r.get("status")])
                  for r in res.rows if r.get("status") != "ok" or not all(r["checks"].values())]
        print("gaplab: certification failure: " + "; ".join(f"eps={e}: {', '.join(map(str, c))}" for e, c in failed),
              file=sys.stderr)
        return EXIT_CERT
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":  # pragma: no cover
    main()
