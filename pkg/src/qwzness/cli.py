"""Config-driven experiment runner.

A run is described by one YAML (or JSON) file::

    experiment: current-field
    lattice: {lx: 8, ly: 8, m: 3.0, omega0: 10.0}
    bath: {t_hot: 1.0, t_cold: 0.01, gamma: 0.005, statistics: boson}
    variants:                       # optional: one run per entry
      - {name: boson, lattice: {m: 3.0}, bath: {statistics: boson, mu: 0.0}}
      - {name: fermion, lattice: {m: 1.0}, bath: {statistics: fermion, mu: 9.99}}
    sweep: {parameter: gamma, values: [0.001, 0.01, 0.1]}
    output: {directory: out, format: csv}

Every run writes its data files and a ``manifest.json`` listing each file
with its SHA-256.  Data files are deterministic for a fixed config.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__, kernels
from .baths import BOSON, BathSpec, build_self_energies
from .errors import QWZError, ValidationError
from .lattice import ImpuritySet, LatticeSpec, build_hamiltonian
from .negf import effective_hamiltonian, landauer_current, steady_correlation
from .observables import (bond_currents, column_currents, continuity_residual,
                          edge_bulk_diagnostics, mode_occupations)
from .quadrature import QuadratureSpec
from .semiclassical import (KGrid, PotentialSpec, boundary_circulation, chern_number,
                            edge_sign, power_potential, semiclassical_current_field)
from .symmetry import classify_impurities, symmetry_report
from .weakcoupling import lattice_spectrum, mode_couplings, weak_coupling_occupations

log = logging.getLogger("qwzness")

EXPERIMENTS = ("current-field", "gamma-sweep", "impurity-study", "distribution",
               "semiclassical", "symmetry-report")
SWEEP_PARAMETERS = {"gamma": ("bath", "gamma"), "m": ("lattice", "m"),
                    "T_h": ("bath", "t_hot"), "T_c": ("bath", "t_cold"), "mu": ("bath", "mu")}
FORMATS = ("csv", "json")

LATTICE_KEYS = {"lx": "lx", "ly": "ly", "L_X": "lx", "L_Y": "ly", "tx": "tx", "ty": "ty",
                "t_X": "tx", "t_Y": "ty", "m": "m", "omega0": "omega0"}
BATH_KEYS = {"t_hot": "t_hot", "t_cold": "t_cold", "T_h": "t_hot", "T_c": "t_cold",
             "gamma": "gamma", "statistics": "statistics", "mu": "mu"}
QUAD_KEYS = {f.name for f in fields(QuadratureSpec)}
SEMICLASSICAL_KEYS = {"grid_n", "half_width", "points", "scale", "power", "h_g"}
TOP_KEYS = {"experiment", "lattice", "bath", "impurities", "quadrature", "sweep", "variants",
            "output", "method", "semiclassical"}

J_EDGE_NOTE = ("J_edge sums the L_X-1 existing X bonds of each edge row with the 1/(2 L_X) "
               "prefactor kept as written")
POTENTIAL_NOTE = "semiclassical grid is centred on the lattice: x, y in [-half_width, half_width]"


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class RunPoint:
    """One fully resolved NESS calculation."""

    variant: str
    label: str
    lattice: LatticeSpec
    bath: BathSpec
    impurities: ImpuritySet
    sweep_value: float | None = None


@dataclass
class RunConfig:
    experiment: str
    raw: dict
    points: list = field(default_factory=list)
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    method: str = "modes"
    sweep_parameter: str | None = None
    directory: Path = Path("out")
    format: str = "csv"
    semiclassical: dict = field(default_factory=dict)


def load_config(path) -> dict:
    text = Path(path).read_text()
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must be a mapping at the top level")
    return data


def _translate(section: dict | None, keys: dict, where: str, problems: list) -> dict:
    out = {}
    for key, value in (section or {}).items():
        if key not in keys:
            problems.append(f"{where}.{key}: unknown field")
            continue
        out[keys[key]] = value
    return out


def _merge(base: dict, override: dict | None) -> dict:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        merged[key] = value
    return merged


def _variants(cfg: dict, problems: list):
    variants = cfg.get("variants") or [{}]
    if not isinstance(variants, list):
        problems.append("variants: must be a list")
        return []
    out = []
    for n, var in enumerate(variants):
        if not isinstance(var, dict):
            problems.append(f"variants[{n}]: must be a mapping")
            continue
        unknown = set(var) - {"name", "lattice", "bath", "impurities"}
        for key in sorted(unknown):
            problems.append(f"variants[{n}].{key}: unknown field")
        name = str(var.get("name", f"run{n}" if len(variants) > 1 else "run"))
        out.append((name, _merge(cfg.get("lattice") or {}, var.get("lattice")),
                    _merge(cfg.get("bath") or {}, var.get("bath")),
                    var.get("impurities", cfg.get("impurities"))))
    names = [v[0] for v in out]
    if len(set(names)) != len(names):
        problems.append(f"variants: names must be unique, got {names}")
    return out


def _make_lattice(raw, where, problems):
    kw = _translate(raw, LATTICE_KEYS, where, problems)
    for key in ("lx", "ly"):
        if key not in kw:
            problems.append(f"{where}.{key}: required")
    try:
        return LatticeSpec(**kw)
    except (TypeError, ValueError) as exc:
        problems.append(f"{where}: {exc}")
        return None


def _make_bath(raw, where, problems):
    kw = _translate(raw, BATH_KEYS, where, problems)
    for key in ("t_hot", "t_cold", "gamma"):
        if key not in kw:
            problems.append(f"{where}.{key}: required")
    try:
        return BathSpec(**kw)
    except (TypeError, ValueError) as exc:
        problems.append(f"{where}: {exc}")
        return None


def _make_impurities(raw, where, problems):
    if raw is None:
        return ImpuritySet()
    if not isinstance(raw, dict):
        problems.append(f"{where}: must be a mapping with 'sites' and optional 'delta'")
        return None
    for key in sorted(set(raw) - {"sites", "delta"}):
        problems.append(f"{where}.{key}: unknown field")
    try:
        return ImpuritySet(tuple(tuple(s) for s in raw.get("sites", ())),
                           raw.get("delta", ImpuritySet().delta))
    except (TypeError, ValueError) as exc:
        problems.append(f"{where}: {exc}")
        return None


def _check_point(lattice, bath, impurities, where, problems):
    if lattice is None:
        return
    if lattice.lx < 2:
        problems.append(f"{where}.lattice.lx: L_X must be >= 2 so the two baths couple to distinct columns")
    if impurities is None:
        return
    try:
        impurities.validate_against(lattice)
    except ValidationError as exc:
        problems.append(f"{where}.impurities: {exc}")
        return
    if bath is not None and bath.statistics == BOSON:
        omega_min = float(np.linalg.eigvalsh(build_hamiltonian(lattice, impurities))[0])
        if omega_min <= 0:
            problems.append(f"{where}: bosonic spectrum must be positive (lowest mode {omega_min:g})")


def _sweep_points(cfg, problems):
    sweep = cfg.get("sweep")
    if not sweep:
        return None, [None]
    if not isinstance(sweep, dict):
        problems.append("sweep: must be a mapping with 'parameter' and 'values'")
        return None, [None]
    for key in sorted(set(sweep) - {"parameter", "values"}):
        problems.append(f"sweep.{key}: unknown field")
    name = sweep.get("parameter", "gamma")
    values = sweep.get("values") or []
    if name not in SWEEP_PARAMETERS:
        problems.append(f"sweep.parameter: must be one of {sorted(SWEEP_PARAMETERS)}, got {name!r}")
        return None, [None]
    try:
        values = [float(v) for v in values]
    except (TypeError, ValueError):
        problems.append("sweep.values: must be numbers")
        return None, [None]
    if not values:
        return None, [None]
    if not all(np.isfinite(values)):
        problems.append("sweep.values: must be finite")
    if name in ("gamma", "T_h", "T_c") and any(v <= 0 for v in values):
        problems.append(f"sweep.values: {name} must be > 0")
    return name, values


def parse_config(cfg: dict) -> tuple[RunConfig | None, list[str]]:
    """Resolve a raw config into run points, collecting every problem found."""
    problems: list[str] = []
    for key in sorted(set(cfg) - TOP_KEYS):
        problems.append(f"{key}: unknown field")
    experiment = cfg.get("experiment")
    if experiment not in EXPERIMENTS:
        problems.append(f"experiment: must be one of {list(EXPERIMENTS)}, got {experiment!r}")
    quad_raw = cfg.get("quadrature") or {}
    for key in sorted(set(quad_raw) - QUAD_KEYS):
        problems.append(f"quadrature.{key}: unknown field")
    try:
        quad = QuadratureSpec(**{k: v for k, v in quad_raw.items() if k in QUAD_KEYS})
    except (TypeError, ValueError) as exc:
        problems.append(f"quadrature: {exc}")
        quad = QuadratureSpec()
    method = cfg.get("method", "modes")
    if method not in ("modes", "matrix"):
        problems.append(f"method: must be 'modes' or 'matrix', got {method!r}")
    output = cfg.get("output") or {}
    for key in sorted(set(output) - {"directory", "format"}):
        problems.append(f"output.{key}: unknown field")
    fmt = output.get("format", "csv")
    if fmt not in FORMATS:
        problems.append(f"output.format: must be one of {list(FORMATS)}, got {fmt!r}")
    semi = cfg.get("semiclassical") or {}
    for key in sorted(set(semi) - SEMICLASSICAL_KEYS):
        problems.append(f"semiclassical.{key}: unknown field")

    sweep_name, sweep_values = _sweep_points(cfg, problems)
    points = []
    for name, lat_raw, bath_raw, imp_raw in _variants(cfg, problems):
        for value in sweep_values:
            lat_raw_v, bath_raw_v = dict(lat_raw), dict(bath_raw)
            label = name
            if sweep_name is not None:
                section, key = SWEEP_PARAMETERS[sweep_name]
                target = lat_raw_v if section == "lattice" else bath_raw_v
                target[key] = value
                label = f"{name}_{sweep_name}={value:g}"
            where = f"[{label}]"
            lattice = _make_lattice(lat_raw_v, f"{where}.lattice", problems)
            bath = _make_bath(bath_raw_v, f"{where}.bath", problems)
            imps = _make_impurities(imp_raw, f"{where}.impurities", problems)
            _check_point(lattice, bath, imps, where, problems)
            if lattice is not None and bath is not None and imps is not None:
                points.append(RunPoint(name, label, lattice, bath, imps, value))
    # de-duplicate identical messages while keeping their order
    problems = list(dict.fromkeys(problems))
    if problems:
        return None, problems
    run = RunConfig(experiment, cfg, points, quad, method, sweep_name,
                    Path(output.get("directory", "out")), fmt, dict(semi))
    return run, []


def validate(cfg: dict) -> list[str]:
    """All configuration problems, without running anything."""
    return parse_config(cfg)[1]


# ------------------------------------------------------------------ physics

def _solve(point: RunPoint, quad: QuadratureSpec, method: str):
    H = build_hamiltonian(point.lattice, point.impurities)
    se = build_self_energies(point.lattice, point.bath)
    eff = effective_hamiltonian(H, se)
    t0 = time.perf_counter()
    C, info = steady_correlation(eff, se, point.bath, quad, full_output=True, method=method)
    t_ness = time.perf_counter() - t0
    field_ = bond_currents(C, point.lattice)
    diag = edge_bulk_diagnostics(field_, point.lattice)
    t0 = time.perf_counter()
    j_land, linfo = landauer_current(eff, se, point.bath, quad, full_output=True)
    t_land = time.perf_counter() - t0
    cols = column_currents(field_)
    summary = {
        "j_edge": diag.j_edge, "j_bulk": diag.j_bulk, "j_tot": diag.j_tot,
        "j_landauer": j_land, "column_sum_spread": float(np.ptp(cols)),
        "continuity_residual": continuity_residual(field_),
        "quadrature": {"ness_error": info.error, "ness_panels": info.n_panels,
                       "landauer_error": linfo.error, "landauer_panels": linfo.n_panels,
                       "condition": info.condition, "direct": info.direct,
                       "window": list(info.window)},
        "timings": {"ness_s": t_ness, "landauer_s": t_land},
    }
    return H, C, field_, summary


def _point_task(args):
    experiment, point, quad, method = args
    logging.getLogger("qwzness").debug("running %s", point.label)
    if experiment == "distribution":
        H, C, _, summary = _solve(point, quad, method)
        spectrum = lattice_spectrum(H, point.lattice, point.impurities)
        occ = mode_occupations(C, spectrum)
        couplings = mode_couplings(spectrum, point.lattice)
        n_weak = weak_coupling_occupations(spectrum, couplings, point.bath)
        rows = [(float(w), float(n), float(s), float(r), float(nw)) for w, n, s, r, nw in
                zip(occ.omega, occ.n, couplings.s, couplings.r, n_weak)]
        summary["degenerate_spectrum"] = couplings.degenerate
        summary["max_s_minus_r"] = couplings.asymmetry
        return point, rows, summary
    H, C, field_, summary = _solve(point, quad, method)
    if experiment == "impurity-study":
        couplings = mode_couplings(lattice_spectrum(H, point.lattice, point.impurities), point.lattice)
        summary["max_s_minus_r"] = couplings.asymmetry
    return point, field_.rows(), summary


# ------------------------------------------------------------------ output

def _format_value(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_table(path: Path, header, rows, fmt: str) -> Path:
    path = path.with_suffix("." + fmt)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_value(v) for v in row])
        path.write_text(buf.getvalue())
    else:
        records = [dict(zip(header, row)) for row in rows]
        path.write_text(json.dumps(records, indent=1) + "\n")
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _map_points(experiment, run: RunConfig, workers: int):
    tasks = [(experiment, p, run.quadrature, run.method) for p in run.points]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_point_task, tasks))
    return [_point_task(t) for t in tasks]


def _point_meta(point: RunPoint) -> dict:
    return {"variant": point.variant, "label": point.label,
            "lattice": asdict(point.lattice), "bath": asdict(point.bath),
            "impurities": {"sites": [list(s) for s in point.impurities.sites],
                           "delta": point.impurities.delta},
            "symmetry": classify_impurities(point.impurities, point.lattice)._asdict()}


def _safe_label(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_.=" else "_" for c in label)


def execute(run: RunConfig, directory: Path | None = None, workers: int = 1) -> dict:
    """Run every point of ``run`` and write data files plus ``manifest.json``."""
    out_dir = Path(directory or run.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    files: list[Path] = []
    points_meta = []
    exp = run.experiment

    if exp in ("current-field", "impurity-study", "gamma-sweep", "distribution"):
        results = _map_points(exp, run, workers)
        by_variant: dict[str, list] = {}
        for point, rows, summary in results:
            meta = _point_meta(point)
            meta["results"] = summary
            points_meta.append(meta)
            by_variant.setdefault(point.variant, []).append((point, rows, summary))
            if exp in ("current-field", "impurity-study"):
                files.append(_write_table(out_dir / f"{exp}_{_safe_label(point.label)}",
                                          ("x", "y", "direction", "value"), rows, run.format))
            elif exp == "distribution":
                files.append(_write_table(out_dir / f"{exp}_{_safe_label(point.label)}",
                                          ("omega", "n", "s", "r", "n_weak"), rows, run.format))
        if exp == "gamma-sweep":
            for variant, items in by_variant.items():
                header = ["gamma", "j_edge", "j_bulk", "j_tot", "j_landauer"]
                if run.sweep_parameter not in (None, "gamma"):
                    header.insert(0, run.sweep_parameter)
                rows = []
                for point, _, s in items:
                    row = [point.bath.gamma, s["j_edge"], s["j_bulk"], s["j_tot"], s["j_landauer"]]
                    if run.sweep_parameter not in (None, "gamma"):
                        row.insert(0, point.sweep_value)
                    rows.append(row)
                files.append(_write_table(out_dir / f"{exp}_{_safe_label(variant)}", header, rows,
                                          run.format))
    elif exp == "semiclassical":
        for point in run.points:
            meta = _point_meta(point)
            meta["results"], rows = _semiclassical(point, run.semiclassical)
            points_meta.append(meta)
            files.append(_write_table(out_dir / f"{exp}_{_safe_label(point.label)}",
                                      ("x", "y", "direction", "value"), rows, run.format))
    elif exp == "symmetry-report":
        for point in run.points:
            meta = _point_meta(point)
            H = build_hamiltonian(point.lattice, point.impurities)
            meta["results"] = symmetry_report(H, point.lattice, point.impurities)
            points_meta.append(meta)

    manifest = {
        "experiment": exp,
        "version": __version__,
        "backend": kernels.active.name,
        "python": platform.python_version(),
        "config": run.raw,
        "notes": [J_EDGE_NOTE, POTENTIAL_NOTE] if exp == "semiclassical" else [J_EDGE_NOTE],
        "points": points_meta,
        "files": [{"path": f.name, "sha256": _sha256(f)} for f in files],
        "wall_time_s": time.perf_counter() - t_start,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return manifest


def _semiclassical(point: RunPoint, opts: dict):
    spec, bath = point.lattice, point.bath
    scale = float(opts.get("scale", 8.0))
    power = int(opts.get("power", 10))
    potential = PotentialSpec(lambda x, y: power_potential(x, y, scale, power),
                              float(opts.get("half_width", 10.0)), int(opts.get("points", 21)),
                              float(opts.get("h_g", 1e-4)))
    grid = KGrid(int(opts.get("grid_n", 200)), 0.5)

    def occupation(w):
        return 0.5 * (bath.hot(w) + bath.cold(w))

    vf = semiclassical_current_field(spec, occupation, potential, grid)
    circ = boundary_circulation(vf)
    chern = {}
    for band in ("+", "-"):
        try:
            chern[band] = chern_number(band, spec, max(grid.n, 50))
        except QWZError as exc:
            chern[band] = f"undetermined: {exc}"
    summary = {"edge_sign": edge_sign(vf),
               "boundary_single_signed": bool(np.all(circ > 0) or np.all(circ < 0)),
               "chern": chern, "potential": {"scale": scale, "power": power}}
    return summary, vf.rows()


# ------------------------------------------------------------------ entry

def _error_json(exc: BaseException, context: str | None = None) -> str:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if context:
        payload["context"] = context
    return json.dumps(payload)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qwzness", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config", help="path to the YAML/JSON config")
    run_p.add_argument("-o", "--output", help="output directory (overrides the config)")
    run_p.add_argument("-j", "--workers", type=int, default=1, help="parallel sweep workers")
    val_p = sub.add_parser("validate", help="check a config without running it")
    val_p.add_argument("config")
    for p in (run_p, val_p):
        p.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
        p.add_argument("-q", "--quiet", action="store_true", help="errors only")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.ERROR if args.quiet else (logging.DEBUG if args.verbose > 1 else
                                              logging.INFO if args.verbose else logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (OSError, yaml.YAMLError, ValidationError) as exc:
        print(_error_json(exc, "loading config"))
        return 2
    run, problems = parse_config(cfg)
    if args.command == "validate":
        print(json.dumps({"valid": not problems, "diagnostics": problems}, indent=2))
        return 0 if not problems else 1
    if problems:
        print(json.dumps({"error": "ValidationError", "diagnostics": problems}))
        return 2
    if args.workers < 1:
        print(json.dumps({"error": "ValidationError", "diagnostics": ["--workers must be >= 1"]}))
        return 2
    try:
        manifest = execute(run, args.output, args.workers)
    except QWZError as exc:
        print(_error_json(exc, f"experiment {run.experiment}"))
        return 1
    print(json.dumps({"manifest": str(Path(args.output or run.directory) / "manifest.json"),
                      "files": [f["path"] for f in manifest["files"]]}))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
