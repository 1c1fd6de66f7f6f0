"""Experiment driver: run any module procedure from a TOML config.

Artifacts land in the output directory only after the whole computation
succeeds, so an invalid run never leaves partial files behind.  Every
run writes `results.csv` with the fixed columns (experiment, parameter,
value) plus a `manifest.json` recording the config hash, code version,
seed, and runtime.  Float cells use repr(), so reruns with the same
config and seed are byte-identical.

Exit codes: 0 success (non-convergence is reported in the artifacts,
not the exit code), 2 config problems, 3 numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .bodies import Body, body_from_dict, body_from_json
from .config import (DEFAULT_MAX_ITERATIONS, DEFAULT_POINT_RADIUS,
                     DEFAULT_STOP_TOL)
from .covering import CoverInput, greedy_cover, random_cover_input
from .errors import ConfigError, LabError
from .fields import (ScalarField, indicator_field, lp_norm, save_field,
                     slice_csv, tent_field, two_bump_field)
from .maxop import (DilationLadder, growth_ratio, iterate,
                    levelset_experiment, max_transform, quartic_probe)
from .moments import (certify, isotropize, moment_tensor,
                      quasi_uniform_rotations, rotation_scan)
from .symtensor import sorted_indices

SUBCOMMANDS = ("normalize", "moments", "certify", "rotate-scan",
               "transform", "iterate", "growth", "levelset", "cover",
               "quartic-probe")


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _load_toml(path: str) -> dict:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") \
            from exc


def _load_body_file(path: str) -> Body:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read body file {path}: {exc}") from exc
    try:
        return body_from_json(text)
    except (LabError, KeyError, ValueError) as exc:
        raise ConfigError(f"body file {path} is invalid: {exc}") from exc


def _resolve_body(args, cfg: dict, key: str = "body") -> Body:
    if getattr(args, "body", None):
        return _load_body_file(args.body)
    if f"{key}_path" in cfg:
        return _load_body_file(cfg[f"{key}_path"])
    if key in cfg:
        try:
            return body_from_dict(cfg[key])
        except (LabError, KeyError, ValueError) as exc:
            raise ConfigError(f"inline [{key}] table is invalid: {exc}") \
                from exc
    raise ConfigError(
        "no body given: pass --body or set body_path / [body] in the config")


def _require(cfg: dict, key: str, kind, where: str):
    if key not in cfg:
        raise ConfigError(f"missing required config key '{key}' in {where}")
    value = cfg[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(
            f"config key '{key}' in {where} should be {kind.__name__}, "
            f"got {type(value).__name__}")
    return value


def _build_grid_field(cfg: dict, body: Body) -> ScalarField:
    grid = _require(cfg, "grid", dict, "config")
    origin = _require(grid, "origin", list, "[grid]")
    spacing = float(_require(grid, "spacing", float, "[grid]"))
    shape = _require(grid, "shape", list, "[grid]")
    fld = cfg.get("field", {})
    kind = fld.get("kind", "indicator")
    lam = float(fld.get("lam", 1.0))
    fbody = body
    if "body_path" in fld:
        fbody = _load_body_file(fld["body_path"])
    try:
        if kind == "indicator":
            return indicator_field(fbody, origin, spacing, shape, lam=lam)
        if kind == "tent":
            return tent_field(fbody, origin, spacing, shape, lam=lam)
        if kind == "two_bump":
            centers = _require(fld, "centers", list, "[field]")
            return two_bump_field(fbody, origin, spacing, shape,
                                  centers=centers, lam=lam)
    except LabError as exc:
        raise ConfigError(f"bad grid/field parameters: {exc}") from exc
    raise ConfigError(f"unknown field kind {kind!r} "
                      "(use indicator, tent, or two_bump)")


def _build_ladder(cfg: dict, field: ScalarField, body: Body
                  ) -> DilationLadder:
    lad = cfg.get("ladder", {})
    try:
        return DilationLadder.for_grid(
            field, body,
            ratio=float(lad.get("ratio", 1.05)),
            lam_min=lad.get("lam_min"),
            lam_max=lad.get("lam_max"))
    except LabError as exc:
        raise ConfigError(f"bad ladder parameters: {exc}") from exc


def _parse_point(text: str | None, cfg: dict, dim: int) -> list | None:
    if text:
        try:
            values = [float(v) for v in text.split(",")]
        except ValueError as exc:
            raise ConfigError(f"--point must be comma-separated reals, "
                              f"got {text!r}") from exc
    elif "point" in cfg:
        values = [float(v) for v in cfg["point"]]
    else:
        return None
    if len(values) != dim:
        raise ConfigError(f"point has {len(values)} coordinates, "
                          f"body has dimension {dim}")
    return values


# ---------------------------------------------------------------------------
# artifact collection
# ---------------------------------------------------------------------------

class Artifacts:
    """In-memory artifact staging; nothing touches disk until write()."""

    def __init__(self):
        self.rows: list[tuple] = []
        self.texts: dict[str, str] = {}
        self.fields: dict[str, ScalarField] = {}

    def add_rows(self, experiment: str, pairs) -> None:
        for parameter, value in pairs:
            self.rows.append((experiment, parameter, value))

    def add_json(self, name: str, payload) -> None:
        self.texts[name] = json.dumps(_plain(payload), indent=2,
                                      sort_keys=True) + "\n"

    def add_field(self, name: str, field: ScalarField) -> None:
        self.fields[name] = field

    def results_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["experiment", "parameter", "value"])
        for experiment, parameter, value in self.rows:
            writer.writerow([experiment, parameter, _cell(value)])
        return buf.getvalue()

    def write(self, outdir: Path, manifest: dict) -> None:
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "results.csv").write_text(self.results_csv())
        for name, text in self.texts.items():
            (outdir / name).write_text(text)
        for name, field in self.fields.items():
            save_field(field, outdir / name)
        (outdir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _plain(obj):
    """JSON-ready copy: numpy scalars/arrays to Python numbers/lists."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _index_label(idx: tuple) -> str:
    return "".join(str(i + 1) for i in idx)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _run_normalize(args, cfg: dict, art: Artifacts) -> None:
    body = _resolve_body(args, cfg)
    result = isotropize(body)
    art.add_rows("normalize", [
        ("error_before", float(result.error_before)),
        ("error_after", float(result.error_after)),
    ])
    art.add_json("normalize.json", {
        "body": body.to_dict(),
        "normalized": result.body.to_dict(),
        "matrix": result.matrix.tolist(),
        "error_before": float(result.error_before),
        "error_after": float(result.error_after),
    })


def _run_moments(args, cfg: dict, art: Artifacts) -> None:
    body = _resolve_body(args, cfg)
    order = int(args.order if args.order is not None
                else cfg.get("order", 2))
    tensor = moment_tensor(body, order)
    entries = {}
    pairs = []
    for idx in sorted_indices(body.dim, order):
        label = _index_label(idx)
        value = float(tensor.get(idx))
        entries[label] = value
        pairs.append((f"m_{label}", value))
    art.add_rows("moments", pairs)
    art.add_json("moments.json", {
        "body": body.to_dict(),
        "order": order,
        "entries": entries,
    })


def _run_certify(args, cfg: dict, art: Artifacts) -> None:
    body = _resolve_body(args, cfg)
    order = int(args.order if args.order is not None
                else cfg.get("order", 4))
    point = _parse_point(args.point, cfg, body.dim)
    report = certify(body, order=order, point=point)
    report["body"] = body.to_dict()
    art.add_rows("certify", [
        ("Q", float(report["Q"])),
        ("is_obstructed", bool(report["is_obstructed"])),
        ("arithmetic", report["arithmetic"]),
    ])
    art.add_json("certificate.json", report)


def _run_rotate_scan(args, cfg: dict, art: Artifacts) -> None:
    body = _resolve_body(args, cfg)
    order = int(args.order if args.order is not None
                else cfg.get("order", 4))
    n = int(cfg.get("rotations", 32))
    point = _parse_point(args.point, cfg, body.dim)
    normalized = bool(cfg.get("normalize", True))
    if normalized:
        body = isotropize(body).body
    mats = quasi_uniform_rotations(n, dim=body.dim, seed=args.seed)
    report = rotation_scan(body, order, mats, point=point)
    pairs = [(f"value_{i}", float(v))
             for i, v in enumerate(report["values"])]
    pairs += [("average", float(report["average"])),
              ("max_abs", float(report["max_abs"]))]
    art.add_rows("rotate-scan", pairs)
    art.add_json("rotate_scan.json", {
        "body": body.to_dict(),
        "normalized": normalized,
        "order": order,
        "n_rotations": n,
        "seed": args.seed,
        **report,
    })


def _run_transform(args, cfg: dict, art: Artifacts) -> None:
    body = _resolve_body(args, cfg)
    field = _build_grid_field(cfg, body)
    ladder = _build_ladder(cfg, field, body)
    out = max_transform(field, body, ladder,
                        backend=cfg.get("backend", "auto"),
                        workers=args.threads)
    art.add_rows("transform", [
        ("sup", float(out.values.max())),
        ("l2", lp_norm(out, 2.0)),
        ("n_dilations", len(ladder)),
    ])
    art.add_field("transform.f64", out)
    _stage_slices(cfg, out, art)


def _stage_slices(cfg: dict, field: ScalarField, art: Artifacts) -> None:
    for k, entry in enumerate(cfg.get("slices", [])):
        axes = tuple(int(a) for a in entry.get("axes", [0]))
        name = entry.get("name", f"slice_{k}.csv")
        buf = io.StringIO()
        slice_csv(field, buf, axes=axes)
        art.texts[name] = buf.getvalue()


def _run_iterate(args, cfg: dict, art: Artifacts) -> None:
    body = _resolve_body(args, cfg)
    field = _build_grid_field(cfg, body)
    ladder = _build_ladder(cfg, field, body)
    probes = {}
    for entry in cfg.get("probes", []):
        name = _require(entry, "name", str, "[[probes]]")
        radii = np.linalg.norm(field.points(), axis=-1)
        mask = (radii >= float(entry.get("r_min", 0.0))) \
            & (radii <= float(entry.get("r_max", np.inf)))
        probes[name] = mask
    result = iterate(field, body, ladder,
                     n_max=int(cfg.get("n_max", DEFAULT_MAX_ITERATIONS)),
                     stop_tol=float(cfg.get("stop_tol", DEFAULT_STOP_TOL)),
                     probes=probes,
                     backend=cfg.get("backend", "auto"),
                     workers=args.threads)
    art.add_rows("iterate", [
        ("n_steps", result.n_steps),
        ("converged", result.converged),
        ("final_sup", float(result.field.values.max())),
    ])
    if result.trace:
        keys = list(result.trace[0].keys())
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(keys)
        for row in result.trace:
            writer.writerow([_cell(row[k]) for k in keys])
        art.texts["trace.csv"] = buf.getvalue()
    art.add_field("iterate.f64", result.field)
    _stage_slices(cfg, result.field, art)
    art.add_json("iterate.json", {
        "n_steps": result.n_steps,
        "converged": result.converged,
        "trace": result.trace,
    })


def _run_growth(args, cfg: dict, art: Artifacts) -> None:
    body = _resolve_body(args, cfg)
    field = _build_grid_field(cfg, body)
    ladder = _build_ladder(cfg, field, body)
    p_list = cfg.get("p", [2.0])
    if not isinstance(p_list, list):
        p_list = [p_list]
    pairs = []
    for p in p_list:
        ratio = growth_ratio(field, body, ladder, float(p),
                             backend=cfg.get("backend", "auto"),
                             workers=args.threads)
        pairs.append((f"p={float(p):g}", ratio))
    art.add_rows("growth", pairs)


def _run_levelset(args, cfg: dict, art: Artifacts) -> None:
    body = _resolve_body(args, cfg)
    field = _build_grid_field(cfg, body)
    ladder = _build_ladder(cfg, field, body)
    exp = cfg.get("experiment", {})
    mu = exp.get("mu", [0.5])
    report = levelset_experiment(
        field, body, mu,
        delta1=float(exp.get("delta1", 0.05)),
        n=int(_require(exp, "n", int, "[experiment]")),
        b_const=float(_require(exp, "b_const", float, "[experiment]")),
        ladder=ladder,
        backend=cfg.get("backend", "auto"),
        workers=args.threads)
    pairs = []
    for row in report["rows"]:
        tag = f"mu={row['mu']:g}"
        pairs.append((f"{tag}:lhs", row["lhs"]))
        pairs.append((f"{tag}:rhs", row["rhs"]))
        pairs.append((f"{tag}:slack", row["slack"]))
        pairs.append((f"{tag}:holds", row["holds"]))
    pairs.append(("all_hold", report["all_hold"]))
    art.add_rows("levelset", pairs)
    art.add_json("levelset.json", report)


def _run_cover(args, cfg: dict, art: Artifacts) -> None:
    body = _resolve_body(args, cfg)
    fam = cfg.get("family", {})
    if "items" in cfg:
        items = [(np.asarray(row["center"], dtype=float),
                  float(row["lambda"])) for row in cfg["items"]]
        cap = float(_require(cfg, "Lambda", float, "config"))
        try:
            cover_input = CoverInput(body=body, items=items, cap=cap)
        except LabError as exc:
            raise ConfigError(f"bad covering items: {exc}") from exc
    else:
        rng = np.random.default_rng(args.seed)
        cover_input = random_cover_input(
            body,
            n_items=int(fam.get("n_items", 100)),
            cap=float(fam.get("cap", 1.0)),
            spread=float(fam.get("spread", 5.0)),
            rng=rng)
    report = greedy_cover(cover_input,
                          resolution=int(cfg.get("resolution", 64)))
    art.add_rows("cover", [
        ("n_items", report.n_items),
        ("n_selected", len(report.selected)),
        ("all_covered", bool(report.covered.all())),
        ("overlap_max", report.overlap_max),
    ])
    art.add_json("cover.json", {
        "input": cover_input.to_dict(),
        "report": report.to_dict(),
    })


def _run_quartic_probe(args, cfg: dict, art: Artifacts) -> None:
    body = _resolve_body(args, cfg)
    normalized = bool(cfg.get("normalize", True))
    if normalized:
        body = isotropize(body).body
    point = _parse_point(args.point, cfg, body.dim)
    if point is None:
        point = [0.0] * body.dim
        point[0] = DEFAULT_POINT_RADIUS
    lams = cfg.get("lams", [0.4, 0.2, 0.1])
    report = quartic_probe(body, lams, point)
    pairs = [(f"lam={lam:g}", value)
             for lam, value in zip(report["lams"], report["values"])]
    pairs += [("extrapolated", report["extrapolated"]),
              ("prediction", report["prediction"]),
              ("rel_deviation", report["rel_deviation"])]
    art.add_rows("quartic-probe", pairs)
    art.add_json("quartic_probe.json", {
        "body": body.to_dict(),
        "normalized": normalized,
        "point": point,
        **report,
    })


_RUNNERS = {
    "normalize": _run_normalize,
    "moments": _run_moments,
    "certify": _run_certify,
    "rotate-scan": _run_rotate_scan,
    "transform": _run_transform,
    "iterate": _run_iterate,
    "growth": _run_growth,
    "levelset": _run_levelset,
    "cover": _run_cover,
    "quartic-probe": _run_quartic_probe,
}

_BODY_KEYS = {"body", "body_path"}
_GRID_KEYS = {"grid", "field", "ladder", "backend"}

# top-level config keys each subcommand consumes; anything else is a
# config error rather than a silently ignored table
_CONFIG_KEYS = {
    "normalize": _BODY_KEYS,
    "moments": _BODY_KEYS | {"order"},
    "certify": _BODY_KEYS | {"order", "point"},
    "rotate-scan": _BODY_KEYS | {"order", "point", "rotations", "normalize"},
    "transform": _BODY_KEYS | _GRID_KEYS | {"slices"},
    "iterate": _BODY_KEYS | _GRID_KEYS | {"probes", "n_max", "stop_tol"},
    "growth": _BODY_KEYS | _GRID_KEYS | {"p"},
    "levelset": _BODY_KEYS | _GRID_KEYS | {"experiment"},
    "cover": _BODY_KEYS | {"family", "items", "Lambda", "resolution"},
    "quartic-probe": _BODY_KEYS | {"normalize", "lams", "point"},
}


def _check_config_keys(cfg: dict, subcommand: str) -> None:
    allowed = _CONFIG_KEYS[subcommand]
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(
            f"unknown config key(s) for {subcommand}: {', '.join(unknown)}"
            f" (allowed: {', '.join(sorted(allowed))})")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="TOML experiment config")
    shared.add_argument("--body", help="body JSON file")
    shared.add_argument("--out", help="output directory "
                        "(default maxlab-out/<subcommand>)")
    shared.add_argument("--seed", type=int, default=0,
                        help="seed for randomized scans (default 0)")
    shared.add_argument("--threads", type=int, default=1,
                        help="worker threads for FFT backends (default 1)")
    shared.add_argument("--order", type=int, default=None,
                        help="tensor order where applicable")
    shared.add_argument("--point", default=None,
                        help="comma-separated evaluation point")

    parser = argparse.ArgumentParser(
        prog="maxlab",
        description="experiments with discrete centered maximal averages "
                    "over convex bodies")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[shared])
    return parser


def _config_digest(cfg: dict, args) -> str:
    effective = {
        "config": cfg,
        "body": args.body,
        "order": args.order,
        "point": args.point,
        "seed": args.seed,
        "subcommand": args.subcommand,
    }
    blob = json.dumps(_plain(effective), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.monotonic()
    art = Artifacts()
    cfg = {}
    try:
        if args.config:
            cfg = _load_toml(args.config)
            _check_config_keys(cfg, args.subcommand)
        runner = _RUNNERS[args.subcommand]
        runner(args, cfg, art)
    except ConfigError as exc:
        print(f"maxlab: config error: {exc}", file=sys.stderr)
        return 2
    except LabError as exc:
        print(f"maxlab: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"maxlab: numerical failure: {exc}", file=sys.stderr)
        return 3

    outdir = Path(args.out) if args.out \
        else Path("maxlab-out") / args.subcommand
    manifest = {
        "subcommand": args.subcommand,
        "config_sha256": _config_digest(cfg, args),
        "code_version": __version__,
        "runtime_seconds": round(time.monotonic() - start, 6),
        "seed": args.seed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    art.write(outdir, manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
