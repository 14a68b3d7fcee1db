"""Command-line driver: configure bodies, run experiments, cache reports.

Commands: membership, volume, width, duality, radii, tables, tni,
no-duality, section-bounds.  Configuration comes from an INI file
(``--config``, section ``[run]``) overridden by explicit flags; reports are
written as JSON and RFC-4180 CSV, cached content-addressed by the canonical
config.  Exit codes: 0 success, 2 bound violation detected, 3 config error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, choi, cones, geometry
from .cones import BodySpec, Cone, OracleParams, Slice
from .geometry import BoundCheck, VolumeSchedule
from .matops import load_matrix

EXIT_OK = 0
EXIT_BOUND_VIOLATION = 2
EXIT_CONFIG_ERROR = 3

_CONES = {c.value.lower(): c for c in Cone}
_SLICES = {s.value: s for s in Slice}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we need 3
        self.exit(EXIT_CONFIG_ERROR, f"{self.prog}: error: {message}\n")


@dataclass
class ExperimentConfig:
    """Everything that determines a run; hashable for the result cache."""

    command: str
    n: int = 2
    cone: str = "CP"
    slice: str = "base"
    seed: int = 0
    chains: int = 8
    steps: int = 128          # samples per phase (volume walks)
    thin: int | None = None   # walk thinning; None = ambient dimension
    dirs: int = 4000          # width directions
    pairs: int = 100_000      # duality pairs
    probes: int = 1000        # radii / no-duality probes
    suite: str = "bases"
    check_vrad: float | None = None
    input: str | None = None
    input_digest: str = ""    # content hash of the input matrix, if any

    def canonical(self) -> dict:
        doc = asdict(self)
        doc["version"] = __version__
        doc.pop("input", None)  # path is irrelevant, the digest pins content
        return doc

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def heartbeat(event: str, **fields) -> None:
    doc = {"event": event, "t": round(time.time(), 3)}
    doc.update(fields)
    print(json.dumps(doc), file=sys.stderr, flush=True)


@dataclass
class ResultCache:
    """Content-addressed report store; hits return byte-identical reports."""

    root: "Path"

    def paths(self, key: str):
        entry = self.root / key
        return entry, entry / "report.json", entry / "report.csv", entry / "meta.json"

    def get(self, key: str):
        entry, j, c, _ = self.paths(key)
        if j.exists() and c.exists():
            return j.read_bytes(), c.read_bytes()
        return None

    def put(self, key: str, report_json: bytes, report_csv: bytes, config: dict) -> None:
        entry, j, c, m = self.paths(key)
        entry.mkdir(parents=True, exist_ok=True)
        j.write_bytes(report_json)
        c.write_bytes(report_csv)
        meta = {"version": __version__, "timestamp": time.time(), "config": config}
        m.write_text(json.dumps(meta, sort_keys=True, indent=2))


from pathlib import Path  # noqa: E402  (used by ResultCache annotation)


# ---------------------------------------------------------------------------
# Report assembly.
# ---------------------------------------------------------------------------

CSV_HEADER = ["body", "quantity", "value", "stderr", "bound_lo", "bound_hi", "source", "pass"]


@dataclass
class RunReport:
    config: ExperimentConfig
    results: dict = field(default_factory=dict)
    bounds: list[BoundCheck] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def violated(self) -> bool:
        return any(not b.satisfied for b in self.bounds)

    def to_json_bytes(self) -> bytes:
        doc = {
            "version": __version__,
            "command": self.config.command,
            "seed": self.config.seed,
            "config": self.config.canonical(),
            "results": self.results,
            "bounds": [
                {
                    "source": b.source, "quantity": b.quantity, "value": float(b.value),
                    "stderr": float(b.stderr),
                    "lo": None if b.lo is None else float(b.lo),
                    "hi": None if b.hi is None else float(b.hi),
                    "pass": bool(b.satisfied),
                }
                for b in self.bounds
            ],
            "warnings": self.warnings,
        }
        return (json.dumps(doc, sort_keys=True, indent=2, default=_json_default) + "\n").encode()

    def to_csv_bytes(self, body_name: str) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf)  # csv defaults to RFC-4180 CRLF endings
        writer.writerow(CSV_HEADER)
        for b in self.bounds:
            writer.writerow([
                body_name, b.quantity, _fmt(b.value), _fmt(b.stderr),
                "" if b.lo is None else _fmt(b.lo),
                "" if b.hi is None else _fmt(b.hi),
                b.source, "pass" if b.satisfied else "FAIL",
            ])
        return buf.getvalue().encode()


def _json_default(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def _body_from_config(cfg: ExperimentConfig) -> BodySpec:
    try:
        cone = _CONES[cfg.cone.lower()]
    except KeyError:
        raise ConfigError(f"unknown cone {cfg.cone!r}; choose from {sorted(_CONES)}")
    try:
        slc = _SLICES[cfg.slice.lower()]
    except KeyError:
        raise ConfigError(f"unknown slice {cfg.slice!r}; choose from {sorted(_SLICES)}")
    if cfg.n < 2:
        raise ConfigError("n must be >= 2")
    return BodySpec(cone, cfg.n, slc)


def _schedule(cfg: ExperimentConfig) -> VolumeSchedule:
    return VolumeSchedule(chains=cfg.chains, samples_per_phase=cfg.steps, thin=cfg.thin)


#: per-cone volume-radius bounds for bases, as functions of n
VRAD_BOUNDS = {
    Cone.P: lambda n, r: (np.sqrt(n) / 4, 6 * np.sqrt(n)),
    Cone.D: lambda n, r: (r, 8 * r),
    Cone.CP: lambda n, r: (0.5, 1.0),
    Cone.CCP: lambda n, r: (0.5, 1.0),
    Cone.T: lambda n, r: (r / 4, r),
    Cone.SP: lambda n, r: (1 / (6 * np.sqrt(n)), 4 / np.sqrt(n)),
}

WIDTH_BOUNDS = {
    Cone.CP: lambda n: (None, 2.0),
    Cone.CCP: lambda n: (None, 2.0),
    Cone.D: lambda n: (None, 4.0),
    Cone.SP: lambda n: (None, 4 / np.sqrt(n)),
}


# ---------------------------------------------------------------------------
# Command implementations.  Each returns a RunReport.
# ---------------------------------------------------------------------------

def cmd_membership(cfg: ExperimentConfig) -> RunReport:
    if not cfg.input:
        raise ConfigError("membership requires --input pointing at a matrix JSON file")
    d_mat = load_matrix(cfg.input)
    body = _body_from_config(cfg)
    if cfg.slice == "cone":
        verdict = cones.cone_membership(d_mat, body.cone, body.params)
    else:
        verdict = cones.slice_membership(d_mat, body)
    report = RunReport(cfg)
    report.results["verdict"] = verdict.to_json()
    return report


def cmd_volume(cfg: ExperimentConfig) -> RunReport:
    body = _body_from_config(cfg)
    if body.dim > geometry.MAX_WALK_DIM:
        raise ConfigError(
            f"volume estimation refused: the {body.cone.value}/{body.slice.value} body at "
            f"n={cfg.n} has affine dimension {body.dim}, beyond the desk-scale walk "
            f"ceiling of {geometry.MAX_WALK_DIM} (membership and width remain available)")
    report = RunReport(cfg)
    try:
        res = geometry.volume_mcmc(
            body, cfg.seed, _schedule(cfg),
            heartbeat=lambda name, ch, ph, of: heartbeat(
                "phase", body=name, chain=ch, phase=ph, of=of))
    except geometry.McmcAbort as abort:
        report.warnings.append(str(abort))
        report.results["aborted"] = True
        return report
    report.results["vrad"] = res.vrad.to_json()
    report.results["log_volume"] = res.log_volume.to_json()
    report.results["phases"] = res.n_phases
    if body.slice == Slice.BASE and body.cone in VRAD_BOUNDS:
        lo, hi = VRAD_BOUNDS[body.cone](cfg.n, geometry.vrad_cp_base(cfg.n))
        v = res.vrad
        report.bounds.append(BoundCheck(
            source=f"{body.cone.value.lower()}-base-vrad-bounds", quantity="vrad",
            value=v.value, stderr=v.stderr, lo=float(lo), hi=float(hi),
            satisfied=lo - 3 * v.stderr <= v.value <= hi + 3 * v.stderr))
    if body.cone in (Cone.CP, Cone.CCP) and body.slice == Slice.BASE:
        exact = geometry.vrad_cp_base(cfg.n)
        v = res.vrad
        report.bounds.append(BoundCheck(
            source="state-volume-formula", quantity="vrad-vs-exact",
            value=v.value, stderr=v.stderr, lo=0.9 * exact, hi=1.1 * exact,
            satisfied=abs(v.value - exact) <= 0.1 * exact + 3 * v.stderr))
    return report


def cmd_width(cfg: ExperimentConfig) -> RunReport:
    body = _body_from_config(cfg)
    res = geometry.mean_width_mc(body, cfg.dirs, cfg.seed)
    report = RunReport(cfg)
    report.results["width_lo"] = res.lo.to_json()
    report.results["width_hi"] = res.hi.to_json()
    report.results["heuristic"] = res.heuristic
    if body.cone in WIDTH_BOUNDS and body.slice == Slice.BASE:
        _, hi = WIDTH_BOUNDS[body.cone](cfg.n)
        report.bounds.append(BoundCheck(
            source=f"{body.cone.value.lower()}-base-width-bound", quantity="mean-width",
            value=res.hi.value, stderr=res.hi.stderr, lo=None, hi=hi,
            satisfied=res.hi.value <= hi + 3 * res.hi.stderr))
    return report


def cmd_duality(cfg: ExperimentConfig) -> RunReport:
    res = geometry.duality_experiment(cfg.n, cfg.pairs, max(cfg.pairs // 10, 100), cfg.seed)
    report = RunReport(cfg)
    report.results.update({k: v for k, v in res.items() if k != "wall_time"})
    for key, source in (("max_cp_pair", "base-polarity-cp"), ("max_td_pair", "base-polarity-t-d")):
        report.bounds.append(BoundCheck(
            source=source, quantity=key, value=res[key], stderr=0.0,
            lo=None, hi=1.0, satisfied=res[key] <= 1.0 + 1e-9))
    return report


def cmd_radii(cfg: ExperimentConfig) -> RunReport:
    body = _body_from_config(cfg)
    res = geometry.radii_verify(body, cfg.probes, cfg.seed)
    report = RunReport(cfg)
    report.results["inradius"] = res.inradius
    report.results["outradius"] = res.outradius
    for check in res.checks:
        report.bounds.append(BoundCheck(
            source="radii-formula", quantity=check.name, value=float(check.ok),
            stderr=0.0, lo=None, hi=None, satisfied=check.ok))
        report.results.setdefault("details", {})[check.name] = check.detail
    return report


def cmd_tables(cfg: ExperimentConfig) -> RunReport:
    if cfg.suite != "bases":
        raise ConfigError(f"unknown table suite {cfg.suite!r} (available: bases)")
    report = RunReport(cfg)
    rows = []
    r_cp = geometry.vrad_cp_base(cfg.n)
    for cone in (Cone.P, Cone.D, Cone.CP, Cone.T, Cone.SP):
        body = BodySpec(cone, cfg.n, Slice.BASE)
        lo, hi = VRAD_BOUNDS[cone](cfg.n, r_cp)
        row = {"set": cone.value, "bound_lo": float(lo), "bound_hi": float(hi)}
        if body.dim > geometry.MAX_WALK_DIM:
            row["estimate"] = None
            row["status"] = "pending (walk ceiling)"
            report.warnings.append(
                f"vrad({cone.value} base, n={cfg.n}): walk refused at dimension {body.dim}")
        else:
            try:
                res = geometry.volume_mcmc(body, cfg.seed, _schedule(cfg),
                                           heartbeat=lambda name, ch, ph, of: heartbeat(
                                               "phase", body=name, chain=ch, phase=ph, of=of))
            except geometry.McmcAbort as abort:
                row["estimate"] = None
                row["status"] = f"aborted: {abort}"
                report.warnings.append(str(abort))
                rows.append(row)
                continue
            v = res.vrad
            row["estimate"] = v.value
            row["stderr"] = v.stderr
            row["status"] = "ok"
            report.bounds.append(BoundCheck(
                source=f"{cone.value.lower()}-base-vrad-bounds", quantity=f"vrad-{cone.value}",
                value=v.value, stderr=v.stderr, lo=float(lo), hi=float(hi),
                satisfied=lo - 3 * v.stderr <= v.value <= hi + 3 * v.stderr))
        rows.append(row)
    report.results["rows"] = rows
    return report


def cmd_tni(cfg: ExperimentConfig) -> RunReport:
    if cfg.n != 2:
        raise ConfigError("the three-volume experiment runs at n = 2 only")
    report = RunReport(cfg)
    res = geometry.tni_experiment(
        cfg.n, cfg.seed, _schedule(cfg),
        heartbeat=lambda name, ch, ph, of: heartbeat(
            "phase", body=name, chain=ch, phase=ph, of=of))
    report.results["fiber_ok"] = res.fiber_ok
    report.results["fiber_detail"] = res.fiber_detail
    report.results["bracket"] = list(res.bracket)
    report.results["volumes"] = {
        k: {"vrad": v.vrad.to_json(), "log_volume": v.log_volume.to_json()}
        for k, v in res.volumes.items()
    }
    report.bounds.append(BoundCheck(
        source="fibration-identity", quantity="fiber-residual", value=float(res.fiber_ok),
        stderr=0.0, lo=None, hi=None, satisfied=res.fiber_ok))
    if res.aborted:
        report.warnings.append(f"volume stage aborted: {res.abort_reason}")
        report.results["aborted"] = True
    else:
        report.results["ratio"] = res.ratio
        report.bounds.append(BoundCheck(
            source="tni-volume-bracket", quantity="three-volume-ratio", value=res.ratio,
            stderr=0.0, lo=res.bracket[0], hi=res.bracket[1],
            satisfied=bool(res.in_bracket)))
    return report


def cmd_no_duality(cfg: ExperimentConfig) -> RunReport:
    res = geometry.no_duality_discrepancy(cfg.n, cfg.probes, cfg.seed)
    report = RunReport(cfg)
    report.results.update({
        "numerator": res.numerator, "denominator_bound": res.denominator_bound,
        "ratio": res.ratio, "max_sampled": res.max_sampled,
    })
    report.bounds.append(BoundCheck(
        source="tp-section-polarity-gap", quantity="discrepancy-ratio", value=res.ratio,
        stderr=0.0, lo=float(cfg.n), hi=None, satisfied=res.ratio >= cfg.n - 1e-9))
    report.bounds.append(BoundCheck(
        source="tp-section-polarity-gap", quantity="sampled-denominator", value=res.max_sampled,
        stderr=0.0, lo=None, hi=res.denominator_bound,
        satisfied=res.max_sampled <= res.denominator_bound + 1e-9))
    return report


def cmd_section_bounds(cfg: ExperimentConfig) -> RunReport:
    n = cfg.n
    m = n ** 4 - 1
    k = n ** 4 - n ** 2
    r = 1 / np.sqrt(n * n - 1)
    big_r = np.sqrt(n * n - 1)
    lo, hi = geometry.section_bounds(geometry.vrad_cp_base(n), r, big_r, m, k)
    report = RunReport(cfg)
    report.results.update({"m": m, "k": k, "lo": lo, "hi": hi,
                           "base_vrad": geometry.vrad_cp_base(n)})
    if cfg.check_vrad is not None:
        report.bounds.append(BoundCheck(
            source="section-vrad-bounds", quantity="tp-section-vrad",
            value=cfg.check_vrad, stderr=0.0, lo=lo, hi=hi,
            satisfied=lo <= cfg.check_vrad <= hi))
    return report


COMMANDS = {
    "membership": cmd_membership,
    "volume": cmd_volume,
    "width": cmd_width,
    "duality": cmd_duality,
    "radii": cmd_radii,
    "tables": cmd_tables,
    "tni": cmd_tni,
    "no-duality": cmd_no_duality,
    "section-bounds": cmd_section_bounds,
}


# ---------------------------------------------------------------------------
# Argument and config handling.
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="mapcones", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI file, section [run]; flags override")
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--cone", default=None)
        p.add_argument("--slice", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--chains", type=int, default=None)
        p.add_argument("--steps", type=int, default=None,
                       help="samples per phase for volume walks")
        p.add_argument("--thin", type=int, default=None)
        p.add_argument("--dirs", type=int, default=None)
        p.add_argument("--pairs", type=int, default=None)
        p.add_argument("--probes", type=int, default=None)
        p.add_argument("--suite", default=None)
        p.add_argument("--check-vrad", type=float, default=None, dest="check_vrad")
        p.add_argument("--input", default=None)
        p.add_argument("--out", default=".")
        p.add_argument("--json", action="store_true", dest="json_out",
                       help="machine-readable report on stdout")
        p.add_argument("--no-cache", action="store_true")
    return parser


_INT_KEYS = {"n", "seed", "chains", "steps", "thin", "dirs", "pairs", "probes"}
_FLOAT_KEYS = {"check_vrad"}


def merge_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        ini = configparser.ConfigParser()
        read = ini.read(args.config)
        if not read:
            raise ConfigError(f"config file not found: {args.config}")
        if "run" not in ini:
            raise ConfigError(f"config file {args.config} has no [run] section")
        for key, raw in ini["run"].items():
            key = key.replace("-", "_")
            if key in _INT_KEYS:
                values[key] = int(raw)
            elif key in _FLOAT_KEYS:
                values[key] = float(raw)
            else:
                values[key] = raw
    for key in ("n", "cone", "slice", "seed", "chains", "steps", "thin", "dirs",
                "pairs", "probes", "suite", "check_vrad", "input"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag  # flags win over the INI file
    values = {k: v for k, v in values.items() if k in ExperimentConfig.__dataclass_fields__}
    cfg = ExperimentConfig(command=args.command, **values)
    if cfg.input:
        try:
            cfg.input_digest = hashlib.sha256(Path(cfg.input).read_bytes()).hexdigest()
        except OSError as exc:
            raise ConfigError(f"cannot read input file {cfg.input}: {exc}")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = merge_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = ResultCache(out_dir / "cache")
    key = cfg.digest()

    if not args.no_cache:
        hit = cache.get(key)
        if hit is not None:
            report_json, report_csv = hit
            heartbeat("cache-hit", key=key)
            (out_dir / "report.json").write_bytes(report_json)
            (out_dir / "report.csv").write_bytes(report_csv)
            if args.json_out:
                sys.stdout.write(report_json.decode())
            doc = json.loads(report_json)
            violated = any(not row["pass"] for row in doc.get("bounds", []))
            return EXIT_BOUND_VIOLATION if violated else EXIT_OK

    heartbeat("start", command=cfg.command, key=key)
    try:
        report = COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    body_name = f"{cfg.cone}/{cfg.slice}/n={cfg.n}"
    report_json = report.to_json_bytes()
    report_csv = report.to_csv_bytes(body_name)
    (out_dir / "report.json").write_bytes(report_json)
    (out_dir / "report.csv").write_bytes(report_csv)
    cache.put(key, report_json, report_csv, cfg.canonical())
    for warning in report.warnings:
        heartbeat("warning", message=warning)
    heartbeat("done", command=cfg.command, violated=report.violated)
    if args.json_out:
        sys.stdout.write(report_json.decode())
    return EXIT_BOUND_VIOLATION if report.violated else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
