"""Command-line interface: ``photonpos {verify,eigen,evolve,export-frame}``.

Every subcommand takes a JSON config (``--config``) whose keys may be
overridden by flags.  Exit codes: 0 success, 1 a verification check failed,
2 bad configuration or input.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, PhotonPosError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

CHARTS = ("south", "north")
FORMATS = ("json", "csv")
SUITES = ("all", "axiom", "gauge")


@dataclass
class Config:
    grid: dict = field(default_factory=dict)
    mode: str = "analytic"
    h: float | None = None
    tolerances: dict = field(default_factory=dict)
    chart: str = "south"
    seed: int = 0
    out: str | None = None
    format: str | None = None
    measure: str = "bb"
    threads: int = 1
    suite: str = "all"
    packets: int = 20
    points: int = 100
    pairs: int = 20
    checks: list | None = None

    def validate(self) -> "Config":
        from .operators import MODES
        from .verify import TOLERANCE_KEYS
        from .wavefields import MEASURES

        try:
            for name in ("seed", "threads", "packets", "points", "pairs"):
                setattr(self, name, int(getattr(self, name)))
            if self.h is not None:
                self.h = float(self.h)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad numeric config value: {exc}") from exc
        checks = [("mode", MODES), ("chart", CHARTS), ("measure", MEASURES), ("suite", SUITES)]
        for name, allowed in checks:
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {list(allowed)}, got {getattr(self, name)!r}")
        if self.format is not None and self.format not in FORMATS:
            raise ConfigError(f"format must be one of {list(FORMATS)}")
        if self.h is not None and not self.h > 0:
            raise ConfigError("h must be positive")
        for name in ("threads", "packets", "points", "pairs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if not isinstance(self.tolerances, dict) or set(self.tolerances) - set(TOLERANCE_KEYS):
            raise ConfigError(f"tolerances must be an object with keys from {list(TOLERANCE_KEYS)}")
        if self.checks is not None:
            from .verify import AXIOM_IDS, GAUGE_IDS

            if not isinstance(self.checks, list) or set(self.checks) - set(AXIOM_IDS + GAUGE_IDS):
                raise ConfigError("checks must be a list of check ids")
        self.grid_spec()
        return self

    def grid_spec(self):
        from .wavefields import QuadratureGrid

        return QuadratureGrid.from_json(self.grid)

    def frame_field(self):
        from .frames import NORTH, SOUTH

        return SOUTH if self.chart == "south" else NORTH


CONFIG_KEYS = {f.name for f in fields(Config)}


def load_json(source: str):
    """Parse ``source`` as inline JSON when it looks like JSON, else as a file path."""
    text = source.strip()
    try:
        if text[:1] in "{[":
            return json.loads(text)
        return json.loads(Path(source).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {source}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {source}: {exc}") from exc


def build_config(args: argparse.Namespace) -> Config:
    data = {}
    if args.config is not None:
        data = load_json(args.config)
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = Config(**data)
    overrides = {name: getattr(args, name) for name in ("mode", "h", "seed", "out", "format", "measure",
                                                         "threads", "chart")
                 if getattr(args, name, None) is not None}
    if getattr(args, "grid", None) is not None:
        overrides["grid"] = load_json(args.grid)
    try:
        return replace(cfg, **overrides).validate()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_text(text: str, path) -> None:
    fh, own = _open_out(path)
    try:
        fh.write(text)
    finally:
        if own:
            fh.close()


# -- subcommands -------------------------------------------------------------

def cmd_verify(cfg: Config) -> int:
    from . import verify

    settings = dict(n_packets=cfg.packets, n_points=cfg.points, n_pairs=cfg.pairs,
                    tolerances=cfg.tolerances)
    ff, grid = cfg.frame_field(), cfg.grid_spec()
    reports = []

    def pick(ids):
        return None if cfg.checks is None else [c for c in cfg.checks if c in ids]

    if cfg.suite in ("all", "axiom"):
        reports += verify.run_axiom_suite(ff, grid, cfg.seed, cfg.mode, cfg.measure, cfg.h, cfg.threads,
                                          checks=pick(verify.AXIOM_IDS), **settings)
    if cfg.suite in ("all", "gauge"):
        reports += verify.run_gauge_suite(ff, None, cfg.seed, cfg.mode, cfg.h, cfg.threads,
                                          checks=pick(verify.GAUGE_IDS), **settings)
    if (cfg.format or "json") == "json":
        _write_text(verify.report_json(reports), cfg.out)
    else:
        fh, own = _open_out(cfg.out)
        try:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", "anchor", "residual", "tol", "pass", "samples", "mode"])
            for r in reports:
                writer.writerow([r.id, r.anchor, repr(r.residual), repr(r.tol), str(r.passed).lower(),
                                 r.samples, r.mode])
        finally:
            if own:
                fh.close()
    failed = [r.id for r in reports if not r.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


C2_COLUMNS = ["k1", "k2", "k3", "re_f1", "im_f1", "re_f2", "im_f2"]


def cmd_eigen(cfg: Config, X, helicity: int, rep: str) -> int:
    from . import bundle
    from .fields import sample
    from .frames import on_ray
    from .wavefields import FIELD3_COLUMNS, complex_columns, write_rows

    if rep not in bundle.REPS:
        raise ConfigError(f"rep must be one of {list(bundle.REPS)}")
    psi = bundle.eigenfunction(X, helicity, rep)
    nodes, _ = cfg.grid_spec().nodes_and_weights()
    if rep.startswith("field3"):
        # south frames are singular on the k3 >= 0 ray, north frames on k3 <= 0
        keep = ~np.atleast_1d(on_ray(nodes, +1 if rep == "field3-south" else -1))
        header = FIELD3_COLUMNS
    else:
        keep = np.linalg.norm(nodes, axis=1) > 0
        header = C2_COLUMNS
    skipped = int((~keep).sum())
    if skipped:
        print(f"warning: skipped {skipped} point(s) outside the domain", file=sys.stderr)
    ks = nodes[keep]
    fh, own = _open_out(cfg.out)
    try:
        write_rows(header, complex_columns(ks, sample(psi, ks)), fh)
    finally:
        if own:
            fh.close()
    return EXIT_OK


PACKET_KEYS = {"center", "width", "helicity", "phase_center", "chart", "support"}
TRAJECTORY_COLUMNS = ["t", "X1", "X2", "X3", "V1", "V2", "V3"]


def packet_from_json(data, default_chart: str = "south"):
    from .frames import NORTH, SOUTH
    from .wavefields import gaussian_packet

    if not isinstance(data, dict):
        raise ConfigError("packet spec must be a JSON object")
    unknown = set(data) - PACKET_KEYS
    if unknown:
        raise ConfigError(f"unknown packet keys: {sorted(unknown)}")
    if "center" not in data or "width" not in data:
        raise ConfigError("packet spec needs 'center' and 'width'")
    chart = data.get("chart", default_chart)
    if chart not in CHARTS:
        raise ConfigError(f"packet chart must be one of {list(CHARTS)}")
    try:
        return gaussian_packet(data["center"], float(data["width"]), int(data.get("helicity", 1)),
                               SOUTH if chart == "south" else NORTH,
                               phase_center=data.get("phase_center", (0.0, 0.0, 0.0)),
                               support=float(data.get("support", 6.0)))
    except DomainError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad packet spec: {exc}") from exc


def cmd_evolve(cfg: Config, packet: str, times, c: float) -> int:
    from .dynamics import trajectory
    from .wavefields import write_rows

    if not c > 0:
        raise ConfigError("c must be positive")
    psi = packet_from_json(load_json(packet), cfg.chart)
    grid = cfg.grid_spec().for_packets(psi)
    rows = trajectory(psi, grid, times, c)
    fh, own = _open_out(cfg.out)
    try:
        write_rows(TRAJECTORY_COLUMNS, rows, fh)
    finally:
        if own:
            fh.close()
    return EXIT_OK


def cmd_export_frame(cfg: Config, points) -> int:
    from .frames import NORTH, SOUTH

    ff = SOUTH if cfg.chart == "south" else NORTH
    frames = [ff(k) for k in points]
    if (cfg.format or "json") == "json":
        data = [f.to_json() for f in frames]
        _write_text(json.dumps(data[0] if len(data) == 1 else data, indent=2) + "\n", cfg.out)
    else:
        fh, own = _open_out(cfg.out)
        try:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["k1", "k2", "k3"] + [f"E{i}{j}" for i in range(1, 4) for j in range(1, 4)])
            for f in frames:
                writer.writerow([repr(float(v)) for v in (*f.k, *f.E.reshape(-1))])
        finally:
            if own:
                fh.close()
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    from .operators import MODES
    from .wavefields import MEASURES

    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config file (or inline JSON)")
    p.add_argument("--grid", help="quadrature grid spec: JSON file or inline JSON")
    p.add_argument("--mode", choices=MODES, default=None, help="differentiation mode")
    p.add_argument("--h", type=float, default=None, help="finite-difference step")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=FORMATS, default=None)
    p.add_argument("--measure", choices=MEASURES, default=None, help="scalar-product measure")
    p.add_argument("--threads", type=int, default=None, help="worker cap; results do not depend on it")
    p.add_argument("--chart", choices=CHARTS, default=None, help="frame field")
    return p


def build_parser() -> argparse.ArgumentParser:
    from .bundle import REPS

    common = _common()
    parser = argparse.ArgumentParser(prog="photonpos",
                                     description="Photon position operator in momentum space.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run the axiom and identity suites")
    p = sub.add_parser("eigen", parents=[common], help="sample a position-helicity eigenfunction")
    p.add_argument("--X", type=float, nargs=3, default=[0.0, 0.0, 0.0], metavar=("X1", "X2", "X3"))
    p.add_argument("--helicity", type=int, choices=(1, -1), default=1)
    p.add_argument("--rep", choices=REPS, default="c2-cartesian")
    p = sub.add_parser("evolve", parents=[common], help="position expectation along free evolution")
    p.add_argument("--packet", required=True, help="packet spec: JSON file or inline JSON")
    p.add_argument("--t", type=float, nargs="+", default=[0.0], help="times")
    p.add_argument("--c", type=float, default=1.0, help="speed of light")
    p = sub.add_parser("export-frame", parents=[common], help="evaluate the frame field at wavevectors")
    p.add_argument("--k", type=float, nargs=3, action="append", required=True, metavar=("K1", "K2", "K3"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "eigen":
            return cmd_eigen(cfg, args.X, args.helicity, args.rep)
        if args.command == "evolve":
            return cmd_evolve(cfg, args.packet, args.t, args.c)
        return cmd_export_frame(cfg, args.k)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhotonPosError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
