"""Command-line front end for the verification suites.

Subcommands::

    todalump verify exact|linearized|fourier [flags]
    todalump kernel [flags]
    todalump report [flags]          # every suite

Exit status is 0 when every check passes, 2 when at least one check
fails and 64 for a malformed invocation (nothing is run or written then).
Every flag can also be given through an environment variable named
``TODALUMP_<FLAG>`` (e.g. ``TODALUMP_SEED=7``); flags win over the
environment.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import mpmath
import numpy as np
import scipy
import sympy

from . import __version__
from .spectral import STENCILS
from .suites import SUITES, Artifact, CheckRecord, Settings, run_suite, tolerance_names

EXIT_OK = 0
EXIT_FAIL = 2
EXIT_USAGE = 64

SCHEMA = 1
ENV_PREFIX = "TODALUMP_"

# fields of the JSON report that legitimately change between identical runs
TIMING_FIELDS = ("started_at", "elapsed")


class UsageError(Exception):
    """Invalid invocation or configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """Everything that determines a run."""

    suites: list[str]
    settings: Settings = field(default_factory=Settings)
    tol: dict[str, float] = field(default_factory=dict)
    json_path: Path | None = None
    csv_dir: Path | None = None
    parallel: bool = False
    quiet: bool = False

    def validate(self) -> None:
        s = self.settings
        unknown = [name for name in self.suites if name not in SUITES]
        if unknown:
            raise UsageError(f"unknown suite(s): {', '.join(unknown)}")
        if s.samples < 1:
            raise UsageError(f"--samples must be >= 1, got {s.samples}")
        if s.refine < 2:
            raise UsageError(f"--refine must be >= 2, got {s.refine}")
        if not (s.half_width > 0 and math.isfinite(s.half_width)):
            raise UsageError(f"--half-width must be a positive number, got {s.half_width}")
        if s.order not in STENCILS:
            raise UsageError(f"--order must be one of {sorted(STENCILS)}, got {s.order}")
        lo, hi = s.n_range
        if lo > hi:
            raise UsageError(f"--n-range needs lo <= hi, got {lo}:{hi}")
        known = tolerance_names()
        bad = sorted(set(self.tol) - known)
        if bad:
            raise UsageError(f"unknown tolerance name(s): {', '.join(bad)}")
        if self.json_path is not None:
            _check_file_writable(self.json_path)
        if self.csv_dir is not None:
            _check_dir_writable(self.csv_dir)


def _check_file_writable(path: Path) -> None:
    if path.is_dir():
        raise UsageError(f"--json {path} is a directory")
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise UsageError(f"--json: directory {parent} does not exist")
    if not os.access(parent, os.W_OK) or (path.exists() and not os.access(path, os.W_OK)):
        raise UsageError(f"--json: {path} is not writable")


def _check_dir_writable(path: Path) -> None:
    if path.exists() and not path.is_dir():
        raise UsageError(f"--csv-dir {path} exists and is not a directory")
    probe = path
    while not probe.exists():
        probe = probe.parent
    if not os.access(probe, os.W_OK):
        raise UsageError(f"--csv-dir: {path} is not writable")


# ------------------------------------------------------------- parsing


def _n_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected <lo>:<hi> integers, got {text!r}") from None
    return lo, hi


def _tol_item(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected <name>=<value>, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance value {value!r} is not a number") from None


def _env_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# flag dest -> (converter for the environment value, env suffix)
_ENV = {
    "samples": (int, "SAMPLES"),
    "seed": (int, "SEED"),
    "half_width": (float, "HALF_WIDTH"),
    "refine": (int, "REFINE"),
    "order": (int, "ORDER"),
    "n_range": (_n_range, "N_RANGE"),
    "json": (Path, "JSON"),
    "csv_dir": (Path, "CSV_DIR"),
    "parallel": (_env_bool, "PARALLEL"),
}


def _env_defaults(environ) -> dict:
    out = {}
    for dest, (conv, suffix) in _ENV.items():
        key = ENV_PREFIX + suffix
        if key in environ:
            try:
                out[dest] = conv(environ[key])
            except (ValueError, argparse.ArgumentTypeError) as err:
                raise UsageError(f"{key}={environ[key]!r}: {err}") from None
    key = ENV_PREFIX + "TOL"
    if environ.get(key):
        try:
            out["tol"] = [_tol_item(item) for item in environ[key].split(",") if item.strip()]
        except argparse.ArgumentTypeError as err:
            raise UsageError(f"{key}: {err}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    defaults = Settings()
    common = _Parser(add_help=False)
    common.add_argument("--samples", type=int, default=defaults.samples,
                        help="number of seeded sample points (default %(default)s)")
    common.add_argument("--seed", type=int, default=defaults.seed, help="random seed (default %(default)s)")
    common.add_argument("--half-width", dest="half_width", type=float, default=defaults.half_width,
                        help="kernel grid half-width L (default %(default)s)")
    common.add_argument("--refine", type=int, default=defaults.refine,
                        help="grid refinement k, h = delta/k (default %(default)s)")
    common.add_argument("--order", type=int, default=defaults.order,
                        help="Laplacian stencil order for the kernel grid (default %(default)s)")
    common.add_argument("--n-range", dest="n_range", type=_n_range, default=defaults.n_range,
                        metavar="LO:HI", help="lattice sites sampled (default -3:3)")
    common.add_argument("--tol", type=_tol_item, action="append", default=None, metavar="NAME=VALUE",
                        help="override the limit of check NAME (repeatable)")
    common.add_argument("--json", type=Path, default=None, metavar="PATH", help="write the JSON report here")
    common.add_argument("--csv-dir", dest="csv_dir", type=Path, default=None, metavar="DIR",
                        help="write grid artifacts as CSV files into DIR")
    common.add_argument("--parallel", action="store_true", default=False,
                        help="run the checks of a suite on a thread pool")
    common.add_argument("--quiet", action="store_true", help="print only the summary line")

    parser = _Parser(prog="todalump", description="Verification suites for the traveling Toda lump.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    verify = sub.add_parser("verify", parents=[common], help="run one analytic suite")
    verify.add_argument("suite", choices=("exact", "linearized", "fourier"))
    verify.add_argument("--suite", dest="suite_flag", choices=("exact", "linearized", "fourier"),
                        help="same as the positional argument; both must agree when given")
    sub.add_parser("kernel", parents=[common], help="discretized kernel of the linearized operator")
    sub.add_parser("report", parents=[common], help="run every suite")
    return parser


def parse_config(argv=None, environ=None) -> RunConfig:
    """Turn command-line arguments (and ``TODALUMP_*`` variables) into a validated config."""
    environ = os.environ if environ is None else environ
    parser = build_parser()
    env = _env_defaults(environ)
    for action in parser._subparsers._group_actions[0].choices.values():
        action.set_defaults(**env)
    args = parser.parse_args(argv)
    if args.command == "verify":
        if args.suite_flag is not None and args.suite_flag != args.suite:
            raise UsageError(f"--suite {args.suite_flag} contradicts positional suite {args.suite}")
        suites = [args.suite]
    elif args.command == "kernel":
        suites = ["kernel"]
    else:
        suites = list(SUITES)
    settings = Settings(seed=args.seed, samples=args.samples, half_width=args.half_width,
                        refine=args.refine, order=args.order, n_range=tuple(args.n_range))
    config = RunConfig(suites, settings, dict(args.tol or []), args.json, args.csv_dir,
                       args.parallel, args.quiet)
    config.validate()
    return config


# ------------------------------------------------------------- output


def _clean(value):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, Path):
        return str(value)
    return value


def versions() -> dict:
    return {"todalump": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "sympy": sympy.__version__, "mpmath": mpmath.__version__}


def emit_csv(records: list[CheckRecord], directory: Path) -> list[Path]:
    """Write every grid artifact of ``records`` as ``directory/<filename>``.

    First line is the header, floats carry 17 significant digits.
    Returns the written paths (empty when no check produced artifacts).
    """
    artifacts: list[Artifact] = [a for r in records for a in r.artifacts]
    if not artifacts:
        return []
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for art in artifacts:
        path = directory / art.filename
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(art.header)
            writer.writerows([f"{v:.17g}" for v in row] for row in np.asarray(art.rows, dtype=float))
        written.append(path)
    return written


def write_json_atomic(payload: dict, path: Path) -> None:
    """Write ``payload`` through a temporary file in the same directory and rename it into place."""
    text = json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"
    parent = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_line(suite: str, r: CheckRecord) -> str:
    value = "nan" if r.worst_residual is None or not math.isfinite(r.worst_residual) else f"{r.worst_residual:.3e}"
    return f"{r.status:4s} {suite}.{r.name:36s} {value} {r.relation} {r.limit:g}  [{r.location}]"


# ---------------------------------------------------------------- run


def run(config: RunConfig, out=None) -> dict:
    """Execute the configured suites and return the report as a dictionary."""
    out = sys.stdout if out is None else out
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    suites = []
    all_records: list[CheckRecord] = []
    for name in config.suites:
        t1 = time.perf_counter()
        records = run_suite(name, config.settings, config.tol, parallel=config.parallel)
        all_records.extend(records)
        status = "pass" if all(r.status == "pass" for r in records) else "fail"
        suites.append({"name": name, "status": status, "elapsed": time.perf_counter() - t1,
                       "checks": [r.as_dict() for r in records]})
        if not config.quiet:
            for r in records:
                print(_format_line(name, r), file=out)
    artifacts = [{"file": a.filename, "check": r.name, "header": a.header, "rows": int(len(a.rows)),
                  "meta": a.meta} for r in all_records for a in r.artifacts]
    csv_files = emit_csv(all_records, config.csv_dir) if config.csv_dir is not None else []
    failed = [r.name for r in all_records if r.status != "pass"]
    report = {
        "schema": SCHEMA,
        "status": "fail" if failed else "pass",
        "suites": suites,
        "config": {"suites": config.suites, **asdict(config.settings), "tol": config.tol,
                   "parallel": config.parallel},
        "versions": versions(),
        "artifacts": artifacts,
        "csv_files": [p.name for p in csv_files],
        "started_at": started,
        "elapsed": time.perf_counter() - t0,
    }
    if config.json_path is not None:
        write_json_atomic(report, config.json_path)
    total = len(all_records)
    print(f"{total - len(failed)}/{total} checks passed" + (f"; failed: {', '.join(failed)}" if failed else ""),
          file=out)
    return report


def main(argv=None) -> int:
    try:
        config = parse_config(argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    report = run(config)
    return EXIT_OK if report["status"] == "pass" else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
