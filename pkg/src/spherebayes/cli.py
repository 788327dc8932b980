"""Command line front end.

    spherebayes fit-spline  data.csv --k 2 --gcv --out fit.sba
    spherebayes fit-bayes   data.csv --k 4 --p 0.5 --out fit.sba
    spherebayes select-k    data.csv --k-min 1 --k 6 --out scores.csv
    spherebayes histospline dirs.csv --m 10 --k 4 --xi 1e-4 --out fit.sba
    spherebayes project     fit.sba --resolution 64 --pole south --out grid.csv
    spherebayes diagnose    --seed 0 --out report.jsonl
    spherebayes describe

Settings resolve as built-in defaults, then ``--config`` (``key = value``
lines), then explicit flags.  Every run prints one JSON record describing it
and appends the same record to ``<out>.jsonl`` when ``--out`` is given.
Exit status is 0 on success, 1 for bad input and 2 for numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import diagnostics, persistence
from .bayes import PriorSpec, fit_hierarchical
from .catalogue import CatalogueFormat, ingest
from .errors import ArchiveError
from .histospline import bin_directions, fit_histospline
from .kernels import KernelSpec
from .model_select import DEFAULT_P_GRID, bayes_factor_table, select_k
from .projection import emit_grid
from .spectral import BasisSpec, WeightScheme
from .spline import RegressionData, fit_spline, gcv_select_xi

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


@dataclass
class Settings:
    k: int = 2
    k_min: int = 1
    s: float = 2.0
    kernel: str = "full"
    xi: float = 1e-4
    gcv: bool = False
    p: float = 0.5
    p_grid: str = ",".join(str(p) for p in DEFAULT_P_GRID)
    b: float = 4.0
    c_exp: float = 1.0
    epsilon: float = 0.01
    retained_scale: float = 100.0
    variance: bool = False
    schwarz: bool = True
    m: int = 10
    nodes: int = 16
    bayes_centers: bool = False
    resolution: int = 64
    pole: str = "north"
    hemisphere: bool = False
    format: str = "angles"
    seed: int = 0
    rate: bool = False
    replicates: int = 20
    out: str = ""

    def prior(self, p: float | None = None) -> PriorSpec:
        return PriorSpec(
            self.p if p is None else p, self.b, self.c_exp, self.epsilon, self.retained_scale
        )


_FIELDS = {f.name: f for f in fields(Settings)}


def _coerce(name: str, raw):
    kind = type(getattr(Settings, name))
    if kind is bool and isinstance(raw, str):
        low = raw.strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
            raise ValueError(f"{name}: expected a boolean, got {raw!r}")
        return low in ("1", "true", "yes", "on")
    return kind(raw)


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys map to
    underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown setting {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve(args: argparse.Namespace) -> Settings:
    merged = {}
    if getattr(args, "config", None):
        merged.update(read_config(args.config))
    for name in _FIELDS:
        val = getattr(args, name, None)
        if val is not None:
            merged[name] = val
    return Settings(**merged)


# --------------------------------------------------------------------------
# parser


def _shared(p: argparse.ArgumentParser) -> None:
    # defaults stay None so that config values are not masked
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--k", type=int, help="truncation level K")
    p.add_argument("--s", type=float, help="smoothness order for the generic kernel")
    xi = p.add_mutually_exclusive_group()
    xi.add_argument("--xi", type=float, help="smoothing parameter")
    xi.add_argument("--gcv", action="store_const", const=True, help="choose xi by GCV")
    p.add_argument("--p", type=float, help="prior weight of the zonal branch")
    p.add_argument("--b", type=float, help="F-prior degrees of freedom, in (2, 4]")
    p.add_argument("--c-exp", dest="c_exp", type=float, help="tau^2 prior exponent")
    p.add_argument("--m", type=int, help="cells per side for the histospline")
    p.add_argument("--resolution", type=int, help="lattice resolution for projections")
    p.add_argument("--pole", choices=("north", "south"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="primary output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spherebayes", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def cmd(name, help_, data=True):
        p = sub.add_parser(name, help=help_)
        if data:
            p.add_argument("data", help="input CSV")
            p.add_argument("--format", choices=("angles", "vectors"))
        _shared(p)
        return p

    p = cmd("fit-spline", "penalized least-squares spline")
    p.add_argument("--kernel", choices=("full", "generic"))
    p.add_argument("--values", help="write theta,phi,y,fitted CSV here")

    p = cmd("fit-bayes", "adaptive hierarchical Bayes estimator")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--retained-scale", dest="retained_scale", type=float)
    p.add_argument("--variance", action="store_const", const=True)

    p = cmd("select-k", "Bayes factors and Schwarz criterion over K")
    p.add_argument("--k-min", dest="k_min", type=int)
    p.add_argument("--p-grid", dest="p_grid")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--retained-scale", dest="retained_scale", type=float)
    p.add_argument("--no-schwarz", dest="schwarz", action="store_const", const=False)

    p = cmd("histospline", "density estimate from binned directions")
    p.add_argument("--nodes", type=int)
    p.add_argument(
        "--bayes-centers", dest="bayes_centers", action="store_const", const=True,
        help="fit the Bayes estimator to cell-centre densities instead",
    )

    p = cmd("project", "Lambert equal-area grid of an archived fit", data=False)
    p.add_argument("archive")
    p.add_argument("--hemisphere", action="store_const", const=True)

    p = cmd("diagnose", "constants, zeta bound, limit checks and optional rate run", data=False)
    p.add_argument("--rate", action="store_const", const=True, help="also run the rate experiment")
    p.add_argument("--replicates", type=int)

    sub.add_parser("describe", help="print every setting with its default")
    return parser


# --------------------------------------------------------------------------
# commands


def _regression(settings: Settings, path) -> tuple[RegressionData, dict]:
    cat = ingest(path, CatalogueFormat(settings.format), values=True)
    report = {"lines": cat.report.lines, "accepted": cat.report.accepted,
              "rejected": cat.report.rejected}
    return RegressionData(cat.records, cat.values), report


def _need_out(settings: Settings) -> Path:
    if not settings.out:
        raise ValueError("--out is required for this command")
    return Path(settings.out)


def cmd_fit_spline(settings: Settings, args) -> dict:
    data, report = _regression(settings, args.data)
    if settings.kernel == "full":
        spec = BasisSpec(settings.k, weight_scheme=WeightScheme.IOTA)
        kern = KernelSpec.full(settings.k)
    else:
        spec = BasisSpec(settings.k, settings.s, WeightScheme.LAMBDA)
        kern = KernelSpec.generic(settings.k, settings.s)
    summary = {"ingest": report}
    xi = settings.xi
    if settings.gcv:
        res = gcv_select_xi(data, spec, kern)
        xi = res.xi
        summary["gcv_failures"] = len(res.failures)
    fit = fit_spline(data, spec, kern, xi)
    out = _need_out(settings)
    summary["digest"] = persistence.save(fit, out)
    summary.update(xi=xi, roughness=fit.roughness())
    if args.values:
        fitted = fit(data.points)
        _write_csv(args.values, "theta,phi,y,fitted",
                   np.column_stack([data.points, data.y, fitted]))
    return summary


def cmd_fit_bayes(settings: Settings, args) -> dict:
    data, report = _regression(settings, args.data)
    spec = BasisSpec(settings.k, weight_scheme=WeightScheme.IOTA)
    fit = fit_hierarchical(data, spec, settings.prior(), compute_variance=settings.variance)
    out = _need_out(settings)
    return {"ingest": report, "digest": persistence.save(fit, out), "pstar": fit.pstar,
            "log_marginal": fit.log_marginal}


def cmd_select_k(settings: Settings, args) -> dict:
    data, report = _regression(settings, args.data)
    p_grid = tuple(float(x) for x in settings.p_grid.split(","))
    scores = bayes_factor_table(
        data, range(settings.k_min, settings.k + 1), p_grid, settings.prior(),
        with_schwarz=settings.schwarz,
    )
    out = _need_out(settings)
    rows = np.array([[s.K, s.log_marginal, s.log_bayes_factor, s.schwarz, s.p_best] for s in scores])
    _write_csv(out, "K,log_marginal,log_bayes_factor,schwarz,p_best", rows)
    return {"ingest": report, "selected_k": select_k(scores)}


def cmd_histospline(settings: Settings, args) -> dict:
    cat = ingest(args.data, CatalogueFormat(settings.format))
    report = {"lines": cat.report.lines, "accepted": cat.report.accepted,
              "rejected": cat.report.rejected}
    grid = bin_directions(cat.records, settings.m)
    spec = BasisSpec(settings.k, weight_scheme=WeightScheme.IOTA)
    out = _need_out(settings)
    if settings.bayes_centers:
        data = RegressionData(grid.centers(), grid.densities.ravel())
        fit = fit_hierarchical(data, spec, settings.prior(), compute_variance=False)
        return {"ingest": report, "digest": persistence.save(fit, out), "pstar": fit.pstar}
    fit = fit_histospline(grid, spec, KernelSpec.full(settings.k), settings.xi, settings.nodes)
    return {"ingest": report, "digest": persistence.save(fit, out),
            "normalising_constant": fit.normalising_constant}


def cmd_project(settings: Settings, args) -> dict:
    fit = persistence.load(args.archive)
    out = _need_out(settings)
    grid = emit_grid(fit, settings.resolution, settings.pole, settings.hemisphere, out)
    return {"rows": int(grid.rows.shape[0]), "archive_digest": persistence.digest_of(args.archive)}


def cmd_diagnose(settings: Settings, args) -> dict:
    records = []
    W, phi = diagnostics.minimax_constants(2.0)
    records.append({"check": "minimax_constants", "s": 2.0, "W": W, "phi": phi,
                    "weyl_ratio_k1000": diagnostics.weyl_ratio(1000)})
    for s in (2.0, 3.0):
        z = diagnostics.zeta_check(s, rng=np.random.default_rng(settings.seed))
        records.append({"check": "zeta", **asdict(z), "value": z.value})
    lim = diagnostics.limit_suite(settings.seed)
    records.append({"check": "limits", **lim.to_dict()})
    if settings.rate:
        rep = diagnostics.rate_experiment(5.0, replicates=settings.replicates, seed=settings.seed)
        records.append({"check": "rate", **rep.to_dict(),
                        "passed": abs(rep.slope - rep.theoretical_slope) <= 0.15})
    if settings.out:
        with open(settings.out, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec, default=_jsonable) + "\n")
    passed = all(rec.get("passed", True) is not False for rec in records) and all(
        lim.passed.values()
    )
    return {"records": len(records), "all_passed": bool(passed)}


def cmd_describe(settings: Settings, args) -> dict:
    for f in fields(Settings):
        print(f"{f.name} = {_fmt_default(f.default)}")
    return {}


COMMANDS = {
    "fit-spline": cmd_fit_spline,
    "fit-bayes": cmd_fit_bayes,
    "select-k": cmd_select_k,
    "histospline": cmd_histospline,
    "project": cmd_project,
    "diagnose": cmd_diagnose,
    "describe": cmd_describe,
}


# --------------------------------------------------------------------------
# plumbing


def _fmt_default(v) -> str:
    return str(v).lower() if isinstance(v, bool) else str(v)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if hasattr(x, "value"):
        return x.value
    return str(x)


def _write_csv(path, header: str, rows: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in np.atleast_2d(rows):
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


def _classify(exc: BaseException) -> int:
    if isinstance(exc, np.linalg.LinAlgError):
        return EXIT_NUMERIC
    if isinstance(exc, (ArithmeticError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ValueError, OSError, ArchiveError, KeyError)):
        return EXIT_INPUT
    raise exc


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    record = {"command": args.command}
    status = EXIT_OK
    try:
        settings = resolve(args)
        record["settings"] = asdict(settings)
        result = COMMANDS[args.command](settings, args)
        record.update(result)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit status
        status = _classify(exc)
        record["error"] = f"{type(exc).__name__}: {exc}"
        print(f"spherebayes: {record['error']}", file=sys.stderr)
    record["status"] = status
    record["seconds"] = round(time.time() - started, 3)
    if args.command != "describe":
        line = json.dumps(record, default=_jsonable, allow_nan=True)
        print(line)
        out = record.get("settings", {}).get("out")
        if out:
            with open(f"{out}.jsonl", "a") as fh:
                fh.write(line + "\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
