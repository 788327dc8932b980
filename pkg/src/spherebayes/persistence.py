"""Line-oriented text archives for fitted models.

Layout (see docs/archive_format.md)::

    spherebayes-archive <version>
    kind <SPLINE|BAYES|HISTOSPLINE>
    digest sha256:<hex of everything after this line>
    <key> <value>                      scalars
    vector <name> <length>             followed by one number per line
    matrix <name> <rows> <cols>        followed by rows of space-separated numbers
    end

Numbers are written with 17 significant digits, so floats round-trip exactly.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .bayes import BayesFit, PriorSpec
from .errors import ArchiveError, SchemaVersionError
from .histospline import HistosplineFit
from .kernels import KernelBranch, KernelSpec
from .spectral import BasisSpec, WeightScheme
from .spline import SplineFit

SCHEMA_VERSION = 1
MAGIC = "spherebayes-archive"
KINDS = ("SPLINE", "BAYES", "HISTOSPLINE")


def _num(x) -> str:
    return format(float(x), ".17g")


class _Writer:
    def __init__(self):
        self.lines: list[str] = []

    def scalar(self, key, value):
        if isinstance(value, float):
            value = _num(value)
        self.lines.append(f"{key} {value}")

    def vector(self, name, v):
        v = np.asarray(v, dtype=float).ravel()
        self.lines.append(f"vector {name} {v.size}")
        self.lines.extend(_num(x) for x in v)

    def matrix(self, name, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        self.lines.append(f"matrix {name} {M.shape[0]} {M.shape[1]}")
        self.lines.extend(" ".join(_num(x) for x in row) for row in M)


def _basis_fields(w: _Writer, spec: BasisSpec):
    w.scalar("K", spec.K)
    w.scalar("s", float(spec.s))
    w.scalar("weight_scheme", spec.weight_scheme.value)


def _kernel_fields(w: _Writer, kernel: KernelSpec):
    w.scalar("branch", kernel.branch.value)
    w.scalar("series_tolerance", float(kernel.series_tolerance))
    w.scalar("max_terms", kernel.max_terms)


def _body(fit) -> tuple[str, list[str]]:
    w = _Writer()
    if isinstance(fit, SplineFit):
        kind = "SPLINE"
        _basis_fields(w, fit.spec)
        _kernel_fields(w, fit.kernel)
        w.scalar("xi", float(fit.xi))
        w.vector("c", fit.c)
        w.vector("d", fit.d)
        w.matrix("points", fit.points)
    elif isinstance(fit, BayesFit):
        kind = "BAYES"
        _basis_fields(w, fit.spec)
        pr = fit.prior
        for key in ("p", "b", "c_exp", "epsilon", "retained_scale", "series_tolerance"):
            w.scalar(key, float(getattr(pr, key)))
        w.scalar("pstar", float(fit.pstar))
        w.scalar("log_m0", float(fit.log_m0))
        w.scalar("log_m1", float(fit.log_m1))
        if pr.beta0 is not None:
            w.vector("beta0", pr.beta0)
        if pr.beta1 is not None:
            w.vector("beta1", pr.beta1)
        w.vector("gamma0", fit.gamma0)
        w.vector("gamma1", fit.gamma1)
        if fit.variance is not None:
            w.matrix("variance", fit.variance)
        w.matrix("points", fit.points)
    elif isinstance(fit, HistosplineFit):
        kind = "HISTOSPLINE"
        _basis_fields(w, fit.spec)
        _kernel_fields(w, fit.kernel)
        w.scalar("xi", float(fit.xi))
        w.scalar("m", fit.m)
        w.scalar("nodes", fit.nodes)
        w.vector("c_check", fit.c_check)
        w.vector("d_check", fit.d_check)
    else:
        raise TypeError(f"cannot archive {type(fit).__name__}")
    w.lines.append("end")
    return kind, w.lines


def dumps(fit) -> str:
    kind, lines = _body(fit)
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode()).hexdigest()
    return f"{MAGIC} {SCHEMA_VERSION}\nkind {kind}\ndigest sha256:{digest}\n" + body


def save(fit, path) -> str:
    """Write the archive and return its sha256 digest."""
    text = dumps(fit)
    Path(path).write_text(text)
    return text.splitlines()[2].split(":", 1)[1]


def _parse(text: str):
    lines = text.split("\n")
    if len(lines) < 4:
        raise ArchiveError("archive is truncated")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise ArchiveError("not a model archive")
    try:
        version = int(head[1])
    except ValueError:
        raise ArchiveError("unreadable schema version") from None
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"archive schema {version}, this build reads {SCHEMA_VERSION}")
    kind_line = lines[1].split()
    if len(kind_line) != 2 or kind_line[0] != "kind":
        raise ArchiveError("missing kind line")
    kind = kind_line[1]
    if kind not in KINDS:
        raise ArchiveError(f"unknown fit kind {kind!r}")
    if not lines[2].startswith("digest sha256:"):
        raise ArchiveError("missing digest line")
    digest = lines[2].split(":", 1)[1].strip()
    body = "\n".join(lines[3:])
    if not body.rstrip("\n").endswith("end"):
        raise ArchiveError("archive is truncated (no end marker)")
    if hashlib.sha256(body.encode()).hexdigest() != digest:
        raise ArchiveError("digest does not match archive content")

    scalars, arrays = {}, {}
    it = iter(lines[3:])
    try:
        for line in it:
            if not line or line == "end":
                continue
            parts = line.split()
            if parts[0] == "vector":
                name, size = parts[1], int(parts[2])
                arrays[name] = np.array([float(next(it)) for _ in range(size)])
            elif parts[0] == "matrix":
                name, rows, cols = parts[1], int(parts[2]), int(parts[3])
                M = np.array([[float(x) for x in next(it).split()] for _ in range(rows)])
                arrays[name] = M.reshape(rows, cols)
            else:
                scalars[parts[0]] = parts[1]
    except (StopIteration, ValueError, IndexError) as exc:
        raise ArchiveError(f"malformed archive body: {exc}") from None
    return kind, scalars, arrays, digest


def _basis(sc) -> BasisSpec:
    return BasisSpec(int(sc["K"]), float(sc["s"]), WeightScheme(sc["weight_scheme"]))


def _kernel(sc, spec) -> KernelSpec:
    return KernelSpec(
        spec, KernelBranch(sc["branch"]), float(sc["series_tolerance"]), int(sc["max_terms"])
    )


def loads(text: str):
    kind, sc, ar, _ = _parse(text)
    try:
        spec = _basis(sc)
        if kind == "SPLINE":
            return SplineFit(spec, _kernel(sc, spec), float(sc["xi"]), ar["c"], ar["d"], ar["points"])
        if kind == "HISTOSPLINE":
            return HistosplineFit(
                spec, _kernel(sc, spec), float(sc["xi"]), int(sc["m"]),
                ar["c_check"], ar["d_check"], int(sc["nodes"]),
            )
        prior = PriorSpec(
            float(sc["p"]), float(sc["b"]), float(sc["c_exp"]), float(sc["epsilon"]),
            float(sc["retained_scale"]), ar.get("beta0"), ar.get("beta1"),
            float(sc["series_tolerance"]),
        )
        return BayesFit(
            spec, prior, ar["gamma0"], ar["gamma1"], float(sc["pstar"]),
            float(sc["log_m0"]), float(sc["log_m1"]), ar.get("variance"), ar["points"],
        )
    except KeyError as exc:
        raise ArchiveError(f"archive lacks field {exc}") from None


def load(path):
    return loads(Path(path).read_text())


def digest_of(path) -> str:
    return _parse(Path(path).read_text())[3]
