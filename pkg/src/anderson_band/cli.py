"""Command line entry point: ``anderson-band <command> [flags]``.

Commands: spectrum, scan, validate, eigencurves, certify, derivs.  Every
command builds a :class:`RunConfig` from an optional JSON config file
overridden by flags, returns ``(status, payload)`` and the payload is
written as JSON (default) or CSV.  See docs/output_schema.md for the
frozen field names.

Exit codes: 0 ok, 1 validation failure, 2 usage error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import bandmodel, certify, oracle
from .bandmodel import ModelParams, SpectrumResult
from .errors import AndersonBandError, BudgetError, InvalidArgumentError
from .mat2 import EIGVEC_IDS, PARAM_IDS, eigen_slopes, eigvec_partials, is_hyperbolic

SCHEMA_VERSION = "1.0"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3

FD_STEP = 1e-6
DERIV_RTOL = 1e-4
SINGULAR_GAP = 0.1
# written in place of an eigendirection slope when the product is not hyperbolic
NOT_HYPERBOLIC = "nh"


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = field(default_factory=lambda: ModelParams(0.0, 0.0))
    dist: Optional[tuple[tuple[float, float], ...]] = None
    e_min: Optional[float] = None
    e_max: Optional[float] = None
    n_points: int = 801
    budget: int = 6
    n_sites: int = 1000
    seeds: tuple[int, ...] = tuple(range(20))
    dilation: float = 0.1
    format: str = "json"
    out: Optional[str] = None
    bands: Optional[str] = None
    energy: Optional[float] = None
    workers: Optional[int] = None

    def __post_init__(self):
        if self.format not in ("json", "csv"):
            raise InvalidArgumentError(f"unknown format {self.format!r}")
        if self.n_points < 2:
            raise InvalidArgumentError("--n-points must be >= 2")
        if self.e_min is not None and self.e_max is not None and not self.e_min < self.e_max:
            raise InvalidArgumentError(f"empty energy window [{self.e_min}, {self.e_max}]")
        if self.budget < 1:
            raise InvalidArgumentError("--budget must be >= 1")
        if self.dilation < 0:
            raise InvalidArgumentError("--dilation must be >= 0")
        if self.dist is not None and len(self.dist) < 1:
            raise InvalidArgumentError("--dist needs at least one (lambda, c) pair")

    @property
    def distributions(self) -> tuple[tuple[float, float], ...]:
        if self.dist is not None:
            return self.dist
        p = self.params
        return ((p.lambda0, p.c0), (p.lambda1, p.c1))

    def window(self) -> tuple[float, float]:
        """Energy window; defaults to the potential range padded by 3."""
        vals = [c + lam * x for lam, c in self.distributions for x in (0, 1)]
        lo = self.e_min if self.e_min is not None else min(vals) - 3.0
        hi = self.e_max if self.e_max is not None else max(vals) + 3.0
        if not lo < hi:
            raise InvalidArgumentError(f"empty energy window [{lo}, {hi}]")
        return lo, hi

    def grid(self) -> np.ndarray:
        lo, hi = self.window()
        return np.linspace(lo, hi, self.n_points)


# --------------------------------------------------------------------------
# Serialization helpers
# --------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _csv_cell(v):
    v = _jsonable(v)
    if v is None:
        return ""
    if isinstance(v, list):
        return " ".join(str(i) for i in v)
    return v


def render(payload: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(payload), indent=2, sort_keys=False) + "\n"
    rows = payload.get("table", [])
    buf = io.StringIO()
    cols = payload.get("columns") or (list(rows[0]) if rows else [])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_csv_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def _params_dict(p: ModelParams) -> dict:
    return {"lambda0": p.lambda0, "lambda1": p.lambda1, "c0": p.c0, "c1": p.c1, "p0": p.p0, "p1": p.p1}


def _canonical_dict(cp: bandmodel.CanonicalParams) -> dict:
    return {
        "lambda0": cp.lambda0,
        "lambda1": cp.lambda1,
        "c1": cp.c1,
        "shift": cp.shift,
        "parity_swapped": cp.parity_swapped,
    }


def _header(command: str, cfg: RunConfig) -> dict:
    head = {"schema_version": SCHEMA_VERSION, "command": command, "params": _params_dict(cfg.params)}
    if cfg.dist is not None:
        head["dist"] = [list(d) for d in cfg.dist]
    return head


def _m2_params(cfg: RunConfig) -> Optional[ModelParams]:
    """Model parameters when the run is a period-2 model, else None."""
    if cfg.dist is None:
        return cfg.params
    if len(cfg.dist) == 2:
        (l0, c0), (l1, c1) = cfg.dist
        return ModelParams(l0, l1, c0, c1, cfg.params.p0, cfg.params.p1)
    return None


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig) -> tuple[int, dict]:
    p = _m2_params(cfg)
    if p is None:
        raise InvalidArgumentError("spectrum needs a period-2 model (use --l0/--l1/--c0/--c1)")
    cp = bandmodel.canonicalize(p)
    res = bandmodel.spectrum(p)
    payload = _header("spectrum", cfg)
    payload.update(
        canonical=_canonical_dict(cp),
        ordering=bandmodel.ordering_case(cp).name,
        **res.to_dict(),
        columns=["kind", "lo", "hi"],
        table=[{"kind": "band", "lo": lo, "hi": hi} for lo, hi in res.bands]
        + [{"kind": "gap", "lo": lo, "hi": hi} for lo, hi in res.gaps],
    )
    return EXIT_OK, payload


def cmd_scan(cfg: RunConfig) -> tuple[int, dict]:
    lo, hi = cfg.window()
    dists = cfg.distributions
    results = certify.scan_energies(dists, (lo, hi, cfg.n_points), cfg.budget, workers=cfg.workers)
    p2 = _m2_params(cfg) if len(dists) == 2 else None
    gaps = bandmodel.spectrum(p2).gaps if p2 is not None else None
    step = (hi - lo) / (cfg.n_points - 1)
    cols = ["E", "verdict", "margin", "growth_rate", "witness"]
    if gaps is not None:
        cols += ["closed_form_gap", "agree"]
    table = []
    n_dis = n_dis_far = n_und = 0
    for E, rep in results:
        row = {
            "E": E,
            "verdict": rep.verdict.value,
            "margin": rep.margin,
            "growth_rate": rep.growth_rate,
            "witness": None if rep.witness_word is None else list(rep.witness_word),
        }
        if rep.verdict is certify.Verdict.UNDETERMINED:
            n_und += 1
        if gaps is not None:
            in_gap = bool(bandmodel.gap_membership(gaps, E))
            row["closed_form_gap"] = in_gap
            agree = None
            if rep.verdict is not certify.Verdict.UNDETERMINED:
                agree = (rep.verdict is certify.Verdict.CERTIFIED_UH) == in_gap
                if not agree:
                    n_dis += 1
                    if _edge_distance(gaps, E) > step:
                        n_dis_far += 1
            row["agree"] = agree
        table.append(row)
    payload = _header("scan", cfg)
    payload.update(
        grid={"e_min": lo, "e_max": hi, "n_points": cfg.n_points},
        budget=cfg.budget,
        period=len(dists),
        summary={
            "n_undetermined": n_und,
            "n_disagree": n_dis if gaps is not None else None,
            "n_disagree_outside_endpoint_step": n_dis_far if gaps is not None else None,
        },
        columns=cols,
        table=table,
    )
    return EXIT_OK, payload


def _edge_distance(gaps, E: float) -> float:
    ends = [x for g in gaps for x in g if math.isfinite(x)]
    return min((abs(E - x) for x in ends), default=math.inf)


def _load_bands(path: str) -> SpectrumResult:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise InvalidArgumentError(f"cannot read bands file {path!r}: {exc}")
    if isinstance(data, list):
        data = {"bands": data}
    try:
        return SpectrumResult.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"malformed bands file {path!r}: {exc}")


def cmd_validate(cfg: RunConfig) -> tuple[int, dict]:
    if cfg.n_sites < 10:
        raise InvalidArgumentError("--n-sites must be >= 10")
    p = _m2_params(cfg)
    if p is None:
        raise InvalidArgumentError("validate needs a period-2 model")
    spec = _load_bands(cfg.bands) if cfg.bands else bandmodel.spectrum(p)

    def one(seed):
        eigs = oracle.finite_volume_eigenvalues(oracle.sample_potential(p, cfg.n_sites, seed))
        bad, cov = oracle.containment_report(eigs, spec, cfg.dilation)
        worst = max((spec.distance(v) for v in bad), default=0.0)
        return {"seed": seed, "n_eigenvalues": len(eigs), "n_violations": len(bad),
                "max_excursion": worst, "coverage": cov}

    workers = cfg.workers or certify.default_workers()
    seeds = sorted(cfg.seeds)
    if workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            table = list(pool.map(one, seeds))
    else:
        table = [one(s) for s in seeds]
    total = [sum(r["coverage"][i] for r in table) for i in range(len(spec.bands))]
    uncovered = [list(b) for b, c in zip(spec.bands, total) if c == 0]
    n_bad = sum(r["n_violations"] for r in table)
    payload = _header("validate", cfg)
    payload.update(
        bands=[list(b) for b in spec.bands],
        n_sites=cfg.n_sites,
        dilation=cfg.dilation,
        summary={"n_violations": n_bad, "coverage": total, "uncovered_bands": uncovered},
        columns=["seed", "n_eigenvalues", "n_violations", "max_excursion", "coverage"],
        table=table,
    )
    return (EXIT_VALIDATION if n_bad else EXIT_OK), payload


def cmd_eigencurves(cfg: RunConfig) -> tuple[int, dict]:
    p = _m2_params(cfg)
    if p is None:
        raise InvalidArgumentError("eigencurves needs a period-2 model")
    cp = bandmodel.canonicalize(p)
    ids = [f"u{i}" for i in range(1, 5)] + [f"s{i}" for i in range(1, 5)]
    table = []
    for E in cfg.grid():
        Ec = float(E) - cp.shift
        row = {"E": float(E)}
        mats = bandmodel.quad_products(cp, Ec)
        for i, M in enumerate(mats, 1):
            if is_hyperbolic(M):
                row[f"u{i}"], row[f"s{i}"] = eigen_slopes(M)
            else:
                row[f"u{i}"] = row[f"s{i}"] = NOT_HYPERBOLIC
        uh = all(is_hyperbolic(M) for M in mats)
        row["in_gap"] = uh
        row["scenario"] = bandmodel.scenario_label(cp, Ec) if uh else None
        table.append(row)
    payload = _header("eigencurves", cfg)
    payload.update(
        canonical=_canonical_dict(cp),
        ordering=bandmodel.ordering_case(cp).name,
        columns=["E", *ids, "in_gap", "scenario"],
        table=table,
    )
    return EXIT_OK, payload


def cmd_certify(cfg: RunConfig) -> tuple[int, dict]:
    if cfg.energy is None:
        raise InvalidArgumentError("certify needs --energy")
    E = float(cfg.energy)
    p = _m2_params(cfg) if cfg.dist is None else None
    hint = None
    if p is not None:
        cp = bandmodel.canonicalize(p)
        Ec = E - cp.shift
        fam = certify.MatrixFamily.from_quad(cp, Ec)
        if bandmodel.uh_at_energy(cp, Ec):
            hint = certify.principal_cone(cp, Ec)
    else:
        fam = certify.product_family(cfg.distributions, E)
    rep = certify.certify_family(fam, hint, cfg.budget)
    payload = _header("certify", cfg)
    payload.update(energy=E, family_size=len(fam.deduplicated()), report=rep.to_dict())
    payload["columns"] = ["E", "verdict", "margin", "growth_rate", "witness", "budget_used"]
    payload["table"] = [{
        "E": E,
        "verdict": rep.verdict.value,
        "margin": rep.margin,
        "growth_rate": rep.growth_rate,
        "witness": None if rep.witness_word is None else list(rep.witness_word),
        "budget_used": rep.budget_used,
    }]
    return EXIT_OK, payload


def _slope(cp: bandmodel.CanonicalParams, which: str, E: float) -> float:
    M = bandmodel.quad_products(cp, E)[int(which[1]) - 1]
    u, s = eigen_slopes(M)
    return u if which[0] == "u" else s


def _bumped(cp: bandmodel.CanonicalParams, wrt: str, h: float) -> bandmodel.CanonicalParams:
    # a central difference at lambda = 0 steps below zero, so skip the >= 0 check
    vals = dict(lambda0=cp.lambda0, lambda1=cp.lambda1, c1=cp.c1, shift=0.0, parity_swapped=False)
    vals[wrt] += h
    obj = object.__new__(bandmodel.CanonicalParams)
    for k, v in vals.items():
        object.__setattr__(obj, k, v)
    return obj


def finite_difference(cp: bandmodel.CanonicalParams, which: str, wrt: str, E: float, h: float = FD_STEP) -> float:
    """Central difference of an eigendirection slope, in canonical coordinates."""
    return (_slope(_bumped(cp, wrt, h), which, E) - _slope(_bumped(cp, wrt, -h), which, E)) / (2.0 * h)


def _rel_error(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def cmd_derivs(cfg: RunConfig) -> tuple[int, dict]:
    p = _m2_params(cfg)
    if p is None:
        raise InvalidArgumentError("derivs needs a period-2 model")
    cp = bandmodel.canonicalize(p)
    energies = [float(cfg.energy)] if cfg.energy is not None else [float(E) for E in cfg.grid()]
    table = []
    worst = 0.0
    for E in energies:
        Ec = E - cp.shift
        mats = bandmodel.quad_products(cp, Ec)
        for which in EIGVEC_IDS:
            idx = int(which[1])
            for wrt in PARAM_IDS:
                row = {"E": E, "entry": which, "wrt": wrt, "closed_form": None,
                       "finite_difference": None, "rel_error": None, "note": None}
                if min(abs(Ec - cp.c1), abs(Ec - cp.c1 - cp.lambda1)) <= SINGULAR_GAP:
                    row["note"] = "skipped: singular slope (E within 0.1 of an odd potential value)"
                elif not is_hyperbolic(mats[idx - 1]):
                    row["note"] = f"skipped: A_{idx} not hyperbolic"
                else:
                    cf = eigvec_partials(which, wrt, Ec, cp)
                    fd = finite_difference(cp, which, wrt, Ec)
                    err = _rel_error(cf, fd)
                    worst = max(worst, err)
                    row.update(closed_form=cf, finite_difference=fd, rel_error=err)
                table.append(row)
    payload = _header("derivs", cfg)
    payload.update(
        canonical=_canonical_dict(cp),
        fd_step=FD_STEP,
        summary={"max_rel_error": worst, "tolerance": DERIV_RTOL},
        columns=["E", "entry", "wrt", "closed_form", "finite_difference", "rel_error", "note"],
        table=table,
    )
    return (EXIT_VALIDATION if worst > DERIV_RTOL else EXIT_OK), payload


COMMANDS = {
    "spectrum": cmd_spectrum,
    "scan": cmd_scan,
    "validate": cmd_validate,
    "eigencurves": cmd_eigencurves,
    "certify": cmd_certify,
    "derivs": cmd_derivs,
}


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------

def parse_seeds(spec) -> tuple[int, ...]:
    """``"0-19"``, ``"1,4,9"``, a single integer, or a list of integers."""
    if isinstance(spec, int):
        return (spec,)
    if isinstance(spec, (list, tuple)):
        return tuple(int(s) for s in spec)
    out: list[int] = []
    try:
        for part in str(spec).split(","):
            part = part.strip()
            if "-" in part:
                a, b = part.split("-", 1)
                out.extend(range(int(a), int(b) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise InvalidArgumentError(f"cannot parse seeds {spec!r}")
    if not out or any(s < 0 for s in out):
        raise InvalidArgumentError(f"seeds must be nonnegative integers, got {spec!r}")
    return tuple(out)


def parse_dist(spec) -> tuple[tuple[float, float], ...]:
    """``"l:c,l:c,..."`` or a list of ``[l, c]`` pairs."""
    try:
        if isinstance(spec, (list, tuple)):
            pairs = [(float(a), float(b)) for a, b in spec]
        else:
            pairs = []
            for part in str(spec).split(","):
                a, b = part.split(":")
                pairs.append((float(a), float(b)))
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"cannot parse distribution list {spec!r} (expected l:c,l:c,...)")
    if not all(math.isfinite(x) for pair in pairs for x in pair):
        raise InvalidArgumentError("distribution entries must be finite")
    return tuple(pairs)


_FLOAT_KEYS = ("l0", "l1", "c0", "c1", "p0", "p1", "e_min", "e_max", "dilation", "energy")
_INT_KEYS = ("n_points", "budget", "n_sites", "workers")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    for k in ("l0", "l1", "c0", "c1", "p0", "p1"):
        g.add_argument(f"--{k}", type=float, default=None)
    g.add_argument("--dist", default=None, help="general period: l:c,l:c,... (overrides --l0.. for scan/certify)")
    g = common.add_argument_group("run")
    g.add_argument("--e-min", type=float, default=None)
    g.add_argument("--e-max", type=float, default=None)
    g.add_argument("--n-points", type=int, default=None)
    g.add_argument("--budget", type=int, default=None, help="max word length")
    g.add_argument("--n-sites", type=int, default=None)
    g.add_argument("--seeds", default=None, help="e.g. 0-19 or 1,2,3")
    g.add_argument("--dilation", type=float, default=None)
    g.add_argument("--energy", type=float, default=None)
    g.add_argument("--bands", default=None, help="JSON bands file for validate")
    g.add_argument("--workers", type=int, default=None)
    g.add_argument("--format", choices=("json", "csv"), default=None)
    g.add_argument("--out", default=None)
    g.add_argument("--config", default=None, help="JSON file with the same keys as the flags")

    ap = argparse.ArgumentParser(prog="anderson-band", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    merged: dict = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise InvalidArgumentError(f"cannot read config {ns.config!r}: {exc}")
        if not isinstance(data, dict):
            raise InvalidArgumentError("config file must hold a JSON object")
        merged.update({k.replace("-", "_"): v for k, v in data.items()})
    for k, v in vars(ns).items():
        if k not in ("command", "config") and v is not None:
            merged[k] = v
    known = set(_FLOAT_KEYS) | set(_INT_KEYS) | {"seeds", "dist", "format", "out", "bands"}
    unknown = set(merged) - known
    if unknown:
        raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
    try:
        for k in _FLOAT_KEYS:
            if k in merged:
                merged[k] = float(merged[k])
        for k in _INT_KEYS:
            if k in merged:
                merged[k] = int(merged[k])
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(str(exc))
    params = ModelParams(
        merged.pop("l0", 0.0), merged.pop("l1", 0.0), merged.pop("c0", 0.0), merged.pop("c1", 0.0),
        merged.pop("p0", 0.5), merged.pop("p1", 0.5),
    )
    if "seeds" in merged:
        merged["seeds"] = parse_seeds(merged["seeds"])
    if "dist" in merged:
        merged["dist"] = parse_dist(merged["dist"])
    return RunConfig(params=params, **merged)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
        status, payload = COMMANDS[ns.command](cfg)
        text = render(payload, cfg.format)
    except BudgetError as exc:
        print(f"error: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InvalidArgumentError, AndersonBandError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
