"""Command-line entry point: generation, bounds, profiles, verification,
classification, embeddings and hyperbolicity estimates."""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything needed to reproduce an output; written at the top of every file."""

    command: str
    source: dict = field(default_factory=dict)
    p: float | None = None
    alpha: float | None = None
    k_rule: str | None = None
    strategy: str | None = None
    seed: int = 0
    budgets: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def header(self) -> dict:
        return {"run_config": asdict(self), "tool_version": __version__}


def default_seed() -> int:
    raw = os.environ.get("POINCARELAB_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"POINCARELAB_SEED must be an integer, got {raw!r}") from None


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def dump_json(cfg: RunConfig, result: Any) -> str:
    """Header first, then the result; keys inside the result are sorted."""
    head = json.dumps(cfg.header(), sort_keys=True, default=_json_default)
    body = json.dumps(result, sort_keys=True, default=_json_default)
    return "{" + head[1:-1] + ', "result": ' + body + "}\n"


def emit(text: str, out: str | None) -> None:
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc}") from None
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# family arguments

FAMILY_PARAMS = {
    "tree": ("degree", "depth"),
    "dl": ("q1", "q2", "radius"),
    "dl_gamma_k": ("k",),
    "zd_box": ("d", "side"),
    "heisenberg_ball": ("radius",),
    "sol_lattice_ball": ("radius",),
    "cone": ("space", "levels"),
    "product": ("left", "right"),
}


def _add_family_args(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--family", required=True, choices=sorted(FAMILY_PARAMS))
    for name in ("degree", "depth", "q1", "q2", "radius", "k", "d", "side", "levels"):
        ap.add_argument(f"--{name}", type=int)
    ap.add_argument("--space", choices=["interval", "circle", "cantor_middle_thirds", "square"])
    ap.add_argument("--left", help="left factor as JSON, e.g. '[\"tree\", {\"degree\": 3, \"depth\": 2}]'")
    ap.add_argument("--right", help="right factor as JSON")


def _family_spec(args, omit: Sequence[str] = ()):
    from .graphkit import FamilySpec

    params = {}
    for name in FAMILY_PARAMS[args.family]:
        if name in omit:
            continue
        val = getattr(args, name, None)
        if val is None:
            continue
        if name in ("left", "right"):
            try:
                fam, kw = json.loads(val)
                val = (str(fam), dict(kw))
            except (ValueError, TypeError):
                raise UsageError(f"--{name} must be JSON [family, params]") from None
        params[name] = val
    if args.family == "product" and not {"left", "right"} <= set(params):
        raise UsageError("product needs --left and --right")
    return FamilySpec.of(args.family, **params)


def _build(spec):
    from .graphkit import build_family

    try:
        return build_family(spec)
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid family spec: {exc}") from None


def _read_graph(path: str):
    from .graphkit import GraphFormatError, read_graph

    try:
        return read_graph(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    except GraphFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(Fraction(x)) for x in text.split(",") if x.strip()]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


# ---------------------------------------------------------------------------
# commands

def cmd_gen(args) -> int:
    spec = _family_spec(args)
    g = _build(spec)
    cfg = RunConfig("gen", spec.to_json(), seed=args.seed, outputs={"graph": args.out})
    head = json.dumps(cfg.header(), sort_keys=True, default=_json_default)
    body = json.dumps(g.to_json(), sort_keys=True)
    emit("{" + head[1:-1] + ", " + body[1:-1] + "}\n", args.out)
    return EXIT_OK


def cmd_hp(args) -> int:
    from .poincare import HpConfig, hp_bounds

    g = _read_graph(args.graph)
    cfg = HpConfig(seed=args.seed, restarts=args.restarts, routing_rounds=args.routing_rounds)
    b = hp_bounds(g, args.p, cfg)
    rc = RunConfig("hp", {"graph": args.graph}, p=args.p, seed=args.seed,
                   budgets={"restarts": args.restarts, "routing_rounds": args.routing_rounds})
    emit(dump_json(rc, {"n": g.n, **b.to_json()}), args.out)
    return EXIT_OK


def cmd_capacity(args) -> int:
    from .poincare import CapConfig, capacity_bounds

    g = _read_graph(args.graph)
    try:
        b = capacity_bounds(g, None, args.p, args.alpha, CapConfig(seed=args.seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rc = RunConfig("capacity", {"graph": args.graph}, p=args.p, alpha=args.alpha, seed=args.seed)
    emit(dump_json(rc, {"n": g.n, **b.to_json()}), args.out)
    return EXIT_OK


def _prediction_for(args, p: float):
    from .lieclass import CATALOG

    if not args.catalog:
        return None
    if args.catalog not in CATALOG:
        raise UsageError(f"unknown catalog key {args.catalog!r}")
    return CATALOG[args.catalog].predicted(p)


def cmd_profile(args) -> int:
    from .profiles import points_to_csv, profile_points

    spec = _family_spec(args, omit=("depth", "radius", "side", "levels", "k"))
    sizes = _ints(args.sizes)
    try:
        pts = profile_points(spec, args.p, sizes, args.strategy, jobs=args.jobs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rc = RunConfig("profile", spec.to_json(), p=args.p, strategy=args.strategy, seed=args.seed,
                   budgets={"sizes": sizes}, outputs={"csv": args.out, "fit": args.fit_out})
    fit, report = _fit_and_compare(pts, args, args.p)
    header = json.dumps(rc.header(), sort_keys=True, default=_json_default)
    emit(points_to_csv(pts, header, fit), args.out)
    if args.fit_out:
        Path(args.fit_out).write_text(dump_json(rc, report), encoding="utf-8")
    elif args.out:
        sys.stdout.write(dump_json(rc, report))
    return EXIT_OK if report.get("verdict", "pass") == "pass" else EXIT_FAIL


def _fit_and_compare(pts, args, p):
    from .profiles import compare_with_prediction, fit_growth

    try:
        fit = fit_growth(pts, endpoint=args.endpoint)
    except ValueError as exc:
        return None, {"fit": None, "error": str(exc), "verdict": "no_fit"}
    report: dict[str, Any] = {"fit": fit.to_json()}
    pred = _prediction_for(args, p)
    if pred is not None:
        cmp = compare_with_prediction(fit, pred, tol=args.tolerance)
        report["comparison"] = cmp
        report["verdict"] = "pass" if cmp["pass"] else "fail"
    return fit, report


def cmd_xi(args) -> int:
    from .profiles import points_to_csv, xi_points

    spec = _family_spec(args, omit=("depth", "radius", "side", "levels", "k"))
    sizes = _ints(args.sizes)
    try:
        pts = xi_points(spec, args.p, args.alpha, args.k_rule, sizes, args.strategy, jobs=args.jobs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rc = RunConfig("xi", spec.to_json(), p=args.p, alpha=args.alpha, k_rule=args.k_rule,
                   strategy=args.strategy, seed=args.seed, budgets={"sizes": sizes}, outputs={"csv": args.out})
    header = json.dumps(rc.header(), sort_keys=True, default=_json_default)
    emit(points_to_csv(pts, header), args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    from .profiles import points_from_csv

    try:
        text = Path(args.csv).read_text(encoding="utf-8")
        pts = points_from_csv(text)
    except OSError as exc:
        raise UsageError(f"cannot read {args.csv}: {exc}") from None
    except (KeyError, ValueError) as exc:
        raise UsageError(f"{args.csv}: malformed profile CSV ({exc})") from None
    p = pts[0].p if pts else 1.0
    rc = RunConfig("fit", {"csv": args.csv}, p=p, seed=args.seed)
    _, report = _fit_and_compare(pts, args, p)
    emit(dump_json(rc, report), args.out)
    return EXIT_OK if report.get("verdict", "pass") == "pass" else EXIT_FAIL


def cmd_verify(args) -> int:
    from . import certificates as C
    from .graphkit import seeded_corpus

    what = args.what
    rc = RunConfig("verify", {"what": what, "k": args.k, "tamper": args.tamper}, seed=args.seed,
                   budgets={"corpus": args.corpus, "max_n": args.max_n})
    if what == "gamma_claims":
        fam = C.build_gamma_k_family(args.k)
        if args.tamper:
            t, s, row = _ints(args.tamper)
            paths, _, _ = fam.block(t, s)
            bad = list(paths[row][::-1])
            fam = fam.tampered(t, s, row, bad)
        rep = C.verify_gamma_claims(fam)
    elif what == "dl_inclusion":
        from .embedkit import dl_inclusion_check

        rep = dl_inclusion_check(args.k)
    else:
        corpus = seeded_corpus(args.corpus, args.max_n, args.seed)
        if what == "product_corpus":
            rep = C.product_corpus(corpus[: min(len(corpus), 40)])
        elif what == "projection_corpus":
            rep = C.projection_corpus(seeded_corpus(args.corpus, 4, args.seed), seed=args.seed)
        elif what == "cap_vs_poincare":
            rep = C.cap_vs_poincare_corpus(corpus)
        else:
            rep = C.congestion_corpus(corpus)
    emit(dump_json(rc, rep), args.out)
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def _group_from_args(args):
    from .lieclass import CATALOG, GroupDescriptor, WeightData, weights_from_matrix

    sources = [x for x in (args.weights, args.matrix, args.catalog, args.bs) if x]
    if len(sources) != 1:
        raise UsageError("give exactly one of --weights, --matrix, --catalog, --bs")
    if args.catalog:
        if args.catalog not in CATALOG:
            raise UsageError(f"unknown catalog key {args.catalog!r}")
        return CATALOG[args.catalog]
    if args.bs:
        m, n = _ints(args.bs)
        from .lieclass import CatalogEntry

        return CatalogEntry(f"bs_{m}_{n}", f"BS({m},{n})", bs=(m, n))
    if args.weights:
        vals = []
        for tok in args.weights.split(";") if ";" in args.weights else args.weights.split(","):
            parts = [Fraction(x) for x in tok.split(",")] if ";" in args.weights else [Fraction(tok)]
            vals.append(tuple(parts))
        w = WeightData.of(vals)
    else:
        try:
            D = np.loadtxt(args.matrix, ndmin=2)
        except OSError as exc:
            raise UsageError(f"cannot read {args.matrix}: {exc}") from None
        except ValueError as exc:
            raise UsageError(f"{args.matrix}: {exc}") from None
        w = weights_from_matrix(D)
    from .lieclass import CatalogEntry

    desc = GroupDescriptor(w, levi_rank=args.levi_rank, levi_commutes=not args.levi_noncommuting,
                           levi_Q=Fraction(args.levi_q) if args.levi_q else None,
                           poly_degree=args.poly_degree, name="input")
    return CatalogEntry("input", "input", desc)


def cmd_classify(args) -> int:
    entry = _group_from_args(args)
    ps = _floats(args.p)
    c = entry.classification()
    result = {"key": entry.key, "name": entry.name, "verdict": entry.verdict(),
              "classification": c.to_json() if c else None,
              "predicted": {str(p): str(entry.predicted(p)) for p in ps},
              "predicted_detail": {str(p): entry.predicted(p).to_json() for p in ps}}
    rc = RunConfig("classify", {"weights": args.weights, "matrix": args.matrix, "catalog": args.catalog,
                                "bs": args.bs}, seed=args.seed)
    emit(dump_json(rc, result), args.out)
    return EXIT_OK


def cmd_embed(args) -> int:
    from . import embedkit as E

    rc = RunConfig("embed", {"kind": args.kind, "depth": args.depth, "k": args.k, "t": args.t}, seed=args.seed)
    if args.kind == "bc":
        emb = E.build_bc_embedding(2, Fraction(args.t), args.depth)
        rep = {"n": emb.graph.n, "busemann_exact": emb.busemann_exact(), "distinct": emb.distinct(),
               **E.bc_distortion(emb, seed=args.seed).to_json()}
        rep["pass"] = rep["busemann_exact"] and rep["distinct"] and not rep["degenerate"]
    elif args.kind == "dl_inclusion":
        rep = E.dl_inclusion_check(args.k)
    else:
        rep = E.horocyclic_embed_dl(args.k, t=Fraction(args.t))
        if not args.with_map:
            rep.pop("map")
        rep["pass"] = rep["height_equation_exact"] and not rep["degenerate"]
    emit(dump_json(rc, rep), args.out)
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def cmd_delta(args) -> int:
    from .hypcone import estimate_delta

    if args.graph:
        g = _read_graph(args.graph)
        src = {"graph": args.graph}
    else:
        if not args.family:
            raise UsageError("give a graph file or --family")
        spec = _family_spec(args)
        g = _build(spec)
        src = spec.to_json()
    delta = estimate_delta(g, args.samples, args.seed)
    rc = RunConfig("delta", src, seed=args.seed, budgets={"samples": args.samples})
    emit(dump_json(rc, {"n": g.n, "delta": delta, "exhaustive": g.n ** 4 <= 10 ** 7}), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="poincarelab", description=__doc__)
    ap.add_argument("--version", action="version", version=f"poincarelab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--seed", type=int, default=None, help="overrides POINCARELAB_SEED (default 0)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for independent points")
        if out:
            p.add_argument("--out", help="output path (stdout when omitted)")

    p = sub.add_parser("gen", help="generate a graph file")
    _add_family_args(p)
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("hp", help="bounds on the L^p Poincare constant")
    p.add_argument("graph")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--routing-rounds", type=int, default=40)
    common(p)
    p.set_defaults(func=cmd_hp)

    p = sub.add_parser("capacity", help="bounds on the (p, alpha)-capacity")
    p.add_argument("graph")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.125)
    common(p)
    p.set_defaults(func=cmd_capacity)

    for name, helptext in (("profile", "Poincare profile points and fit"), ("xi", "weighted capacity profile points")):
        p = sub.add_parser(name, help=helptext)
        _add_family_args(p)
        p.add_argument("--p", type=float, default=1.0)
        p.add_argument("--sizes", required=True, help="comma-separated strategy sizes")
        p.add_argument("--strategy", required=True, choices=["balls", "gamma_k", "boxes", "product_of_strategies"])
        if name == "profile":
            p.add_argument("--catalog", help="catalog key supplying the predicted profile")
            p.add_argument("--tolerance", type=float, default=0.1)
            p.add_argument("--endpoint", choices=["geomean", "lower", "upper"], default="geomean")
            p.add_argument("--fit-out")
            p.set_defaults(func=cmd_profile)
        else:
            p.add_argument("--alpha", type=float, default=0.125)
            p.add_argument("--k-rule", default="const:1")
            p.set_defaults(func=cmd_xi)
        common(p)

    p = sub.add_parser("fit", help="fit growth models to a profile CSV")
    p.add_argument("csv")
    p.add_argument("--catalog")
    p.add_argument("--tolerance", type=float, default=0.1)
    p.add_argument("--endpoint", choices=["geomean", "lower", "upper"], default="geomean")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify", help="run a verification suite (exit 1 on failure)")
    p.add_argument("what", choices=["gamma_claims", "dl_inclusion", "product_corpus", "projection_corpus",
                                    "cap_vs_poincare", "congestion_corpus"])
    p.add_argument("k", nargs="?", type=int, default=4)
    p.add_argument("--tamper", help="t,s,row: reverse one constructed path before checking")
    p.add_argument("--corpus", type=int, default=200)
    p.add_argument("--max-n", type=int, default=8)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("classify", help="thin/thick verdict and predicted profiles")
    p.add_argument("--weights", help="'1,-1' for rank one, or ';'-separated vectors like '1,0;0,1'")
    p.add_argument("--matrix", help="whitespace-separated adjoint matrix file")
    p.add_argument("--catalog")
    p.add_argument("--bs", help="m,n for a Baumslag-Solitar group")
    p.add_argument("--levi-rank", type=int, default=0)
    p.add_argument("--levi-noncommuting", action="store_true")
    p.add_argument("--levi-q")
    p.add_argument("--poly-degree", type=int)
    p.add_argument("--p", default="1", help="comma-separated p values")
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("embed", help="embedding checks")
    p.add_argument("kind", choices=["bc", "dl_inclusion", "horocyclic"])
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--t", default="3")
    p.add_argument("--with-map", action="store_true")
    common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("delta", help="Gromov hyperbolicity estimate")
    p.add_argument("graph", nargs="?")
    p.add_argument("--family", choices=sorted(FAMILY_PARAMS))
    for name in ("degree", "depth", "q1", "q2", "radius", "k", "d", "side", "levels"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--space", choices=["interval", "circle", "cantor_middle_thirds", "square"])
    p.add_argument("--left")
    p.add_argument("--right")
    p.add_argument("--samples", type=int, default=100_000)
    common(p)
    p.set_defaults(func=cmd_delta)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.seed is None:
            args.seed = default_seed()
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
