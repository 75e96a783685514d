"""Poincare and weighted capacity profile estimates, growth fits and
comparison with predicted asymptotics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .graphkit import (
    FamilySpec, WeightedGraph, build_family, make_dl_gamma_k, make_regular_tree, make_zd_box, product,
)
from .poincare import CapConfig, HpConfig, capacity_bounds, digest, hp_bounds

STRATEGIES = ("balls", "gamma_k", "boxes", "product_of_strategies")
MODELS = ("power", "power_log", "n_over_log")
CSV_COLUMNS = ("family", "p", "alpha", "k_rule", "r", "n", "value_lo", "value_hi", "strategy", "witness_digest")


@dataclass
class ProfilePoint:
    family: str
    p: float
    r: int
    n: int
    value_lo: float
    value_hi: float
    strategy: str
    witness_digest: str
    descriptor: dict = field(default_factory=dict)
    alpha: float | None = None
    k_rule: str = ""
    mu_total: float | None = None

    def __post_init__(self) -> None:
        if self.n > self.r:
            raise ValueError("candidate exceeds the target size")
        if self.value_lo > self.value_hi * (1 + 1e-9) + 1e-12:
            raise ValueError("inconsistent value interval")

    @property
    def ratio(self) -> float:
        if self.value_hi == 0:
            return 1.0
        return math.inf if self.value_lo <= 0 else self.value_hi / self.value_lo

    def value(self, endpoint: str = "geomean") -> float:
        if endpoint == "lower":
            return self.value_lo
        if endpoint == "upper":
            return self.value_hi
        return math.sqrt(self.value_lo * self.value_hi)

    def csv_row(self) -> dict:
        return {"family": self.family, "p": self.p, "alpha": "" if self.alpha is None else self.alpha,
                "k_rule": self.k_rule, "r": self.r, "n": self.n, "value_lo": repr(self.value_lo),
                "value_hi": repr(self.value_hi), "strategy": self.strategy, "witness_digest": self.witness_digest}


def points_to_csv(points: Sequence[ProfilePoint], header: str = "", fitted: "GrowthFit | None" = None) -> str:
    """CSV with the schema columns; a fitted-curve column is appended when a fit is given."""
    buf = io.StringIO()
    if header:
        for line in header.splitlines():
            buf.write(f"# {line}\n")
    cols = list(CSV_COLUMNS) + (["fitted"] if fitted else [])
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for pt in points:
        row = pt.csv_row()
        if fitted:
            row["fitted"] = repr(float(fitted.predict(pt.n)))
        w.writerow(row)
    return buf.getvalue()


def points_from_csv(text: str) -> list[ProfilePoint]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        out.append(ProfilePoint(row["family"], float(row["p"]), int(row["r"]), int(row["n"]),
                                float(row["value_lo"]), float(row["value_hi"]), row["strategy"],
                                row["witness_digest"], alpha=float(row["alpha"]) if row.get("alpha") else None,
                                k_rule=row.get("k_rule", "")))
    return out


# ---------------------------------------------------------------------------
# candidate subgraphs

def _with(spec: FamilySpec, **kw) -> FamilySpec:
    return FamilySpec(spec.family, tuple(sorted({**dict(spec.params), **kw}.items())))


def product_sizes(depth: int, p: float, degree: int = 3) -> tuple[int, int]:
    """Tree depth and path length L ~ |T|^(1/p) balancing the two factors."""
    n_t = make_regular_tree(degree, depth).n
    return depth, max(2, int(round(n_t ** (1.0 / p))))


def candidate(spec: FamilySpec, strategy: str, size, p: float = 1.0) -> tuple[WeightedGraph, dict]:
    """The strategy's subgraph at one size, with a descriptor."""
    f = spec.family
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == "gamma_k":
        if f not in ("dl", "dl_gamma_k") or spec.get("q1", 2) != 2 or spec.get("q2", 2) != 2:
            raise ValueError("gamma_k needs DL(2,2)")
        return make_dl_gamma_k(int(size)), {"k": int(size)}
    if strategy == "boxes":
        if f != "zd_box":
            raise ValueError("boxes needs the zd_box family")
        return make_zd_box(spec.get("d", 2), int(size)), {"side": int(size)}
    if strategy == "balls":
        key = {"tree": "depth", "dl": "radius", "heisenberg_ball": "radius", "sol_lattice_ball": "radius",
               "cone": "levels", "zd_box": "side"}.get(f)
        if key is None:
            raise ValueError(f"balls strategy not available for {f}")
        return build_family(_with(spec, **{key: int(size)})), {key: int(size)}
    # product_of_strategies: tree ball x path
    if f != "product":
        raise ValueError("product_of_strategies needs the product family")
    left, right = spec.get("left"), spec.get("right")
    if left[0] != "tree" or right[0] != "zd_box" or dict(right[1]).get("d", 1) != 1:
        raise ValueError("product strategy supports tree x path")
    if isinstance(size, (tuple, list)):
        depth, length = int(size[0]), int(size[1])
    else:
        depth, length = product_sizes(int(size), p, dict(left[1]).get("degree", 3))
    T = make_regular_tree(dict(left[1]).get("degree", 3), depth)
    P = make_zd_box(1, length)
    return product(T, P), {"depth": depth, "length": length}


def default_hp_config(n: int, seed: int = 0) -> HpConfig:
    return HpConfig(seed=seed, restarts=20 if n <= 60 else 4, large_restarts=2 if n > 4000 else 4)


def profile_points(spec: FamilySpec, p: float, sizes: Sequence, strategy: str,
                   config: HpConfig | None = None, jobs: int = 1) -> list[ProfilePoint]:
    """One point per size: n * h^p of the strategy's candidate (as an interval)."""

    def one(size):
        g, desc = candidate(spec, strategy, size, p)
        if g.n < 2:
            return None
        b = hp_bounds(g, p, config or default_hp_config(g.n))
        return ProfilePoint(spec.family, p, g.n, g.n, g.n * b.lower, g.n * b.upper, strategy,
                            digest({"lower": b.lower_witness, "upper": b.upper_witness}),
                            {**desc, "lower_method": b.lower_method, "upper_method": b.upper_method})

    results = _map(one, list(sizes), jobs)
    return [r for r in results if r is not None]


def _map(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=jobs)(delayed(fn)(x) for x in items)


# ---------------------------------------------------------------------------
# weighted capacity profile points

def parse_k_rule(rule: str) -> Callable[[float], float]:
    """'const:K' (k = K) or 'pow:b' (k = r^b, b < 1)."""
    kind, _, val = rule.partition(":")
    x = float(val)
    if kind == "const":
        return lambda r: x
    if kind == "pow":
        if not 0 <= x < 1:
            raise ValueError("power rule needs 0 <= b < 1")
        return lambda r: r ** x
    raise ValueError(f"unknown weight rule {rule!r}")


def _size_for(n: int, rule: str) -> tuple[float, float]:
    """Solve r = k(r) * n for the uniform-weight construction; returns (r, k)."""
    kind, _, val = rule.partition(":")
    x = float(val)
    if kind == "const":
        return x * n, x
    r = n ** (1.0 / (1.0 - x))
    return r, r ** x


def xi_points(spec: FamilySpec, p: float, alpha: float, k_rule: str, sizes: Sequence, strategy: str = "balls",
              config: CapConfig | None = None, jobs: int = 1) -> list[ProfilePoint]:
    """Weighted points mu(G) * C^{p,alpha}(G, k #) for uniform weights k = k(r)."""
    if not 0 < alpha < 0.25:
        raise ValueError("alpha must lie in (0, 1/4)")
    parse_k_rule(k_rule)

    def one(size):
        g, desc = candidate(spec, strategy, size, p)
        r, k = _size_for(g.n, k_rule)
        if k < 1 or k > max(r / 10, 1):
            raise ValueError("weight rule must satisfy 1 <= k(r) <= r/10")
        mu = np.full(g.n, k)
        b = capacity_bounds(g, mu, p, alpha, config or CapConfig())
        total = float(mu.sum())
        return ProfilePoint(spec.family, p, int(math.ceil(r - 1e-9)), g.n, total * b.lower, total * b.upper,
                            strategy, digest({"upper": b.upper_witness}), {**desc, "k": k},
                            alpha=alpha, k_rule=k_rule, mu_total=total)

    return _map(one, list(sizes), jobs)


def lemma_weight_check(g: WeightedGraph, p: float, alpha: float, k: float, config: CapConfig | None = None) -> dict:
    """k * (|G| C(G, #)) against mu(G) C(G, k #) for the uniform-weight construction."""
    cfg = config or CapConfig()
    unweighted = capacity_bounds(g, None, p, alpha, cfg)
    weighted = capacity_bounds(g, np.full(g.n, float(k)), p, alpha, cfg)
    lhs = k * g.n * unweighted.upper
    rhs = k * g.n * weighted.upper
    C = lhs / rhs if rhs > 0 else math.inf
    return {"n": g.n, "k": k, "lhs": lhs, "rhs": rhs, "C": C, "pass": C <= 4.0}


# ---------------------------------------------------------------------------
# growth fits

@dataclass
class GrowthFit:
    model: str
    params: dict
    residual: float
    n_range: tuple[float, float]
    fits: dict
    used: list[tuple[float, float]]
    excluded: list[tuple[float, float]]
    endpoint: str = "geomean"

    def predict(self, n) -> np.ndarray:
        return _model_predict(self.model, self.params, np.asarray(n, dtype=float))

    def exponent(self) -> float:
        """Log-log slope of the selected model at the largest fitted size.

        For a pure power this is a; log corrections contribute b / log n.
        """
        x = math.log(self.n_range[1])
        if self.model == "power":
            return float(self.params["a"])
        if self.model == "power_log":
            return float(self.params["a"] + self.params["b"] / x)
        return 1.0 - 1.0 / x

    def power_exponent(self) -> float:
        return float(self.fits["power"]["params"]["a"])

    def recompute_residual(self) -> float:
        n = np.array([u[0] for u in self.used])
        v = np.array([u[1] for u in self.used])
        return float(np.sqrt(np.mean((np.log(v) - np.log(self.predict(n))) ** 2)))

    def to_json(self) -> dict:
        return {"model": self.model, "params": self.params, "residual": self.residual,
                "exponent": self.exponent(), "power_exponent": self.power_exponent(),
                "n_range": list(self.n_range), "fits": self.fits, "used": self.used,
                "excluded": self.excluded, "endpoint": self.endpoint}


def _model_predict(model: str, params: dict, n: np.ndarray) -> np.ndarray:
    x = np.log(n)
    if model == "power":
        return np.exp(params["c"] + params["a"] * x)
    if model == "power_log":
        return np.exp(params["c"] + params["a"] * x + params["b"] * np.log(x))
    if model == "n_over_log":
        return np.exp(params["c"] + x - np.log(x))
    raise ValueError(model)


def _lstsq(cols: list[np.ndarray], y: np.ndarray) -> tuple[np.ndarray, float]:
    A = np.vstack(cols).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef, float(np.sqrt(np.mean((A @ coef - y) ** 2)))


def fit_growth(points, models: Sequence[str] = MODELS, margin: float = 0.02, endpoint: str = "geomean",
               max_ratio: float | None = 4.0, drop_fraction: float = 0.2) -> GrowthFit:
    """Log-log least squares for each model; pure power wins unless beaten by ``margin``.

    ``points`` are ProfilePoints or (n, value) pairs. Points whose interval
    ratio exceeds ``max_ratio`` are excluded (geomean endpoint only) and
    the smallest ``drop_fraction`` of the remaining points is dropped.
    """
    data, excluded = [], []
    for pt in points:
        if isinstance(pt, ProfilePoint):
            if endpoint == "geomean" and max_ratio is not None and pt.ratio > max_ratio:
                excluded.append((pt.n, pt.value(endpoint) if pt.value_lo > 0 else pt.value_hi))
                continue
            data.append((float(pt.n), float(pt.value(endpoint))))
        else:
            data.append((float(pt[0]), float(pt[1])))
    data.sort()
    if len(data) < 4:
        raise ValueError("need at least 4 usable points")
    if math.log10(data[-1][0] / data[0][0]) < 1.5:
        raise ValueError("points must span at least 1.5 decades in n")
    drop = int(math.ceil(drop_fraction * len(data) - 1e-9))
    used = data[drop:]
    if len(used) < 3:
        used = data[-3:]
    n = np.array([u[0] for u in used])
    v = np.array([u[1] for u in used])
    if np.any(v <= 0) or np.any(n <= 1):
        raise ValueError("values and sizes must be positive (sizes > 1)")
    x, y = np.log(n), np.log(v)
    one = np.ones_like(x)
    fits: dict[str, dict] = {}
    if "power" in models:
        (c, a), res = _lstsq([one, x], y)
        fits["power"] = {"params": {"c": float(c), "a": float(a)}, "residual": res}
    if "power_log" in models:
        (c, a, b), res = _lstsq([one, x, np.log(x)], y)
        fits["power_log"] = {"params": {"c": float(c), "a": float(a), "b": float(b)}, "residual": res}
    if "n_over_log" in models:
        (c,), res = _lstsq([one], y - x + np.log(x))
        fits["n_over_log"] = {"params": {"c": float(c)}, "residual": res}
    # simplest first; a richer model must beat the current choice by ``margin``
    order = [m for m in ("power", "n_over_log", "power_log") if m in fits]
    best = order[0]
    for m in order[1:]:
        if fits[m]["residual"] < fits[best]["residual"] - margin:
            best = m
    return GrowthFit(best, fits[best]["params"], fits[best]["residual"], (float(n[0]), float(n[-1])), fits,
                     used, excluded, endpoint)


def compare_with_prediction(fit: GrowthFit, predicted, tol: float = 0.1) -> dict:
    """Model class and exponent of a fit against a symbolic prediction."""
    from .lieclass import Profile

    pred: Profile = predicted
    target = pred.upper if pred.kind == "bounds" else pred
    report: dict[str, Any] = {"predicted": str(pred), "fitted_model": fit.model,
                              "fitted_exponent": fit.exponent(), "tolerance": tol}
    if target.model == "n_over_log":
        margin = fit.fits["power"]["residual"] - fit.fits["n_over_log"]["residual"]
        report.update(margin=margin, best_power_exponent=fit.power_exponent())
        ok = fit.model == "n_over_log"
    else:
        a = float(target.a)
        if pred.kind == "bounds":
            lo = float(pred.lower.a)
            ok = lo - tol <= fit.exponent() <= a + tol
        else:
            ok = abs(fit.exponent() - a) <= tol and fit.model != "n_over_log"
        report.update(expected_exponent=a)
    n = np.array([u[0] for u in fit.used])
    v = np.array([u[1] for u in fit.used])
    curve = _profile_curve(target, n)
    scale = float(np.exp(np.mean(np.log(v) - np.log(curve))))
    report["curves"] = {"n": n.tolist(), "data": v.tolist(), "fitted": fit.predict(n).tolist(),
                        "predicted": (scale * curve).tolist()}
    report["pass"] = bool(ok)
    return report


def _profile_curve(pr, n: np.ndarray) -> np.ndarray:
    x = np.log(n)
    if pr.model == "n_over_log":
        return n / x
    if pr.model == "power_log":
        return n ** float(pr.a) * x ** float(pr.b)
    return n ** float(pr.a)
