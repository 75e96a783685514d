"""Thin/thick classification of Lie groups from weight data and the
predicted Poincare profile asymptotics."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np
import sympy
from scipy.optimize import linprog

Number = Fraction | float
SNAP_TOL = 1e-8


# ---------------------------------------------------------------------------
# weight data

def _snap(x: float) -> Number:
    fr = Fraction(x).limit_denominator(1000)
    return fr if abs(float(fr) - x) <= SNAP_TOL else float(x)


def _as_number(x) -> Number:
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return _snap(float(x))


@dataclass(frozen=True)
class WeightData:
    """Weight vectors in Q^r with multiplicities (floats only when not snappable)."""

    r: int
    weights: tuple[tuple[tuple[Number, ...], int], ...]

    def __post_init__(self) -> None:
        for vec, mult in self.weights:
            if len(vec) != self.r:
                raise ValueError(f"weight {vec} does not have dimension {self.r}")
            if mult < 1:
                raise ValueError("multiplicities must be positive")

    @classmethod
    def of(cls, values, r: int | None = None) -> "WeightData":
        """Build from scalars or vectors (repeats add multiplicity)."""
        counts: dict[tuple[Number, ...], int] = {}
        for v in values:
            vec = tuple(_as_number(x) for x in (v if isinstance(v, (tuple, list)) else (v,)))
            counts[vec] = counts.get(vec, 0) + 1
        if r is None:
            r = len(next(iter(counts))) if counts else 1
        return cls(r, tuple(sorted(counts.items(), key=lambda kv: tuple(float(x) for x in kv[0]))))

    @property
    def exact(self) -> bool:
        return all(isinstance(x, Fraction) for vec, _ in self.weights for x in vec)

    def nonzero(self) -> list[tuple[Number, ...]]:
        return [vec for vec, _ in self.weights if any(x != 0 for x in vec)]

    def trace(self) -> tuple[Number, ...]:
        return tuple(sum(m * vec[i] for vec, m in self.weights) for i in range(self.r))

    def to_json(self) -> dict:
        return {"r": self.r, "weights": [[[str(x) for x in vec], m] for vec, m in self.weights]}


def weights_from_matrix(D) -> WeightData:
    """Real parts of the eigenvalues of D with algebraic multiplicity."""
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("matrix must be square")
    roots = np.roots(np.poly(D)) if D.shape[0] else np.array([])
    reals = [float(np.real(z)) for z in roots]
    reals = [0.0 if abs(x) < 1e-10 else x for x in reals]
    return WeightData.of(reals, r=1)


def rank(w: WeightData) -> int:
    """Dimension of the span of the weights (exact for rational data)."""
    vecs = [vec for vec, _ in w.weights]
    if not vecs:
        return 0
    if w.exact:
        return int(sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in v] for v in vecs]).rank())
    return int(np.linalg.matrix_rank(np.array(vecs, dtype=float), tol=1e-9))


@dataclass(frozen=True)
class NCDecision:
    property: str        # "NC" or "C"
    exact: bool
    certificate: Any


def is_nc(w: WeightData) -> NCDecision:
    """C iff 0 lies in the convex hull of the nonzero weights.

    Decided by LP; the answer is then certified exactly for rational data:
    convex coefficients summing to 1 (C) or a vector c with c.w > 0 on
    every nonzero weight (NC).
    """
    nz = sorted(set(w.nonzero()), key=lambda v: tuple(float(x) for x in v))
    if not nz:
        return NCDecision("NC", True, None)
    W = np.array(nz, dtype=float).T             # r x k
    r, k = W.shape
    res = linprog(np.zeros(k), A_eq=np.vstack([W, np.ones((1, k))]), b_eq=np.r_[np.zeros(r), 1.0],
                  bounds=[(0, None)] * k, method="highs")
    exact_data = w.exact
    if res.status == 0:
        lam = res.x
        if exact_data:
            support = [i for i in range(k) if lam[i] > 1e-12]
            cert = _exact_convex(nz, support)
            if cert is not None:
                return NCDecision("C", True, cert)
        return NCDecision("C", False, lam.tolist())
    # separating direction: max s with c.w >= s, |c| <= 1
    res2 = linprog(np.r_[np.zeros(r), -1.0], A_ub=np.hstack([-W.T, np.ones((k, 1))]), b_ub=np.zeros(k),
                   bounds=[(-1, 1)] * r + [(None, 1)], method="highs")
    c = res2.x[:r]
    if exact_data:
        cf = [Fraction(x).limit_denominator(10 ** 6) for x in c]
        if all(sum(ci * vi for ci, vi in zip(cf, v)) > 0 for v in nz):
            return NCDecision("NC", True, [str(x) for x in cf])
    margin = float(np.min(W.T @ c))
    return NCDecision("NC" if margin > 1e-9 else "C", False, c.tolist())


def _exact_convex(nz, support) -> list[str] | None:
    rows = [[sympy.Rational(nz[i][j].numerator, nz[i][j].denominator) for i in support] for j in range(len(nz[0]))]
    A = sympy.Matrix(rows + [[1] * len(support)])
    b = sympy.Matrix([0] * len(nz[0]) + [1])
    try:
        sol, params = A.gauss_jordan_solve(b)
    except ValueError:
        return None
    if params.shape[0]:
        sol = sol.subs({p: 0 for p in params})
    if any(x < 0 for x in sol):
        return None
    return [str(x) for x in sol]


# ---------------------------------------------------------------------------
# symbolic profiles

@dataclass(frozen=True)
class Profile:
    """r^a log^b r (model power or power_log), r/log r (n_over_log), or bounds."""

    model: str
    a: Fraction = Fraction(1)
    b: Fraction = Fraction(0)
    kind: str = "asymptotic"             # or "bounds"
    lower: "Profile | None" = None
    upper: "Profile | None" = None

    @classmethod
    def power(cls, a) -> "Profile":
        return cls("power", Fraction(a))

    @classmethod
    def power_log(cls, a, b) -> "Profile":
        return cls("power_log", Fraction(a), Fraction(b))

    @classmethod
    def n_over_log(cls) -> "Profile":
        return cls("n_over_log", Fraction(1), Fraction(-1))

    @classmethod
    def bounds(cls, lower: "Profile", upper: "Profile") -> "Profile":
        return cls("bounds", kind="bounds", lower=lower, upper=upper)

    @property
    def fit_class(self) -> str:
        """'power' or 'n_over_log': the class compared against fits."""
        if self.kind == "bounds":
            return self.upper.fit_class
        return "n_over_log" if self.model == "n_over_log" else "power"

    def __str__(self) -> str:
        if self.kind == "bounds":
            return f"between {self.lower} and {self.upper}"
        if self.model == "n_over_log":
            return "r/log r"
        if self.a == 0 and self.b == 0:
            return "1"
        s = "r" if self.a == 1 else f"r^({self.a})"
        if self.model == "power_log":
            s += " log r" if self.b == 1 else f" log^({self.b}) r"
        return s

    def to_json(self) -> dict:
        out: dict[str, Any] = {"model": self.model, "text": str(self)}
        if self.kind == "bounds":
            out.update(lower=self.lower.to_json(), upper=self.upper.to_json())
        else:
            out.update(a=str(self.a), b=str(self.b))
        return out


# ---------------------------------------------------------------------------
# classification

@dataclass(frozen=True)
class GroupDescriptor:
    radical: WeightData
    levi_rank: int = 0
    levi_commutes: bool = True
    levi_Q: Number | None = None
    poly_degree: int | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if self.levi_rank < 0:
            raise ValueError("levi_rank must be >= 0")
        if self.levi_Q is not None and self.levi_rank != 1:
            raise ValueError("levi_Q is only meaningful for a rank-one Levi factor")


@dataclass(frozen=True)
class Classification:
    rank: int
    property: str
    verdict: str
    trichotomy_case: str
    unimodular: bool
    exact: bool
    trace_unimodular: bool | None = None
    Q: Number | None = None
    d: int | None = None
    hyperbolic_is_real: bool = True
    notes: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"rank": self.rank, "property": self.property, "verdict": self.verdict,
                "trichotomy_case": self.trichotomy_case, "unimodular": self.unimodular,
                "exact": self.exact, "trace_unimodular": self.trace_unimodular,
                "Q": None if self.Q is None else str(self.Q), "d": self.d, "notes": list(self.notes)}


def classify(g: GroupDescriptor) -> Classification:
    rr = rank(g.radical)
    nc = is_nc(g.radical)
    total = g.levi_rank + rr
    thin = total <= 1 and g.levi_commutes and nc.property == "NC"
    if thin:
        if total == 0:
            case = "a"
        elif g.levi_rank == 1 and rr == 0:
            case = "b"
        elif g.levi_rank == 0 and rr == 1:
            case = "c"
        else:
            raise ValueError("inconsistent descriptor")
    else:
        case = "none"
    assert (not thin) == (not (total <= 1 and g.levi_commutes and nc.property == "NC"))
    tr = g.radical.trace()
    trace_zero = all(x == 0 for x in tr) if g.radical.exact else all(abs(float(x)) < 1e-9 for x in tr)
    unimodular = {"a": True, "b": True, "c": False}.get(case, trace_zero)
    Q, d, real_hyp = None, g.poly_degree, True
    notes = []
    if case == "b":
        Q = g.levi_Q
    elif case == "c":
        # Heintze part: Q = trace / smallest weight (weights oriented positive)
        nzw = [float(vec[0]) for vec in g.radical.nonzero()] if g.radical.r == 1 else []
        if nzw:
            sign = 1 if max(nzw) > 0 else -1
            pos = [(vec, m) for vec, m in g.radical.weights if vec[0] != 0]
            total_w = sum(m * sign * vec[0] for vec, m in pos)
            lo = min(sign * vec[0] for vec, _ in pos)
            Q = total_w / lo
            real_hyp = len({vec for vec, _ in pos}) == 1
            zeros = sum(m for vec, m in g.radical.weights if vec[0] == 0)
            if d is None:
                d = zeros
        if not real_hyp:
            notes.append("Heintze factor not real hyperbolic: only bounds are known")
    return Classification(total, nc.property, "thin" if thin else "thick", case, unimodular,
                          nc.exact and g.radical.exact, trace_zero if not thin else None,
                          Q, d, real_hyp, tuple(notes))


def thin_profile(Q, d: int, p: float) -> Profile:
    """Profile of P x H with P of growth degree d and H hyperbolic of conformal dimension Q.

    Q = 0 is the tree/free-group case; Q = None means there is no
    hyperbolic factor (pure polynomial growth, r^(1 - 1/d)).
    """
    if d is None or d < 0:
        raise ValueError("need a growth degree d >= 0")
    if Q is None:
        return Profile.power(Fraction(0) if d == 0 else 1 - Fraction(1, d))
    Qf = Fraction(Q) if not isinstance(Q, float) else Fraction(Q).limit_denominator(10 ** 6)
    pf = Fraction(p).limit_denominator(10 ** 6)
    if Qf == 0 or pf > Qf:
        return Profile.power(1 - 1 / (pf + d))
    if pf < Qf:
        return Profile.power(1 - 1 / (Qf + d))
    return Profile.power_log(1 - 1 / (Qf + d), 1 / (Qf + d))


def predicted_profile(c: Classification, p: float) -> Profile:
    if c.verdict == "thick":
        return Profile.n_over_log()
    if c.trichotomy_case == "a":
        return thin_profile(None, c.d, p)
    if c.Q is None or c.d is None:
        raise ValueError("thin prediction needs Q and d")
    prof = thin_profile(c.Q, c.d, p)
    if not c.hyperbolic_is_real:
        # embedded flats and trees give the lower bound; the upper bound is the general one
        lower = max(Profile.power(Fraction(1, 2)), Profile.power(1 - 1 / Fraction(p).limit_denominator(10 ** 6)),
                    key=lambda pr: pr.a)
        return Profile.bounds(lower, prof)
    return prof


def bs_profile(m: int, n: int, p: float) -> Profile:
    if m == 0 or n == 0:
        raise ValueError("parameters must be nonzero")
    if abs(m) == abs(n) == 1:
        return Profile.power(Fraction(1, 2))
    if abs(m) == abs(n):
        return Profile.power(1 - 1 / (Fraction(p).limit_denominator(10 ** 6) + 1))
    return Profile.n_over_log()


THURSTON = {
    "S2xR": Profile.power(0),
    "H3": Profile.power(Fraction(1, 2)),
    "H2xR": Profile.power_log(Fraction(1, 2), Fraction(1, 2)),
    "PSL2R": Profile.power_log(Fraction(1, 2), Fraction(1, 2)),
    "R3": Profile.power(Fraction(2, 3)),
    "NIL": Profile.power(Fraction(3, 4)),
    "SOL": Profile.n_over_log(),
}


def thurston_profile(name: str) -> Profile:
    key = name.replace("²", "2").replace("³", "3").replace("×", "x").replace("ℝ", "R").replace("~", "")
    for k in THURSTON:
        if k.lower() == key.lower():
            return THURSTON[k]
    raise ValueError(f"unknown geometry {name!r}; expected one of {sorted(THURSTON)}")


# ---------------------------------------------------------------------------
# catalog

@dataclass(frozen=True)
class CatalogEntry:
    key: str
    name: str
    descriptor: GroupDescriptor | None = None
    bs: tuple[int, int] | None = None
    thurston: str | None = None
    graph_family: tuple[str, tuple] | None = None     # (family, params) for profiles
    strategy: str | None = None

    def classification(self) -> Classification | None:
        return classify(self.descriptor) if self.descriptor else None

    def predicted(self, p: float = 1.0) -> Profile:
        if self.bs is not None:
            return bs_profile(*self.bs, p)
        return predicted_profile(self.classification(), p)

    def verdict(self) -> str:
        if self.bs is not None:
            return "thick" if abs(self.bs[0]) != abs(self.bs[1]) else "thin"
        return self.classification().verdict


def _W(*vals) -> WeightData:
    return WeightData.of([Fraction(v) for v in vals], r=1)


CATALOG: dict[str, CatalogEntry] = {
    "r3": CatalogEntry("r3", "R^3", GroupDescriptor(_W(0, 0, 0), poly_degree=3, name="R^3"), thurston="R3",
                       graph_family=("zd_box", (("d", 3),)), strategy="boxes"),
    "nil": CatalogEntry("nil", "NIL", GroupDescriptor(_W(0, 0, 0), poly_degree=4, name="NIL"), thurston="NIL",
                        graph_family=("heisenberg_ball", ()), strategy="balls"),
    "sol": CatalogEntry("sol", "SOL", GroupDescriptor(_W(1, -1), name="SOL"), thurston="SOL",
                        graph_family=("sol_lattice_ball", ()), strategy="balls"),
    "h3": CatalogEntry("h3", "H^3", GroupDescriptor(_W(1, 1), poly_degree=0, name="H^3"), thurston="H3"),
    "h2xr": CatalogEntry("h2xr", "H^2 x R", GroupDescriptor(_W(0), levi_rank=1, levi_commutes=True, levi_Q=Fraction(1),
                                                            poly_degree=1, name="H^2 x R"), thurston="H2xR"),
    "heintze_1_2": CatalogEntry("heintze_1_2", "R^2 x|_(1,2) R", GroupDescriptor(_W(1, 2), poly_degree=0,
                                                                                name="Heintze(1,2)")),
    "osc": CatalogEntry("osc", "Osc", GroupDescriptor(_W(1, -1, 0), name="Osc")),
    "bs_2_3": CatalogEntry("bs_2_3", "BS(2,3)", bs=(2, 3), graph_family=("dl_gamma_k", ()), strategy="gamma_k"),
}


def catalog() -> dict[str, CatalogEntry]:
    return dict(CATALOG)


def catalog_report(p_values=(1.0, 2.0)) -> list[dict]:
    rows = []
    for key, e in CATALOG.items():
        c = e.classification()
        rows.append({"key": key, "name": e.name, "verdict": e.verdict(),
                     "classification": c.to_json() if c else None,
                     "predicted": {str(p): e.predicted(p).to_json() for p in p_values},
                     "thurston": str(thurston_profile(e.thurston)) if e.thurston else None})
    return rows
