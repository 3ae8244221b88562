"""Minimax/Chebyshev problem instances over heterogeneous constraint blocks.

A Problem bundles the scenario functions, the constraint blocks (nonlinear
inequalities/equalities, second-order cone, semidefinite, discretized
semi-infinite), a polyhedral set given by bounds and affine equalities, and
the tolerance set used for all activity and feasibility decisions.  All
pointwise queries (objective, active scenarios, subdifferential generators,
feasibility) live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import expr as ex

__all__ = [
    "ToleranceSet", "PolyhedralSet", "NlpIneq", "NlpEq", "Soc", "Sdp",
    "SemiInfinite", "Problem", "ActiveScenario", "BlockActivity", "ActiveSets",
    "FeasibilityReport", "ProblemFormatError",
    "evaluate_objective", "activity", "check_feasible",
    "subdifferential_generators", "squared_generators",
    "load_problem_text", "load_problem_file", "problem_to_text",
]


@dataclass(frozen=True)
class ToleranceSet:
    eps_active: float = 1e-8
    eps_rank: float = 1e-9
    eps_det: float = 1e-8
    eps_feas: float = 1e-8
    eps_pos: float = 1e-8

    def __post_init__(self):
        for name in ("eps_active", "eps_rank", "eps_det", "eps_feas", "eps_pos"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class PolyhedralSet:
    """Box bounds plus optional affine equalities E x = e."""

    lb: tuple = ()
    ub: tuple = ()
    E: tuple = ()   # rows of the equality matrix
    e: tuple = ()

    @staticmethod
    def free(d: int) -> "PolyhedralSet":
        return PolyhedralSet(lb=(-math.inf,) * d, ub=(math.inf,) * d)

    def validate(self, d: int):
        from .linkernel import rank
        if len(self.lb) != d or len(self.ub) != d:
            raise ValueError("bound vectors must have length d")
        for lo, hi in zip(self.lb, self.ub):
            if lo > hi:
                raise ValueError("lb must not exceed ub")
        if self.E:
            E = np.asarray(self.E, dtype=float)
            if E.shape != (len(self.e), d):
                raise ValueError("equality matrix shape mismatch")
            if rank(E) != len(self.E):
                raise ValueError("equality rows must be linearly independent")

    def is_free(self) -> bool:
        return (not self.E and all(lo == -math.inf for lo in self.lb)
                and all(hi == math.inf for hi in self.ub))


@dataclass(frozen=True)
class NlpIneq:
    g: tuple  # expressions g_i(x) <= 0
    kind: str = "nlp_ineq"


@dataclass(frozen=True)
class NlpEq:
    b: tuple  # expressions b_j(x) = 0
    kind: str = "nlp_eq"


@dataclass(frozen=True)
class Soc:
    g: tuple  # l+1 expressions; (g[0], g[1:]) must lie in the second-order cone
    kind: str = "soc"

    @property
    def l(self) -> int:
        return len(self.g) - 1


@dataclass(frozen=True)
class Sdp:
    G0: tuple  # l rows of l expressions, symmetric; G0(x) must be neg. semidefinite
    kind: str = "sdp"

    @property
    def size(self) -> int:
        return len(self.G0)


@dataclass(frozen=True)
class SemiInfinite:
    g: ex.Expression  # in x(1..d) and the parameter t = x(d+1)
    grid: tuple       # sorted, duplicate-free points of the compact index set
    kind: str = "semi_infinite"


@dataclass(frozen=True)
class Problem:
    d: int
    kind: str  # 'minimax' | 'chebyshev'
    scenarios: tuple        # expressions f_omega
    psi: tuple = ()         # chebyshev targets, one per scenario
    blocks: tuple = ()
    set_A: PolyhedralSet | None = None
    tolerances: ToleranceSet = field(default_factory=ToleranceSet)
    source: str = "<memory>"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be at least 1")
        if not self.scenarios:
            raise ValueError("at least one scenario is required")
        if self.kind not in ("minimax", "chebyshev"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.kind == "chebyshev" and len(self.psi) != len(self.scenarios):
            raise ValueError("chebyshev problems need a target per scenario")
        if self.set_A is None:
            object.__setattr__(self, "set_A", PolyhedralSet.free(self.d))
        self.set_A.validate(self.d)
        for blk in self.blocks:
            if isinstance(blk, SemiInfinite):
                if not blk.grid:
                    raise ValueError("semi-infinite grid must be non-empty")
                if list(blk.grid) != sorted(set(blk.grid)):
                    raise ValueError("semi-infinite grid must be sorted and "
                                     "duplicate-free")

    def with_tolerances(self, tol: ToleranceSet) -> "Problem":
        return replace(self, tolerances=tol)


@dataclass(frozen=True)
class ActiveScenario:
    index: int   # 1-based scenario number
    sign: int    # +1 for minimax; +1/-1 deviation sign for chebyshev
    value: float  # f(x) (minimax) or f(x) - psi (chebyshev)


@dataclass
class BlockActivity:
    position: int
    kind: str
    active: list = field(default_factory=list)   # constraint / grid indices
    soc_state: str = ""                          # 'inactive'|'boundary'|'origin'
    soc_value: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None        # descending, sdp only
    null_basis: np.ndarray | None = None         # columns span ker G0(x)


@dataclass
class ActiveSets:
    F_value: float
    scenarios: list
    blocks: list


def _scenario_values(P: Problem, x):
    vals = [ex.eval_value(f, x) for f in P.scenarios]
    if P.kind == "chebyshev":
        return [v - t for v, t in zip(vals, P.psi)]
    return vals


def evaluate_objective(P: Problem, x) -> tuple[float, list]:
    """F(x) and the active scenario list.

    For Chebyshev problems each active scenario carries the sign of its
    deviation; a deviation within eps_active of zero is expanded into both
    signs, since either signed copy attains the maximum there.
    """
    x = np.asarray(x, dtype=float)
    eps = P.tolerances.eps_active
    devs = _scenario_values(P, x)
    if P.kind == "minimax":
        F = max(devs)
        act = [ActiveScenario(i + 1, 1, v)
               for i, v in enumerate(devs) if F - v <= eps]
        return F, act
    F = max(abs(v) for v in devs)
    act = []
    for i, v in enumerate(devs):
        if F - abs(v) > eps:
            continue
        if abs(v) <= eps:
            act.append(ActiveScenario(i + 1, 1, v))
            act.append(ActiveScenario(i + 1, -1, v))
        else:
            act.append(ActiveScenario(i + 1, 1 if v > 0 else -1, v))
    return F, act


def _soc_split(values: np.ndarray):
    y0, ybar = values[0], values[1:]
    return y0, ybar, float(np.linalg.norm(ybar))


def activity(P: Problem, x) -> ActiveSets:
    """Everything cone-specific machinery needs at the point x."""
    x = np.asarray(x, dtype=float)
    tol = P.tolerances
    F, scen = evaluate_objective(P, x)
    blocks = []
    for pos, blk in enumerate(P.blocks):
        ba = BlockActivity(position=pos, kind=blk.kind)
        if isinstance(blk, NlpIneq):
            gvals = [ex.eval_value(g, x) for g in blk.g]
            ba.active = [i for i, v in enumerate(gvals) if abs(v) <= tol.eps_active
                         or v > 0]
        elif isinstance(blk, NlpEq):
            ba.active = list(range(len(blk.b)))
        elif isinstance(blk, Soc):
            vals = np.array([ex.eval_value(g, x) for g in blk.g])
            ba.soc_value = vals
            y0, ybar, nbar = _soc_split(vals)
            if np.linalg.norm(vals) <= tol.eps_active:
                ba.soc_state = "origin"
            elif abs(y0 - nbar) <= tol.eps_active:
                ba.soc_state = "boundary"
            else:
                ba.soc_state = "inactive"
        elif isinstance(blk, Sdp):
            M = _sdp_matrix(blk, x)
            sigma, Q = np.linalg.eigh(M)
            order = np.argsort(sigma)[::-1]
            sigma = sigma[order]
            Q = Q[:, order]
            scale = max(1.0, float(np.max(np.abs(sigma))) if sigma.size else 0.0)
            null_cols = [j for j in range(len(sigma))
                         if abs(sigma[j]) <= tol.eps_rank * scale]
            ba.eigenvalues = sigma
            ba.null_basis = Q[:, null_cols] if null_cols else np.zeros((blk.size, 0))
        elif isinstance(blk, SemiInfinite):
            vals = [ex.eval_value(blk.g, np.concatenate([x, [t]]))
                    for t in blk.grid]
            ba.active = [j for j, v in enumerate(vals)
                         if abs(v) <= tol.eps_active or v > 0]
        blocks.append(ba)
    return ActiveSets(F_value=F, scenarios=scen, blocks=blocks)


def _sdp_matrix(blk: Sdp, x) -> np.ndarray:
    n = blk.size
    M = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            M[i, j] = ex.eval_value(blk.G0[i][j], x)
    return 0.5 * (M + M.T)


@dataclass
class FeasibilityReport:
    feasible: bool
    max_violation: float
    violations: list  # (description, amount)


def check_feasible(P: Problem, x) -> FeasibilityReport:
    x = np.asarray(x, dtype=float)
    eps = P.tolerances.eps_feas
    bad = []

    def record(desc, amount):
        if amount > eps:
            bad.append((desc, float(amount)))

    for pos, blk in enumerate(P.blocks):
        if isinstance(blk, NlpIneq):
            for i, g in enumerate(blk.g):
                record(f"block {pos} inequality {i + 1}", ex.eval_value(g, x))
        elif isinstance(blk, NlpEq):
            for j, b in enumerate(blk.b):
                record(f"block {pos} equality {j + 1}", abs(ex.eval_value(b, x)))
        elif isinstance(blk, Soc):
            vals = np.array([ex.eval_value(g, x) for g in blk.g])
            y0, ybar, nbar = _soc_split(vals)
            record(f"block {pos} second-order cone", nbar - y0)
        elif isinstance(blk, Sdp):
            sigma = np.linalg.eigvalsh(_sdp_matrix(blk, x))
            record(f"block {pos} matrix cone", float(sigma[-1]))
        elif isinstance(blk, SemiInfinite):
            worst = max(ex.eval_value(blk.g, np.concatenate([x, [t]]))
                        for t in blk.grid)
            record(f"block {pos} semi-infinite", worst)
    A = P.set_A
    for i in range(P.d):
        if A.lb[i] != -math.inf:
            record(f"lower bound on x({i + 1})", A.lb[i] - x[i])
        if A.ub[i] != math.inf:
            record(f"upper bound on x({i + 1})", x[i] - A.ub[i])
    for r, (row, rhs) in enumerate(zip(A.E, A.e)):
        record(f"affine equality {r + 1}", abs(float(np.dot(row, x)) - rhs))
    worst = max((amt for _, amt in bad), default=0.0)
    return FeasibilityReport(feasible=not bad, max_violation=worst, violations=bad)


def subdifferential_generators(P: Problem, x, active_scenarios) -> list[np.ndarray]:
    """One gradient per active scenario, signed for Chebyshev problems.

    The order matches the active scenario list, so provenance stays aligned.
    """
    x = np.asarray(x, dtype=float)
    out = []
    for scen in active_scenarios:
        grad = ex.eval2(P.scenarios[scen.index - 1], x).grad
        out.append(scen.sign * grad if P.kind == "chebyshev" else grad)
    return out


def squared_generators(P: Problem, x, active_scenarios) -> list[np.ndarray]:
    """Generators of the squared-deviation formulation: (f - psi) * grad f."""
    if P.kind != "chebyshev":
        raise ValueError("squared generators are defined for chebyshev problems")
    x = np.asarray(x, dtype=float)
    out = []
    for scen in active_scenarios:
        dual = ex.eval2(P.scenarios[scen.index - 1], x)
        dev = dual.value - P.psi[scen.index - 1]
        out.append(dev * dual.grad)
    return out


# ---------------------------------------------------------------------------
# problem file format (docs/problem-format.md)
# ---------------------------------------------------------------------------


class ProblemFormatError(Exception):
    def __init__(self, message, section=None, line=None):
        self.section = section
        self.line = line
        where = ""
        if section is not None:
            where = f" in [{section}]"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{message}{where}")


def _split_kv(text: str, section: str, line: int):
    """Split 'key=value key2="quoted value"' pairs."""
    pairs = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and (text[j].isalnum() or text[j] in "_()," ):
            j += 1
        key = text[i:j]
        if not key or j >= n or text[j] != "=":
            raise ProblemFormatError(f"expected key=value, got {text[i:]!r}",
                                     section, line)
        j += 1
        if j < n and text[j] == '"':
            k = text.find('"', j + 1)
            if k < 0:
                raise ProblemFormatError("unterminated quoted value", section, line)
            value = text[j + 1:k]
            i = k + 1
        else:
            k = j
            while k < n and not text[k].isspace():
                k += 1
            value = text[j:k]
            i = k
        pairs.append((key, value, line))
    return pairs


def _parse_sections(text: str):
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            end = stripped.find("]")
            if end < 0:
                raise ProblemFormatError("unterminated section header",
                                         line=lineno)
            name = stripped[1:end].strip()
            current = {"name": name, "line": lineno, "pairs": []}
            sections.append(current)
            rest = stripped[end + 1:]
            current["pairs"].extend(_split_kv(rest, name, lineno))
        else:
            if current is None:
                raise ProblemFormatError("content before first section",
                                         line=lineno)
            current["pairs"].extend(
                _split_kv(stripped, current["name"], lineno))
    return sections


def _parse_number(value: str, section, line) -> float:
    v = value.strip().lower()
    if v in ("inf", "+inf"):
        return math.inf
    if v == "-inf":
        return -math.inf
    try:
        return float(value)
    except ValueError:
        raise ProblemFormatError(f"not a number: {value!r}", section, line)


def _parse_expr(text_value, d, section, line, params=()):
    try:
        return ex.parse(text_value, d, params)
    except ex.ExprError as err:
        raise ProblemFormatError(f"bad expression {text_value!r}: {err}",
                                 section, line)


def load_problem_text(text: str, source: str = "<memory>",
                      tolerances: ToleranceSet | None = None) -> Problem:
    sections = _parse_sections(text)
    if not sections or sections[0]["name"] != "problem":
        raise ProblemFormatError("file must start with a [problem] section",
                                 line=1)
    head = dict((k, (v, ln)) for k, v, ln in sections[0]["pairs"])
    if "dim" not in head:
        raise ProblemFormatError("missing dim", "problem", sections[0]["line"])
    dim_value, dim_line = head["dim"]
    d = int(_parse_number(dim_value, "problem", dim_line))
    kind = head.get("kind", ("minimax", 0))[0]

    scenarios, psi = [], []
    blocks = []
    lb = [-math.inf] * d
    ub = [math.inf] * d
    eq_rows, eq_rhs = [], []

    for sec in sections[1:]:
        name, line, pairs = sec["name"], sec["line"], sec["pairs"]
        if name == "scenario":
            f_txt = None
            target = None
            for k, v, ln in pairs:
                if k == "f":
                    f_txt = (v, ln)
                elif k == "psi":
                    target = _parse_number(v, name, ln)
                else:
                    raise ProblemFormatError(f"unknown key {k!r}", name, ln)
            if f_txt is None:
                raise ProblemFormatError("scenario needs f=...", name, line)
            scenarios.append(_parse_expr(f_txt[0], d, name, f_txt[1]))
            psi.append(target)
        elif name == "nlp_ineq":
            gs = [v for k, v, ln in pairs if k == "g"]
            if not gs or len(gs) != len(pairs):
                raise ProblemFormatError("nlp_ineq takes only g=... entries",
                                         name, line)
            blocks.append(NlpIneq(tuple(_parse_expr(g, d, name, line)
                                        for g in gs)))
        elif name == "nlp_eq":
            bs = [v for k, v, ln in pairs if k == "b"]
            if not bs or len(bs) != len(pairs):
                raise ProblemFormatError("nlp_eq takes only b=... entries",
                                         name, line)
            blocks.append(NlpEq(tuple(_parse_expr(b, d, name, line)
                                      for b in bs)))
        elif name == "soc":
            comps = {}
            for k, v, ln in pairs:
                if not (k.startswith("g") and k[1:].isdigit()):
                    raise ProblemFormatError(f"unknown key {k!r}", name, ln)
                comps[int(k[1:])] = (v, ln)
            if not comps or sorted(comps) != list(range(1, len(comps) + 1)):
                raise ProblemFormatError("soc needs g1..gk consecutively",
                                         name, line)
            if len(comps) < 2:
                raise ProblemFormatError("soc needs at least g1 and g2",
                                         name, line)
            gs = tuple(_parse_expr(comps[i][0], d, name, comps[i][1])
                       for i in range(1, len(comps) + 1))
            blocks.append(Soc(gs))
        elif name == "sdp":
            size = None
            entries = {}
            for k, v, ln in pairs:
                if k == "size":
                    size = int(_parse_number(v, name, ln))
                elif k.startswith("entry(") and k.endswith(")"):
                    try:
                        i_s, j_s = k[6:-1].split(",")
                        entries[(int(i_s), int(j_s))] = (v, ln)
                    except ValueError:
                        raise ProblemFormatError(f"bad entry key {k!r}", name, ln)
                else:
                    raise ProblemFormatError(f"unknown key {k!r}", name, ln)
            if size is None or size < 1:
                raise ProblemFormatError("sdp needs size=l", name, line)
            rows = [[None] * size for _ in range(size)]
            for (i, j), (v, ln) in entries.items():
                if not (1 <= i <= size and 1 <= j <= size):
                    raise ProblemFormatError(f"entry({i},{j}) outside matrix",
                                             name, ln)
                node = _parse_expr(v, d, name, ln)
                rows[i - 1][j - 1] = node
                rows[j - 1][i - 1] = node
            for i in range(size):
                for j in range(size):
                    if rows[i][j] is None:
                        if i <= j:
                            raise ProblemFormatError(
                                f"missing entry({i + 1},{j + 1})", name, line)
            blocks.append(Sdp(tuple(tuple(r) for r in rows)))
        elif name == "semiinf":
            g_txt = grid_txt = None
            for k, v, ln in pairs:
                if k == "g":
                    g_txt = (v, ln)
                elif k == "grid":
                    grid_txt = (v, ln)
                else:
                    raise ProblemFormatError(f"unknown key {k!r}", name, ln)
            if g_txt is None or grid_txt is None:
                raise ProblemFormatError("semiinf needs g=... and grid=a:b:n",
                                         name, line)
            parts = grid_txt[0].split(":")
            if len(parts) != 3:
                raise ProblemFormatError("grid must be a:b:n", name, grid_txt[1])
            a = _parse_number(parts[0], name, grid_txt[1])
            b = _parse_number(parts[1], name, grid_txt[1])
            n = int(_parse_number(parts[2], name, grid_txt[1]))
            if n < 1 or (n == 1 and a != b) or b < a:
                raise ProblemFormatError("grid must satisfy a <= b, n >= 1",
                                         name, grid_txt[1])
            grid = tuple(np.linspace(a, b, n).tolist())
            g = _parse_expr(g_txt[0], d, name, g_txt[1], params=("t",))
            blocks.append(SemiInfinite(g, grid))
        elif name == "set":
            for k, v, ln in pairs:
                if k in ("lb", "ub"):
                    vals = [_parse_number(s, name, ln) for s in v.split(",")]
                    if len(vals) != d:
                        raise ProblemFormatError(
                            f"{k} needs {d} comma-separated values", name, ln)
                    if k == "lb":
                        lb = vals
                    else:
                        ub = vals
                elif k == "eq":
                    if "=" not in v:
                        raise ProblemFormatError("eq must look like "
                                                 "\"<expr> = <number>\"", name, ln)
                    lhs_txt, rhs_txt = v.rsplit("=", 1)
                    rhs = _parse_number(rhs_txt, name, ln)
                    node = _parse_expr(lhs_txt, d, name, ln)
                    row = _linear_row(node, d, name, ln)
                    eq_rows.append(tuple(row))
                    eq_rhs.append(rhs)
                else:
                    raise ProblemFormatError(f"unknown key {k!r}", name, ln)
        else:
            raise ProblemFormatError(f"unknown section [{name}]", name, line)

    if not scenarios:
        raise ProblemFormatError("no [scenario] sections", "problem", 1)
    if kind == "chebyshev":
        if any(t is None for t in psi):
            raise ProblemFormatError("chebyshev scenarios all need psi=...",
                                     "scenario", 1)
        psi_t = tuple(psi)
    else:
        if any(t is not None for t in psi):
            raise ProblemFormatError("psi given but kind is not chebyshev",
                                     "scenario", 1)
        psi_t = ()
    try:
        return Problem(
            d=d, kind=kind, scenarios=tuple(scenarios), psi=psi_t,
            blocks=tuple(blocks),
            set_A=PolyhedralSet(tuple(lb), tuple(ub),
                                tuple(eq_rows), tuple(eq_rhs)),
            tolerances=tolerances or ToleranceSet(), source=source)
    except ValueError as err:
        raise ProblemFormatError(str(err), "problem", 1)


def _linear_row(node: ex.Expression, d: int, section, line):
    """Coefficients of an affine expression; rejects nonlinear eq= rows."""
    base = np.zeros(d)
    try:
        dual0 = ex.eval2(node, base)
        row = dual0.grad
        if np.max(np.abs(dual0.hess)) > 0:
            raise ProblemFormatError("eq rows must be affine", section, line)
        probe = ex.eval2(node, np.ones(d))
        if np.max(np.abs(probe.grad - row)) > 1e-12:
            raise ProblemFormatError("eq rows must be affine", section, line)
        if abs(dual0.value) > 0:
            # constant offsets fold into the right-hand side
            raise ProblemFormatError(
                "write constants on the right-hand side of eq", section, line)
    except ex.DomainError:
        raise ProblemFormatError("eq rows must be affine", section, line)
    if np.all(row == 0):
        raise ProblemFormatError("eq row has no variables", section, line)
    return row.tolist()


def load_problem_file(path, tolerances: ToleranceSet | None = None) -> Problem:
    with open(path, "r", encoding="utf-8") as fh:
        return load_problem_text(fh.read(), source=str(path),
                                 tolerances=tolerances)


def _fmt_num(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return repr(float(v))


def problem_to_text(P: Problem) -> str:
    """Serialize back to the sectioned text format (used by discretize)."""
    lines = [f"[problem] dim={P.d} kind={P.kind}"]
    for i, f in enumerate(P.scenarios):
        entry = f'[scenario] f="{ex.to_string(f)}"'
        if P.kind == "chebyshev":
            entry += f" psi={_fmt_num(P.psi[i])}"
        lines.append(entry)
    for blk in P.blocks:
        if isinstance(blk, NlpIneq):
            lines.append("[nlp_ineq] " + " ".join(
                f'g="{ex.to_string(g)}"' for g in blk.g))
        elif isinstance(blk, NlpEq):
            lines.append("[nlp_eq] " + " ".join(
                f'b="{ex.to_string(b)}"' for b in blk.b))
        elif isinstance(blk, Soc):
            lines.append("[soc] " + " ".join(
                f'g{i + 1}="{ex.to_string(g)}"' for i, g in enumerate(blk.g)))
        elif isinstance(blk, Sdp):
            parts = [f"size={blk.size}"]
            for i in range(blk.size):
                for j in range(i, blk.size):
                    parts.append(f'entry({i + 1},{j + 1})='
                                 f'"{ex.to_string(blk.G0[i][j])}"')
            lines.append("[sdp] " + " ".join(parts))
        elif isinstance(blk, SemiInfinite):
            a, b = blk.grid[0], blk.grid[-1]
            lines.append(f'[semiinf] g="{ex.to_string(blk.g)}" '
                         f'grid={_fmt_num(a)}:{_fmt_num(b)}:{len(blk.grid)}')
    A = P.set_A
    set_parts = []
    if any(lo != -math.inf for lo in A.lb):
        set_parts.append('lb="' + ",".join(_fmt_num(v) for v in A.lb) + '"')
    if any(hi != math.inf for hi in A.ub):
        set_parts.append('ub="' + ",".join(_fmt_num(v) for v in A.ub) + '"')
    for row, rhs in zip(A.E, A.e):
        terms = []
        for j, c in enumerate(row):
            if c != 0:
                coef = "" if c == 1 else f"{_fmt_num(c)}*"
                terms.append(f"{coef}x({j + 1})")
        set_parts.append(f'eq="{" + ".join(terms)} = {_fmt_num(rhs)}"')
    if set_parts:
        lines.append("[set] " + " ".join(set_parts))
    return "\n".join(lines) + "\n"
