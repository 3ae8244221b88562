"""Second-order certificates: scenario-weight multipliers, Lagrangian
Hessians, and sampled quadratic-form tests over the critical cone.

Curvature corrections vanish for polyhedral cone blocks, so the quadratic
form alone decides necessity there; with second-order-cone or matrix
blocks present the correction is omitted and a negative form no longer
refutes, which the reports flag explicitly.  Positivity of the form on the
critical cone is sufficient regardless of the cone types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import expr as ex
from .firstorder import (MultiplierWitness, NecessaryReport,
                         directional_derivative)
from .geometry import (SamplingSpec, TangentTester, build_generator_set,
                       sdp_entry_grads, soc_jacobian)
from .linkernel import rank
from .problem import NlpEq, NlpIneq, Problem, SemiInfinite, activity

__all__ = [
    "DDMultiplierSet", "HessianBundle", "CriticalConeSample", "EmptySet",
    "dd_multipliers", "hessian_bundle", "critical_cone_sample",
    "second_order_necessary", "second_order_sufficient",
    "SecondOrderReport", "MultiplierVertices", "multiplier_vertices",
]


class EmptySet(Exception):
    """The scenario-weight polytope for the given dual data is empty."""


@dataclass
class DDMultiplierSet:
    """Polytope of convex scenario weights stationary for fixed duals.

    ``vertices`` lists weight vectors over the active scenarios (signed
    scenarios for Chebyshev problems, where the weights apply to the signed
    gradients and sum to one in absolute value)."""

    scenarios: list          # (index, sign) pairs, aligned with weights
    vertices: list           # arrays of convex weights
    interior: np.ndarray

    def to_json(self):
        return {"scenarios": [[s, sg] for s, sg in self.scenarios],
                "vertices": [list(map(float, v)) for v in self.vertices],
                "interior": list(map(float, self.interior))}


def _polytope_vertices(Aeq, beq, n):
    """Vertices of {w >= 0 : Aeq w = beq} by basic-solution enumeration.

    Supports of every size up to min(m, n) are tried, so vertices of
    degenerate systems (dependent equality rows) are not missed."""
    m = Aeq.shape[0]
    verts = []
    scale = max(1.0, float(np.linalg.norm(beq)))
    for size in range(0, min(m, n) + 1):
        for support in combinations(range(n), size):
            B = Aeq[:, support] if support else np.zeros((m, 0))
            if support and rank(B) < len(support):
                continue
            if support:
                sol, *_ = np.linalg.lstsq(B, beq, rcond=None)
            else:
                sol = np.zeros(0)
            full = np.zeros(n)
            full[list(support)] = sol
            if np.any(full < -1e-9):
                continue
            if np.linalg.norm(Aeq @ full - beq) > 1e-8 * scale:
                continue
            full = np.maximum(full, 0.0)
            if not any(np.linalg.norm(full - v) < 1e-8 for v in verts):
                verts.append(full)
    return verts


def dd_multipliers(P: Problem, x, witness: MultiplierWitness,
                   sampling: SamplingSpec | None = None) -> DDMultiplierSet:
    """All convex scenario weights that make the weighted gradient cancel
    the fixed cone-constraint dual inside the polyhedral normal cone."""
    x = np.asarray(x, dtype=float)
    act = activity(P, x)
    G = build_generator_set(P, x, act, sampling)
    m = len(G.grads_F)
    dual_pull = _dual_gradient_pull(P, x, witness)
    # Sum_s w_s grad_s + dual_pull + Sum_k nu_k nA_k = 0, w in simplex, nu >= 0
    n = m + len(G.nA)
    Aeq = np.zeros((P.d + 1, n))
    for j, g in enumerate(G.grads_F):
        Aeq[:P.d, j] = g
    for j, v in enumerate(G.nA):
        Aeq[:P.d, m + j] = v
    Aeq[P.d, :m] = 1.0
    beq = np.concatenate([-dual_pull, [1.0]])
    verts_full = _polytope_vertices(Aeq, beq, n)
    if not verts_full:
        raise EmptySet("no scenario weights are stationary for these duals")
    verts = []
    for v in verts_full:
        w = v[:m]
        if not any(np.linalg.norm(w - u) < 1e-9 for u in verts):
            verts.append(w)
    interior = np.mean(verts, axis=0)
    scen = [(s.index, s.sign) for s in act.scenarios]
    return DDMultiplierSet(scenarios=scen, vertices=verts, interior=interior)


def _dual_gradient_pull(P: Problem, x, w: MultiplierWitness) -> np.ndarray:
    """Gradient contribution <duals, DG(x)> of the stored cone duals."""
    total = np.zeros(P.d)
    for b, table in w.nlp_ineq.items():
        blk = P.blocks[b]
        for i, weight in table.items():
            total += weight * ex.eval2(blk.g[i], x).grad
    for b, table in w.nlp_eq.items():
        blk = P.blocks[b]
        for j, weight in table.items():
            total += weight * ex.eval2(blk.b[j], x).grad
    for b, dual in w.soc.items():
        total += soc_jacobian(P.blocks[b], x).T @ dual
    for b, M in w.sdp.items():
        total += np.einsum("ij,ijk->k", M, sdp_entry_grads(P.blocks[b], x))
    for b, table in w.semi_infinite.items():
        blk = P.blocks[b]
        for j, weight in table.items():
            t = blk.grid[j]
            total += weight * ex.eval2(blk.g,
                                       np.concatenate([x, [t]])).grad[:P.d]
    return total


@dataclass
class HessianBundle:
    matrix: np.ndarray
    scenario_part: np.ndarray
    constraint_part: np.ndarray
    block_tags: list

    def to_json(self):
        return {"matrix": [list(map(float, r)) for r in self.matrix],
                "block_tags": self.block_tags}


def hessian_bundle(P: Problem, x, witness: MultiplierWitness,
                   alpha, scenarios=None) -> HessianBundle:
    """Hessian of the weighted Lagrangian: scenario-weighted objective
    Hessians plus the second derivative of the dual pairing.

    ``alpha`` are weights over ``scenarios`` ((index, sign) pairs,
    defaulting to the witness's own support order)."""
    x = np.asarray(x, dtype=float)
    if scenarios is None:
        scenarios = [(s, sg) for s, sg, _ in witness.alpha]
    scen_part = np.zeros((P.d, P.d))
    for (idx, sign), w in zip(scenarios, alpha):
        hess = ex.eval2(P.scenarios[idx - 1], x).hess
        if P.kind == "chebyshev":
            hess = sign * hess
        scen_part = scen_part + w * hess
    cons_part = np.zeros((P.d, P.d))
    tags = []
    for b, table in witness.nlp_ineq.items():
        blk = P.blocks[b]
        for i, weight in table.items():
            cons_part = cons_part + weight * ex.eval2(blk.g[i], x).hess
        tags.append({"block": b, "kind": "nlp_ineq"})
    for b, table in witness.nlp_eq.items():
        blk = P.blocks[b]
        for j, weight in table.items():
            cons_part = cons_part + weight * ex.eval2(blk.b[j], x).hess
        tags.append({"block": b, "kind": "nlp_eq"})
    for b, dual in witness.soc.items():
        blk = P.blocks[b]
        for comp, lam in enumerate(dual):
            if lam != 0.0:
                cons_part = cons_part + lam * ex.eval2(blk.g[comp], x).hess
        tags.append({"block": b, "kind": "soc"})
    for b, M in witness.sdp.items():
        blk = P.blocks[b]
        n = blk.size
        for i in range(n):
            for j in range(i, n):
                w = M[i, j] * (1.0 if i == j else 2.0)
                if w != 0.0:
                    cons_part = cons_part + w * ex.eval2(blk.G0[i][j], x).hess
        tags.append({"block": b, "kind": "sdp"})
    for b, table in witness.semi_infinite.items():
        blk = P.blocks[b]
        for j, weight in table.items():
            t = blk.grid[j]
            full = ex.eval2(blk.g, np.concatenate([x, [t]])).hess
            cons_part = cons_part + weight * full[:P.d, :P.d]
        tags.append({"block": b, "kind": "semi_infinite"})
    return HessianBundle(matrix=scen_part + cons_part,
                         scenario_part=scen_part,
                         constraint_part=cons_part, block_tags=tags)


# ---------------------------------------------------------------------------
# multiplier-set exploration
# ---------------------------------------------------------------------------


@dataclass
class MultiplierVertices:
    """Joint (dual, scenario weight) vertices.  Exhaustive for problems
    whose blocks are all polyhedral; otherwise the single reconstructed
    witness, flagged partial."""

    pairs: list            # (MultiplierWitness, alpha array, scenario list)
    exhaustive: bool


def _all_polyhedral(P: Problem) -> bool:
    return all(isinstance(b, (NlpIneq, NlpEq, SemiInfinite)) for b in P.blocks)


def multiplier_vertices(P: Problem, x, report: NecessaryReport,
                        sampling: SamplingSpec | None = None) -> MultiplierVertices:
    from .firstorder import _assemble_witness, _witness_residual
    x = np.asarray(x, dtype=float)
    G = report.generators
    scen = [(pr.index, pr.sign) for pr in G.grads_prov]
    if not _all_polyhedral(P):
        w = report.multipliers
        alpha = np.zeros(len(scen))
        for s, sg, weight in w.alpha:
            for j, (idx, sign) in enumerate(scen):
                if idx == s and sign == sg:
                    alpha[j] = weight
                    break
        return MultiplierVertices(pairs=[(w, alpha, scen)], exhaustive=False)
    # joint polytope over (alpha, cone weights, nA weights)
    cols = list(G.grads_F) + list(G.eta) + list(G.nA)
    n = len(cols)
    m = len(G.grads_F)
    Aeq = np.zeros((P.d + 1, n))
    for j, v in enumerate(cols):
        Aeq[:P.d, j] = v
    Aeq[P.d, :m] = 1.0
    beq = np.zeros(P.d + 1)
    beq[P.d] = 1.0
    verts = _polytope_vertices(Aeq, beq, n)
    pairs = []
    for v in verts:
        w = _assemble_witness(P, x, G, v[:m], v[m:])
        w.stationarity_residual = _witness_residual(P, x, w)
        if w.stationarity_residual > 1e-7:
            continue
        pairs.append((w, v[:m].copy(), scen))
    if not pairs and report.multipliers is not None:
        w = report.multipliers
        alpha = np.zeros(len(scen))
        for s, sg, weight in w.alpha:
            for j, (idx, sign) in enumerate(scen):
                if idx == s and sign == sg:
                    alpha[j] = weight
                    break
        pairs = [(w, alpha, scen)]
    return MultiplierVertices(pairs=pairs, exhaustive=bool(pairs))


# ---------------------------------------------------------------------------
# critical-cone sampling and the quadratic-form tests
# ---------------------------------------------------------------------------


@dataclass
class CriticalConeSample:
    """Unit directions that passed all three criticality tests: linearized
    feasibility of the polyhedral set, linearized feasibility of the cone
    blocks, and a directional derivative within eps of zero."""

    directions: list
    eps_crit: float
    n_candidates: int


def critical_cone_sample(P: Problem, x, first: NecessaryReport,
                         n_dirs: int = 512,
                         sampling: SamplingSpec | None = None,
                         seed: int = 0,
                         eps_crit: float = 1e-8) -> CriticalConeSample:
    """Public entry for the sampled critical cone at a certified point."""
    act = activity(P, np.asarray(x, dtype=float))
    dirs = _critical_directions(P, x, first.generators, act,
                                sampling or SamplingSpec(), n_dirs, seed,
                                eps_crit)
    return CriticalConeSample(directions=dirs, eps_crit=eps_crit,
                              n_candidates=n_dirs + 2 * P.d)


def _critical_directions(P: Problem, x, G, act, sampling, n_dirs, seed,
                         eps_crit):
    """Unit directions passing the linearized feasibility and zero-slope
    tests.  Random samples are augmented with canonical axes and with a
    basis of the equality subspace where every active gradient is flat."""
    d = P.d
    rng = np.random.default_rng(seed + 307)
    candidates = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        candidates.append(e)
        candidates.append(-e)
    rows = [np.asarray(v, dtype=float) for v in G.grads_F]
    rows += [np.asarray(v, dtype=float) for v in G.eta]
    rows += [np.asarray(v, dtype=float) for v in G.nA]
    if rows:
        M = np.vstack(rows)
        _, s, Vt = np.linalg.svd(M)
        null = Vt[int(np.sum(s > 1e-10)):]
        for row in null:
            candidates.append(row)
            candidates.append(-row)
    for _ in range(n_dirs):
        candidates.append(rng.standard_normal(d))
    tester = TangentTester(P, x, act, sampling)
    out = []
    for h in candidates:
        norm = np.linalg.norm(h)
        if norm < 1e-12:
            continue
        h = h / norm
        if any(np.linalg.norm(h - u) < 1e-9 for u in out):
            continue
        if not tester.accepts(h):
            continue
        if abs(directional_derivative(G.grads_F, h)) > eps_crit:
            continue
        out.append(h)
    return out


@dataclass
class SecondOrderReport:
    mode: str                      # 'necessary' | 'sufficient'
    applicable: bool
    refuted: bool
    passed: bool
    critical_cone_trivial: bool
    conservative_refutation_only: bool
    multiplier_set_exhaustive: bool
    n_directions: int
    worst_value: float | None
    witness_direction: list | None
    notes: list

    def to_json(self):
        return {"mode": self.mode, "applicable": self.applicable,
                "refuted": self.refuted, "passed": self.passed,
                "critical_cone_trivial": self.critical_cone_trivial,
                "conservative_refutation_only":
                    self.conservative_refutation_only,
                "multiplier_set_exhaustive": self.multiplier_set_exhaustive,
                "n_directions": self.n_directions,
                "worst_value": self.worst_value,
                "witness_direction": self.witness_direction,
                "notes": self.notes}


def _interior_of_A(P: Problem, x) -> bool:
    A = P.set_A
    x = np.asarray(x, dtype=float)
    if A.E:
        return False
    for i in range(P.d):
        if A.lb[i] != -math.inf and x[i] - A.lb[i] <= P.tolerances.eps_feas:
            return False
        if A.ub[i] != math.inf and A.ub[i] - x[i] <= P.tolerances.eps_feas:
            return False
    return True


def second_order_necessary(P: Problem, x, first: NecessaryReport,
                           n_dirs: int = 512,
                           sampling: SamplingSpec | None = None,
                           seed: int = 0,
                           eps_crit: float = 1e-8) -> SecondOrderReport:
    """Sampled test: along every critical direction some multiplier pair
    must give a nonnegative quadratic form (polyhedral blocks only; with
    curved blocks a negative form cannot refute and is only reported)."""
    x = np.asarray(x, dtype=float)
    notes = []
    if not _interior_of_A(P, x):
        return SecondOrderReport(
            mode="necessary", applicable=False, refuted=False, passed=False,
            critical_cone_trivial=False, conservative_refutation_only=True,
            multiplier_set_exhaustive=False, n_directions=0, worst_value=None,
            witness_direction=None,
            notes=["candidate sits on the boundary of the polyhedral set; "
                   "the necessary test is skipped there"])
    if not first.zero_in_D or first.multipliers is None:
        raise ValueError("second-order tests need a successful first-order "
                         "necessary check")
    act = activity(P, x)
    G = first.generators
    sampling = sampling or SamplingSpec()
    verts = multiplier_vertices(P, x, first, sampling)
    polyhedral = _all_polyhedral(P)
    dirs = _critical_directions(P, x, G, act, sampling, n_dirs, seed, eps_crit)
    if not dirs:
        return SecondOrderReport(
            mode="necessary", applicable=True, refuted=False, passed=True,
            critical_cone_trivial=True,
            conservative_refutation_only=not polyhedral,
            multiplier_set_exhaustive=verts.exhaustive,
            n_directions=0, worst_value=None, witness_direction=None,
            notes=["no nonzero critical directions found; the test is "
                   "vacuously satisfied"])
    bundles = [(hessian_bundle(P, x, w, alpha, scen), w)
               for w, alpha, scen in verts.pairs]
    worst = math.inf
    witness_dir = None
    for h in dirs:
        sup = max(float(h @ B.matrix @ h) for B, _ in bundles)
        if sup < worst:
            worst = sup
            witness_dir = h
    refuted = polyhedral and verts.exhaustive and worst < -eps_crit
    if not polyhedral:
        notes.append("curved cone blocks present: the omitted curvature "
                     "term could rescue a negative form, so no refutation "
                     "is drawn")
    return SecondOrderReport(
        mode="necessary", applicable=True, refuted=refuted,
        passed=worst >= -eps_crit, critical_cone_trivial=False,
        conservative_refutation_only=not polyhedral,
        multiplier_set_exhaustive=verts.exhaustive,
        n_directions=len(dirs), worst_value=float(worst),
        witness_direction=None if witness_dir is None else witness_dir.tolist(),
        notes=notes)


def second_order_sufficient(P: Problem, x, first: NecessaryReport,
                            n_dirs: int = 512,
                            sampling: SamplingSpec | None = None,
                            seed: int = 0, eps_crit: float = 1e-8,
                            eps_pos: float | None = None) -> SecondOrderReport:
    """Sampled sufficiency: every sampled critical direction must admit a
    multiplier pair with strictly positive quadratic form.  Sampling cannot
    prove positivity over the whole cone, so a pass is labelled sampled."""
    x = np.asarray(x, dtype=float)
    if not first.zero_in_D or first.multipliers is None:
        raise ValueError("second-order tests need a successful first-order "
                         "necessary check")
    eps_pos = P.tolerances.eps_pos if eps_pos is None else eps_pos
    act = activity(P, x)
    G = first.generators
    sampling = sampling or SamplingSpec()
    verts = multiplier_vertices(P, x, first, sampling)
    dirs = _critical_directions(P, x, G, act, sampling, n_dirs, seed, eps_crit)
    notes = ["pass is over sampled directions only; it cannot certify the "
             "full critical cone"]
    if not _all_polyhedral(P):
        notes.append("curvature terms are nonpositive here, so a positive "
                     "form without them implies the corrected condition for "
                     "second-order-regular cones")
    if not dirs:
        return SecondOrderReport(
            mode="sufficient", applicable=True, refuted=False, passed=True,
            critical_cone_trivial=True, conservative_refutation_only=False,
            multiplier_set_exhaustive=verts.exhaustive, n_directions=0,
            worst_value=None, witness_direction=None,
            notes=notes + ["critical cone sampling found only the origin"])
    bundles = [(hessian_bundle(P, x, w, alpha, scen), w)
               for w, alpha, scen in verts.pairs]
    worst = math.inf
    witness_dir = None
    all_pass = True
    for h in dirs:
        best = max(float(h @ B.matrix @ h) for B, _ in bundles)
        if best < worst:
            worst = best
            witness_dir = h
        if best <= eps_pos:
            all_pass = False
    return SecondOrderReport(
        mode="sufficient", applicable=True, refuted=not all_pass,
        passed=all_pass, critical_cone_trivial=False,
        conservative_refutation_only=False,
        multiplier_set_exhaustive=verts.exhaustive,
        n_directions=len(dirs), worst_value=float(worst),
        witness_direction=None if witness_dir is None else witness_dir.tolist(),
        notes=notes)
