"""First-order certificates: cadres, alternance, multipliers, penalties.

The determinant test and the positive-combination test are two faces of the
same certificate; both are always computed and cross-checked before a cadre
is reported.  The membership and interior tests run on the finite generator
families; for sampled families (second-order-cone apexes, matrix cones) a
failed search is reported as sampling-limited rather than as a refutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from . import expr as ex
from .geometry import (GeneratorSet, Provenance, SamplingSpec, TangentTester,
                       axis_directions, block_distances, build_generator_set,
                       sdp_entry_grads, sdp_null_directions, soc_jacobian,
                       spectral_data, unit_directions)
from .linkernel import (det, lp_chebyshev_center, lp_membership, rank,
                        simplex_solve, solve_positive_combination)
from .problem import (ActiveSets, NlpEq, NlpIneq, Problem, Sdp, SemiInfinite,
                      Soc, activity, check_feasible, evaluate_objective)

__all__ = [
    "Cadre", "AlternanceFailure", "Zbasis", "MultiplierWitness",
    "CombinatorialBudgetExceeded", "NotFeasible",
    "verify_alternance", "find_cadre", "directional_derivative",
    "necessary_check", "sufficient_check",
    "penalty_value", "penalty_subdiff_check",
    "linearized_spot_check", "semiinfinite_discretize",
    "NecessaryReport", "SufficientReport", "PenaltyReport", "SpotCheckReport",
]

DEFAULT_BUDGET = 10 ** 6


class CombinatorialBudgetExceeded(Exception):
    def __init__(self, subsets_tried: int):
        self.subsets_tried = subsets_tried
        super().__init__(f"cadre search budget exhausted after "
                         f"{subsets_tried} subsets")


class NotFeasible(Exception):
    pass


@dataclass(frozen=True)
class Zbasis:
    """d linearly independent padding vectors; canonical basis by default."""

    vectors: tuple

    @staticmethod
    def canonical(d: int) -> "Zbasis":
        return Zbasis(tuple(tuple(row) for row in np.eye(d)))

    def as_arrays(self):
        return [np.asarray(v, dtype=float) for v in self.vectors]


@dataclass
class Cadre:
    """A p-point cadre / alternance certificate.

    vectors[0:k0] come from the objective subdifferential, vectors[k0:i0]
    from the cone-constraint normal cone, vectors[i0:p] from the normal
    cone of the polyhedral set.  multipliers are the positive combination
    weights (first one normalized to 1); determinants are the padded
    d+1 alternating determinant sequence.
    """

    p: int
    k0: int
    i0: int
    flavor: str                  # 'plain' | 'generalised' | 'weak'
    vectors: list
    provenance: list
    multipliers: np.ndarray
    padding: list
    determinants: np.ndarray
    residual: float

    @property
    def complete(self) -> bool:
        return self.p == len(self.vectors[0]) + 1

    def to_json(self):
        return {
            "p": self.p, "k0": self.k0, "i0": self.i0, "flavor": self.flavor,
            "complete": self.complete,
            "vectors": [list(map(float, v)) for v in self.vectors],
            "provenance": [pr.to_json() if isinstance(pr, Provenance) else pr
                           for pr in self.provenance],
            "multipliers": [float(b) for b in self.multipliers],
            "padding": [list(map(float, v)) for v in self.padding],
            "determinants": [float(x) for x in self.determinants],
            "residual": self.residual,
        }


@dataclass
class AlternanceFailure:
    reason: str        # 'RankDeficient'|'SignPatternViolated'|
                       # 'NonzeroTailDeterminant'|'MultiplierMismatch'
    index: int | None = None

    def __str__(self):
        if self.index is None:
            return self.reason
        return f"{self.reason} at s={self.index}"


def verify_alternance(vectors, k0: int | None = None, i0: int | None = None,
                      Z: Zbasis | None = None, eps_det: float = 1e-8,
                      flavor: str = "plain", provenance=None):
    """Check the alternating-determinant conditions for the given vectors.

    Pads with vectors from Z (chosen greedily so the trailing columns stay
    independent), computes the d+1 determinants of the matrices that drop
    one column each, and demands strictly alternating signs through p and
    vanishing determinants beyond.  On success the multipliers recovered by
    Cramer's rule are cross-checked against the positive-combination solve.
    """
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    p = len(vecs)
    if p == 0:
        raise ValueError("need at least one vector")
    d = vecs[0].shape[0]
    if not 1 <= p <= d + 1:
        raise ValueError(f"p must lie in 1..{d + 1}")
    k0 = p if k0 is None else k0
    i0 = p if i0 is None else i0
    if not (1 <= k0 <= p and k0 <= i0 <= p):
        raise ValueError("need 1 <= k0 <= i0 <= p")
    Z = Z or Zbasis.canonical(d)

    # greedy padding keeping V_2..V_{d+1} linearly independent
    tail = vecs[1:]
    padding = []
    for z in Z.as_arrays():
        if len(tail) == d:
            break
        if not tail:
            tail = [z]
            padding.append(z)
            continue
        trial = np.column_stack(tail + [z])
        if rank(trial) == len(tail) + 1:
            tail.append(z)
            padding.append(z)
    if len(tail) != d or rank(np.column_stack(tail)) < d:
        return AlternanceFailure("RankDeficient")

    cols = [vecs[0]] + tail  # V_1 .. V_{d+1}
    deltas = np.empty(d + 1)
    for s in range(d + 1):
        M = np.column_stack([cols[j] for j in range(d + 1) if j != s])
        deltas[s] = det(M)

    scale = max(1.0, float(np.max(np.abs(deltas))))
    thresh = eps_det * scale
    for s in range(p):
        if abs(deltas[s]) <= thresh:
            return AlternanceFailure("SignPatternViolated", s + 1)
        if s > 0 and np.sign(deltas[s]) != -np.sign(deltas[s - 1]):
            return AlternanceFailure("SignPatternViolated", s + 1)
    for s in range(p, d + 1):
        if abs(deltas[s]) > thresh:
            return AlternanceFailure("NonzeroTailDeterminant", s + 1)

    beta = np.array([(-1) ** s * deltas[s] / deltas[0] for s in range(p)])
    beta[0] = 1.0
    combo = solve_positive_combination(vecs)
    if combo is None:
        return AlternanceFailure("MultiplierMismatch")
    denom = np.maximum(np.abs(beta), 1.0)
    if np.max(np.abs(combo - beta) / denom) > 1e-8:
        return AlternanceFailure("MultiplierMismatch")
    residual = float(np.linalg.norm(
        np.column_stack(vecs) @ combo))
    if provenance is None:
        provenance = [Provenance("unspecified")] * p
    return Cadre(p=p, k0=k0, i0=i0, flavor=flavor, vectors=vecs,
                 provenance=list(provenance), multipliers=combo,
                 padding=padding, determinants=deltas, residual=residual)


# ---------------------------------------------------------------------------
# cadre search
# ---------------------------------------------------------------------------

_AUX_PAIR_CAP = 24


def _dedup_push(pool, prov, vec, pr):
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        return
    unit = vec / norm
    for known in pool:
        kn = np.linalg.norm(known)
        if kn > 0 and np.linalg.norm(known / kn - unit) < 1e-12:
            return
    pool.append(vec)
    prov.append(pr)


def _cone_pool(base, base_prov, generalised: bool):
    pool = [np.asarray(v, dtype=float) for v in base]
    prov = list(base_prov)
    if not generalised or len(base) < 2 or len(base) > _AUX_PAIR_CAP:
        return pool, prov
    n = len(base)
    for i, j in combinations(range(n), 2):
        _dedup_push(pool, prov, pool[i] + pool[j],
                    Provenance("aux_sum", detail=(i, j)))
    total = np.sum([np.asarray(v, dtype=float) for v in base], axis=0)
    _dedup_push(pool, prov, total, Provenance("aux_sum", detail=tuple(range(n))))
    return pool, prov


def _greedy_independent(vectors):
    chosen = []
    for v in vectors:
        if len(chosen) == len(v):
            break
        trial = np.column_stack(chosen + [v]) if chosen else np.asarray(
            v, dtype=float).reshape(-1, 1)
        if rank(trial) == len(chosen) + 1:
            chosen.append(np.asarray(v, dtype=float))
    return chosen


def _hull_pool(grads, grads_prov, generalised: bool):
    pool = [np.asarray(v, dtype=float) for v in grads]
    prov = list(grads_prov)
    if not generalised or not pool:
        return pool, prov
    zero = np.zeros_like(pool[0])
    if lp_membership(zero, pool) is None:
        return pool, prov
    S = _greedy_independent(pool)
    if not S:
        return pool, prov
    aux = -np.mean(S, axis=0)
    if np.linalg.norm(aux) < 1e-12:
        return pool, prov
    if lp_membership(aux, pool) is not None:
        _dedup_push(pool, prov, aux, Provenance("aux_hull"))
    return pool, prov


def find_cadre(G: GeneratorSet, flavor: str = "plain", p_min: int = 1,
               p_max: int | None = None, Z: Zbasis | None = None,
               eps_det: float = 1e-8, budget: int = DEFAULT_BUDGET):
    """Search for a cadre over the generator families, smallest p first.

    Subsets are enumerated deterministically: objective gradients first
    (as many as possible), then cone-constraint generators, then
    polyhedral-set generators, each segment in index order.  The
    generalised flavor extends the pools with verified interior points
    (sums of generators within one cone; a checked hull point); the weak
    flavor merges the two cone segments and adds their pairwise sums.
    Returns the first cadre found or None.
    """
    if flavor not in ("plain", "generalised", "weak"):
        raise ValueError(f"unknown flavor {flavor!r}")
    d = G.d
    p_max = d + 1 if p_max is None else min(p_max, d + 1)
    if p_min > p_max:
        return None
    # both relaxed flavors draw the leading segment from the whole
    # subdifferential, so both get the verified hull point
    generalised = flavor in ("generalised", "weak")
    grads, grads_prov = _hull_pool(G.grads_F, G.grads_prov, generalised)
    if not grads:
        return None
    if flavor == "weak":
        merged = list(G.eta) + list(G.nA)
        merged_prov = list(G.eta_prov) + list(G.nA_prov)
        eta_pool, eta_prov = _cone_pool(merged, merged_prov, True)
        na_pool, na_prov = [], []
    else:
        aux = flavor == "generalised"
        eta_pool, eta_prov = _cone_pool(G.eta, G.eta_prov, aux)
        na_pool, na_prov = _cone_pool(G.nA, G.nA_prov, aux)

    tried = 0
    for p in range(p_min, p_max + 1):
        for k0 in range(min(p, len(grads)), 0, -1):
            rest = p - k0
            for e in range(min(rest, len(eta_pool)), -1, -1):
                a = rest - e
                if a > len(na_pool):
                    continue
                for gi in combinations(range(len(grads)), k0):
                    for ei in combinations(range(len(eta_pool)), e):
                        for ai in combinations(range(len(na_pool)), a):
                            tried += 1
                            if tried > budget:
                                raise CombinatorialBudgetExceeded(tried)
                            vecs = ([grads[i] for i in gi]
                                    + [eta_pool[i] for i in ei]
                                    + [na_pool[i] for i in ai])
                            beta = solve_positive_combination(vecs)
                            if beta is None:
                                continue
                            prov = ([grads_prov[i] for i in gi]
                                    + [eta_prov[i] for i in ei]
                                    + [na_prov[i] for i in ai])
                            result = verify_alternance(
                                vecs, k0=k0, i0=k0 + e, Z=Z, eps_det=eps_det,
                                flavor=flavor, provenance=prov)
                            if isinstance(result, Cadre):
                                return result
    return None


# ---------------------------------------------------------------------------
# multiplier reconstruction
# ---------------------------------------------------------------------------


@dataclass
class MultiplierWitness:
    """Structured dual data reassembled from membership-LP weights."""

    alpha: list                  # (scenario_index, sign, weight)
    nlp_ineq: dict               # block -> {constraint: weight}
    nlp_eq: dict                 # block -> {equality: signed weight}
    soc: dict                    # block -> dual vector (length l+1)
    sdp: dict                    # block -> dual matrix (l x l, PSD)
    sdp_gamma: dict              # block -> matrix in the kernel basis
    semi_infinite: dict          # block -> {grid_index: weight}
    nA: list                     # (provenance, weight)
    stationarity_residual: float = math.nan

    def lambda_l1(self) -> float:
        """l1 size of the cone-constraint dual (used as a penalty threshold)."""
        total = 0.0
        for table in self.nlp_ineq.values():
            total += sum(abs(w) for w in table.values())
        for table in self.nlp_eq.values():
            total += sum(abs(w) for w in table.values())
        for vec in self.soc.values():
            total += float(np.linalg.norm(vec))
        for M in self.sdp.values():
            total += float(np.linalg.norm(M, "fro"))
        for table in self.semi_infinite.values():
            total += sum(abs(w) for w in table.values())
        return total

    def to_json(self):
        return {
            "alpha": [{"scenario": s, "sign": sg, "weight": w}
                      for s, sg, w in self.alpha],
            "nlp_ineq": {str(b): {str(i): w for i, w in t.items()}
                         for b, t in self.nlp_ineq.items()},
            "nlp_eq": {str(b): {str(i): w for i, w in t.items()}
                       for b, t in self.nlp_eq.items()},
            "soc": {str(b): list(map(float, v)) for b, v in self.soc.items()},
            "sdp": {str(b): [list(map(float, row)) for row in M]
                    for b, M in self.sdp.items()},
            "semi_infinite": {str(b): {str(i): w for i, w in t.items()}
                              for b, t in self.semi_infinite.items()},
            "nA": [{"prov": pr.to_json(), "weight": w} for pr, w in self.nA],
            "stationarity_residual": self.stationarity_residual,
        }


def _assemble_witness(P: Problem, x, G: GeneratorSet, lam, mu) -> MultiplierWitness:
    alpha = []
    for pr, w in zip(G.grads_prov, lam):
        if w > 0:
            alpha.append((pr.index, pr.sign, float(w)))
    nlp_ineq: dict = {}
    nlp_eq: dict = {}
    soc: dict = {}
    sdp: dict = {}
    sdp_gamma: dict = {}
    semi: dict = {}
    nA = []
    n_eta = len(G.eta)
    for k, w in enumerate(mu):
        if w <= 0:
            continue
        w = float(w)
        if k < n_eta:
            pr = G.eta_prov[k]
            if pr.kind == "nlp_ineq":
                nlp_ineq.setdefault(pr.block, {})
                nlp_ineq[pr.block][pr.index] = \
                    nlp_ineq[pr.block].get(pr.index, 0.0) + w
            elif pr.kind == "nlp_eq":
                nlp_eq.setdefault(pr.block, {})
                nlp_eq[pr.block][pr.index] = \
                    nlp_eq[pr.block].get(pr.index, 0.0) + pr.sign * w
            elif pr.kind == "soc_boundary":
                blk = P.blocks[pr.block]
                vals = np.array([ex.eval_value(g, x) for g in blk.g])
                dual = np.concatenate([[-vals[0]], vals[1:]])
                soc[pr.block] = soc.get(pr.block, np.zeros(len(vals))) + w * dual
            elif pr.kind == "soc_apex":
                v = np.asarray(pr.detail, dtype=float)
                dual = np.concatenate([[-1.0], v])
                soc[pr.block] = soc.get(
                    pr.block, np.zeros(len(v) + 1)) + w * dual
            elif pr.kind == "sdp_null":
                q = np.asarray(pr.detail, dtype=float)
                sdp[pr.block] = sdp.get(
                    pr.block, np.zeros((len(q), len(q)))) + w * np.outer(q, q)
            elif pr.kind == "semi_infinite":
                semi.setdefault(pr.block, {})
                semi[pr.block][pr.index] = \
                    semi[pr.block].get(pr.index, 0.0) + w
        else:
            nA.append((G.nA_prov[k - n_eta], w))
    for b, M in sdp.items():
        spec = spectral_data(P.blocks[b], np.asarray(x, dtype=float),
                             P.tolerances.eps_rank)
        Q0 = spec.null_basis
        sdp_gamma[b] = Q0.T @ M @ Q0 if Q0.shape[1] else np.zeros((0, 0))
    return MultiplierWitness(alpha=alpha, nlp_ineq=nlp_ineq, nlp_eq=nlp_eq,
                             soc=soc, sdp=sdp, sdp_gamma=sdp_gamma,
                             semi_infinite=semi, nA=nA)


def _witness_residual(P: Problem, x, w: MultiplierWitness,
                      squared: bool = False) -> float:
    """Recompute the stationarity residual from the structured duals."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(P.d)
    for scen, sign, weight in w.alpha:
        dual = ex.eval2(P.scenarios[scen - 1], x)
        grad = dual.grad
        if P.kind == "chebyshev":
            grad = ((dual.value - P.psi[scen - 1]) * dual.grad
                    if squared else sign * dual.grad)
        total = total + weight * grad
    for b, table in w.nlp_ineq.items():
        blk = P.blocks[b]
        for i, weight in table.items():
            total = total + weight * ex.eval2(blk.g[i], x).grad
    for b, table in w.nlp_eq.items():
        blk = P.blocks[b]
        for j, weight in table.items():
            total = total + weight * ex.eval2(blk.b[j], x).grad
    for b, dual in w.soc.items():
        J = soc_jacobian(P.blocks[b], x)
        total = total + J.T @ dual
    for b, M in w.sdp.items():
        grads = sdp_entry_grads(P.blocks[b], x)
        total = total + np.einsum("ij,ijk->k", M, grads)
    for b, table in w.semi_infinite.items():
        blk = P.blocks[b]
        for j, weight in table.items():
            t = blk.grid[j]
            total = total + weight * ex.eval2(
                blk.g, np.concatenate([x, [t]])).grad[:P.d]
    for pr, weight in w.nA:
        vec = np.zeros(P.d)
        if pr.kind == "bound":
            vec[pr.index] = float(pr.sign)
        elif pr.kind == "set_eq":
            vec = pr.sign * np.asarray(P.set_A.E[pr.index], dtype=float)
        total = total + weight * vec
    return float(np.linalg.norm(total))


def witness_from_json(data) -> MultiplierWitness:
    """Rebuild a multiplier witness from its JSON form."""
    def _prov(d):
        return Provenance(kind=d["kind"], block=d.get("block"),
                          index=d.get("index"), sign=d.get("sign", 1),
                          detail=tuple(d.get("detail", ())))
    return MultiplierWitness(
        alpha=[(rec["scenario"], rec["sign"], rec["weight"])
               for rec in data["alpha"]],
        nlp_ineq={int(b): {int(i): w for i, w in t.items()}
                  for b, t in data["nlp_ineq"].items()},
        nlp_eq={int(b): {int(i): w for i, w in t.items()}
                for b, t in data["nlp_eq"].items()},
        soc={int(b): np.asarray(v, dtype=float)
             for b, v in data["soc"].items()},
        sdp={int(b): np.asarray(M, dtype=float)
             for b, M in data["sdp"].items()},
        sdp_gamma={},
        semi_infinite={int(b): {int(i): w for i, w in t.items()}
                       for b, t in data["semi_infinite"].items()},
        nA=[(_prov(rec["prov"]), rec["weight"]) for rec in data["nA"]],
        stationarity_residual=data.get("stationarity_residual", math.nan))


def reverify_report(P: Problem, report: dict, eps: float = 1e-8) -> dict:
    """Re-check the witnesses attached to a serialized report.

    Recomputes the cadre combination residual and determinant sequence and
    the multiplier stationarity residual from scratch; used by the JSON
    round-trip tests and by consumers of stored reports."""
    x = np.asarray(report["candidate"], dtype=float)
    out = {"ok": True, "checks": []}

    def _cadre_ok(data):
        vecs = [np.asarray(v, dtype=float) for v in data["vectors"]]
        beta = np.asarray(data["multipliers"], dtype=float)
        resid = float(np.linalg.norm(np.column_stack(vecs) @ beta))
        scale = max(1.0, max(np.linalg.norm(v) for v in vecs))
        again = verify_alternance(vecs, k0=data["k0"], i0=data["i0"],
                                  flavor=data["flavor"])
        dets_match = (isinstance(again, Cadre) and np.allclose(
            again.determinants, data["determinants"], atol=1e-7,
            rtol=1e-7))
        return resid <= eps * scale and dets_match, resid

    nec = report.get("necessary") or {}
    if nec.get("cadre"):
        ok, resid = _cadre_ok(nec["cadre"])
        out["checks"].append({"what": "necessary.cadre", "ok": ok,
                              "residual": resid})
    suf = report.get("sufficient") or {}
    if suf.get("complete_alternance"):
        ok, resid = _cadre_ok(suf["complete_alternance"])
        out["checks"].append({"what": "sufficient.complete_alternance",
                              "ok": ok, "residual": resid})
    if nec.get("multipliers"):
        w = witness_from_json(nec["multipliers"])
        resid = _witness_residual(P, x, w)
        out["checks"].append({"what": "necessary.multipliers",
                              "ok": resid <= 1e-7, "residual": resid})
    fl = report.get("flavor_search") or {}
    if fl.get("cadre"):
        ok, resid = _cadre_ok(fl["cadre"])
        out["checks"].append({"what": "flavor_search.cadre", "ok": ok,
                              "residual": resid})
    out["ok"] = all(c["ok"] for c in out["checks"])
    return out


# ---------------------------------------------------------------------------
# first-order checks
# ---------------------------------------------------------------------------


def directional_derivative(grads, h) -> float:
    h = np.asarray(h, dtype=float)
    return max(float(np.dot(v, h)) for v in grads)


@dataclass
class NecessaryReport:
    feasible: bool
    zero_in_D: bool
    multipliers: MultiplierWitness | None
    cadre: Cadre | None
    agreement: bool
    sampling_limited: bool
    budget_exceeded: bool
    generators: GeneratorSet

    def to_json(self):
        return {
            "feasible": self.feasible,
            "zero_in_D": self.zero_in_D,
            "multipliers": self.multipliers.to_json() if self.multipliers else None,
            "cadre": self.cadre.to_json() if self.cadre else None,
            "agreement": self.agreement,
            "sampling_limited": self.sampling_limited,
            "budget_exceeded": self.budget_exceeded,
        }


def necessary_check(P: Problem, x, sampling: SamplingSpec | None = None,
                    act: ActiveSets | None = None,
                    squared: bool = False,
                    budget: int = DEFAULT_BUDGET) -> NecessaryReport:
    """Membership test 0 in D(x) with multiplier and cadre witnesses."""
    x = np.asarray(x, dtype=float)
    feas = check_feasible(P, x)
    if not feas.feasible:
        raise NotFeasible(f"candidate violates constraints by "
                          f"{feas.max_violation:.3g}")
    act = act or activity(P, x)
    G = build_generator_set(P, x, act, sampling, squared=squared)
    weights = lp_membership(np.zeros(P.d), G.grads_F, list(G.eta) + list(G.nA))
    witness = None
    zero_in_D = weights is not None
    if zero_in_D:
        lam, mu = weights
        witness = _assemble_witness(P, x, G, lam, mu)
        witness.stationarity_residual = _witness_residual(
            P, x, witness, squared=squared)
        if witness.stationarity_residual > 1e-8 * max(
                1.0, max(np.linalg.norm(v) for v in G.grads_F)):
            # never report an unverified witness
            zero_in_D = False
            witness = None
    cadre = None
    budget_exceeded = False
    try:
        cadre = find_cadre(G, "plain", eps_det=P.tolerances.eps_det,
                           budget=budget)
    except CombinatorialBudgetExceeded:
        budget_exceeded = True
    agreement = (cadre is not None) == zero_in_D
    sampling_limited = G.sampled and (not zero_in_D or not agreement)
    return NecessaryReport(feasible=True, zero_in_D=zero_in_D,
                           multipliers=witness, cadre=cadre,
                           agreement=agreement,
                           sampling_limited=sampling_limited,
                           budget_exceeded=budget_exceeded, generators=G)


@dataclass
class SufficientReport:
    zero_in_int_D: bool
    margin: float
    radius: float
    complete_alternance: Cadre | None
    growth_constant_estimate: float | None
    estimate_only: bool
    sampling_limited: bool
    budget_exceeded: bool

    def to_json(self):
        def _num(v):
            return None if v is None else float(v)
        return {
            "zero_in_int_D": self.zero_in_int_D,
            "margin": _num(self.margin),
            "radius": _num(self.radius),
            "complete_alternance": (self.complete_alternance.to_json()
                                    if self.complete_alternance else None),
            "growth_constant_estimate": _num(self.growth_constant_estimate),
            "estimate_only": self.estimate_only,
            "sampling_limited": self.sampling_limited,
            "budget_exceeded": self.budget_exceeded,
        }


def sufficient_check(P: Problem, x, sampling: SamplingSpec | None = None,
                     act: ActiveSets | None = None, squared: bool = False,
                     n_growth_samples: int = 256,
                     budget: int = DEFAULT_BUDGET) -> SufficientReport:
    """Interior test 0 in int D(x) with a certified ball radius.

    The reported radius is margin/sqrt(d): the common margin over the 2d
    signed axis directions spans an l1 ball inside the generated set, and
    that ball contains the Euclidean ball of radius margin/sqrt(d).
    """
    x = np.asarray(x, dtype=float)
    feas = check_feasible(P, x)
    if not feas.feasible:
        raise NotFeasible(f"candidate violates constraints by "
                          f"{feas.max_violation:.3g}")
    act = act or activity(P, x)
    G = build_generator_set(P, x, act, sampling, squared=squared)
    cone = list(G.eta) + list(G.nA)
    interior = lp_chebyshev_center(G.grads_F, cone, d=P.d)
    margin = interior.margin if interior.feasible else 0.0
    radius = 0.0
    if interior.feasible:
        radius = math.inf if math.isinf(margin) else margin / math.sqrt(P.d)
    verdict = interior.feasible and margin > P.tolerances.eps_pos

    complete = None
    budget_exceeded = False
    try:
        complete = find_cadre(G, "generalised", p_min=P.d + 1,
                              eps_det=P.tolerances.eps_det, budget=budget)
    except CombinatorialBudgetExceeded:
        budget_exceeded = True

    growth = _growth_constant_estimate(P, x, G, act, sampling,
                                       n_growth_samples)
    sampling_limited = G.sampled and not verdict
    return SufficientReport(zero_in_int_D=verdict, margin=margin,
                            radius=radius, complete_alternance=complete,
                            growth_constant_estimate=growth,
                            estimate_only=True,
                            sampling_limited=sampling_limited,
                            budget_exceeded=budget_exceeded)


def _growth_constant_estimate(P, x, G, act, sampling, n_samples):
    """Sampled lower-envelope estimate of the linearized growth constant:
    min over sampled linearized-feasible unit h of max <v, h>."""
    rng = np.random.default_rng((sampling.seed if sampling else 0) + 101)
    tester = TangentTester(P, x, act, sampling)
    best = None
    for _ in range(n_samples):
        h = rng.standard_normal(P.d)
        norm = np.linalg.norm(h)
        if norm < 1e-12:
            continue
        h /= norm
        if not tester.accepts(h):
            continue
        val = directional_derivative(G.grads_F, h)
        best = val if best is None else min(best, val)
    return best


# ---------------------------------------------------------------------------
# penalty function
# ---------------------------------------------------------------------------


def penalty_value(P: Problem, x, c: float) -> float:
    """F(x) + c * dist(G(x), K) in the block norms."""
    if c < 0:
        raise ValueError("penalty parameter must be nonnegative")
    x = np.asarray(x, dtype=float)
    F, _ = evaluate_objective(P, x)
    return F + c * float(sum(block_distances(P, x)))


def _penalty_groups(P: Problem, x, act: ActiveSets, sampling: SamplingSpec):
    """Generator groups of the penalty-term subdifferential at a feasible x.

    Each group carries vectors whose convex weights may total at most 1
    (one group per scalar inequality/equality, one per cone block)."""
    x = np.asarray(x, dtype=float)
    groups = []
    for ba, blk in zip(act.blocks, P.blocks):
        if isinstance(blk, NlpIneq):
            for i in ba.active:
                groups.append([ex.eval2(blk.g[i], x).grad])
        elif isinstance(blk, NlpEq):
            for b in blk.b:
                grad = ex.eval2(b, x).grad
                groups.append([grad, -grad])
        elif isinstance(blk, Soc):
            if ba.soc_state == "inactive":
                continue
            J = soc_jacobian(blk, x)
            if ba.soc_state == "boundary":
                vals = ba.soc_value
                dual = np.concatenate([[-vals[0]], vals[1:]])
                norm = np.linalg.norm(dual)
                if norm > 0:
                    groups.append([J.T @ (dual / norm)])
            else:
                vecs = []
                dirs = sampling.extras_for(sampling.soc_extra, ba.position)
                dirs += axis_directions(blk.l)
                dirs += unit_directions(blk.l, sampling.soc_dirs,
                                        sampling.seed + 7 * ba.position + 1)
                for v in dirs:
                    v = np.asarray(v, dtype=float)
                    nv = np.linalg.norm(v)
                    if nv < 1e-12:
                        continue
                    dual = np.concatenate([[-1.0], v / nv]) / math.sqrt(2.0)
                    vecs.append(J.T @ dual)
                if vecs:
                    groups.append(vecs)
        elif isinstance(blk, Sdp):
            spec = spectral_data(blk, x, P.tolerances.eps_rank)
            if spec.null_basis.shape[1] == 0:
                continue
            entry_grads = sdp_entry_grads(blk, x)
            qs = sdp_null_directions(
                spec.null_basis, sampling.sdp_dirs,
                sampling.seed + 7 * ba.position + 3,
                sampling.extras_for(sampling.sdp_extra, ba.position))
            vecs = [np.einsum("i,ijk,j->k", q, entry_grads, q) for q in qs]
            if vecs:
                groups.append(vecs)
        elif isinstance(blk, SemiInfinite):
            vecs = []
            for j in ba.active:
                t = blk.grid[j]
                vecs.append(ex.eval2(
                    blk.g, np.concatenate([x, [t]])).grad[:P.d])
            if vecs:
                groups.append(vecs)
    return groups


@dataclass
class PenaltyReport:
    c: float
    value: float
    zero_in_subdiff: bool
    verified_at_2c: bool | None

    def to_json(self):
        return {"c": self.c, "value": self.value,
                "zero_in_subdiff": self.zero_in_subdiff,
                "verified_at_2c": self.verified_at_2c}


def _penalty_inclusion(P, x, c, G, groups) -> bool:
    """Feasibility of 0 = sum(alpha grad_F) + c*sum(group weights) + cone(nA)
    with convex alpha and per-group total weight at most 1."""
    d = P.d
    nh = len(G.grads_F)
    if nh == 0:
        return False
    cols = []
    cols.extend(np.asarray(v, dtype=float) for v in G.grads_F)
    group_spans = []
    for vecs in groups:
        start = len(cols)
        cols.extend(c * np.asarray(v, dtype=float) for v in vecs)
        group_spans.append((start, len(cols)))
    na_start = len(cols)
    cols.extend(np.asarray(v, dtype=float) for v in G.nA)
    n_core = len(cols)
    n_slack = len(group_spans)
    n = n_core + n_slack
    m = d + 1 + len(group_spans)
    A = np.zeros((m, n))
    b = np.zeros(m)
    for j, v in enumerate(cols):
        A[:d, j] = v
    A[d, :nh] = 1.0
    b[d] = 1.0
    for gidx, (s, t) in enumerate(group_spans):
        A[d + 1 + gidx, s:t] = 1.0
        A[d + 1 + gidx, n_core + gidx] = 1.0
        b[d + 1 + gidx] = 1.0
    res = simplex_solve(np.zeros(n), A, b)
    if res.status != "optimal":
        return False
    # never report an inclusion whose weights do not actually reproduce it
    return float(np.linalg.norm(A @ res.x - b)) <= 1e-8 * max(
        1.0, float(np.max(np.abs(A))))


def penalty_subdiff_check(P: Problem, x, c: float,
                          sampling: SamplingSpec | None = None,
                          act: ActiveSets | None = None,
                          check_double: bool = True) -> PenaltyReport:
    """Inclusion 0 in subdiff(F + c dist)(x) + N_A(x) at a feasible x."""
    if c < 0:
        raise ValueError("penalty parameter must be nonnegative")
    x = np.asarray(x, dtype=float)
    feas = check_feasible(P, x)
    if not feas.feasible:
        raise NotFeasible("penalty subdifferential test requires a feasible "
                          "point")
    sampling = sampling or SamplingSpec()
    act = act or activity(P, x)
    G = build_generator_set(P, x, act, sampling)
    groups = _penalty_groups(P, x, act, sampling)
    ok = _penalty_inclusion(P, x, c, G, groups)
    double = None
    if ok and check_double:
        double = _penalty_inclusion(P, x, 2 * c, G, groups)
    return PenaltyReport(c=c, value=penalty_value(P, x, c),
                         zero_in_subdiff=ok, verified_at_2c=double)


# ---------------------------------------------------------------------------
# linearized spot check
# ---------------------------------------------------------------------------


@dataclass
class SpotCheckReport:
    n_samples: int
    n_feasible_directions: int
    min_directional_derivative: float | None
    refuted: bool
    evidence_only: bool

    def to_json(self):
        return {"n_samples": self.n_samples,
                "n_feasible_directions": self.n_feasible_directions,
                "min_directional_derivative": self.min_directional_derivative,
                "refuted": self.refuted,
                "evidence_only": self.evidence_only}


def linearized_spot_check(P: Problem, x, n_samples: int = 500,
                          sampling: SamplingSpec | None = None,
                          seed: int = 0, eps: float = 1e-8) -> SpotCheckReport:
    """Sampled probe of the linearized problem at x.

    A sampled direction with strictly negative directional derivative is a
    sound refutation of first-order necessity; a nonnegative minimum over
    the samples is evidence only.
    """
    x = np.asarray(x, dtype=float)
    act = activity(P, x)
    G = build_generator_set(P, x, act, sampling)
    rng = np.random.default_rng(seed + 211)
    tester = TangentTester(P, x, act, sampling)
    best = None
    kept = 0
    for _ in range(n_samples):
        h = rng.standard_normal(P.d)
        norm = np.linalg.norm(h)
        if norm < 1e-12:
            continue
        h /= norm
        if not tester.accepts(h):
            continue
        kept += 1
        val = directional_derivative(G.grads_F, h)
        best = val if best is None else min(best, val)
    refuted = best is not None and best < -eps
    return SpotCheckReport(n_samples=n_samples, n_feasible_directions=kept,
                           min_directional_derivative=best, refuted=refuted,
                           evidence_only=not refuted)


# ---------------------------------------------------------------------------
# semi-infinite discretization
# ---------------------------------------------------------------------------


def semiinfinite_discretize(P: Problem, x):
    """Replace each semi-infinite block by plain inequalities at its active
    grid points (at most d+1 per block, largest gradient norm first on
    overflow).  Returns (problem, actions) where actions records dropped
    and capped blocks."""
    x = np.asarray(x, dtype=float)
    act = activity(P, x)
    new_blocks = []
    actions = []
    for ba, blk in zip(act.blocks, P.blocks):
        if not isinstance(blk, SemiInfinite):
            new_blocks.append(blk)
            continue
        if not ba.active:
            actions.append((ba.position, "dropped", []))
            continue
        chosen = list(ba.active)
        capped = False
        if len(chosen) > P.d + 1:
            norms = []
            for j in chosen:
                t = blk.grid[j]
                g = ex.eval2(blk.g, np.concatenate([x, [t]])).grad[:P.d]
                norms.append(float(np.linalg.norm(g)))
            order = sorted(range(len(chosen)),
                           key=lambda k: (-norms[k], chosen[k]))
            chosen = sorted(chosen[k] for k in order[:P.d + 1])
            capped = True
        exprs = tuple(ex.substitute(blk.g, P.d + 1, blk.grid[j])
                      for j in chosen)
        new_blocks.append(NlpIneq(exprs))
        actions.append((ba.position, "capped" if capped else "kept",
                        [blk.grid[j] for j in chosen]))
    Q = replace(P, blocks=tuple(new_blocks), source=P.source + "#discretized")
    return Q, actions
