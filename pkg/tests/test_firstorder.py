import math

import numpy as np
import pytest

import conecert as cc
from conecert import firstorder as fo
from conecert import registry
from conecert.geometry import GeneratorSet, Provenance, build_generator_set
from conecert.linkernel import lp_membership
from conecert.oracle import hull_membership_bruteforce
from conecert.problem import activity, load_problem_text
from conftest import random_generator_family

SQ2 = math.sqrt(2.0)


def _gen_set(d, hull, cone_eta=(), cone_na=()):
    return GeneratorSet(
        d=d,
        grads_F=[np.asarray(v, dtype=float) for v in hull],
        grads_prov=[Provenance("scenario", index=i + 1)
                    for i in range(len(hull))],
        eta=[np.asarray(v, dtype=float) for v in cone_eta],
        eta_prov=[Provenance("nlp_ineq", 0, i) for i in range(len(cone_eta))],
        nA=[np.asarray(v, dtype=float) for v in cone_na],
        nA_prov=[Provenance("bound", index=i) for i in range(len(cone_na))])


# ---------------------------------------------------------------------------
# verify_alternance fixtures
# ---------------------------------------------------------------------------


def test_verify_dem():
    res = fo.verify_alternance([(5, 1), (-5, 1), (0, -2)], k0=3, i0=3)
    assert isinstance(res, fo.Cadre)
    np.testing.assert_allclose(res.determinants, [10, -10, 10], atol=1e-9)
    assert res.complete


def test_verify_bazaraa():
    res = fo.verify_alternance([(176, 140), (-1, -1), (-2, 1)], k0=1, i0=3)
    assert isinstance(res, fo.Cadre)
    np.testing.assert_allclose(res.determinants, [-3, 456, -36], atol=1e-9)


def test_verify_soc():
    res = fo.verify_alternance(
        [(4, -1), (0, 1), (-1 / SQ2, -3 / SQ2)], k0=1, i0=3)
    assert isinstance(res, fo.Cadre)
    np.testing.assert_allclose(res.determinants,
                               [1 / SQ2, -13 / SQ2, 4.0], atol=1e-9)


def test_verify_sdp():
    res = fo.verify_alternance(
        [(-3, -3, -2), (0, 0, 2), (1, 2, 0), (2, -2, -1)], k0=2, i0=4)
    assert isinstance(res, fo.Cadre)
    np.testing.assert_allclose(res.determinants, [-12, 15, -24, 6], atol=1e-8)


def test_verify_madsen_generalised():
    res = fo.verify_alternance([(1, 2), (1, 0), (-1, -1)], k0=2, i0=2,
                               flavor="generalised")
    assert isinstance(res, fo.Cadre)
    np.testing.assert_allclose(res.determinants, [-1, 1, -2], atol=1e-9)


def test_verify_rejects_same_sign():
    res = fo.verify_alternance([(1, 0), (1, 0)], k0=2, i0=2)
    assert isinstance(res, fo.AlternanceFailure)


def test_verify_rejects_rank_deficient():
    # V_2, V_3 parallel: no padding can make the tail independent
    res = fo.verify_alternance([(1, 1), (1, 0), (2, 0)], k0=3, i0=3)
    assert isinstance(res, fo.AlternanceFailure)
    assert res.reason == "RankDeficient"


def test_verify_nonzero_tail():
    # a 2-point candidate whose vectors are independent: Delta_3 != 0
    res = fo.verify_alternance([(1, 0), (0, 1)], k0=2, i0=2)
    assert isinstance(res, fo.AlternanceFailure)


def test_verify_p1_zero_vector():
    res = fo.verify_alternance([(0.0, 0.0, 0.0)], k0=1, i0=1)
    assert isinstance(res, fo.Cadre)
    assert res.p == 1 and not res.complete


def test_verify_cramer_multipliers():
    res = fo.verify_alternance([(5, 1), (-5, 1), (0, -2)], k0=3, i0=3)
    beta_cramer = [(-1) ** s * res.determinants[s] / res.determinants[0]
                   for s in range(res.p)]
    np.testing.assert_allclose(res.multipliers, beta_cramer, rtol=1e-8)


def test_z_invariance(rng):
    rand = rng.standard_normal((3, 3))
    Q, _ = np.linalg.qr(rand)
    Zr = fo.Zbasis(tuple(tuple(row) for row in Q.T))
    fixtures = [
        ([(5, 1, 0), (-5, 1, 0), (0, -2, 0), (0, 0, 1)], False),
        ([(1, 0, 0), (-1, 0, 0)], True),
        ([(1, 0, 1), (-1, 0, 0), (0, 0, -1)], True),
    ]
    for vecs, _ in fixtures:
        a = fo.verify_alternance(vecs)
        b = fo.verify_alternance(vecs, Z=Zr)
        assert isinstance(a, fo.Cadre) == isinstance(b, fo.Cadre)
        if isinstance(a, fo.Cadre):
            np.testing.assert_allclose(a.multipliers, b.multipliers,
                                       rtol=1e-7, atol=1e-10)


# ---------------------------------------------------------------------------
# find_cadre
# ---------------------------------------------------------------------------


def test_find_cadre_linf_plain_two_point():
    for d in (2, 3, 4):
        P, x, samp = registry.get("linf", dim=d)
        G = build_generator_set(P, x, activity(P, x), samp)
        cadre = fo.find_cadre(G, "plain")
        assert cadre.p == 2
        assert fo.find_cadre(G, "plain", p_min=d + 1) is None
        gen = fo.find_cadre(G, "generalised", p_min=d + 1)
        expected = [(-1) ** (d - i) * (-1.0 / d)
                    for i in range(1, d + 1)] + [1.0]
        np.testing.assert_allclose(gen.determinants, expected, atol=1e-9)


def test_madsen_plain_search_stops_at_two_points():
    # The smallest-p search ends at the two-point cadre {grad f2, -e1}, so
    # it reports no complete plain alternance.  A forced three-point plain
    # enumeration does find one ({grad f1, -e1, -e2}); the search contract
    # is smallest p first, which the published analysis of this problem
    # relies on.  Both behaviors are pinned here.
    P, x, samp = registry.get("madsen")
    G = build_generator_set(P, x, activity(P, x), samp)
    plain = fo.find_cadre(G, "plain")
    assert plain.p == 2
    assert {tuple(v) for v in plain.vectors} == {(1.0, 0.0), (-1.0, 0.0)}
    forced = fo.find_cadre(G, "plain", p_min=3)
    assert forced is not None
    assert {tuple(v) for v in forced.vectors} == \
        {(1.0, 2.0), (-1.0, 0.0), (0.0, -1.0)}
    np.testing.assert_allclose(forced.determinants, [1, -1, 2], atol=1e-9)


def test_find_cadre_counterexample():
    P, x, samp = registry.get("counterexample-3-2")
    G = build_generator_set(P, x, activity(P, x), samp)
    plain = fo.find_cadre(G, "plain")
    assert plain.p == 3
    assert {tuple(np.round(v, 9)) for v in plain.vectors} == \
        {(1.0, 0.0, 1.0), (-1.0, -0.0, -0.0), (0.0, 0.0, -1.0)}
    assert fo.find_cadre(G, "generalised", p_min=4) is None
    weak = fo.find_cadre(G, "weak", p_min=4)
    assert weak is not None and weak.flavor == "weak"
    assert weak.residual <= 1e-8


def test_find_cadre_respects_budget():
    hull = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    G = _gen_set(2, hull, cone_eta=[(1, 1)] * 6, cone_na=[(1, -1)] * 6)
    with pytest.raises(fo.CombinatorialBudgetExceeded):
        fo.find_cadre(G, "plain", budget=3)


def test_find_cadre_needs_objective_vector():
    # zero-sum combination of eta vectors alone is not a cadre
    G = _gen_set(2, [(1.0, 1.0)], cone_eta=[(1, 0), (-1, 0)])
    cadre = fo.find_cadre(G, "plain")
    assert cadre is None


def test_cadre_membership_oracle_agreement(rng):
    from conecert.linkernel import lp_chebyshev_center
    agree = 0
    for _ in range(200):
        d = int(rng.integers(1, 4))
        hull, cone = random_generator_family(rng, d, int(rng.integers(1, 7)))
        k = len(cone) // 2
        G = _gen_set(d, hull, cone[:k], cone[k:])
        member = lp_membership(np.zeros(d), hull, cone) is not None
        cadre = fo.find_cadre(G, "plain")
        oracle = hull_membership_bruteforce(np.zeros(d), hull, cone)
        assert (cadre is not None) == member == oracle
        if cadre is not None:
            np.testing.assert_allclose(
                np.column_stack(cadre.vectors) @ cadre.multipliers, 0.0,
                atol=1e-8)
        interior = lp_chebyshev_center(hull, cone, d=d)
        if interior.feasible:
            # a finite margin in every probe direction implies membership
            assert member
        if cadre is not None and cadre.complete:
            # complete alternance certifies the interior condition
            assert interior.feasible and interior.margin > 1e-9
        agree += 1
    assert agree == 200


# ---------------------------------------------------------------------------
# necessary / sufficient
# ---------------------------------------------------------------------------


def test_necessary_dem():
    P, x, samp = registry.get("dem")
    rep = fo.necessary_check(P, x, samp)
    assert rep.zero_in_D and rep.agreement
    weights = [w for _, _, w in rep.multipliers.alpha]
    np.testing.assert_allclose(sorted(weights), [1 / 3] * 3, atol=1e-9)
    assert rep.multipliers.stationarity_residual <= 1e-10


def test_necessary_dem_wrong_point():
    P, _, samp = registry.get("dem")
    rep = fo.necessary_check(P, (0.0, 0.0), samp)
    assert not rep.zero_in_D
    assert rep.cadre is None and rep.agreement
    # independent confirmation by the brute-force oracle
    _, act = cc.evaluate_objective(P, (0.0, 0.0))
    gens = cc.subdifferential_generators(P, (0.0, 0.0), act)
    assert not hull_membership_bruteforce(np.zeros(2), gens)


def test_necessary_bazaraa_multipliers():
    P, x, samp = registry.get("bazaraa45")
    rep = fo.necessary_check(P, x, samp)
    assert rep.zero_in_D
    duals = rep.multipliers.nlp_ineq[0]
    assert duals[0] == pytest.approx(152.0, abs=1e-6)
    assert duals[1] == pytest.approx(12.0, abs=1e-6)


def test_necessary_rejects_infeasible_point():
    P, _, samp = registry.get("bazaraa45")
    with pytest.raises(fo.NotFeasible):
        fo.necessary_check(P, (0.0, 0.0), samp)


def test_sufficient_dem():
    P, x, samp = registry.get("dem")
    rep = fo.sufficient_check(P, x, samp)
    assert rep.zero_in_int_D and rep.radius > 0
    assert rep.complete_alternance is not None
    assert rep.growth_constant_estimate is not None
    assert rep.growth_constant_estimate > 0


def test_sufficient_linf_without_plain_complete():
    P, x, samp = registry.get("linf", dim=2)
    rep = fo.sufficient_check(P, x, samp)
    assert rep.zero_in_int_D and rep.radius > 0
    G = build_generator_set(P, x, activity(P, x), samp)
    assert fo.find_cadre(G, "plain", p_min=3) is None


def test_sufficient_fails_on_halfspace():
    P = load_problem_text('[problem] dim=2\n[scenario] f="x(1) + x(2)"\n')
    rep = fo.sufficient_check(P, (0.0, 0.0))
    assert not rep.zero_in_int_D
    assert rep.radius == 0.0


def test_interior_implies_membership_consistency():
    for name in ("dem", "bazaraa45", "madsen"):
        P, x, samp = registry.get(name)
        nec = fo.necessary_check(P, x, samp)
        suf = fo.sufficient_check(P, x, samp)
        if suf.zero_in_int_D:
            assert nec.zero_in_D
        if suf.complete_alternance is not None:
            assert suf.zero_in_int_D  # complete alternance => interior


# ---------------------------------------------------------------------------
# penalty
# ---------------------------------------------------------------------------


def test_penalty_value_on_feasible_points(rng):
    P, x, samp = registry.get("dem")
    for c in (0.0, 1.0, 10.0):
        F, _ = cc.evaluate_objective(P, x)
        assert fo.penalty_value(P, x, c) == F


def test_penalty_value_monotone_in_c(rng):
    P, x, samp = registry.get("soc-example")
    for _ in range(25):
        pt = rng.uniform(-1, 1, size=2)
        vals = [fo.penalty_value(P, pt, c) for c in (0.0, 0.5, 1.0, 2.0, 5.0)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_penalty_thresholds_bazaraa():
    P, x, samp = registry.get("bazaraa45")
    nec = fo.necessary_check(P, x, samp)
    lam1 = nec.multipliers.lambda_l1()
    assert lam1 == pytest.approx(164.0, abs=1e-6)
    grid = [0.0, 0.5 * lam1, lam1, 2.0 * lam1]
    verdicts = [fo.penalty_subdiff_check(P, x, c, samp).zero_in_subdiff
                for c in grid]
    assert verdicts == [False, False, True, True]
    rep = fo.penalty_subdiff_check(P, x, lam1 + 0.1, samp)
    assert rep.zero_in_subdiff and rep.verified_at_2c


def test_penalty_zero_c_single_gradient():
    P, x, samp = registry.get("bazaraa45")
    rep = fo.penalty_subdiff_check(P, x, 0.0, samp)
    assert not rep.zero_in_subdiff


# ---------------------------------------------------------------------------
# spot check and discretization
# ---------------------------------------------------------------------------


def test_spot_check_dem_positive():
    P, x, samp = registry.get("dem")
    rep = fo.linearized_spot_check(P, x, 500, samp)
    assert not rep.refuted
    assert rep.min_directional_derivative > 0


def test_spot_check_refutes_linear():
    P = load_problem_text('[problem] dim=1\n[scenario] f="x(1)"\n')
    rep = fo.linearized_spot_check(P, (0.0,), 200)
    assert rep.refuted


def test_spot_check_madsen():
    P, x, samp = registry.get("madsen")
    rep = fo.linearized_spot_check(P, x, 500, samp)
    assert not rep.refuted
    assert rep.min_directional_derivative > 0


def test_discretize_active_points():
    P = load_problem_text(
        '[problem] dim=2\n[scenario] f="x(1)^2 + x(2)^2"\n'
        '[semiinf] g="x(1)*(t - 0.3)*(t - 0.7)" grid=0:1:11\n')
    # at x1 = 0 the constraint vanishes identically: all grid points active
    Q, actions = fo.semiinfinite_discretize(P, (0.0, 0.0))
    assert actions[0][1] == "capped"
    assert len(Q.blocks[0].g) == 3


def test_discretize_two_point_block():
    P = load_problem_text(
        '[problem] dim=1\n[scenario] f="x(1)^2"\n'
        '[semiinf] g="x(1) - (t - 0.3)*(t - 0.7)*0 - (t - 0.3)^2*(t - 0.7)^2"'
        ' grid=0.3:0.7:2\n')
    # g(x, t) = x - (t-0.3)^2 (t-0.7)^2 vanishes at both grid ends for x = 0
    Q, actions = fo.semiinfinite_discretize(P, (0.0,))
    assert actions[0][1] == "kept"
    assert [round(t, 6) for t in actions[0][2]] == [0.3, 0.7]
    assert len(Q.blocks[0].g) == 2


def test_discretize_drops_inactive():
    P = load_problem_text(
        '[problem] dim=1\n[scenario] f="x(1)"\n'
        '[semiinf] g="x(1) + t - 10" grid=0:1:5\n')
    Q, actions = fo.semiinfinite_discretize(P, (0.0,))
    assert actions[0][1] == "dropped"
    assert Q.blocks == ()


def test_discretize_certificate_stable_under_cap(rng):
    # capping to d+1 active points must not change the certificate verdict
    P = load_problem_text(
        '[problem] dim=2\n[scenario] f="x(1)^2 + x(2)^2"\n'
        '[semiinf] g="x(1)*t + x(2)*(1 - t)" grid=0:1:9\n')
    x = (0.0, 0.0)
    Q, actions = fo.semiinfinite_discretize(P, x)
    assert actions[0][1] == "capped"
    nec_capped = fo.necessary_check(Q, x)
    nec_full = fo.necessary_check(P, x)  # grid handled directly, uncapped
    assert nec_capped.zero_in_D == nec_full.zero_in_D


def test_semiinfinite_direct_certification():
    # x >= -t(1-t) for all t on the grid binds at both interval ends, so the
    # certificate at x = 0 is carried by the two endpoint grid multipliers
    P = load_problem_text(
        '[problem] dim=1\n[scenario] f="x(1)"\n'
        '[semiinf] g="-x(1) - t*(1 - t)" grid=0:1:5\n')
    rep = fo.necessary_check(P, (0.0,))
    assert rep.zero_in_D and rep.agreement
    support = rep.multipliers.semi_infinite[0]
    assert set(support) <= {0, 4}
    assert sum(support.values()) == pytest.approx(1.0)
    assert rep.multipliers.stationarity_residual <= 1e-10
    # discretizing first and certifying the flat problem agrees
    Q, _ = fo.semiinfinite_discretize(P, (0.0,))
    rep2 = fo.necessary_check(Q, (0.0,))
    assert rep2.zero_in_D


def test_penalty_inclusion_monotone_on_fixtures():
    P, x, samp = registry.get("madsen")
    answers = [fo.penalty_subdiff_check(P, x, c, samp).zero_in_subdiff
               for c in (0.0, 0.5, 1.0, 2.0)]
    # once true it must stay true as c grows
    seen_true = False
    for a in answers:
        if seen_true:
            assert a
        seen_true = seen_true or a


def test_reverify_roundtrip_bazaraa():
    import json
    P, x, samp = registry.get("bazaraa45")
    nec = fo.necessary_check(P, x, samp)
    suf = fo.sufficient_check(P, x, samp)
    report = {"candidate": list(x), "necessary": nec.to_json(),
              "sufficient": suf.to_json()}
    report = json.loads(json.dumps(report))
    res = fo.reverify_report(P, report)
    assert res["ok"] and len(res["checks"]) >= 2
