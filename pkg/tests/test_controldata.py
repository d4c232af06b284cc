import math

import numpy as np
import pytest

from conftest import commutative, tangential
from stratretract import controldata as cdm
from stratretract.errors import BuildError, DomainError, PreconditionError
from stratretract.scenarios import get_scenario

ORACLE_TOL = 1e-10


@pytest.fixture(scope="module")
def oracle():
    return cdm.analytic_flag_oracle()


@pytest.fixture(scope="module")
def naive():
    return cdm.naive_flag_data()


# -- reference data -----------------------------------------------------------


@pytest.mark.parametrize("verify", [cdm.verify_adjusted, cdm.verify_tangential, cdm.verify_precommute, cdm.verify_commute])
def test_oracle_passes_suites(oracle, verify):
    rep, cd = verify(oracle, samples=100, tol=ORACLE_TOL)
    assert rep.status == cdm.VERIFIED, rep.as_dict()
    assert all(r.samples > 0 for r in rep.results)


def test_oracle_theta_homogeneity(oracle):
    v = np.array([0.6, 0.3, 0.2])
    _, th, _ = cdm._sph(v)
    for t in (0.25, 0.5, 1.5):
        assert oracle.tub("X1").rho(oracle.tub("X1").mult(t, v)) == pytest.approx(t * t * th * th, rel=1e-14)


def test_oracle_outer_maps_commute(oracle):
    v = np.array([0.4, 0.5, -0.3])
    a, b = oracle.tub("X0"), oracle.tub("X2")
    for s in (0.5, 2.0):
        for t in (0.0, 0.5, 2.0):
            assert np.allclose(a.mult(s, b.mult(t, v)), b.mult(t, a.mult(s, v)), atol=1e-14)


def test_oracle_antipodal_zone(oracle):
    with pytest.raises(DomainError):
        oracle.tub("X1").rho(np.array([-1.0, 0.01, 0.0]))


def test_naive_witness(naive):
    # rho_X0 (m_X1^0.5 (1,1,0)) = 1 + 0.25 against rho_X0 = 2
    assert naive.tub("X0").rho(naive.tub("X1").mult(0.5, [1.0, 1.0, 0.0])) == pytest.approx(1.25)
    assert cdm.pc2_residual_at(naive, "X0", "X1", [1.0, 1.0, 0.0], 0.5) == pytest.approx(0.75)


def test_naive_fails_precommute(naive):
    rep, cd = cdm.verify_precommute(naive, samples=60)
    assert rep.status == cdm.FAILED
    pc2 = [r for r in rep.results if r.prop == "PC2" and r.pair == ("X0", "X1")][0]
    assert pc2.worst >= 0.5
    assert cd.flags["precommutative"].status == cdm.FAILED


def test_control_data_needs_every_stratum(naive):
    tubs = dict(naive.tubulars)
    tubs.pop("X2")
    with pytest.raises(BuildError):
        cdm.ControlData(naive.scenario, tubs)


# -- builders -----------------------------------------------------------------


def test_tangential_flag3_precommutes():
    rep, cd = cdm.verify_precommute(tangential("FLAG3"), samples=60)
    assert rep.status == cdm.VERIFIED
    assert cd.flags["precommutative"].status == cdm.VERIFIED


def test_tangential_flag3_not_yet_commutative():
    rep, _ = cdm.verify_commute(tangential("FLAG3"), samples=60)
    assert rep.status == cdm.FAILED


def test_cone2_field_radial_on_plateau():
    cd = tangential("CONE2")
    tub = cd.tub("X0")
    rng = np.random.default_rng(0)
    pts = cdm.inner_samples(tub, cd.scenario, rng, 30)
    assert pts
    for p in pts:
        V = tub.field.eval(p)
        cos = V @ p / (np.linalg.norm(V) * np.linalg.norm(p))
        assert 1 - cos <= 1e-6


@pytest.mark.parametrize("name", ["FLAG3", "CONE2", "MOMZERO", "D3RED", "CRIT11"])
def test_commutative_builds_verify(name):
    reports, cd = cdm.verify_all(commutative(name), samples=60)
    for rep in reports:
        assert rep.status in (cdm.VERIFIED, cdm.SKIPPED), rep.as_dict()
    for flag in ("adjusted", "tangential", "precommutative", "commutative"):
        assert cd.flags[flag].status == cdm.VERIFIED


@pytest.mark.parametrize("name", ["MOMZERO", "D3RED"])
def test_equivariance(name):
    rep, cd = cdm.verify_equivariant(commutative(name), samples=40)
    assert rep.status == cdm.VERIFIED and rep.worst <= 1e-6


def test_equivariance_skipped_without_action():
    rep, cd = cdm.verify_equivariant(commutative("FLAG3"), samples=10)
    assert cd.flags["equivariant"].status == cdm.SKIPPED


def test_commutator_at_small_distance(flag3_comm):
    x0, x1 = flag3_comm.tub("X0"), flag3_comm.tub("X1")
    rng = np.random.default_rng(9)
    used = 0
    while used < 10:
        w = rng.normal(size=3)
        v = w / np.linalg.norm(w) * math.sqrt(0.1)
        # rescale along the X0 fibers so that rho_X0(v) = 0.1
        v = x0.mult(math.sqrt(0.1 / x0.rho(v)), v)
        if not x1.membership(v):
            continue
        assert x0.rho(v) == pytest.approx(0.1, rel=1e-9)
        for s in (0.5, 2.0):
            for t in (0.5, 2.0):
                d = x0.mult(s, x1.mult(t, v)) - x1.mult(t, x0.mult(s, v))
                assert np.linalg.norm(d) <= 1e-5
        used += 1


def test_conjugated_distance_homogeneous(flag3_comm):
    tub = flag3_comm.tub("X2")
    rng = np.random.default_rng(5)
    pts = [p for p in cdm.near_stratum(flag3_comm.scenario, "X2", rng, 40) if tub.membership(p) and 0 < tub.rho(p) < math.inf]
    assert len(pts) > 10
    for p in pts:
        r = tub.rho(p)
        for t in (0.25, 0.5, 2.0):
            assert tub.rho(tub.mult(t, p)) == pytest.approx(t * t * r, rel=1e-5)


def test_conjugation_identity_outside():
    before = tangential("FLAG3")
    after = cdm.conjugate(before, "X1", "X2")
    worst = cdm.conjugation_identity_outside(before, after, "X1", "X2")
    assert worst == 0.0


def test_conjugate_refuses_without_precommute(naive):
    with pytest.raises(PreconditionError):
        cdm.conjugate(naive, "X0", "X1")


def test_conjugate_refuses_wrong_order():
    with pytest.raises(PreconditionError):
        cdm.conjugate(tangential("FLAG3"), "X2", "X1")


def test_conj_factor_profile():
    assert cdm.conj_factor(0.25) == pytest.approx(0.5)
    assert cdm.conj_factor(1.0) == 1.0 and cdm.conj_factor(5.0) == 1.0
    vals = [cdm.conj_factor(r) for r in np.linspace(0.01, 1.2, 200)]
    assert all(y >= x for x, y in zip(vals, vals[1:]))


def test_top_field_consequence():
    cd = tangential("FLAG3")
    _, cd = cdm.verify_precommute(cd, samples=40)
    assert cd.flags["precommutative"].status == cdm.VERIFIED
    out = cdm.top_field_consequence(cd, "X2", "X1", "X0")
    assert out["samples"] > 0
    for key in ("X1_dproj", "X1_drho", "X0_dproj", "X0_drho"):
        assert out[key] <= 1e-5, (key, out)


def test_reports_serialize(naive):
    rep, _ = cdm.verify_precommute(naive, samples=20)
    d = rep.as_dict()
    assert d["status"] == "failed"
    assert {"property", "pair", "worst", "samples", "status"} <= set(d["results"][0])
    assert all(p.pair for p in rep.pair_reports())


def test_empty_overlaps_inconclusive():
    res = cdm.PropertyResult("PC1", ("A", "B")).finish(1e-5)
    assert res.status == cdm.INCONCLUSIVE
