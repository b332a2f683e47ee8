import math

import numpy as np
import pytest
from scipy.optimize import brentq

from bandres import (
    BoundaryCollisionError,
    DomainError,
    PerturbationProfile,
    UnsupportedConfigurationError,
    decompose_window,
    find_branch_points,
    im_kappa_gap,
    isoenergy_portrait,
    kappa_normalized,
    quasi_momentum_main,
    reduced_momentum,
)

E_BOUND = 9.7


@pytest.fixture(scope="module")
def bound_window(mathieu_bands, bound_profile):
    return decompose_window(bound_profile, mathieu_bands, E_BOUND)


class TestFoldedMomentum:
    def test_edge_exact_at_endpoints(self, bound_window, mathieu_bands,
                                     bound_profile):
        c = bound_window.compact
        lo = kappa_normalized(bound_window, mathieu_bands, bound_profile, c.lo)
        hi = kappa_normalized(bound_window, mathieu_bands, bound_profile, c.hi)
        # band 1 well: both endpoints cross the upper edge
        assert lo.kappa == math.pi and hi.kappa == math.pi

    def test_matches_direct_branch(self, bound_window, mathieu_bands,
                                   bound_profile):
        # fast-table route against direct path continuation
        for z in (-1.5, -0.6, 0.0, 0.9, 1.7):
            sample = kappa_normalized(bound_window, mathieu_bands,
                                      bound_profile, z)
            km = quasi_momentum_main(mathieu_bands, E_BOUND - bound_profile(z))
            assert not km.on_gap
            folded = reduced_momentum(float(km.value.real), km.band_index)
            assert abs(sample.kappa - folded) <= 1e-9
            assert 0.0 <= sample.kappa <= math.pi
            assert sample.sign == 1 and sample.determination_id == 0

    def test_second_band_well(self, mathieu_bands):
        prof = PerturbationProfile(13.0, 0.0, ((-4.0, 0.0, 1.0),))
        win = decompose_window(prof, mathieu_bands, 21.5)
        assert win.classification == "H6"
        c = win.compact
        assert c.band_index == 2
        mid = kappa_normalized(win, mathieu_bands, prof, 0.0)
        km = quasi_momentum_main(mathieu_bands, 21.5 - prof(0.0))
        assert abs(mid.kappa - (2.0 * math.pi - km.value.real)) <= 1e-9
        assert mid.sign == -1 and mid.determination_id == 1
        ep = kappa_normalized(win, mathieu_bands, prof, c.lo)
        assert ep.kappa == math.pi   # even band, lower edge

    def test_outside_well_rejected(self, bound_window, mathieu_bands,
                                   bound_profile):
        with pytest.raises(DomainError):
            kappa_normalized(bound_window, mathieu_bands, bound_profile, 5.0)

    def test_needs_single_well(self, mathieu_bands, step_profile):
        win = decompose_window(step_profile, mathieu_bands, 3.9)
        with pytest.raises(UnsupportedConfigurationError):
            kappa_normalized(win, mathieu_bands, step_profile, 0.0)


class TestGapMomentum:
    def test_positive_and_matches_direct_branch(self, bound_window,
                                                mathieu_bands, bound_profile):
        for seg, zs in (("left", (-6.0, -2.5)), ("right", (2.5, 6.0))):
            for z in zs:
                g = im_kappa_gap(bound_window, mathieu_bands, bound_profile,
                                 seg, z)
                assert g > 0.0
                km = quasi_momentum_main(mathieu_bands,
                                         E_BOUND - bound_profile(z))
                assert km.on_gap
                assert abs(g - km.value.imag) <= 1e-9

    def test_segment_validation(self, bound_window, mathieu_bands,
                                bound_profile):
        with pytest.raises(DomainError):
            im_kappa_gap(bound_window, mathieu_bands, bound_profile,
                         "middle", 3.0)
        with pytest.raises(DomainError):
            im_kappa_gap(bound_window, mathieu_bands, bound_profile,
                         "right", 0.0)

    def test_needs_single_well(self, mathieu_bands, step_profile):
        win = decompose_window(step_profile, mathieu_bands, 3.9)
        with pytest.raises(UnsupportedConfigurationError):
            im_kappa_gap(win, mathieu_bands, step_profile, "right", 4.0)


class TestBranchPoints:
    def test_closed_form_positions(self, mathieu_bands, bound_profile):
        # W = 4/(1+z^2) inverts by hand: z^2 = 4/(E - E_j) - 1
        found = find_branch_points(bound_profile, mathieu_bands, E_BOUND,
                                   (-3.0, 3.0, -0.9, 0.9))
        e1, e2 = (float(v) for v in mathieu_bands.edges[:2])
        re_pair = math.sqrt(4.0 / (E_BOUND - e2) - 1.0)
        im_pair = math.sqrt(1.0 - 4.0 / (E_BOUND - e1))
        expected = {(re_pair, 0.0, 2), (-re_pair, 0.0, 2),
                    (0.0, im_pair, 1), (0.0, -im_pair, 1)}
        assert len(found) == 4
        for p in found.points:
            match = min(expected,
                        key=lambda t: abs(p.zeta - complex(t[0], t[1])))
            assert abs(p.zeta - complex(match[0], match[1])) <= 1e-8
            assert p.edge_index == match[2]
        assert len(found.real_points()) == 2
        assert all(abs(z.imag) <= 1e-12 for z in
                   (p.zeta for p in found.real_points()))

    def test_conjugation_closure(self, mathieu_bands, drift_profile):
        found = find_branch_points(drift_profile, mathieu_bands, 9.8,
                                   (-2.5, 2.5, -0.8, 0.8))
        assert len(found) >= 2
        zs = found.zetas
        for p in found.points:
            mate = min(abs(q.zeta - p.zeta.conjugate()) for q in found.points
                       if q.edge_index == p.edge_index)
            assert mate <= 1e-8
        assert found.box == (-2.5, 2.5, -0.8, 0.8)
        assert len(zs) == len(found)

    def test_box_must_stay_in_strip(self, mathieu_bands, bound_profile):
        with pytest.raises(DomainError):
            find_branch_points(bound_profile, mathieu_bands, E_BOUND,
                               (-3.0, 3.0, -1.0, 1.0))
        with pytest.raises(DomainError):
            find_branch_points(bound_profile, mathieu_bands, E_BOUND,
                               (3.0, -3.0, -0.5, 0.5))

    def test_root_on_boundary_detected(self, mathieu_bands, bound_profile):
        e2 = float(mathieu_bands.edges[1])
        z_star = brentq(lambda z: E_BOUND - bound_profile(z) - e2, 1.0, 3.0,
                        xtol=1e-13)
        with pytest.raises(BoundaryCollisionError):
            find_branch_points(bound_profile, mathieu_bands, E_BOUND,
                               (0.5, z_star, -0.5, 0.5))

    def test_empty_region(self, mathieu_bands, drift_profile):
        found = find_branch_points(drift_profile, mathieu_bands, 9.8,
                                   (5.0, 8.0, -0.4, 0.4))
        assert len(found) == 0


class TestPortrait:
    def test_band_samples_pair_and_gap_samples_drop(self, mathieu_bands,
                                                    bound_profile):
        zs = np.linspace(-3.0, 3.0, 301)
        rows = isoenergy_portrait(bound_profile, mathieu_bands, E_BOUND,
                                  (-3.0, 3.0), 301)
        e2 = float(mathieu_bands.edges[1])
        half = math.sqrt(4.0 / (E_BOUND - e2) - 1.0)
        in_band = [float(z) for z in zs if abs(z) < half]
        assert [z for z, _ in rows] == pytest.approx(in_band, abs=1e-12)
        for z, branches in rows:
            assert len(branches) == 2
            k1, k2 = branches
            assert 0.0 < k1 < math.pi
            assert k1 + k2 == pytest.approx(2.0 * math.pi, abs=1e-12)

    def test_monotone_profile_keeps_one_segment(self, mathieu_bands,
                                                drift_profile):
        rows = isoenergy_portrait(drift_profile, mathieu_bands, 9.8,
                                  (-6.0, 6.0), 601)
        zs = [z for z, _ in rows]
        assert zs == sorted(zs)
        steps = np.diff(zs)
        assert np.allclose(steps, steps[0], atol=1e-9)   # contiguous block

    def test_validation(self, mathieu_bands, bound_profile):
        with pytest.raises(DomainError):
            isoenergy_portrait(bound_profile, mathieu_bands, E_BOUND,
                               (-3.0, 3.0), 1)
        with pytest.raises(DomainError):
            isoenergy_portrait(bound_profile, mathieu_bands, E_BOUND,
                               (3.0, -3.0), 100)
