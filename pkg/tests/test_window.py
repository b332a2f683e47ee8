import math

import numpy as np
import pytest

from bandres import (
    Bump,
    ConfigurationError,
    EnergyRangeError,
    NearSingularityError,
    PerturbationProfile,
    classify_energy,
    decompose_window,
    discriminant,
    evaluate_profile,
)


def direct_profile_value(mu, nu, bumps, z):
    # independent scalar evaluation, no shared code path
    out = mu + nu * z / math.sqrt(1.0 + z * z)
    for height, center, width in bumps:
        out += height / (1.0 + ((z - center) / width) ** 2)
    return out


class TestProfile:
    def test_matches_direct_formula(self):
        mu, nu = 1.3, -0.7
        bumps = ((2.0, 0.5, 0.8), (-1.0, -2.0, 1.5))
        prof = PerturbationProfile(mu, nu, bumps)
        rng = np.random.default_rng(3)
        zs = rng.uniform(-8.0, 8.0, 40)
        vals = prof(zs)
        for z, v in zip(zs, vals):
            assert v == pytest.approx(direct_profile_value(mu, nu, bumps, z),
                                      abs=1e-14)

    def test_derivative_matches_finite_difference(self, wall_profile):
        h = 1e-6
        for z in (-3.0, -0.4, 0.9, 1.2, 4.0):
            fd = (wall_profile(z + h) - wall_profile(z - h)) / (2.0 * h)
            assert wall_profile.derivative(z) == pytest.approx(fd, abs=1e-7)

    def test_limits(self, drift_profile):
        assert drift_profile.w_minus == pytest.approx(11.0)
        assert drift_profile.w_plus == pytest.approx(0.0)
        assert drift_profile(-1e8) == pytest.approx(11.0, abs=1e-7)
        assert drift_profile(1e8) == pytest.approx(0.0, abs=1e-7)

    def test_analyticity_height_and_singularities(self, wall_profile):
        assert wall_profile.analyticity_height == pytest.approx(0.3)
        sings = wall_profile.singularities()
        assert 1j in sings and -1j in sings
        assert complex(1.2, 0.3) in sings and complex(1.2, -0.3) in sings

    def test_near_singularity_guard(self, bound_profile):
        with pytest.raises(NearSingularityError):
            evaluate_profile(bound_profile, 1j * (1.0 - 1e-8))

    def test_constant_profile_rejected(self):
        with pytest.raises(ConfigurationError):
            PerturbationProfile(2.0, 0.0, ())
        PerturbationProfile(2.0, 0.0, (), allow_constant=True)

    def test_bump_validation(self):
        with pytest.raises(ConfigurationError):
            Bump(1.0, 0.0, 0.0)
        with pytest.raises(ConfigurationError):
            Bump(math.inf, 0.0, 1.0)

    def test_round_trip(self, wall_profile):
        back = PerturbationProfile.from_dict(wall_profile.to_dict())
        assert back == wall_profile


class TestDecomposition:
    def test_bound_fixture_is_one_well_no_sides(self, mathieu_bands, bound_profile):
        win = decompose_window(bound_profile, mathieu_bands, 9.7)
        assert win.classification == "H6"
        assert len(win.components) == 1
        c = win.compact
        assert c.kind == "compact"
        assert c.lo < 0.0 < c.hi
        assert c.band_index == 1
        assert math.isinf(win.zeta_minus) and win.zeta_minus < 0
        assert math.isinf(win.zeta_plus) and win.zeta_plus > 0
        # symmetric profile: symmetric well
        assert c.lo == pytest.approx(-c.hi, abs=1e-10)

    def test_wall_fixture_one_well_right_channel(self, mathieu_bands, wall_profile):
        win = decompose_window(wall_profile, mathieu_bands, 3.9)
        assert win.classification == "H6"
        kinds = sorted(c.kind for c in win.components)
        assert kinds == ["compact", "unbounded_right"]
        assert math.isinf(win.zeta_minus)
        assert math.isfinite(win.zeta_plus)
        assert win.zeta0_plus < win.zeta_plus

    def test_drift_fixture_spans_the_band(self, mathieu_bands, drift_profile):
        win = decompose_window(drift_profile, mathieu_bands, 9.8)
        assert win.classification == "H6"
        lo_ep, hi_ep = win.compact.lo_endpoint, win.compact.hi_endpoint
        assert lo_ep.edge_index == 1 and lo_ep.side == "lower"
        assert hi_ep.edge_index == 2 and hi_ep.side == "upper"

    def test_step_fixture_is_monotone_transition(self, mathieu_bands, step_profile):
        win = decompose_window(step_profile, mathieu_bands, 3.9)
        assert win.classification == "H5"
        assert win.compact is None
        assert [c.kind for c in win.components] == ["unbounded_right"]

    def test_two_wells_classified_general(self, mathieu_bands):
        prof = PerturbationProfile(0.0, 0.0, ((4.0, -3.0, 1.0), (4.0, 3.0, 1.0)))
        assert classify_energy(prof, mathieu_bands, 9.7) == "GENERAL"

    def test_energy_outside_everything_is_empty(self, mathieu_bands, bound_profile):
        assert classify_energy(bound_profile, mathieu_bands, -3.0) == "EMPTY"

    def test_endpoints_sit_on_edge_crossings(self, mathieu_bands, wall_profile):
        win = decompose_window(wall_profile, mathieu_bands, 3.9)
        for comp in win.components:
            for ep in (comp.lo_endpoint, comp.hi_endpoint):
                if ep is None:
                    continue
                edge = float(mathieu_bands.edges[ep.edge_index - 1])
                level = win.energy - edge
                assert wall_profile(ep.zeta) == pytest.approx(level, abs=1e-10)
                assert ep.w_prime == pytest.approx(
                    wall_profile.derivative(ep.zeta), abs=1e-12)

    def test_ceiling_guard(self, mathieu_bands, drift_profile):
        with pytest.raises(EnergyRangeError):
            decompose_window(drift_profile, mathieu_bands, 50.0)

    def test_record_round_trip_fields(self, mathieu_bands, bound_profile):
        win = decompose_window(bound_profile, mathieu_bands, 9.7)
        d = win.to_dict()
        assert d["classification"] == "H6"
        assert d["zeta0_minus"] == win.compact.lo
        assert d["zeta0_plus"] == win.compact.hi
        assert d["components"][0]["lo_endpoint"]["edge_index"] == 2

    def test_random_profiles_endpoints_on_discriminant_level_sets(
            self, mathieu, mathieu_bands):
        # independent certification: at every reported endpoint the shifted
        # energy must sit on a |D| = 2 level set (direct ODE evaluation),
        # and every component midpoint must satisfy |D| <= 2
        rng = np.random.default_rng(20240818)
        checked = 0
        draws = 0
        while checked < 12 and draws < 60:
            draws += 1
            mu = float(rng.uniform(-1.0, 5.0))
            nu = float(rng.uniform(-3.0, 3.0))
            bumps = []
            for _ in range(int(rng.integers(0, 3))):
                bumps.append((float(rng.uniform(-4.0, 4.0)),
                              float(rng.uniform(-3.0, 3.0)),
                              float(rng.uniform(0.4, 1.5))))
            energy = float(rng.uniform(1.0, 12.0))
            try:
                prof = PerturbationProfile(mu, nu, bumps)
                win = decompose_window(prof, mathieu_bands, energy)
            except Exception:
                continue   # tangential crossing, unstable tail, etc.
            for comp in win.components:
                for ep in (comp.lo_endpoint, comp.hi_endpoint):
                    if ep is None:
                        continue
                    d = discriminant(mathieu, energy - prof(ep.zeta))
                    assert abs(abs(d) - 2.0) <= 1e-6
                if math.isfinite(comp.lo) and math.isfinite(comp.hi):
                    mid = 0.5 * (comp.lo + comp.hi)
                    d = discriminant(mathieu, energy - prof(mid))
                    assert abs(d) <= 2.0 + 1e-9
            checked += 1
        assert checked >= 12
