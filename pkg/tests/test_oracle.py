import math

import numpy as np
import pytest

from bandres import (
    ConfigurationError,
    OracleConfig,
    PeriodicPotential,
    PerturbationProfile,
    build_grid_hamiltonian,
    decompose_window,
    hill_matrix_band_edges,
    oracle_spectrum,
)
from bandres.oracle import MAX_GRID_POINTS, MIN_POINTS_PER_PERIOD

FREE = PeriodicPotential(0.0, (), (), allow_constant=True)
FLAT = PerturbationProfile(0.0, 0.0, (), allow_constant=True)


class TestGeometry:
    def test_spacing_and_resolution(self):
        cfg = OracleConfig(10.0, 639)
        assert cfg.spacing == pytest.approx(20.0 / 640.0)
        assert cfg.points_per_period == pytest.approx(32.0)

    def test_for_window_fits_endpoints(self, mathieu_bands, bound_profile):
        win = decompose_window(bound_profile, mathieu_bands, 9.7)
        cfg = OracleConfig.for_window(win, 0.1, points_per_period=40.0,
                                      margin=10.0)
        base = abs(win.zeta0_minus) + abs(win.zeta0_plus)
        assert cfg.box_half_length == pytest.approx((base + 10.0) / 0.1)
        expected_n = math.ceil(2.0 * cfg.box_half_length * 40.0) - 1
        assert cfg.n_points == expected_n
        assert cfg.points_per_period >= 40.0

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            OracleConfig(0.0, 100)
        with pytest.raises(ConfigurationError):
            OracleConfig(1.0, 8)
        with pytest.raises(ConfigurationError):
            OracleConfig(10.0, MAX_GRID_POINTS + 1)
        with pytest.raises(ConfigurationError):
            OracleConfig(10.0, 639, cap_strength=-1.0)
        with pytest.raises(ConfigurationError):
            OracleConfig(10.0, 639, cap_onset=1.0)
        with pytest.raises(ConfigurationError):
            OracleConfig(10.0, 639, boundary="periodic")
        with pytest.raises(ConfigurationError):
            # 10 points per period is far below the resolution floor
            OracleConfig(10.0, 199)
        assert MIN_POINTS_PER_PERIOD == 32

    def test_undersized_box_rejected(self, mathieu_bands, bound_profile,
                                     mathieu):
        win = decompose_window(bound_profile, mathieu_bands, 9.7)
        small = OracleConfig(50.0, 3199)
        with pytest.raises(ConfigurationError):
            build_grid_hamiltonian(mathieu, bound_profile, 0.0, 0.1, small,
                                   window=win)

    def test_offcenter_box_rejected(self, mathieu_bands, bound_profile,
                                    mathieu):
        win = decompose_window(bound_profile, mathieu_bands, 9.7)
        cfg = OracleConfig.for_window(win, 0.1)
        with pytest.raises(ConfigurationError):
            build_grid_hamiltonian(mathieu, bound_profile, 13.0, 0.1, cfg,
                                   window=win)


class TestBoxSpectrum:
    def test_free_particle_matches_closed_form(self):
        # empty box: the discrete eigenvalues are (4/d^2) sin^2(n pi d / 4L)
        L, n = 10.0, 639
        cfg = OracleConfig(L, n)
        handle = build_grid_hamiltonian(FREE, FLAT, 0.0, 0.1, cfg)
        assert not handle.is_complex
        pairs = oracle_spectrum(handle, (0.5, 5.0))
        assert pairs
        d = cfg.spacing
        exact = [(4.0 / d ** 2) * math.sin(m * math.pi * d / (4.0 * L)) ** 2
                 for m in range(1, 60)]
        for p in pairs:
            assert p.eigenvalue.imag == 0.0
            assert p.stability == 0.0
            best = min(abs(p.eigenvalue.real - e) for e in exact)
            assert best <= 1e-9 * (1.0 + abs(p.eigenvalue.real))
            # continuum limit within the second-order truncation error
            m = min(range(1, 60),
                    key=lambda q: abs(p.eigenvalue.real - exact[q - 1]))
            continuum = (m * math.pi / (2.0 * L)) ** 2
            assert p.eigenvalue.real == pytest.approx(continuum, rel=1e-3)
            # box modes spread: nowhere near the localized regime
            assert p.localization < 0.6

    def test_well_states_localize(self, mathieu, mathieu_bands,
                                  bound_profile):
        win = decompose_window(bound_profile, mathieu_bands, 9.7)
        cfg = OracleConfig.for_window(win, 0.1)
        handle = build_grid_hamiltonian(mathieu, bound_profile, 0.0, 0.1, cfg,
                                        window=win)
        pairs = oracle_spectrum(handle, (9.0, 10.4))
        well = [p for p in pairs if p.localization > 0.5]
        assert len(well) >= 4
        for p in well:
            assert p.localization > 0.9      # deep in the sealed well
        # box continuum states coexist in the window but spread out
        assert any(p.localization < 0.3 for p in pairs)

    def test_energy_window_validation(self):
        cfg = OracleConfig(10.0, 639)
        handle = build_grid_hamiltonian(FREE, FLAT, 0.0, 0.1, cfg)
        with pytest.raises(ConfigurationError):
            oracle_spectrum(handle, (5.0, 0.5))
        ceiling = (math.pi / cfg.spacing) ** 2 / 16.0
        with pytest.raises(ConfigurationError):
            oracle_spectrum(handle, (0.5, ceiling + 1.0))


class TestAbsorber:
    def test_complex_diagonal_switches_on_past_onset(self, mathieu,
                                                     wall_profile):
        cfg = OracleConfig(40.0, 2559, cap_strength=1.0, cap_onset=0.7)
        handle = build_grid_hamiltonian(mathieu, wall_profile, 0.0, 0.1, cfg)
        assert handle.is_complex
        inside = np.abs(handle.x) < 0.7 * 40.0
        assert np.all(handle.diag.imag[inside] == 0.0)
        assert np.all(handle.diag.imag <= 0.0)
        assert np.any(handle.diag.imag < -1e-3)

    def test_spectrum_sits_below_the_axis(self, mathieu, wall_profile):
        cfg = OracleConfig(40.0, 2559, cap_strength=1.0, cap_onset=0.7)
        handle = build_grid_hamiltonian(mathieu, wall_profile, 0.0, 0.1, cfg)
        pairs = oracle_spectrum(handle, (3.6, 4.2), n_eigs=30)
        assert pairs
        res = [p.eigenvalue.real for p in pairs]
        assert res == sorted(res)
        for p in pairs:
            assert p.eigenvalue.imag <= 1e-9
            assert p.stability >= 0.0 and math.isfinite(p.stability)


class TestFourierEdges:
    def test_mathieu_certified(self, mathieu, mathieu_bands):
        result = hill_matrix_band_edges(mathieu, 24, n_edges=4)
        assert result.m_used == 48
        assert result.converged
        assert result.displacement < 1e-8
        for got, ref in zip(result.edges, mathieu_bands.edges[:4]):
            assert got == pytest.approx(float(ref), rel=1e-6, abs=1e-9)

    def test_truncation_floor(self, mathieu):
        with pytest.raises(ConfigurationError):
            hill_matrix_band_edges(mathieu, 8)
