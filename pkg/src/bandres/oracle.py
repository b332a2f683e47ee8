"""Independent spectral oracles.

Two deliberately different routes to the same physics, used to cross-check
the Floquet/action pipeline:

* hill_matrix_band_edges: band edges from the Fourier (Hill) matrix
  A(theta)_{mm'} = (theta + 2*pi*m)^2 delta_{mm'} + v_{m-m'} at the
  periodic (theta = 0) and antiperiodic (theta = pi) points; the merged,
  sorted eigenvalue lists are E1 <= E2 <= ... .
* build_grid_hamiltonian / oracle_spectrum: second-order finite
  differences for -d2/dx2 + V(x) + W(eps*x + zeta) on [-L, L] with
  Dirichlet walls, optionally damped by a complex absorbing potential
  -i*eta*ramp(x)^2 switched on at |x| = cap_onset*L. With the absorber on,
  resonances appear as eigenvalues just below the real axis whose position
  is stable under halving eta, while box/continuum artifacts move.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse import diags
from scipy.sparse.linalg import ArpackNoConvergence, eigs

from .errors import ConfigurationError, OracleError

MAX_GRID_POINTS = 32000
MIN_POINTS_PER_PERIOD = 32
_EDGE_CONVERGENCE_TOL = 1e-8


class HillEdgeResult:
    """Band edges from a truncated Hill matrix, with a convergence record."""

    def __init__(self, edges, m_used, displacement):
        self.edges = np.asarray(edges, dtype=float)
        self.m_used = int(m_used)
        self.displacement = float(displacement)

    @property
    def converged(self):
        return self.displacement < _EDGE_CONVERGENCE_TOL


def _hill_edges_at(potential, m_trunc, theta_values=(0.0, math.pi)):
    idx = np.arange(-m_trunc, m_trunc + 1)
    diff = idx[:, None] - idx[None, :]
    v = np.zeros(diff.shape, dtype=complex)
    modes = potential.mode_count
    for m in range(1, modes + 1):
        v[diff == m] = potential.fourier_coefficient(m)
        v[diff == -m] = potential.fourier_coefficient(-m)
    merged = []
    for theta in theta_values:
        a = v.copy()
        a[np.diag_indices_from(a)] += (theta + 2.0 * np.pi * idx) ** 2 + potential.mean
        merged.append(np.linalg.eigvalsh(a))
    return np.sort(np.concatenate(merged))


def hill_matrix_band_edges(potential, m_truncation, n_edges=8):
    """Band edges by Fourier truncation, certified by M-doubling.

    Returns a HillEdgeResult holding the first n_edges edges from the
    doubled truncation together with the displacement the doubling caused;
    converged is False when that displacement exceeds 1e-8.
    """
    modes = potential.mode_count
    m_min = 4 * modes + 8
    if m_truncation < m_min:
        raise ConfigurationError(
            "m_truncation=%d too small; need at least 4*modes+8 = %d"
            % (m_truncation, m_min))
    coarse = _hill_edges_at(potential, m_truncation)[:n_edges]
    fine = _hill_edges_at(potential, 2 * m_truncation)[:n_edges]
    displacement = float(np.max(np.abs(fine - coarse))) if n_edges else 0.0
    return HillEdgeResult(fine, 2 * m_truncation, displacement)


class OracleConfig:
    """Geometry and absorber settings for the finite-difference box."""

    def __init__(self, box_half_length, n_points, cap_strength=0.0,
                 cap_onset=0.8, boundary="dirichlet"):
        self.box_half_length = float(box_half_length)
        self.n_points = int(n_points)
        self.cap_strength = float(cap_strength)
        self.cap_onset = float(cap_onset)
        self.boundary = boundary
        if self.box_half_length <= 0.0:
            raise ConfigurationError("box_half_length must be positive")
        if self.n_points < 16:
            raise ConfigurationError("n_points=%d too small" % self.n_points)
        if self.n_points > MAX_GRID_POINTS:
            raise ConfigurationError(
                "n_points=%d exceeds ceiling %d; increase epsilon or reduce the margin"
                % (self.n_points, MAX_GRID_POINTS))
        if self.cap_strength < 0.0:
            raise ConfigurationError("cap_strength must be nonnegative")
        if not 0.0 < self.cap_onset < 1.0:
            raise ConfigurationError("cap_onset must lie in (0, 1)")
        if self.boundary != "dirichlet":
            raise ConfigurationError("only Dirichlet boundaries are supported")
        if self.points_per_period < MIN_POINTS_PER_PERIOD - 1e-9:
            raise ConfigurationError(
                "grid resolves only %.1f points per potential period (need >= %d)"
                % (self.points_per_period, MIN_POINTS_PER_PERIOD))

    @property
    def spacing(self):
        return 2.0 * self.box_half_length / (self.n_points + 1)

    @property
    def points_per_period(self):
        return 1.0 / self.spacing

    @classmethod
    def for_window(cls, window, epsilon, points_per_period=MIN_POINTS_PER_PERIOD,
                   margin=10.0, cap_strength=0.0, cap_onset=0.8):
        """Smallest box that holds the window endpoints with the given
        slow-variable margin, at the requested grid resolution."""
        anchors = [z for z in (window.zeta0_minus, window.zeta0_plus)
                   if z is not None and math.isfinite(z)]
        if not anchors:
            anchors = [z for z in (window.zeta_minus, window.zeta_plus)
                       if math.isfinite(z)]
        if not anchors:
            raise ConfigurationError("window has no finite endpoint to anchor the box")
        base = sum(abs(z) for z in anchors) if len(anchors) >= 2 else 2.0 * abs(anchors[0])
        half_length = (base + margin) / epsilon
        # ceil keeps the realized resolution at or above the request
        n_points = int(math.ceil(2.0 * half_length * points_per_period)) - 1
        return cls(half_length, n_points, cap_strength=cap_strength,
                   cap_onset=cap_onset)

    def to_dict(self):
        return {"box_half_length": self.box_half_length,
                "n_points": self.n_points,
                "cap_strength": self.cap_strength,
                "cap_onset": self.cap_onset,
                "boundary": self.boundary}


class GridHamiltonian:
    """Assembled tridiagonal operator plus everything needed to rebuild it."""

    def __init__(self, diag, off, x, config, potential, profile, zeta, epsilon):
        self.diag = diag
        self.off = float(off)
        self.x = x
        self.config = config
        self.potential = potential
        self.profile = profile
        self.zeta = float(zeta)
        self.epsilon = float(epsilon)

    @property
    def is_complex(self):
        return np.iscomplexobj(self.diag)

    def as_sparse(self):
        n = self.diag.size
        off = np.full(n - 1, self.off)
        return diags([off, self.diag, off], [-1, 0, 1], format="csc")


def build_grid_hamiltonian(potential, profile, zeta, epsilon, config, window=None):
    """Finite-difference Hamiltonian for -d2/dx2 + V(x) + W(eps*x + zeta).

    When a window is supplied, the box is required to contain its finite
    endpoints with the standard margin (eps*L >= |zeta0+| + |zeta0-| + 10
    in the one-well regime), otherwise a ConfigurationError is raised.
    """
    L = config.box_half_length
    if window is not None:
        z0 = [z for z in (window.zeta0_minus, window.zeta0_plus)
              if z is not None and math.isfinite(z)]
        if len(z0) == 2 and epsilon * L < abs(z0[0]) + abs(z0[1]) + 10.0 - 1e-9:
            raise ConfigurationError(
                "window does not fit: eps*L = %.3f < |zeta0+| + |zeta0-| + 10 = %.3f"
                % (epsilon * L, abs(z0[0]) + abs(z0[1]) + 10.0))
        for p in (window.zeta_minus, window.zeta0_minus, window.zeta0_plus,
                  window.zeta_plus):
            if p is None or not math.isfinite(p):
                continue
            if not (zeta - epsilon * L + 5.0 <= p <= zeta + epsilon * L - 5.0):
                raise ConfigurationError(
                    "window endpoint zeta=%.3f outside the box image [%.3f, %.3f] "
                    "with the 5-unit margin" % (p, zeta - epsilon * L, zeta + epsilon * L))
    delta = config.spacing
    i = np.arange(1, config.n_points + 1)
    x = -L + i * delta
    diag = 2.0 / delta ** 2 + potential(x) + profile(epsilon * x + zeta)
    if config.cap_strength > 0.0:
        ramp = np.clip((np.abs(x) - config.cap_onset * L) / ((1.0 - config.cap_onset) * L),
                       0.0, None)
        diag = diag.astype(complex) - 1j * config.cap_strength * ramp ** 2
    return GridHamiltonian(diag, -1.0 / delta ** 2, x, config, potential,
                           profile, zeta, epsilon)


class OracleEigenpair:
    """Eigenvalue with its absorber-stability and localization diagnostics."""

    def __init__(self, eigenvalue, stability, localization):
        self.eigenvalue = complex(eigenvalue)
        self.stability = float(stability)
        self.localization = float(localization)

    def __repr__(self):
        return "OracleEigenpair(eigenvalue=%r, stability=%.3e, localization=%.3f)" % (
            self.eigenvalue, self.stability, self.localization)


def _localization(x, vec, region):
    lo, hi = region
    mass = np.abs(vec) ** 2
    total = mass.sum()
    if total <= 0.0:
        return 0.0
    return float(mass[(x >= lo) & (x <= hi)].sum() / total)


def _cap_eigensolve(handle, e_window, n_eigs, shifts):
    a = handle.as_sparse()
    n = handle.diag.size
    k = min(n_eigs, n - 2)
    found_vals = []
    found_vecs = []
    for sigma in shifts:
        try:
            vals, vecs = eigs(a, k=k, sigma=complex(sigma))
        except ArpackNoConvergence as exc:
            raise OracleError("shift-invert eigensolver failed to converge "
                              "(N=%d, sigma=%r)" % (n, sigma)) from exc
        for j in range(vals.size):
            lam = complex(vals[j])
            if any(abs(lam - q) <= 1e-8 * (1.0 + abs(lam)) for q in found_vals):
                continue
            found_vals.append(lam)
            found_vecs.append(vecs[:, j])
    keep = [j for j, lam in enumerate(found_vals)
            if e_window[0] <= lam.real <= e_window[1]]
    return [found_vals[j] for j in keep], [found_vecs[j] for j in keep]


def oracle_spectrum(handle, e_window, localization_region=None, n_eigs=90,
                    shifts=None):
    """Eigenpairs of the box operator with Re(E) inside e_window.

    With the absorber off this is a complete interval solve of the real
    tridiagonal matrix. With it on, ARPACK shift-invert runs at one or more
    interior shifts; each eigenvalue's stability field records its
    displacement when the run is repeated at half the absorber strength
    (resonances barely move, box artifacts move at the scale of their
    width). Localization is the |psi|^2 fraction inside
    localization_region (box coordinates; defaults to the central half).
    """
    ea, eb = float(e_window[0]), float(e_window[1])
    if not ea < eb:
        raise ConfigurationError("empty oracle energy window [%g, %g]" % (ea, eb))
    cfg = handle.config
    kinetic_ceiling = (math.pi / cfg.spacing) ** 2 / 16.0
    if eb > kinetic_ceiling:
        raise ConfigurationError(
            "energy window top %g too close to the grid kinetic ceiling %g; "
            "refine the grid" % (eb, kinetic_ceiling))
    region = localization_region
    if region is None:
        region = (-cfg.box_half_length / 2.0, cfg.box_half_length / 2.0)

    if cfg.cap_strength == 0.0:
        d = np.asarray(handle.diag, dtype=float)
        e = np.full(d.size - 1, handle.off)
        try:
            w, v = eigh_tridiagonal(d, e, select="v", select_range=(ea, eb))
        except Exception as exc:  # LAPACK failures carry no useful subclass
            raise OracleError("tridiagonal interval solve failed (N=%d)" % d.size) from exc
        pairs = [OracleEigenpair(w[j], 0.0, _localization(handle.x, v[:, j], region))
                 for j in range(w.size)]
        return sorted(pairs, key=lambda p: p.eigenvalue.real)

    if shifts is None:
        shifts = [0.5 * (ea + eb)]
    vals, vecs = _cap_eigensolve(handle, e_window, n_eigs, shifts)
    half_cfg = OracleConfig(cfg.box_half_length, cfg.n_points,
                            cap_strength=0.5 * cfg.cap_strength,
                            cap_onset=cfg.cap_onset, boundary=cfg.boundary)
    half_handle = build_grid_hamiltonian(handle.potential, handle.profile,
                                         handle.zeta, handle.epsilon, half_cfg)
    half_vals, _ = _cap_eigensolve(half_handle, e_window, n_eigs, shifts)
    pairs = []
    for lam, vec in zip(vals, vecs):
        if half_vals:
            disp = min(abs(lam - q) for q in half_vals)
        else:
            disp = math.inf
        pairs.append(OracleEigenpair(lam, disp, _localization(handle.x, vec, region)))
    return sorted(pairs, key=lambda p: p.eigenvalue.real)
