"""Perturbation profiles and the spectral windows they cut out.

The slow profile family is

    W(zeta) = mu + nu * zeta / sqrt(1 + zeta^2)
              + sum_j b_j / (1 + ((zeta - c_j) / w_j)^2)

with limits W(+/-inf) = mu +/- nu, quadratic tail decay, and poles at
+/-i and c_j +/- i*w_j, so W is analytic on the cone
C0 |Im z| <= 1 + |Re z| with C0 = 2 / h, h = min(1, min_j w_j).

For a real energy E the spectral window is

    W(E) = { zeta in R : E - W(zeta) in spec(-d2/dx2 + V) },

a finite union of maximal intervals here (finitely many profile
monotonicity changes). Supported regimes:

* H5: no compact component (at most one unbounded component per side, or
  the full line). No resonances are produced in this regime.
* H6: exactly one compact component U = [zeta0-, zeta0+], not reduced to
  a point, plus at most one unbounded component on each side,
  U_- = (-inf, zeta-] and U_+ = [zeta+, inf). Empty sides are encoded by
  zeta- = -inf and zeta+ = +inf.

Window endpoints are transversal crossings of band edges; |W'| below
1e-6 at a crossing violates the criticality assumption and raises.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ConfigurationError,
    CriticalEndpointError,
    DomainError,
    EnergyRangeError,
    InternalConsistencyError,
    NearSingularityError,
)
from .hill import edge_band_side

_SCAN_POINTS = 2000
_CRITICAL_WPRIME = 1e-6
_SINGULARITY_GUARD = 1e-6
_POINT_COMPONENT_WIDTH = 1e-8


class Bump:
    """One Lorentzian term b / (1 + ((zeta - c)/w)^2)."""

    def __init__(self, height, center, width):
        self.height = float(height)
        self.center = float(center)
        self.width = float(width)
        if not all(math.isfinite(v) for v in (self.height, self.center, self.width)):
            raise ConfigurationError("bump parameters must be finite")
        if self.width <= 0.0:
            raise ConfigurationError("bump width must be positive")

    def as_tuple(self):
        return (self.height, self.center, self.width)

    def __repr__(self):
        return "Bump(height=%r, center=%r, width=%r)" % self.as_tuple()


class PerturbationProfile:
    """Step-plus-bumps profile; immutable and thread-safe."""

    def __init__(self, mu=0.0, nu=0.0, bumps=(), allow_constant=False):
        self.mu = float(mu)
        self.nu = float(nu)
        self.bumps = tuple(b if isinstance(b, Bump) else Bump(*b) for b in bumps)
        if not (math.isfinite(self.mu) and math.isfinite(self.nu)):
            raise ConfigurationError("profile parameters must be finite")
        if not allow_constant and self.nu == 0.0 and not any(
                b.height != 0.0 for b in self.bumps):
            raise ConfigurationError(
                "constant profile rejected (perturbation must be nontrivial); "
                "pass allow_constant=True for test mode")
        self.allow_constant = bool(allow_constant)

    @property
    def w_plus(self):
        return self.mu + self.nu

    @property
    def w_minus(self):
        return self.mu - self.nu

    @property
    def analyticity_height(self):
        widths = [b.width for b in self.bumps]
        return min(1.0, min(widths)) if widths else 1.0

    @property
    def cone_constant(self):
        return 2.0 / self.analyticity_height

    def singularities(self):
        """Poles/branch points of the analytic continuation."""
        out = [1j, -1j]
        for b in self.bumps:
            out.append(complex(b.center, b.width))
            out.append(complex(b.center, -b.width))
        return out

    def __call__(self, zeta):
        z = np.asarray(zeta)
        if np.iscomplexobj(z):
            flat = np.atleast_1d(z)
            for s in self.singularities():
                d = np.min(np.abs(flat - s))
                if d < _SINGULARITY_GUARD:
                    raise NearSingularityError(
                        "profile evaluated %.2e from the singularity %s" % (d, s))
        out = self.mu + self.nu * z / np.sqrt(1.0 + z * z)
        for b in self.bumps:
            u = (z - b.center) / b.width
            out = out + b.height / (1.0 + u * u)
        if np.asarray(out).shape:
            return out
        return complex(out) if np.iscomplexobj(z) else float(out)

    def derivative(self, zeta):
        z = np.asarray(zeta)
        out = self.nu / (1.0 + z * z) ** 1.5
        for b in self.bumps:
            u = (z - b.center) / b.width
            out = out - 2.0 * b.height * u / (b.width * (1.0 + u * u) ** 2)
        if np.asarray(out).shape:
            return out
        return complex(out) if np.iscomplexobj(z) else float(out)

    def scan_half_width(self):
        """Half-width of the endpoint root scan interval."""
        reach = max((abs(b.center) + b.width for b in self.bumps), default=0.0)
        return 10.0 + 4.0 * reach

    def _key(self):
        return (self.mu, self.nu, tuple(b.as_tuple() for b in self.bumps))

    def __eq__(self, other):
        return isinstance(other, PerturbationProfile) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return "PerturbationProfile(mu=%r, nu=%r, bumps=%r)" % (
            self.mu, self.nu, list(self.bumps))

    def to_dict(self):
        return {"mu": self.mu, "nu": self.nu,
                "bumps": [list(b.as_tuple()) for b in self.bumps],
                "allow_constant": self.allow_constant}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("mu", 0.0), d.get("nu", 0.0), d.get("bumps", ()),
                   allow_constant=d.get("allow_constant", False))


def evaluate_profile(profile, zeta):
    """W(zeta); complex arguments are admitted inside the analyticity cone
    (a near-singularity guard of 1e-6 applies)."""
    return profile(zeta)


class WindowEndpoint:
    """A transversal crossing of a band edge by E - W."""

    def __init__(self, zeta, edge_index, w_prime):
        self.zeta = float(zeta)
        self.edge_index = int(edge_index)
        self.band_index, self.side = edge_band_side(self.edge_index)
        self.w_prime = float(w_prime)

    def __repr__(self):
        return ("WindowEndpoint(zeta=%.12g, edge_index=%d, side=%s, w_prime=%.6g)"
                % (self.zeta, self.edge_index, self.side, self.w_prime))

    def to_dict(self):
        return {"zeta": self.zeta, "edge_index": self.edge_index,
                "band_index": self.band_index, "side": self.side,
                "w_prime": self.w_prime}


class WindowComponent:
    """Maximal interval of the spectral window."""

    def __init__(self, lo, hi, kind, lo_endpoint=None, hi_endpoint=None,
                 band_index=None):
        self.lo = float(lo)
        self.hi = float(hi)
        self.kind = kind
        self.lo_endpoint = lo_endpoint
        self.hi_endpoint = hi_endpoint
        self.band_index = band_index

    @property
    def width(self):
        return self.hi - self.lo

    def __repr__(self):
        return "WindowComponent(%.6g, %.6g, %r, band=%r)" % (
            self.lo, self.hi, self.kind, self.band_index)

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "kind": self.kind,
                "band_index": self.band_index,
                "lo_endpoint": None if self.lo_endpoint is None else self.lo_endpoint.to_dict(),
                "hi_endpoint": None if self.hi_endpoint is None else self.hi_endpoint.to_dict()}


class SpectralWindow:
    """Decomposed window of one energy, with the H5/H6 classification."""

    def __init__(self, energy, components, classification, e_range):
        self.energy = float(energy)
        self.components = list(components)
        self.classification = classification
        self.e_range = e_range

        self.compact = None
        left = None
        right = None
        for c in self.components:
            if c.kind == "compact":
                if self.compact is None or c.width > self.compact.width:
                    self.compact = c
            elif c.kind == "unbounded_left":
                left = c
            elif c.kind in ("unbounded_right", "full_line"):
                right = c
        self.zeta_minus = left.hi if left is not None else -math.inf
        self.zeta_plus = right.lo if right is not None else math.inf
        self.zeta0_minus = self.compact.lo if self.compact is not None else None
        self.zeta0_plus = self.compact.hi if self.compact is not None else None
        self.band_index = self.compact.band_index if self.compact is not None else None

    def __repr__(self):
        return "SpectralWindow(E=%.8g, %s, %d component(s))" % (
            self.energy, self.classification, len(self.components))

    def to_dict(self):
        return {"energy": self.energy,
                "classification": self.classification,
                "components": [c.to_dict() for c in self.components],
                "zeta_minus": self.zeta_minus, "zeta0_minus": self.zeta0_minus,
                "zeta0_plus": self.zeta0_plus, "zeta_plus": self.zeta_plus,
                "e_range": list(self.e_range)}


def _root_scan(profile, level, zgrid, wgrid, tol):
    """All transversal solutions of W(zeta) = level on the scan interval."""
    f = wgrid - level
    sgn = np.sign(f)
    sgn[sgn == 0] = -1.0
    cells = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    roots = []
    for j in cells:
        r = brentq(lambda z: profile(z) - level, zgrid[j], zgrid[j + 1],
                   xtol=1e-13)
        if abs(profile(r) - level) > tol * (1.0 + abs(level)):
            raise InternalConsistencyError(
                "endpoint refinement stalled at zeta=%.12g" % r)
        roots.append(float(r))
    return roots


def decompose_window(profile, bands, energy, tol=1e-12):
    """Decompose the spectral window of `energy` and classify it.

    Crossing points of E - W with every scanned band edge are located on
    a 2000-point grid over the profile-adapted interval [-Z, Z] and
    refined by bracketed root finding; interval membership is then decided
    at midpoints, and at the tails via the limits W(+/-inf). The scan
    interval doubles until the tail values are safely separated from every
    band edge (relative to the quadratic tail decay), so no crossing can
    hide beyond it.
    """
    energy = float(energy)
    z_half = profile.scan_half_width()
    for _attempt in range(6):
        zgrid = np.linspace(-z_half, z_half, _SCAN_POINTS)
        wgrid = profile(zgrid)
        tail_slack = 3.0 * max(abs(wgrid[0] - profile.w_minus),
                               abs(wgrid[-1] - profile.w_plus)) + 1e-12
        targets = [energy - profile.w_minus, energy - profile.w_plus]
        margin = min(min(abs(t - e) for e in bands.edges) for t in targets)
        if margin > tail_slack:
            break
        z_half *= 2.0
    else:
        raise DomainError(
            "E - W(+/-inf) sits within %.2e of a band edge; the window "
            "classification is not stable at infinity" % margin)

    e_min = energy - float(np.max(wgrid)) - tail_slack
    e_max = energy - float(np.min(wgrid)) + tail_slack
    if e_max > bands.gap_ceiling:
        raise EnergyRangeError(
            "E - W reaches %.6g, beyond the scanned band ceiling %.6g; "
            "rescan the band structure with a larger e_max" % (e_max, bands.gap_ceiling))

    endpoints = []
    for j, edge in enumerate(bands.edges, start=1):
        level = energy - float(edge)
        if level < float(np.min(wgrid)) - tail_slack or \
           level > float(np.max(wgrid)) + tail_slack:
            continue
        for r in _root_scan(profile, level, zgrid, wgrid, tol):
            wp = profile.derivative(r)
            if abs(wp) < _CRITICAL_WPRIME:
                raise CriticalEndpointError(
                    "|W'| = %.3e < %.0e at the edge crossing zeta=%.9g "
                    "(edge %d); endpoint criticality violated" % (abs(wp), _CRITICAL_WPRIME, r, j))
            endpoints.append(WindowEndpoint(r, j, wp))
    endpoints.sort(key=lambda p: p.zeta)

    # interval membership at midpoints and at the tails
    cuts = [p.zeta for p in endpoints]
    mids = []
    if cuts:
        mids.append(cuts[0] - 1.0)
        for a, b in zip(cuts[:-1], cuts[1:]):
            mids.append(0.5 * (a + b))
        mids.append(cuts[-1] + 1.0)
    else:
        mids.append(0.0)
    member = []
    for m in mids:
        kind, _ = bands.locate(energy - profile(m))
        member.append(kind == "band")
    # tails decided by the limits (the midpoint probes above sit 1 unit out,
    # which may not be asymptotic yet; the limits are authoritative there)
    if cuts:
        member[0] = bands.locate(energy - profile.w_minus)[0] == "band"
        member[-1] = bands.locate(energy - profile.w_plus)[0] == "band"

    components = []
    bounds = [-math.inf] + cuts + [math.inf]
    for i, inside in enumerate(member):
        if not inside:
            continue
        lo, hi = bounds[i], bounds[i + 1]
        lo_ep = endpoints[i - 1] if i > 0 else None
        hi_ep = endpoints[i] if i < len(endpoints) else None
        if math.isinf(lo) and math.isinf(hi):
            kind = "full_line"
        elif math.isinf(lo):
            kind = "unbounded_left"
        elif math.isinf(hi):
            kind = "unbounded_right"
        else:
            kind = "compact"
        mid = mids[i]
        loc_kind, band_n = bands.locate(energy - profile(mid))
        if loc_kind != "band":
            raise InternalConsistencyError("component midpoint left the spectrum")
        components.append(WindowComponent(lo, hi, kind, lo_ep, hi_ep, band_n))

    # merge sanity: adjacent members must alternate (transversal crossings)
    for a, b in zip(member[:-1], member[1:]):
        if a == b:
            raise InternalConsistencyError(
                "window membership failed to alternate across an endpoint")

    compacts = [c for c in components if c.kind == "compact"]
    if not components:
        classification = "EMPTY"
    elif len(compacts) > 1:
        classification = "GENERAL"
    elif len(compacts) == 1:
        classification = "H6" if compacts[0].width > _POINT_COMPONENT_WIDTH else "GENERAL"
    else:
        classification = "H5"

    if classification == "H6":
        c = compacts[0]
        for ep in (c.lo_endpoint, c.hi_endpoint):
            if ep.band_index != c.band_index:
                raise InternalConsistencyError(
                    "compact component in band %r bounded by an edge of band %r"
                    % (c.band_index, ep.band_index))

    return SpectralWindow(energy, components, classification, (e_min, e_max))


def classify_energy(profile, bands, energy):
    """'H5' | 'H6' | 'GENERAL' | 'EMPTY' for this energy's window."""
    return decompose_window(profile, bands, energy).classification
