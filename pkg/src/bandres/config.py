"""Run-file ingestion: one structured-text file drives every command.

The file is JSON with sections potential / profile / solver / oracle plus
an output directory and a seed. Parsing is strict: unknown keys, wrong
types, and out-of-range values are rejected at load with the offending
key and, where it can be recovered from the source text, its line
number. A parsed configuration round-trips losslessly through to_dict().
"""

from __future__ import annotations

import json

from .errors import ConfigurationError
from .hill import PeriodicPotential
from .oracle import MIN_POINTS_PER_PERIOD, OracleConfig
from .solver import SolverConfig
from .window import PerturbationProfile

_TOP_KEYS = {"potential", "profile", "solver", "oracle", "output_dir", "seed"}
_POTENTIAL_KEYS = {"mean", "cos_coeffs", "sin_coeffs", "allow_constant"}
_PROFILE_KEYS = {"mu", "nu", "bumps", "allow_constant"}
_SOLVER_KEYS = {"epsilon", "zeta", "e_window", "root_tol", "nodes",
                "buffer", "c0"}
_ORACLE_KEYS = {"points_per_period", "margin", "cap_strength", "cap_onset",
                "box_half_length", "n_points", "n_eigs"}


def _key_line(text, key):
    """1-based line of the first occurrence of "key" in the source, or None."""
    needle = '"%s"' % key
    pos = text.find(needle)
    if pos < 0:
        return None
    return text.count("\n", 0, pos) + 1


def _at(source, text, key):
    line = _key_line(text, key)
    if line is None:
        return "%s: " % source
    return "%s:%d: " % (source, line)


def _check_keys(section, data, allowed, source, text):
    for key in data:
        if key not in allowed:
            raise ConfigurationError(
                "%sunknown key %r in the %s section (allowed: %s)"
                % (_at(source, text, key), key, section,
                   ", ".join(sorted(allowed))))


def _section(data, name, source, text, required=True):
    if name not in data:
        if required:
            raise ConfigurationError(
                "%s: missing required section %r" % (source, name))
        return {}
    value = data[name]
    if not isinstance(value, dict):
        raise ConfigurationError(
            "%ssection %r must be an object, got %s"
            % (_at(source, text, name), name, type(value).__name__))
    return value


class OracleSettings:
    """Grid-oracle knobs; box geometry is derived per window unless both
    box_half_length and n_points are pinned explicitly."""

    def __init__(self, points_per_period=float(MIN_POINTS_PER_PERIOD),
                 margin=10.0, cap_strength=0.0, cap_onset=0.8,
                 box_half_length=None, n_points=None, n_eigs=90):
        self.points_per_period = float(points_per_period)
        self.margin = float(margin)
        self.cap_strength = float(cap_strength)
        self.cap_onset = float(cap_onset)
        self.box_half_length = None if box_half_length is None else float(box_half_length)
        self.n_points = None if n_points is None else int(n_points)
        self.n_eigs = int(n_eigs)
        if self.points_per_period < MIN_POINTS_PER_PERIOD:
            raise ConfigurationError(
                "points_per_period=%g below the resolution floor %d"
                % (self.points_per_period, MIN_POINTS_PER_PERIOD))
        if self.margin <= 0.0:
            raise ConfigurationError("margin must be positive")
        if self.cap_strength < 0.0:
            raise ConfigurationError("cap_strength must be nonnegative")
        if not 0.0 < self.cap_onset < 1.0:
            raise ConfigurationError("cap_onset must lie in (0, 1)")
        if (self.box_half_length is None) != (self.n_points is None):
            raise ConfigurationError(
                "box_half_length and n_points pin the grid together; "
                "give both or neither")
        if self.n_eigs < 1:
            raise ConfigurationError("n_eigs must be at least 1")

    def build(self, window, epsilon):
        """OracleConfig for this window; explicit geometry wins over derived."""
        if self.box_half_length is not None:
            return OracleConfig(self.box_half_length, self.n_points,
                                cap_strength=self.cap_strength,
                                cap_onset=self.cap_onset)
        return OracleConfig.for_window(window, epsilon,
                                       points_per_period=self.points_per_period,
                                       margin=self.margin,
                                       cap_strength=self.cap_strength,
                                       cap_onset=self.cap_onset)

    def to_dict(self):
        return {"points_per_period": self.points_per_period,
                "margin": self.margin,
                "cap_strength": self.cap_strength,
                "cap_onset": self.cap_onset,
                "box_half_length": self.box_half_length,
                "n_points": self.n_points,
                "n_eigs": self.n_eigs}


class RunConfiguration:
    """Validated bundle of everything a command needs."""

    def __init__(self, potential, profile, solver, oracle=None,
                 output_dir="out", seed=0):
        self.potential = potential
        self.profile = profile
        self.solver = solver
        self.oracle = oracle if oracle is not None else OracleSettings()
        self.output_dir = str(output_dir)
        self.seed = int(seed)
        if self.seed < 0:
            raise ConfigurationError("seed must be nonnegative")

    @classmethod
    def from_dict(cls, data, source="<config>", text=""):
        if not isinstance(data, dict):
            raise ConfigurationError(
                "%s: top level must be an object, got %s"
                % (source, type(data).__name__))
        _check_keys("top-level", data, _TOP_KEYS, source, text)

        pot_d = _section(data, "potential", source, text)
        _check_keys("potential", pot_d, _POTENTIAL_KEYS, source, text)
        prof_d = _section(data, "profile", source, text)
        _check_keys("profile", prof_d, _PROFILE_KEYS, source, text)
        sol_d = _section(data, "solver", source, text)
        _check_keys("solver", sol_d, _SOLVER_KEYS, source, text)
        ora_d = _section(data, "oracle", source, text, required=False)
        _check_keys("oracle", ora_d, _ORACLE_KEYS, source, text)

        def build(section, ctor, d):
            try:
                return ctor(d)
            except ConfigurationError as exc:
                raise ConfigurationError(
                    "%sin the %s section: %s"
                    % (_at(source, text, section), section, exc)) from exc
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(
                    "%sin the %s section: %s"
                    % (_at(source, text, section), section, exc)) from exc

        potential = build("potential", PeriodicPotential.from_dict, pot_d)
        profile = build("profile", PerturbationProfile.from_dict, prof_d)

        for key in ("epsilon", "zeta", "e_window"):
            if key not in sol_d:
                raise ConfigurationError(
                    "%smissing required solver key %r"
                    % (_at(source, text, "solver"), key))
        e_window = sol_d["e_window"]
        if (not isinstance(e_window, (list, tuple)) or len(e_window) != 2
                or not all(isinstance(v, (int, float)) for v in e_window)):
            raise ConfigurationError(
                "%se_window must be a two-number array [lo, hi]"
                % _at(source, text, "e_window"))
        solver = build("solver", lambda d: SolverConfig(**d), dict(sol_d))
        oracle = build("oracle", lambda d: OracleSettings(**d), dict(ora_d))

        output_dir = data.get("output_dir", "out")
        if not isinstance(output_dir, str) or not output_dir:
            raise ConfigurationError(
                "%soutput_dir must be a nonempty string"
                % _at(source, text, "output_dir"))
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigurationError(
                "%sseed must be an integer" % _at(source, text, "seed"))

        return cls(potential, profile, solver, oracle, output_dir, seed)

    @classmethod
    def load(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError("cannot read %s: %s" % (path, exc)) from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(
                "%s:%d:%d: %s" % (path, exc.lineno, exc.colno, exc.msg)) from exc
        return cls.from_dict(data, source=str(path), text=text)

    def to_dict(self):
        return {"potential": self.potential.to_dict(),
                "profile": self.profile.to_dict(),
                "solver": self.solver.to_dict(),
                "oracle": self.oracle.to_dict(),
                "output_dir": self.output_dir,
                "seed": self.seed}

    def replace_solver(self, **overrides):
        """New configuration with some solver fields swapped out."""
        d = self.solver.to_dict()
        d.update(overrides)
        return RunConfiguration(self.potential, self.profile,
                                SolverConfig(**d), self.oracle,
                                self.output_dir, self.seed)

    def __eq__(self, other):
        return (isinstance(other, RunConfiguration)
                and self.to_dict() == other.to_dict())

    def __repr__(self):
        return ("RunConfiguration(potential=%r, profile=%r, epsilon=%g, "
                "zeta=%g)" % (self.potential, self.profile,
                              self.solver.epsilon, self.solver.zeta))


def load_configuration(path):
    """Read and validate a JSON run file; raises ConfigurationError with a
    line-numbered diagnostic on any problem."""
    return RunConfiguration.load(path)
