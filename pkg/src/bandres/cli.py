"""Command-line front end: configuration files in, CSV tables out.

Subcommands
    bands        band edges, gap table, cached band-structure record
    window       window decomposition record at one energy
    actions      action table over the energy window
    resonances   quantization table (optionally one table per zeta)
    portrait     iso-energy curve samples
    oracle       grid spectrum with stability/localization diagnostics
    verify       solver vs oracle comparison report

Exit codes: 0 success, 1 computation failure, 2 configuration error.
Numbers are written with 17 significant digits and fixed ordering, so
identical configurations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .actions import compute_action_data
from .config import RunConfiguration
from .errors import BandresError, ConfigurationError
from .hill import band_edges
from .momentum import isoenergy_portrait
from .oracle import build_grid_hamiltonian, hill_matrix_band_edges, oracle_spectrum
from .solver import locate_resonances
from .window import decompose_window

_LOCALIZED = 0.5          # eigenvector mass fraction that marks a window state
_RESONANT_LOCALIZED = 0.75
_STABLE_FRACTION = 0.1    # absorber displacement below this fraction of the width
_DEFAULT_LADDER = (0.12, 0.10, 0.08, 0.06)


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("" if v is None else _fmt(v) for v in row) + "\n")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def _write_record(path, record):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(_json_safe(record), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _build_bands(cfg, e_max=None):
    if e_max is None:
        span = abs(cfg.profile.nu) + sum(abs(b.height) for b in cfg.profile.bumps)
        e_max = max(45.0, cfg.solver.e_window[1] + span + 5.0)
    return band_edges(cfg.potential, e_max)


def _mid_energy(cfg, args):
    e = getattr(args, "energy", None)
    if e is not None:
        return float(e)
    lo, hi = cfg.solver.e_window
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------- commands

def cmd_bands(cfg, args, outdir):
    bands = _build_bands(cfg, e_max=args.e_max)
    if cfg.potential.is_constant:
        print("warning: constant potential, every gap is closed; the "
              "downstream one-well analysis needs an open gap", file=sys.stderr)
    edges = bands.edges
    flags = bands.open_gap_flags
    rows = []
    for n in range(1, bands.n_bands + 1):
        lo, hi = bands.band(n)
        if n - 1 < len(flags):
            g_lo, g_hi = bands.gap(n)
            rows.append((n, lo, hi, g_lo, g_hi, g_hi - g_lo, flags[n - 1]))
        else:
            rows.append((n, lo, hi, None, None, None, None))
    _write_csv(os.path.join(outdir, "bands.csv"),
               ("band", "lower_edge", "upper_edge", "gap_lo", "gap_hi",
                "gap_width", "gap_open"), rows)
    _write_record(os.path.join(outdir, "band_structure.json"), bands.to_dict())
    print("%d band(s), %d gap flag(s) written to %s"
          % (bands.n_bands, len(flags), outdir))

    if args.cross_check:
        n_edges = min(8, int(edges.size))
        ref = hill_matrix_band_edges(cfg.potential, args.m_trunc, n_edges=n_edges)
        _write_csv(os.path.join(outdir, "hill_edges.csv"), ("edge", "energy"),
                   [(j + 1, e) for j, e in enumerate(ref.edges)])
        dev = max(abs(a - b) / max(1.0, abs(b))
                  for a, b in zip(ref.edges, edges[:n_edges]))
        print("edge cross-check: max relative deviation %.3g "
              "(truncation displacement %.3g)" % (dev, ref.displacement))
    return 0


def cmd_window(cfg, args, outdir):
    bands = _build_bands(cfg)
    win = decompose_window(cfg.profile, bands, _mid_energy(cfg, args))
    _write_record(os.path.join(outdir, "window.json"), win.to_dict())
    print("E=%s: %s with %d component(s)"
          % (_fmt(win.energy), win.classification, len(win.components)))
    return 0


def cmd_actions(cfg, args, outdir):
    bands = _build_bands(cfg)
    lo, hi = cfg.solver.e_window
    rows = []
    for e in np.linspace(lo, hi, args.grid_points):
        win = decompose_window(cfg.profile, bands, float(e))
        data = compute_action_data(win, bands, cfg.profile,
                                   cfg.solver.nodes, cfg.solver.buffer)
        rows.append((data.energy, data.phi0, data.delta_kappa,
                     data.s_minus, data.s_plus))
    _write_csv(os.path.join(outdir, "actions.csv"),
               ("E", "Phi0", "delta_kappa", "S_minus", "S_plus"), rows)
    print("%d action rows written to %s" % (len(rows), outdir))
    return 0


_RESONANCE_HEADER = ("l", "E", "width", "t_plus", "t_minus", "dE_dzeta",
                     "residual")


def _solve_table(cfg, bands):
    win = decompose_window(cfg.profile, bands,
                           0.5 * (cfg.solver.e_window[0] + cfg.solver.e_window[1]))
    return locate_resonances(cfg.solver, win, bands, cfg.profile), win


def cmd_resonances(cfg, args, outdir):
    bands = _build_bands(cfg)
    if args.sweep_zeta is None:
        table, win = _solve_table(cfg, bands)
        _write_csv(os.path.join(outdir, "resonances.csv"), _RESONANCE_HEADER,
                   [r.to_row() for r in table])
        if win.classification == "H5":
            print("note: monotone transition window, resonance-free; "
                  "empty table written")
        else:
            print("%d resonance(s) written to %s" % (len(table), outdir))
        return 0

    n = args.sweep_zeta
    if n < 1:
        raise ConfigurationError("--sweep-zeta needs a positive count")
    eps = cfg.solver.epsilon
    index_rows = []
    for i in range(n + 1):
        zeta_i = cfg.solver.zeta + eps * i / n
        sub = cfg.replace_solver(zeta=zeta_i)
        table, _win = _solve_table(sub, bands)
        name = "resonances_sweep_%03d.csv" % i
        _write_csv(os.path.join(outdir, name), _RESONANCE_HEADER,
                   [r.to_row() for r in table])
        index_rows.append((i, zeta_i, len(table)))
    _write_csv(os.path.join(outdir, "sweep_index.csv"),
               ("index", "zeta", "count"), index_rows)
    print("%d sweep tables written to %s (zeta step %s)"
          % (n + 1, outdir, _fmt(eps / n)))
    return 0


def cmd_portrait(cfg, args, outdir):
    bands = _build_bands(cfg)
    energy = _mid_energy(cfg, args)
    if args.zeta_range is not None:
        z_lo, z_hi = args.zeta_range
    else:
        half = cfg.profile.scan_half_width()
        z_lo, z_hi = -half, half
    samples = isoenergy_portrait(cfg.profile, bands, energy, (z_lo, z_hi),
                                 args.samples)
    by_zeta = {z: branches for z, branches in samples}
    rows = []
    for z in np.linspace(z_lo, z_hi, args.samples):
        branches = by_zeta.get(float(z))
        if branches is None:
            rows.append((z, None, None))      # gap sample
        elif len(branches) == 1:
            rows.append((z, branches[0], branches[0]))
        else:
            rows.append((z, branches[0], branches[1]))
    _write_csv(os.path.join(outdir, "portrait.csv"),
               ("zeta", "kappa_branch_1", "kappa_branch_2"), rows)
    print("%d portrait samples (%d on bands) written to %s"
          % (len(rows), len(samples), outdir))
    return 0


def _run_oracle(cfg, bands, epsilon=None, zeta=None):
    sol = cfg.solver
    epsilon = sol.epsilon if epsilon is None else epsilon
    zeta = sol.zeta if zeta is None else zeta
    win = decompose_window(cfg.profile, bands, 0.5 * (sol.e_window[0] + sol.e_window[1]))
    ocfg = cfg.oracle.build(win, epsilon)
    ham = build_grid_hamiltonian(cfg.potential, cfg.profile, zeta, epsilon,
                                 ocfg, window=win)
    return oracle_spectrum(ham, sol.e_window, n_eigs=cfg.oracle.n_eigs), win


def cmd_oracle(cfg, args, outdir):
    bands = _build_bands(cfg)
    pairs, _win = _run_oracle(cfg, bands)
    rows = [(p.eigenvalue.real, p.eigenvalue.imag, p.stability, p.localization)
            for p in pairs]
    _write_csv(os.path.join(outdir, "oracle.csv"),
               ("re", "im", "stability", "localization"), rows)
    print("%d eigenvalue(s) written to %s" % (len(rows), outdir))
    return 0


# ---------------------------------------------------------------- verify

def _genuine_resonances(pairs):
    out = []
    for p in pairs:
        width = -2.0 * p.eigenvalue.imag
        if p.localization <= _RESONANT_LOCALIZED or width <= 0.0:
            continue
        if p.stability < _STABLE_FRACTION * width:
            out.append(p)
    return out


def _window_states(pairs):
    return [p for p in pairs if p.localization > _LOCALIZED]


def _match_offset(solver_e, oracle_e):
    """Index shift aligning the two sorted position lists."""
    best, best_cost = 0, math.inf
    for shift in range(-len(oracle_e), len(oracle_e) + 1):
        cost, hits = 0.0, 0
        for i, e in enumerate(solver_e):
            j = i + shift
            if 0 <= j < len(oracle_e):
                cost += abs(e - oracle_e[j])
                hits += 1
        if hits:
            cost /= hits
            if cost < best_cost:
                best, best_cost = shift, cost
    return best


def _check_counts_spacings(cfg, bands, lines):
    table, win = _solve_table(cfg, bands)
    pairs, _ = _run_oracle(cfg, bands)
    if cfg.oracle.cap_strength > 0.0:
        states = _genuine_resonances(pairs)
    else:
        states = _window_states(pairs)
    ok = True

    if win.classification == "H5":
        empty = not table and not states
        lines.append(("resonance-free", empty,
                      "solver %d, oracle %d stable narrow eigenvalue(s)"
                      % (len(table), len(states))))
        return empty

    n_s, n_o = len(table), len(states)
    count_ok = abs(n_s - n_o) <= 1
    lines.append(("count", count_ok, "solver %d vs oracle %d (|diff| <= 1)"
                  % (n_s, n_o)))
    ok &= count_ok

    solver_e = [r.e_real for r in table]
    oracle_e = sorted(p.eigenvalue.real for p in states)
    if min(n_s, n_o) >= 3:
        shift = _match_offset(solver_e, oracle_e)
        devs = []
        for i in range(len(solver_e) - 1):
            j = i + shift
            if 0 <= j and j + 1 < len(oracle_e):
                ds = solver_e[i + 1] - solver_e[i]
                do = oracle_e[j + 1] - oracle_e[j]
                devs.append(abs(ds - do) / do)
        if devs:
            worst = max(devs)
            spacing_ok = worst <= 0.10
            lines.append(("spacing", spacing_ok,
                          "max relative deviation %.2f%% (<= 10%%, shift %d)"
                          % (100.0 * worst, shift)))
            ok &= spacing_ok
        else:
            lines.append(("spacing", False, "no overlapping spacings to compare"))
            ok = False
    else:
        lines.append(("spacing", None,
                      "skipped: fewer than 3 states on a side (%d vs %d)"
                      % (n_s, n_o)))
    return ok


def _check_drift(cfg, bands, lines):
    table, win = _solve_table(cfg, bands)
    if win.classification != "H6" or not table:
        lines.append(("drift", None, "skipped: no solver table"))
        return True
    from .actions import delta_kappa as _dk
    dk = _dk(win)
    eps = cfg.solver.epsilon

    if dk == 0:
        moved = 0.0
        for frac in (1.0 / 3.0, 2.0 / 3.0):
            other, _ = _solve_table(cfg.replace_solver(zeta=cfg.solver.zeta
                                                       + frac * eps), bands)
            by_l = {r.l: r.e_real for r in other}
            for r in table:
                if r.l in by_l:
                    moved = max(moved, abs(by_l[r.l] - r.e_real))
        still = moved < 1e-10
        lines.append(("drift", still,
                      "delta_kappa = 0: max position shift %.2e (< 1e-10)" % moved))
        return still

    h = eps / 100.0
    lo_t, _ = _solve_table(cfg.replace_solver(zeta=cfg.solver.zeta - h), bands)
    hi_t, _ = _solve_table(cfg.replace_solver(zeta=cfg.solver.zeta + h), bands)
    lo_by, hi_by = ({r.l: r.e_real for r in t} for t in (lo_t, hi_t))
    devs = []
    for r in table:
        if r.l in lo_by and r.l in hi_by:
            fd = (hi_by[r.l] - lo_by[r.l]) / (2.0 * h)
            devs.append(abs(fd - r.dE_dzeta) / abs(r.dE_dzeta))
    if not devs:
        lines.append(("drift", False, "no level tracked across the zeta step"))
        return False
    worst = max(devs)
    drift_ok = worst <= 0.01
    lines.append(("drift", drift_ok,
                  "max relative deviation %.3f%% (<= 1%%) over %d level(s)"
                  % (100.0 * worst, len(devs))))
    return drift_ok


def _check_width_fit(cfg, bands, ladder, lines):
    if cfg.oracle.cap_strength <= 0.0:
        lines.append(("width-fit", None, "skipped: no absorber configured"))
        return True
    e_star = 0.5 * (cfg.solver.e_window[0] + cfg.solver.e_window[1])
    win = decompose_window(cfg.profile, bands, e_star)
    if win.classification != "H6":
        lines.append(("width-fit", None,
                      "skipped: %s window has no tracked level"
                      % win.classification))
        return True
    inv_eps, ln_w, s_refs = [], [], []
    for eps in ladder:
        sub = cfg.replace_solver(epsilon=eps)
        table, _ = _solve_table(sub, bands)
        if not table:
            lines.append(("width-fit", False,
                          "no solver level at epsilon=%g" % eps))
            return False
        tracked = min(table, key=lambda r: abs(r.e_real - e_star))
        pairs, _ = _run_oracle(sub, bands, epsilon=eps)
        genuine = _genuine_resonances(pairs)
        if not genuine:
            lines.append(("width-fit", False,
                          "no stable narrow eigenvalue at epsilon=%g" % eps))
            return False
        hit = min(genuine, key=lambda p: abs(p.eigenvalue.real - tracked.e_real))
        width = -2.0 * hit.eigenvalue.imag
        inv_eps.append(1.0 / eps)
        ln_w.append(math.log(width))
        s_refs.append(min(tracked.s_minus, tracked.s_plus))
    slope = float(np.polyfit(inv_eps, ln_w, 1)[0])
    s_ref = float(np.mean(s_refs))
    dev = abs(slope + s_ref) / s_ref
    fit_ok = dev <= 0.15
    lines.append(("width-fit", fit_ok,
                  "slope %.5f vs -min(S-,S+) = %.5f: deviation %.1f%% (<= 15%%)"
                  % (slope, -s_ref, 100.0 * dev)))
    return fit_ok


def cmd_verify(cfg, args, outdir):
    bands = _build_bands(cfg)
    lines = []
    ok = True
    try:
        ok &= _check_counts_spacings(cfg, bands, lines)
        ok &= _check_drift(cfg, bands, lines)
        ladder = tuple(args.epsilon_ladder) if args.epsilon_ladder else _DEFAULT_LADDER
        ok &= _check_width_fit(cfg, bands, ladder, lines)
    except BandresError as exc:
        lines.append(("aborted", False, str(exc)))
        ok = False
        _emit_report(lines, ok, outdir)
        return 2 if isinstance(exc, ConfigurationError) else 1
    _emit_report(lines, ok, outdir)
    return 0 if ok else 1


def _emit_report(lines, ok, outdir):
    out = ["verify report"]
    for name, status, detail in lines:
        tag = "SKIP" if status is None else ("PASS" if status else "FAIL")
        out.append("  %-15s %-4s  %s" % (name, tag, detail))
    out.append("overall %s" % ("PASS" if ok else "FAIL"))
    text = "\n".join(out) + "\n"
    sys.stdout.write(text)
    with open(os.path.join(outdir, "verify_report.txt"), "w",
              encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------- wiring

_COMMANDS = {
    "bands": cmd_bands,
    "window": cmd_window,
    "actions": cmd_actions,
    "resonances": cmd_resonances,
    "portrait": cmd_portrait,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
}


def _add_common(sp):
    sp.add_argument("--config", required=True, metavar="PATH",
                    help="JSON run configuration")
    sp.add_argument("--out", metavar="DIR", default=None,
                    help="output directory (default: configured output_dir)")
    sp.add_argument("--epsilon", type=float, default=None,
                    help="override solver epsilon")
    sp.add_argument("--zeta", type=float, default=None,
                    help="override solver zeta")
    sp.add_argument("--window", type=float, nargs=2, metavar=("A", "B"),
                    default=None, help="override the energy window")
    sp.add_argument("--root-tol", type=float, default=None,
                    help="override the root residual tolerance")
    sp.add_argument("--nodes", type=int, default=None,
                    help="override the quadrature node count")
    sp.add_argument("--buffer", type=float, default=None,
                    help="override the endpoint buffer fraction")
    sp.add_argument("--c0", type=float, default=None,
                    help="override the width prefactor convention")


def build_parser():
    p = argparse.ArgumentParser(
        prog="bandres",
        description="Band spectra, spectral-window actions, and resonance "
                    "tables for a periodic operator under a slow profile.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("bands", help="band edges and gap table")
    _add_common(sp)
    sp.add_argument("--e-max", type=float, default=45.0,
                    help="scan ceiling for the edge search")
    sp.add_argument("--cross-check", action="store_true",
                    help="also compute truncated-Fourier edges and compare")
    sp.add_argument("--m-trunc", type=int, default=24,
                    help="Fourier truncation order for --cross-check")

    sp = sub.add_parser("window", help="window decomposition at one energy")
    _add_common(sp)
    sp.add_argument("--energy", type=float, default=None,
                    help="energy to decompose (default: window midpoint)")

    sp = sub.add_parser("actions", help="action table over the energy window")
    _add_common(sp)
    sp.add_argument("--grid-points", type=int, default=25,
                    help="energy grid size for the table")

    sp = sub.add_parser("resonances", help="quantization table")
    _add_common(sp)
    sp.add_argument("--sweep-zeta", type=int, default=None, metavar="N",
                    help="emit N+1 tables stepping zeta by epsilon/N")

    sp = sub.add_parser("portrait", help="iso-energy curve samples")
    _add_common(sp)
    sp.add_argument("--energy", type=float, default=None,
                    help="energy of the curve (default: window midpoint)")
    sp.add_argument("--samples", type=int, default=801,
                    help="number of zeta samples")
    sp.add_argument("--zeta-range", type=float, nargs=2, metavar=("A", "B"),
                    default=None, help="zeta interval (default: scan width)")

    sp = sub.add_parser("oracle", help="grid spectrum with diagnostics")
    _add_common(sp)

    sp = sub.add_parser("verify", help="solver vs oracle comparison report")
    _add_common(sp)
    sp.add_argument("--epsilon-ladder", type=float, nargs="+", default=None,
                    metavar="EPS", help="epsilon values for the width fit")

    return p


def _load_with_overrides(args):
    cfg = RunConfiguration.load(args.config)
    overrides = {}
    if args.epsilon is not None:
        overrides["epsilon"] = args.epsilon
    if args.zeta is not None:
        overrides["zeta"] = args.zeta
    if args.window is not None:
        overrides["e_window"] = list(args.window)
    if args.root_tol is not None:
        overrides["root_tol"] = args.root_tol
    if args.nodes is not None:
        overrides["nodes"] = args.nodes
    if args.buffer is not None:
        overrides["buffer"] = args.buffer
    if args.c0 is not None:
        overrides["c0"] = args.c0
    return cfg.replace_solver(**overrides) if overrides else cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_with_overrides(args)
        outdir = args.out if args.out is not None else cfg.output_dir
        os.makedirs(outdir, exist_ok=True)
        return _COMMANDS[args.command](cfg, args, outdir)
    except ConfigurationError as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return 2
    except BandresError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
