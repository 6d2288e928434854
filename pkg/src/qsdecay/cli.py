"""Command-line front end: ``qsdecay {itm-spectrum,tdse-run,compare,sweep}``.

Exit codes: 0 success, 1 configuration error, 2 physics or convergence
error, 3 sweep finished with at least one failed point.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import dataclasses
import logging
import math
import sys
import traceback
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import output
from .config import SWEEP_PARAMETERS, ConfigError, Engine, RunConfig, _float_list, load_config
from .itm.action import field_free_action, field_free_rate
from .itm.spectrum import SpectrumKind, spectrum_monochromatic, spectrum_pulse, total_rate
from .params import Envelope, derive_state, dimensionless, validity_report

log = logging.getLogger("qsdecay")

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_PARTIAL = 0, 1, 2, 3


@dataclass
class ResultBundle:
    """Files written by one command plus the headline numbers."""

    out_dir: Path
    files: dict = dc_field(default_factory=dict)
    rates: dict = dc_field(default_factory=dict)
    gates: list = dc_field(default_factory=list)
    report: dict = dc_field(default_factory=dict)


class _Writer:
    def __init__(self, cfg: RunConfig, command: str, out_dir: Path, bundle: ResultBundle):
        self.cfg, self.command, self.out_dir, self.bundle = cfg, command, Path(out_dir), bundle
        self.config_text = cfg.to_ini()

    def header(self, what: str):
        return output.provenance(self.command, self.config_text, {"content": what})

    def table(self, name, table, what):
        self.bundle.files[name] = output.write_table(self.out_dir / name, table, self.header(what))

    def kv(self, name, pairs, what):
        self.bundle.files[name] = output.write_key_values(self.out_dir / name, pairs, self.header(what))

    def rows(self, name, columns, rows, what):
        self.bundle.files[name] = output.write_csv(self.out_dir / name, columns, rows, self.header(what))


# ---------------------------------------------------------------- helpers

def resolve_energy(cfg: RunConfig) -> float:
    """Configured ``E0``, or the closed-well ground state for ``auto``."""
    if cfg.E0 is not None:
        return cfg.E0
    from .tdse.workflow import ground_energy
    E0 = ground_energy(cfg.barrier, dx=cfg.numerics.dx, sampling=cfg.numerics.sampling)
    log.info("E0 = auto -> closed-well ground state %.10f (dx = %g)", E0, cfg.numerics.dx)
    return E0


def _check_engine(cfg: RunConfig, wanted: Engine, command: str):
    if cfg.engine not in (wanted, Engine.BOTH):
        raise ConfigError(f"[engine] engine = {cfg.engine.value} does not allow '{command}'"
                          f" (needs {wanted.value} or both)")


def _branch_table(spectrum):
    groups = spectrum.saddles
    if spectrum.kind is SpectrumKind.PEAKS:
        # column 1 follows the branch with dp/dt0 > 0, column 2 the other one
        groups = [sorted(g, key=lambda sp: -sp.dp_dt0) for g in groups]
    nb = max((len(g) for g in groups), default=0)
    cols = {}
    for k in range(nb):
        cols[f"ImW_{k + 1}"] = np.array([g[k].W.imag if k < len(g) else math.nan for g in groups])
    for k in range(nb):
        cols[f"phi0_{k + 1}"] = np.array([g[k].phi0 if k < len(g) else math.nan for g in groups])
    return cols


def _gate_rows(gates):
    return [(g.name, "pass" if g.passed else "warn", g.value, g.limit, g.margin, g.note) for g in gates]


def _itm(cfg: RunConfig, E0: float):
    barrier, field, num = cfg.barrier, cfg.field, cfg.numerics
    state = derive_state(barrier, E0, cfg.gamma_width)
    R0 = field_free_rate(state, barrier)
    if field.envelope is Envelope.MONOCHROMATIC:
        spec = spectrum_monochromatic(state, barrier, field, n_per_cycle=num.n_per_cycle,
                                      shift_periods=num.shift_periods)
    else:
        spec = spectrum_pulse(state, barrier, field, n_points=num.n_points, n_per_cycle=num.n_per_cycle)
    return state, spec, total_rate(spec, R0)


def _write_itm(w: _Writer, cfg, state, spec, rate, bundle):
    table = {"p": spec.p, "E": spec.energy}
    if spec.kind is SpectrumKind.PEAKS:
        table["j"] = np.array(spec.meta.get("j", [0] * len(spec.p)), int)
        table["weight"] = spec.weight
        what = "ITM peak spectrum: weight = dR_j (rate per peak)"
    else:
        table["weight"] = spec.weight
        what = "ITM continuous spectrum: weight = dw/dp (probability per unit momentum)"
    table.update(_branch_table(spec))
    w.table("itm_spectrum.csv", table, what)

    dl = dimensionless(state, cfg.field, cfg.barrier)
    gates = validity_report(cfg.barrier, state, cfg.field)
    rates = {"E0": state.E0, "p0": state.p0, "kappa0": state.kappa0,
             "ImW_fieldfree": field_free_action(state, cfg.barrier).imag,
             "R0": rate.R0, "R": rate.R, "ratio": rate.ratio}
    if rate.w is not None:
        rates["w_total"] = rate.w
    rates.update({"p_min": spec.meta["p_min"], "p_max": spec.meta["p_max"],
                  "energy_width": spec.second_moment_width(), "beta": spec.meta["beta"]})
    rates.update({f"dimless_{k}": v for k, v in dataclasses.asdict(dl).items()})
    w.kv("itm_rates.csv", list(rates.items()), "ITM total rate and regime numbers")
    w.rows("validity.csv", ["gate", "status", "value", "limit", "margin", "note"], _gate_rows(gates),
           "regime gates (warn = outside the asymptotic regime; calculation still performed)")
    bundle.rates.update({"itm_" + k: v for k, v in rates.items()})
    bundle.gates = gates


# ---------------------------------------------------------------- commands

def cmd_itm_spectrum(cfg: RunConfig, out_dir=None) -> ResultBundle:
    _check_engine(cfg, Engine.ITM, "itm-spectrum")
    out_dir = Path(out_dir or cfg.output.dir)
    bundle = ResultBundle(out_dir)
    w = _Writer(cfg, "itm-spectrum", out_dir, bundle)
    E0 = resolve_energy(cfg)
    state, spec, rate = _itm(cfg, E0)
    _write_itm(w, cfg, state, spec, rate, bundle)
    log.info("ITM: R/R0 = %.6g (R = %.6g, R0 = %.6g)", rate.ratio, rate.R, rate.R0)
    bundle.report["spectrum"] = spec
    return bundle


def _tdse(cfg: RunConfig, w: _Writer, bundle: ResultBundle):
    from .tdse.solver import build_potential
    from .tdse.workflow import run_field_free, run_pulse
    from .tdse.analysis import window_spectrum

    num, barrier, field = cfg.numerics, cfg.barrier, cfg.field
    common = dict(dx=num.dx, dt=num.dt, boundary_threshold=num.boundary_threshold, sampling=num.sampling)
    ff = run_field_free(barrier, t_end=num.t_fieldfree, fit_start=num.fit_start, **common)
    w.table("history_fieldfree.csv",
            {"t": ff.history[:, 0], "N_well": ff.history[:, 1], "norm": ff.history[:, 2]},
            "TDSE field-free run: N_well = int_0^b |psi|^2 dx")
    rates = {"E0_ground": ff.E0, "R_fieldfree": ff.fit.R, "R_fieldfree_ci95": ff.fit.ci95}
    result = {"fieldfree": ff, "laser": None, "infinite": None}
    if field.amplitude == 0.0:
        # line at E0 with the escape width: window spectrum of the escaped part
        E = np.linspace(max(ff.E0 - 0.3, 0.01), ff.E0 + 0.3, num.n_energies)
        U = build_potential(ff.psi.grid, barrier, False, num.sampling)
        spec = window_spectrum(ff.psi, U, E, gamma_w=num.gamma_w, order_n=num.order_n,
                               x_cut=barrier.b + num.buffer)
        rates["peak_energy"] = float(E[np.argmax(spec.dwdE)])
        rates["escaped_norm"] = spec.escaped_norm
        w.table("tdse_spectrum.csv", {"E": spec.E, "dwdE": spec.dwdE},
                "TDSE field-free energy density dw/dE of the escaped wavepacket")
        result["spectrum"] = spec
    else:
        t_end = num.t_end
        lp = run_pulse(barrier, field, t_end=t_end, n_energies=num.n_energies, gamma_w=num.gamma_w,
                       order_n=num.order_n, buffer=num.buffer, fit_start=num.fit_start, **common)
        result["laser"] = lp
        w.table("history_laser.csv",
                {"t": lp.history[:, 0], "N_well": lp.history[:, 1], "norm": lp.history[:, 2]},
                "TDSE laser-assisted run: N_well = int_0^b |psi|^2 dx")
        table = {"E": lp.spectrum.E, "dwdE": lp.spectrum.dwdE}
        if num.infinite_reference:
            inf = run_pulse(barrier, field, t_end=t_end, energies=lp.spectrum.E, gamma_w=num.gamma_w,
                            order_n=num.order_n, buffer=num.buffer, infinite=True, **common)
            result["infinite"] = inf
            table["dwdE_infinite"] = inf.spectrum.dwdE
            rates["escaped_norm_infinite"] = inf.spectrum.escaped_norm
        w.table("tdse_spectrum.csv", table,
                f"TDSE energy density dw/dE at t = {lp.meta['t_end']:.6g} (window operator, order "
                f"{lp.spectrum.order_n}, gamma_w = {lp.spectrum.gamma_w:.6g})")
        if lp.fit is not None:
            rates.update({"R_laser": lp.fit.R, "R_laser_ci95": lp.fit.ci95,
                          "R_laser_over_fieldfree": lp.fit.R / ff.fit.R,
                          "fit_monotone": lp.fit.monotone})
        rates["escaped_norm"] = lp.spectrum.escaped_norm
        rates["grid_x_max"] = lp.meta["grid_x_max"]
        result["spectrum"] = lp.spectrum
    w.kv("tdse_rates.csv", list(rates.items()), "TDSE fitted decay rates (a.u.)")
    bundle.rates.update({"tdse_" + k: v for k, v in rates.items()})
    return result


def cmd_tdse_run(cfg: RunConfig, out_dir=None) -> ResultBundle:
    _check_engine(cfg, Engine.TDSE, "tdse-run")
    out_dir = Path(out_dir or cfg.output.dir)
    bundle = ResultBundle(out_dir)
    w = _Writer(cfg, "tdse-run", out_dir, bundle)
    bundle.report["tdse"] = _tdse(cfg, w, bundle)
    return bundle


def cmd_compare(cfg: RunConfig, out_dir=None) -> ResultBundle:
    from .tdse.analysis import compare
    if cfg.engine is not Engine.BOTH:
        log.info("compare runs both engines (config says engine = %s)", cfg.engine.value)
    if cfg.field.envelope is not Envelope.SIN_SQUARED or cfg.field.amplitude == 0.0:
        raise ConfigError("compare needs a sin2 pulse with nonzero amplitude ([field] envelope = sin2)")
    out_dir = Path(out_dir or cfg.output.dir)
    bundle = ResultBundle(out_dir)
    w = _Writer(cfg, "compare", out_dir, bundle)
    tdse = _tdse(cfg, w, bundle)
    E0 = cfg.E0 if cfg.E0 is not None else tdse["fieldfree"].E0
    state, spec, rate = _itm(cfg, E0)
    _write_itm(w, cfg, state, spec, rate, bundle)
    rep = compare(spec, tdse["spectrum"], R_itm=rate.R0, R_tdse=tdse["fieldfree"].fit.R, E0=E0)
    w.table("overlay.csv", {"E": rep.E, "itm_over_R0": rep.itm, "tdse_over_R0": rep.tdse},
            "energy densities divided by the respective field-free rates; ITM smoothed with the TDSE window")
    pairs = [(k.name, getattr(rep, k.name)) for k in dataclasses.fields(rep)
             if k.name not in ("E", "itm", "tdse", "cb")]
    pairs += [("cb_low", rep.cb[0]), ("cb_high", rep.cb[1])]
    w.kv("comparison.csv", pairs, "ITM vs TDSE comparison (within-CB statistics use natural logs)")
    bundle.report["comparison"] = rep
    for line in rep.lines():
        log.info("compare: %s", line)
    return bundle


def _sweep_point(cfg: RunConfig, parameter: str, value: float, out_dir: Path):
    """Run one sweep point; never raises (the error text is returned)."""
    try:
        sub = cfg.with_value(parameter, value)
        if cfg.engine is Engine.ITM:
            b = cmd_itm_spectrum(sub, out_dir)
        elif cfg.engine is Engine.TDSE:
            b = cmd_tdse_run(sub, out_dir)
        else:
            b = cmd_compare(sub, out_dir)
        rates = {k: v for k, v in b.rates.items() if isinstance(v, (int, float, np.floating))}
        return value, rates, None
    except Exception as exc:  # recorded in the aggregate table, sweep continues
        log.debug("sweep point %s=%r failed:\n%s", parameter, value, traceback.format_exc())
        return value, {}, f"{type(exc).__name__}: {exc}"


def _point_dir(parameter, value):
    return f"{parameter}_{output.fmt(float(value))}"


def cmd_sweep(cfg: RunConfig, parameter=None, values=None, out_dir=None, threads: int = 1) -> ResultBundle:
    parameter = parameter or cfg.sweep.parameter
    values = tuple(values) if values is not None else cfg.sweep.values
    if parameter is None:
        raise ConfigError("sweep parameter missing (--param or [sweep] parameter)")
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"cannot sweep {parameter!r}; choose one of {', '.join(SWEEP_PARAMETERS)}")
    if not values:
        raise ConfigError("sweep value list is empty")
    out_dir = Path(out_dir or cfg.output.dir)
    bundle = ResultBundle(out_dir)
    jobs = [(cfg, parameter, v, out_dir / _point_dir(parameter, v)) for v in values]
    if threads > 1 and len(jobs) > 1:
        with cf.ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            results = list(pool.map(_sweep_point, *zip(*jobs)))
    else:
        results = [_sweep_point(*j) for j in jobs]
    keys = []
    for _, rates, _ in results:
        for k in rates:
            if k not in keys:
                keys.append(k)
    rows = []
    for (value, rates, err), job in zip(results, jobs):
        rows.append([value, "ok" if err is None else "failed", job[3].name]
                    + [rates.get(k) for k in keys] + [err or ""])
        if err:
            log.error("sweep %s = %g failed: %s", parameter, value, err)
    # aggregate last, after every per-point bundle is on disk
    w = _Writer(cfg, "sweep", out_dir, bundle)
    w.rows("sweep.csv", [parameter, "status", "subdir"] + keys + ["error"], rows,
           f"sweep over {parameter}; one sub-directory per value")
    bundle.report["failed"] = [r[0] for r in rows if r[1] == "failed"]
    bundle.report["rows"] = rows
    bundle.report["columns"] = [parameter, "status", "subdir"] + keys + ["error"]
    return bundle


# ---------------------------------------------------------------- argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are configuration errors (exit 1)
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="sectioned key = value file")
    common.add_argument("--out", metavar="DIR", help="output directory (default: [output] dir)")
    common.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="replace one config entry; repeatable")
    common.add_argument("--threads", type=int, default=1, metavar="N",
                        help="worker processes for sweeps (default 1)")
    common.add_argument("--verbose", "-v", action="count", default=0, help="more logging (-vv for debug)")

    ap = _Parser(prog="qsdecay", description="Laser-assisted decay of a quasistationary state "
                 "through a rectangular barrier: semiclassical spectra and a TDSE reference.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("itm-spectrum", parents=[common], help="semiclassical spectrum and total rate")
    sub.add_parser("tdse-run", parents=[common], help="grid propagation: rates and dw/dE")
    sub.add_parser("compare", parents=[common], help="run both engines and compare spectra")
    sw = sub.add_parser("sweep", parents=[common], help="repeat a run over one parameter")
    sw.add_argument("--param", choices=SWEEP_PARAMETERS, help="parameter (default: [sweep] parameter)")
    sw.add_argument("--values", help="comma-separated values (default: [sweep] values)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        print("qsdecay: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.override)
        if args.command == "itm-spectrum":
            bundle = cmd_itm_spectrum(cfg, args.out)
        elif args.command == "tdse-run":
            bundle = cmd_tdse_run(cfg, args.out)
        elif args.command == "compare":
            bundle = cmd_compare(cfg, args.out)
        else:
            values = None
            if args.values is not None:
                try:
                    values = _float_list(args.values)
                except ValueError as exc:
                    raise ConfigError(f"--values: {exc}") from None
            bundle = cmd_sweep(cfg, args.param, values, args.out, args.threads)
    except ConfigError as exc:
        print(f"qsdecay: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        log.debug("%s", traceback.format_exc())
        print(f"qsdecay: error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    for name, path in bundle.files.items():
        print(path)
    if args.command == "sweep" and bundle.report.get("failed"):
        print(f"qsdecay: {len(bundle.report['failed'])} sweep point(s) failed; see sweep.csv", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
