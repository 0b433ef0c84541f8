"""Command-line interface: simulate | germ | duffing | sweep, all emitting CSV.

Exit codes: 0 success, 2 usage or validation error, 3 integration failure
(the partial CSV is still written, followed by ``# aborted at tau=<value>``).
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import germ
from .duffing import DUFFING_CONFIG, compare_models, demodulate, simulate_duffing
from .experiments import C_FALL, TAU_MIN, SweepSpec, fit_power_law, run_sweep
from .integrate import IntegrationError, IntegratorConfig
from .resonance import SweepLaw, SystemParams, simulate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

_BOOL_FLAGS = {"compare"}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """12 significant digits; empty cell for missing or non-finite values."""
    if x is None:
        return ""
    x = float(x)
    return f"{x:.12g}" if math.isfinite(x) else ""


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def read_config_file(path: str) -> list[str]:
    """Turn ``key=value`` lines into flag tokens placed before the command-line flags."""
    tokens: list[str] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lstrip("-").replace("_", "-")
        if key in _BOOL_FLAGS:
            if value.lower() in ("1", "true", "yes", "on"):
                tokens.append(f"--{key}")
            continue
        tokens += [f"--{key}", value]
    return tokens


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autoresonance", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--beta", type=float, default=0.05)
    shared.add_argument("--f", type=float, default=1.0)
    shared.add_argument("--epsilon", type=float, default=None)
    shared.add_argument("--psi0-re", type=float, default=0.0)
    shared.add_argument("--psi0-im", type=float, default=0.0)
    shared.add_argument("--tau-max", type=float, default=None)
    shared.add_argument("--rel-tol", type=float, default=None)
    shared.add_argument("--abs-tol", type=float, default=None)
    shared.add_argument("--stride", type=float, default=None)
    shared.add_argument("--out", default="-", help="output path, '-' for stdout")
    shared.add_argument("--config", default=None, help="key=value file; flags override it")

    p = sub.add_parser("simulate", parents=[shared], help="envelope equation run")
    p.add_argument("--sweep-law", choices=["linear", "saturating"], default="linear")
    p.add_argument("--sweep-scale", type=float, default=None)

    sub.add_parser("germ", parents=[shared], help="germ and its coefficient functions")

    p = sub.add_parser("duffing", parents=[shared], help="full oscillator run")
    p.add_argument("--compare", action="store_true")
    p.add_argument("--c-fall", type=float, default=C_FALL)
    p.add_argument("--tau-min", type=float, default=TAU_MIN)

    p = sub.add_parser("sweep", parents=[shared], help="scaling-law sweep")
    p.add_argument("--beta-list", type=_float_list, default=[0.2, 0.1, 0.05, 0.025])
    p.add_argument("--f-list", type=_float_list, default=[1.0])
    p.add_argument("--c-fall", type=float, default=C_FALL)
    p.add_argument("--tau-min", type=float, default=TAU_MIN)
    p.add_argument("--horizon-factor", type=float, default=1.5)
    p.add_argument("--workers", type=int, default=1)
    return parser


@dataclass
class RunConfig:
    command: str
    params: SystemParams
    psi0: complex
    tau_max: float
    integrator: IntegratorConfig
    out: str
    options: dict

    def describe(self) -> list[str]:
        lines = [
            f"command={self.command}",
            f"beta={fmt(self.params.beta)}",
            f"f={fmt(self.params.f)}",
            f"epsilon={fmt(self.params.epsilon)}",
            f"psi0_re={fmt(self.psi0.real)}",
            f"psi0_im={fmt(self.psi0.imag)}",
            f"tau_max={fmt(self.tau_max)}",
            f"rel_tol={fmt(self.integrator.rel_tol)}",
            f"abs_tol={fmt(self.integrator.abs_tol)}",
            f"max_step={fmt(self.integrator.max_step)}",
            f"stride={fmt(self.integrator.sample_stride)}",
        ]
        for key in sorted(self.options):
            if key == "law":
                continue
            value = self.options[key]
            if isinstance(value, (list, tuple)):
                value = ",".join(fmt(v) for v in value)
            elif isinstance(value, float):
                value = fmt(value)
            lines.append(f"{key}={value}")
        return lines


def resolve(ns: argparse.Namespace) -> RunConfig:
    """Validate parsed flags into a RunConfig; raises ValueError on bad input."""
    cmd = ns.command
    if cmd == "duffing" and ns.epsilon is None:
        raise ValueError("duffing requires --epsilon")
    params = SystemParams(ns.beta, ns.f, ns.epsilon)
    base = DUFFING_CONFIG if cmd == "duffing" else IntegratorConfig()
    integrator = IntegratorConfig(
        rel_tol=base.rel_tol if ns.rel_tol is None else ns.rel_tol,
        abs_tol=base.abs_tol if ns.abs_tol is None else ns.abs_tol,
        initial_step=base.initial_step,
        max_step=base.max_step,
        sample_stride=base.sample_stride if ns.stride is None else ns.stride,
    )
    default_tau = {"simulate": 600.0, "germ": germ.life_time(params), "duffing": 30.0, "sweep": math.nan}
    tau_max = default_tau[cmd] if ns.tau_max is None else ns.tau_max
    if cmd != "sweep" and not tau_max > 0:
        raise ValueError(f"--tau-max must be > 0, got {tau_max}")

    options: dict = {}
    if cmd == "simulate":
        law = SweepLaw(ns.sweep_law, ns.sweep_scale)
        options["sweep_law"] = law.variant
        if law.variant == "saturating":
            options["sweep_scale"] = law.resolved_scale(params)
        options["law"] = law
    elif cmd == "duffing":
        options.update(compare=ns.compare, c_fall=ns.c_fall, tau_min=ns.tau_min)
    elif cmd == "sweep":
        SweepSpec(ns.beta_list, ns.f_list, tau_horizon_factor=ns.horizon_factor)
        if not 0 < ns.c_fall < 1:
            raise ValueError("--c-fall must lie in (0, 1)")
        options.update(
            beta_list=ns.beta_list,
            f_list=ns.f_list,
            c_fall=ns.c_fall,
            tau_min=ns.tau_min,
            horizon_factor=ns.horizon_factor,
            workers=ns.workers,
        )
    return RunConfig(cmd, params, complex(ns.psi0_re, ns.psi0_im), tau_max, integrator, ns.out, options)


@contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _header(fh, cfg: RunConfig) -> None:
    fh.write("# autoresonance\n")
    for line in cfg.describe():
        fh.write(f"# {line}\n")


def _germ_cells(tau: float, params: SystemParams) -> list[str]:
    if not germ.in_germ_domain(tau, params):
        return ["", "", ""]
    g = germ.germ_psi(tau, params)
    return [fmt(g.real), fmt(g.imag), fmt(abs(g))]


def cmd_simulate(cfg: RunConfig, fh) -> int:
    law = cfg.options["law"]
    status = EXIT_OK
    try:
        traj = simulate(cfg.params, cfg.psi0, (0.0, cfg.tau_max), law, cfg.integrator)
        aborted = None
    except IntegrationError as exc:
        traj, aborted = exc.partial, exc.t_reached
        status = EXIT_RUNTIME
    _header(fh, cfg)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["tau", "re", "im", "abs", "germ_re", "germ_im", "germ_abs", "deviation_abs"])
    if traj is not None:
        for tau, psi in zip(traj.times, traj.states):
            cells = _germ_cells(tau, cfg.params)
            dev = ""
            if cells[0]:
                dev = fmt(abs(psi - germ.germ_psi(tau, cfg.params)))
            writer.writerow([fmt(tau), fmt(psi.real), fmt(psi.imag), fmt(abs(psi)), *cells, dev])
    if aborted is not None:
        fh.write(f"# aborted at tau={fmt(aborted)}\n")
    return status


def cmd_germ(cfg: RunConfig, fh) -> int:
    p = cfg.params
    _header(fh, cfg)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(
        ["tau", "theta", "germ_re", "germ_im", "germ_abs", "alpha0", "alpha1", "rho1",
         "re_lambda", "im_lambda1", "residual_abs"]
    )
    stride = cfg.integrator.sample_stride
    n = int(math.floor(cfg.tau_max / stride * (1 + 1e-12)))
    for k in range(1, n + 1):
        tau = k * stride
        if not germ.in_germ_domain(tau, p):
            continue
        theta = p.beta**2 * tau
        g = germ.germ_psi(tau, p)
        lam = germ.eigenvalues(theta, p)
        h = 1e-4 * tau
        res = ""
        if germ.in_germ_domain(tau - h, p) and germ.in_germ_domain(tau + h, p):
            res = fmt(abs(germ.residual(tau, p, h)))
        writer.writerow(
            [fmt(tau), fmt(theta), fmt(g.real), fmt(g.imag), fmt(abs(g)),
             fmt(germ.alpha0(theta, p.f)), fmt(germ.alpha1(theta, p.f)), fmt(germ.rho1(theta, p.f)),
             fmt(lam.lambda1.real), fmt(lam.lambda1.imag), res]
        )
    return EXIT_OK


def cmd_duffing(cfg: RunConfig, fh) -> int:
    p = cfg.params
    e23 = p.epsilon ** (2 / 3)
    t_span = (0.0, cfg.tau_max / e23)
    status = EXIT_OK
    aborted = None
    report = None
    if cfg.options["compare"]:
        report = compare_models(
            p, t_span, cfg.integrator, c_fall=cfg.options["c_fall"], tau_min=cfg.options["tau_min"]
        )
        traj = report.duffing
        if report.duffing_failed_at is not None:
            aborted = report.duffing_failed_at
    else:
        try:
            traj = simulate_duffing(p, t_span, config=cfg.integrator)
        except IntegrationError as exc:
            traj, aborted = exc.partial, exc.t_reached
    if aborted is not None:
        status = EXIT_RUNTIME

    _header(fh, cfg)
    writer = csv.writer(fh, lineterminator="\n")
    columns = ["t", "u", "v", "tau", "psi_est_re", "psi_est_im", "psi_est_abs"]
    if report is not None:
        columns += ["psi_re", "psi_im", "psi_abs", "deviation_abs"]
    writer.writerow(columns)
    if traj is not None:
        est = demodulate(traj, p)
        for i, (t, (u, v)) in enumerate(zip(traj.times, traj.states)):
            psi = est.states[i]
            row = [fmt(t), fmt(u), fmt(v), fmt(est.times[i]), fmt(psi.real), fmt(psi.imag), fmt(abs(psi))]
            if report is not None:
                ref = report.psi_ref[i]
                row += [fmt(ref.real), fmt(ref.imag), fmt(abs(ref)), fmt(report.error[i])]
            writer.writerow(row)
    if report is not None:
        fh.write(f"# max_abs_u_captured={fmt(report.max_abs_u)}\n")
        fh.write(f"# max_abs_u_total={fmt(report.max_abs_u_total)}\n")
        fh.write(f"# t_fall={fmt(report.t_fall)}\n")
        fh.write(f"# envelope_error_rel={fmt(report.max_error_rel)}\n")
        fh.write(f"# reduced_envelope_error_rel={fmt(report.reduced_max_error_rel)}\n")
    elif traj is not None:
        fh.write(f"# max_abs_u={fmt(np.abs(traj.states[:, 0]).max())}\n")
    if aborted is not None:
        fh.write(f"# aborted at tau={fmt(aborted * e23)}\n")
    return status


def cmd_sweep(cfg: RunConfig, fh) -> int:
    o = cfg.options
    spec = SweepSpec(
        o["beta_list"],
        o["f_list"],
        cfg.psi0,
        o["horizon_factor"],
        cfg.integrator,
        o["c_fall"],
        o["tau_min"],
    )
    records = run_sweep(spec, workers=o["workers"])
    _header(fh, cfg)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["beta", "f", "tau_fall", "max_abs", "tau_at_max", "decay_rate", "status"])
    for r in records:
        writer.writerow(
            [fmt(r.params.beta), fmt(r.params.f), fmt(r.tau_fall), fmt(r.max_abs),
             fmt(r.tau_at_max), fmt(r.decay_rate), r.status]
        )

    good = [r for r in records if r.status == "ok" and r.tau_fall is not None]
    betas = {r.params.beta for r in good}
    fs = {r.params.f for r in good}
    if len(betas) > 1 and len(fs) == 1:
        against, x = "beta", lambda r: r.params.beta
    elif len(fs) > 1 and len(betas) == 1:
        against, x = "f", lambda r: r.params.f
    else:
        against, x = "f_over_beta", lambda r: r.params.f / r.params.beta
    fh.write("# summary\n")
    if len({x(r) for r in good}) < 2:
        fh.write("# fit skipped: insufficient points\n")
        return EXIT_OK
    for name, y in (("tau_fall", lambda r: r.tau_fall), ("max_abs", lambda r: r.max_abs)):
        fit = fit_power_law([(x(r), y(r)) for r in good])
        fh.write(
            f"# fit {name} vs {against}: exponent={fmt(fit.exponent)} "
            f"log_prefactor={fmt(fit.log_prefactor)} r_squared={fmt(fit.r_squared)} "
            f"n_points={fit.n_points}\n"
        )
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "germ": cmd_germ, "duffing": cmd_duffing, "sweep": cmd_sweep}


def _expand_config(argv: list[str]) -> list[str]:
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    path = None
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif arg.startswith("--config="):
            path = arg.split("=", 1)[1]
    if path is None or not argv:
        return argv
    return argv[:1] + read_config_file(path) + argv[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
        ns = parser.parse_args(argv)
        cfg = resolve(ns)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, ValueError, OSError) as exc:
        print(f"autoresonance: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        with _open_out(cfg.out) as fh:
            return COMMANDS[cfg.command](cfg, fh)
    except BrokenPipeError:
        # downstream reader closed early (e.g. `| head`); not an error of ours
        sys.stderr.close()
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
