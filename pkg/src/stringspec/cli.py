"""Command line entry point: ``stringspec <command> --config FILE [--out DIR]``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, grid, load_config
from .errors import ConfigError, NumericalError, StringSpecError
from .forward import Spectrum, add_noise, analytic_spectrum, solve_forward
from .inversion import condition_study, loglog_slope, multistep, reconstruct
from .traces import choose_scale, compute_trace_targets

log = logging.getLogger("stringspec")

DENSITY_GRID = 512
ERROR_GRID = 1024


def fmt(x: float) -> str:
    return "%.17g" % x


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: str, rows) -> None:
    lines = [header] + [",".join(row) for row in rows]
    atomic_write(path, "\n".join(lines) + "\n")


def write_json(path: Path, payload: dict) -> None:
    atomic_write(path, json.dumps(payload, indent=2) + "\n")


# -- spectrum files -----------------------------------------------------------

def write_spectrum(path: Path, s: Spectrum) -> None:
    rows = ((str(k), fmt(lam)) for k, lam in enumerate(s.reliable, start=1))
    write_csv(path, "k,lambda", rows)


def read_spectrum(path, bc="dirichlet") -> Spectrum:
    path = Path(path)
    try:
        lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read spectrum file {path}: {exc}") from None
    if not lines or lines[0].replace(" ", "") != "k,lambda":
        raise ConfigError(f"{path}: expected header 'k,lambda'")
    lam = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            k, value = line.split(",")
            if int(k) != len(lam) + 1:
                raise ValueError("k out of sequence")
            lam.append(float(value))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad row {line!r} ({exc})") from None
    try:
        return Spectrum(np.array(lam), "file", len(lam), bc)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def generate_spectrum(cfg: ExperimentConfig) -> Spectrum:
    if cfg.data == "analytic":
        count = max(cfg.collocation().reliable_count, cfg.k)
        return analytic_spectrum(cfg.constant, count, cfg.boundary)
    return solve_forward(cfg.true_density(), cfg.collocation())


def load_or_generate(cfg: ExperimentConfig, spectrum_path) -> Spectrum:
    path = spectrum_path or cfg.spectrum
    if path:
        return read_spectrum(path, cfg.boundary)
    return generate_spectrum(cfg)


def run_inversion(cfg: ExperimentConfig, spectrum: Spectrum):
    stages = cfg.schedule_configs()
    if stages is not None:
        return multistep(stages, spectrum)
    return reconstruct(cfg.inversion_config(), spectrum, cfg.schedule)


# -- commands -----------------------------------------------------------------

def cmd_forward(cfg: ExperimentConfig, out: Path, args) -> None:
    s = generate_spectrum(cfg)
    write_spectrum(out / "spectrum.csv", s)
    print(f"wrote {s.reliable_count} eigenvalues to {out / 'spectrum.csv'}")


def cmd_traces(cfg: ExperimentConfig, out: Path, args) -> None:
    s = load_or_generate(cfg, args.spectrum)
    inv = cfg.inversion_config()
    t = choose_scale(s, inv.theta)
    targets = compute_trace_targets(s, inv.N, inv.K, inv.K1, t, inv.cheb_indices)
    rows = ((str(n), fmt(r)) for n, r in zip(targets.cheb_indices, targets.r_true))
    write_csv(out / "traces.csv", "n,r_true", rows)
    write_json(out / "traces.json", {
        "t": targets.t, "L_tilde": targets.L_tilde, "K": targets.K, "K1": targets.K1,
        "N": targets.N, "tau1": targets.tau1,
    })
    print(f"wrote {targets.r_true.size} trace targets to {out / 'traces.csv'}")


def cmd_invert(cfg: ExperimentConfig, out: Path, args) -> None:
    s = load_or_generate(cfg, args.spectrum)
    res = run_inversion(cfg, s)
    write_json(out / "result.json", {
        "coefficients": [float(v) for v in res.density.a],
        "converged": res.converged,
        "iterations": res.iterations,
        "final_residual_norm": res.final_residual_norm,
        "residual_norm": "l2",
        "stop_reason": res.stop_reason,
        "L_tilde": res.L_tilde,
        "t": res.t,
        "stage_log": res.stage_log,
    })
    x = grid(DENSITY_GRID)
    recon = res.density(x)
    if cfg.has_truth():
        truth = cfg.true_density()(x)
        rows = ((fmt(a), fmt(b), fmt(c)) for a, b, c in zip(x, truth, recon))
        write_csv(out / "density.csv", "x,rho_true,rho_recon", rows)
    else:
        write_csv(out / "density.csv", "x,rho_recon", ((fmt(a), fmt(c)) for a, c in zip(x, recon)))
    write_csv(out / "residuals.csv", "iter,residual_norm",
              ((str(i), fmt(r)) for i, r in enumerate(res.residual_history)))
    if args.eigenvalue_check or cfg.eigenvalue_check:
        K = res.stage_log[-1]["K"]
        lam_rec = solve_forward(res.density, cfg.collocation()).lambdas[:K]
        lam_dat = s.lambdas[:K]
        rows = ((str(k), fmt(d), fmt(r), fmt(d - r))
                for k, (d, r) in enumerate(zip(lam_dat, lam_rec), start=1))
        write_csv(out / "eigs_compare.csv", "k,lambda_data,lambda_recon,mismatch", rows)
    print(f"{res.stop_reason} after {res.iterations} iterations, "
          f"residual {res.final_residual_norm:.3e}; results in {out}")


def cmd_condnum(cfg: ExperimentConfig, out: Path, args) -> None:
    if cfg.m_max < 2:
        raise ConfigError("condnum needs m_max >= 2 (key 'm_max')")
    rows = condition_study(cfg.m_max, cfg.cond_n, cfg.cond_j, cfg.theta, cfg.boundary)
    slope = loglog_slope(rows)
    write_csv(out / "cond.csv", "M,cond", ((str(m), fmt(c)) for m, c in rows))
    write_json(out / "condnum.json", {"loglog_slope": slope, "M_range": [2, cfg.m_max],
                                      "N": cfg.cond_n, "J": cfg.cond_j, "theta": cfg.theta})
    print(f"log-log slope of cond(M) over M=2..{cfg.m_max}: {slope:.3f}")


def _noise_task(task):
    cfg, clean, sigma, seed = task
    truth = cfg.true_density()
    x = grid(ERROR_GRID)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = run_inversion(cfg, add_noise(clean, sigma, seed))
        err = float(np.max(np.abs(res.density(x) - truth(x))))
        return sigma, seed, err, res.converged
    except StringSpecError as exc:
        log.warning("sigma=%g seed=%d failed: %s", sigma, seed, exc)
        return sigma, seed, float("nan"), False


def noise_sweep(cfg: ExperimentConfig, clean: Spectrum | None = None):
    """[(sigma, seed, linf_error, converged)] for every configured (sigma, seed)."""
    clean = generate_spectrum(cfg) if clean is None else clean
    tasks = [(cfg, clean, float(s), int(seed)) for s in cfg.sigma for seed in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            return list(pool.map(_noise_task, tasks))
    return [_noise_task(t) for t in tasks]


def cmd_noise_sweep(cfg: ExperimentConfig, out: Path, args) -> None:
    if not cfg.has_truth():
        raise ConfigError("noise-sweep needs a named density (key 'density')")
    rows = noise_sweep(cfg)
    write_csv(out / "noise.csv", "sigma,seed,linf_error,converged",
              ((fmt(s), str(seed), fmt(e), str(c).lower()) for s, seed, e, c in rows))
    print(f"wrote {len(rows)} runs to {out / 'noise.csv'}")


COMMANDS = {
    "forward": cmd_forward,
    "traces": cmd_traces,
    "invert": cmd_invert,
    "condnum": cmd_condnum,
    "noise-sweep": cmd_noise_sweep,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stringspec", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", help="output directory (overrides config key 'out')")
        if name in ("traces", "invert"):
            p.add_argument("--spectrum", help="spectrum CSV (k,lambda); default: solve forward")
        if name == "invert":
            p.add_argument("--eigenvalue-check", action="store_true",
                           help="re-solve the forward problem and write eigs_compare.csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = Path(args.out or cfg.out)
        COMMANDS[args.command](cfg, out, args)
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
