"""Command-line entry point ``noma-robust``."""

import csv
import logging
import sys

import click
import numpy as np

from .certify import certify_beamformers
from .channel import generate_channels, linear_to_db
from .config import ConfigError, load_config, scenario_from
from .harness import ExperimentConfig, run_power_sweep, run_sinr_distribution, write_csv


def _experiment(config, trials, seed, workers, out, no_timestamp, feasible_only, max_scan,
                no_recovery):
    try:
        cfg = load_config(config)
    except (OSError, ConfigError) as exc:
        raise click.UsageError(str(exc))
    if seed is not None:
        cfg["seed"] = seed
    return ExperimentConfig(
        scenario=scenario_from(cfg), schemes=cfg["schemes"],
        gamma_sweep_db=cfg["gamma_sweep_db"], epsilon_list=cfg["epsilon_list"],
        trials=trials or cfg["trials"], out_dir=out, workers=workers,
        feasible_only=feasible_only, max_scan=max_scan, timestamp=not no_timestamp,
        recover=not no_recovery)


def _run_options(f):
    opts = [
        click.option("--config", "config", required=True, type=click.Path(exists=True),
                     help="key = value experiment file"),
        click.option("--trials", type=int, help="override the trial count"),
        click.option("--seed", type=int, help="override the seed"),
        click.option("--workers", type=int, default=1, show_default=True),
        click.option("--out", default="results", show_default=True, type=click.Path()),
        click.option("--no-timestamp", is_flag=True, help="omit the timestamp header line"),
        click.option("--feasible-only", is_flag=True,
                     help="keep scanning trial indices until TRIALS are feasible in every cell"),
        click.option("--max-scan", type=int, help="cap on trial indices scanned"),
        click.option("--no-recovery", is_flag=True,
                     help="keep principal eigenvectors of relaxations that are not rank one"),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _print_summary(stats):
    click.echo(f"trials kept: {len(stats.trial_indices)} (scanned {stats.scanned})")
    for c in stats.cells:
        click.echo(f"{c.scheme:>9}  eps={c.epsilon:g}  gamma={c.gamma_db:g} dB  "
                   f"optimal {c.n_optimal}/{c.n_trials}  mean power {c.mean_power_db:.3f} dB  "
                   f"violations {c.violation_fraction:.3f}  rank flags {c.n_rank_flag}")


@click.group()
@click.option("-v", "--verbose", count=True)
def main(verbose):
    """Robust NOMA beamforming experiments."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@_run_options
def sweep(**kw):
    """Transmit power versus SINR target for each scheme and error bound."""
    _print_summary(run_power_sweep(_experiment(**kw)))


@main.command("sinr-dist")
@_run_options
def sinr_dist(**kw):
    """Distribution of the minimum achieved SINR at the true channels."""
    _print_summary(run_sinr_distribution(_experiment(**kw)))


def _vec_header(prefix, M):
    return [f"{prefix}_re_{i}" for i in range(M)] + [f"{prefix}_im_{i}" for i in range(M)]


@main.command("design")
@click.option("--config", "config", required=True, type=click.Path(exists=True))
@click.option("--trial", type=int, default=0, show_default=True)
@click.option("--scheme", type=click.Choice(["robust", "nonrobust"]), default="robust",
              show_default=True)
@click.option("--out", required=True, type=click.Path())
def design_cmd(config, trial, scheme, out):
    """Solve one trial and write its beamformers for ``certify``."""
    from .formulation import design

    try:
        s = scenario_from(load_config(config))
    except (OSError, ConfigError) as exc:
        raise click.UsageError(str(exc))
    cs = generate_channels(s, trial)
    d = design(s, cs, scheme)
    if not d.solved:
        raise click.ClickException(f"trial {trial}: {d.status} {d.note}".strip())
    M = s.M
    header = ["decode_pos", "user", "noise_var", "gamma_db"] + _vec_header("h", M) + \
        _vec_header("w", M)
    rows = []
    for pos, user in enumerate(d.order):
        h, w = cs.h_hat[user], d.w[pos]
        rows.append([pos, int(user), s.noise_var[user], float(linear_to_db(s.gamma_min[user])),
                     *h.real, *h.imag, *w.real, *w.imag])
    write_csv(out, header, rows)
    click.echo(f"wrote {out}: power {d.total_power:.6g}, rank flag {int(d.rank_flag)}")


def _read_design(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.DictReader(line for line in fh if not line.startswith("#"))]
    if not rows:
        raise click.UsageError(f"{path}: no rows")
    rows.sort(key=lambda r: int(r["decode_pos"]))
    M = sum(1 for k in rows[0] if k.startswith("h_re_"))

    def vec(r, p):
        return np.array([float(r[f"{p}_re_{i}"]) + 1j * float(r[f"{p}_im_{i}"])
                         for i in range(M)])

    try:
        h = np.array([vec(r, "h") for r in rows])
        w = np.array([vec(r, "w") for r in rows])
        sig = np.array([float(r["noise_var"]) for r in rows])
        gam = np.array([float(r["gamma_db"]) for r in rows])
        users = [int(r["user"]) for r in rows]
    except (KeyError, ValueError) as exc:
        raise click.UsageError(f"{path}: malformed design file ({exc})")
    return users, h, w, sig, gam


@main.command()
@click.option("--design", "design_path", required=True, type=click.Path(exists=True))
@click.option("--epsilon", type=float, required=True)
@click.option("--tol", type=float, default=1e-9, show_default=True)
def certify(design_path, epsilon, tol):
    """Certified worst-case SINR of stored beamformers over an error ball."""
    if epsilon < 0:
        raise click.UsageError("epsilon must be >= 0")
    users, h, w, sig, gam = _read_design(design_path)
    reps = certify_beamformers(w, h, [epsilon] * len(users), sig, tol)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["layer_user", "receiver_user", "nominal_db", "worst_case_db", "target_db",
                  "meets_target", "lambda_star"])
    ok = True
    for r in reps:
        meets = r.worst_case >= 10 ** (gam[r.k] / 10) * (1 - 1e-4)
        ok &= meets
        out.writerow([users[r.k], users[r.l],
                      format(float(linear_to_db(r.nominal)), ".12g"),
                      format(float(linear_to_db(max(r.worst_case, 1e-300))), ".12g"),
                      format(gam[r.k], ".12g"), int(meets), format(r.lambda_star, ".12g")])
    if not ok:
        sys.exit(1)


if __name__ == "__main__":
    main()
