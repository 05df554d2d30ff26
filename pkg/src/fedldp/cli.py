"""Command-line surface: calibrate, sweep, simulate, validate, plot.

Exit codes: 0 success, 1 domain/validation failure (with a machine-readable
JSON error record on stdout), 2 internal error.  Every file-emitting command
also writes a run manifest listing each artifact with its content digest;
equal inputs produce byte-equal artifacts and therefore equal digests.
"""

from __future__ import annotations

import json
import sys
import traceback
from dataclasses import replace
from pathlib import Path

import click

from . import __version__, accountants, checks, fedsgd_sim, plotting, reporting, tradeoff
from .accountants import CalibrationRequest, Method
from .errors import FedldpError
from .privacy_core import PrivacyBudget

_SEC32_DEFAULTS = {
    "epsilon": 0.3,
    "delta": 1e-4,
    "q": 1e-3,
    "rounds": 70_000,
    "users": 100,
    "dim": 10_000,
    "clip": 1.0,
    "grad_bound": 5.0,
    "lam": 1.0,
    "mu": 1.0,
    "delta_tilde": accountants.AC1_DELTA_TILDE_DEFAULT,
}


def _echo_json(doc: dict) -> None:
    click.echo(reporting.render_json(doc))


def _reg(dim: int, clip: float, grad_bound: float, lam: float, mu: float) -> tradeoff.LossRegularity:
    return tradeoff.LossRegularity(mu=mu, lam=lam, grad_bound=grad_bound, clip=clip, dim=dim)


@click.group(name="fedldp")
@click.version_option(version=__version__)
def cli() -> None:
    """Noise calibration and privacy/utility/rate tradeoffs for LDP FedSGD."""


@cli.command()
@click.option("--method", type=click.Choice([m.value for m in Method]), required=True)
@click.option("--epsilon", type=float, default=_SEC32_DEFAULTS["epsilon"], show_default=True)
@click.option("--delta", type=float, default=_SEC32_DEFAULTS["delta"], show_default=True)
@click.option("--q", type=float, default=_SEC32_DEFAULTS["q"], show_default=True)
@click.option("--rounds", type=int, default=_SEC32_DEFAULTS["rounds"], show_default=True)
@click.option("--delta-tilde", type=float, default=_SEC32_DEFAULTS["delta_tilde"],
              show_default=True, help="composition slack for ac1")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="also write the JSON result to this path")
def calibrate(method, epsilon, delta, q, rounds, delta_tilde, out) -> None:
    """Minimal admissible noise sigma^2 for one (epsilon, delta, q, T) target."""
    req = CalibrationRequest(
        budget=PrivacyBudget(epsilon=epsilon, delta=delta),
        q=q,
        rounds=rounds,
        method=Method(method),
        ac1_delta_tilde=delta_tilde,
    )
    result = accountants.calibrate(req)
    doc = {
        "method": result.method.value,
        "epsilon": epsilon,
        "delta": delta,
        "q": q,
        "rounds": rounds,
        "sigma_sq": result.sigma_sq,
        "sigma": result.sigma,
        "validity": {
            "q_ok": result.validity.q_ok,
            "sigma_ok": result.validity.sigma_ok,
            "epsilon_ok": result.validity.epsilon_ok,
            "overall": result.validity.overall,
        },
        "caps": {"sigma_sq_cap": 1.0 / (16.0 * q) ** 2},
    }
    if result.method == Method.AC1:
        doc["delta_tilde"] = delta_tilde
        doc["epsilon0"] = result.epsilon0
        doc["delta0"] = result.delta0
    _echo_json(doc)
    if out is not None:
        out.write_text(reporting.render_json(doc) + "\n", encoding="ascii")


@cli.command()
@click.option("--methods", default="proposed,ma,ac1,ac2", show_default=True,
              help="comma-separated subset of the four methods")
@click.option("--eps-start", type=float, default=0.10, show_default=True)
@click.option("--eps-stop", type=float, default=1.00, show_default=True)
@click.option("--eps-step", type=float, default=0.05, show_default=True)
@click.option("--delta", type=float, default=_SEC32_DEFAULTS["delta"], show_default=True)
@click.option("--q", type=float, default=_SEC32_DEFAULTS["q"], show_default=True)
@click.option("--rounds", default="70000,700000", show_default=True,
              help="comma-separated round counts")
@click.option("--users", type=int, default=_SEC32_DEFAULTS["users"], show_default=True)
@click.option("--dim", type=int, default=_SEC32_DEFAULTS["dim"], show_default=True)
@click.option("--clip", type=float, default=_SEC32_DEFAULTS["clip"], show_default=True)
@click.option("--grad-bound", type=float, default=_SEC32_DEFAULTS["grad_bound"],
              show_default=True)
@click.option("--lambda", "lam", type=float, default=_SEC32_DEFAULTS["lam"], show_default=True)
@click.option("--mu", type=float, default=_SEC32_DEFAULTS["mu"], show_default=True)
@click.option("--delta-tilde", type=float, default=_SEC32_DEFAULTS["delta_tilde"],
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="recorded in the manifest; the sweep itself is closed-form")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--plot", is_flag=True, help="also render the three SVG panels")
def sweep(methods, eps_start, eps_stop, eps_step, delta, q, rounds, users, dim,
          clip, grad_bound, lam, mu, delta_tilde, seed, out, plot) -> None:
    """Calibrate all methods over an epsilon/T grid and write the sweep CSV."""
    method_list = [Method(m.strip()) for m in methods.split(",") if m.strip()]
    t_list = [int(t) for t in str(rounds).split(",") if t.strip()]
    eps_grid = tradeoff.default_eps_grid(eps_start, eps_stop, eps_step)
    reg = _reg(dim, clip, grad_bound, lam, mu)
    rows = tradeoff.sweep(
        method_list, eps_grid, delta, q, t_list, users, reg, ac1_delta_tilde=delta_tilde
    )
    artifacts = [reporting.write_sweep_csv(rows, out)]
    if plot:
        caps = {t: tradeoff.validity_caps(q, t, reg, users) for t in t_list}
        artifacts.extend(plotting.render_sweep_panels(rows, caps, out.with_suffix("")))
    annotations = checks.reference_annotations()
    manifest = reporting.build_manifest(
        "sweep",
        {
            "methods": [m.value for m in method_list],
            "eps_start": eps_start,
            "eps_stop": eps_stop,
            "eps_step": eps_step,
            "delta": delta,
            "q": q,
            "rounds": t_list,
            "users": users,
            "dim": dim,
            "clip": clip,
            "grad_bound": grad_bound,
            "lambda": lam,
            "mu": mu,
            "delta_tilde": delta_tilde,
        },
        seed,
        artifacts,
        extra={"reference_annotations": annotations},
    )
    manifest_path = Path(f"{out.with_suffix('')}.manifest.json")
    manifest_path.write_text(reporting.render_json(manifest) + "\n", encoding="ascii")
    click.echo(f"wrote {len(rows)} rows to {out}")
    for path in artifacts[1:]:
        click.echo(f"wrote {path}")
    click.echo(f"wrote {manifest_path}")
    click.echo("reference point (computed vs reference, informational):")
    for row in annotations:
        click.echo(
            f"  {row['method']:<8} utility {row['utility_computed']:#.4g} vs "
            f"{row['utility_reference']:g}   rate(bits) "
            f"{row['rate_bits_computed']:#.5g} vs {row['rate_bits_reference']:g}"
        )


@cli.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--rounds", type=int, default=None, help="override the config rounds")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True,
              help="output stem; writes <out>_trajectory.csv, <out>_summary.json, "
                   "<out>.manifest.json")
def simulate(config_path, seed, rounds, out) -> None:
    """Run the seeded FedSGD simulation described by a JSON config file."""
    from .errors import ConfigError

    try:
        doc = json.loads(config_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"config is not valid JSON: {exc}") from exc
    cfg = fedsgd_sim.SimConfig.from_dict(doc)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if rounds is not None:
        cfg = replace(cfg, rounds=rounds)
    result = fedsgd_sim.run_simulation(cfg)
    reg = _reg(cfg.dim, cfg.clip, cfg.grad_bound, cfg.lam, cfg.mu)
    sigma_agg_sq = fedsgd_sim.aggregate_noise_sq(cfg)
    bound = tradeoff.utility_lower_bound(cfg.rounds, reg, sigma_agg_sq)
    trajectory = reporting.write_trajectory_csv(result, Path(f"{out}_trajectory.csv"))
    summary = {
        "empirical_utility": result.empirical_utility,
        "utility_bound": bound,
        "bound_satisfied": bool(result.empirical_utility >= bound),
        "margin": result.empirical_utility / bound,
        "final_loss_gap": float(result.mean_loss_gap[-1]),
        "sigma_agg_sq": sigma_agg_sq,
        "realized_grad_norm_max": result.realized_grad_norm_max,
        "grad_bound": cfg.grad_bound,
        "rounds": cfg.rounds,
        "repetitions": cfg.repetitions,
        "users": cfg.users,
        "dim": cfg.dim,
        "seed": cfg.seed,
    }
    summary_path = Path(f"{out}_summary.json")
    summary_path.write_text(reporting.render_json(summary) + "\n", encoding="ascii")
    manifest = reporting.build_manifest(
        "simulate",
        {
            "config": {
                "users": cfg.users, "dim": cfg.dim,
                "per_user_data": list(cfg.per_user_data),
                "q": list(cfg.q), "sigma": list(cfg.sigma),
                "clip": cfg.clip, "rounds": cfg.rounds,
                "grad_bound": cfg.grad_bound, "repetitions": cfg.repetitions,
                "lambda": cfg.lam, "mu": cfg.mu,
                "data_radius": cfg.data_radius,
                "validate_grad_bound": cfg.validate_grad_bound,
            }
        },
        cfg.seed,
        [trajectory, summary_path],
    )
    manifest_path = Path(f"{out}.manifest.json")
    manifest_path.write_text(reporting.render_json(manifest) + "\n", encoding="ascii")
    click.echo(f"wrote {trajectory}")
    click.echo(f"wrote {summary_path}")
    click.echo(f"wrote {manifest_path}")
    click.echo(
        f"empirical utility {result.empirical_utility:.6g} vs bound {bound:.6g} "
        f"({'ok' if summary['bound_satisfied'] else 'BELOW BOUND'})"
    )


@cli.command()
@click.option("--full", is_flag=True,
              help="run the simulation check at full scale (100 repetitions, T=5000)")
def validate(full) -> None:
    """Run the end-to-end consistency checks and print a pass/fail table."""
    results = checks.run_all_checks(full=full)
    width = max(len(r.name) for r in results)
    failed = False
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        if not r.gated:
            status = "INFO"
        elif not r.passed:
            failed = True
        click.echo(f"[{status}] {r.name:<{width}}  {r.detail}")
    click.echo("reference annotations (informational):")
    for row in checks.reference_annotations():
        click.echo(
            f"  {row['method']:<8} utility {row['utility_computed']:#.4g} vs "
            f"{row['utility_reference']:g}   rate(bits) "
            f"{row['rate_bits_computed']:#.5g} vs {row['rate_bits_reference']:g}"
        )
    if failed:
        raise click.exceptions.Exit(1)


@cli.command()
@click.option("--csv", "csv_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True,
              help="output stem for the three SVG panels")
@click.option("--q", type=float, default=_SEC32_DEFAULTS["q"], show_default=True)
@click.option("--users", type=int, default=_SEC32_DEFAULTS["users"], show_default=True)
@click.option("--dim", type=int, default=_SEC32_DEFAULTS["dim"], show_default=True)
@click.option("--clip", type=float, default=_SEC32_DEFAULTS["clip"], show_default=True)
@click.option("--grad-bound", type=float, default=_SEC32_DEFAULTS["grad_bound"],
              show_default=True)
@click.option("--lambda", "lam", type=float, default=_SEC32_DEFAULTS["lam"], show_default=True)
@click.option("--mu", type=float, default=_SEC32_DEFAULTS["mu"], show_default=True)
def plot(csv_path, out, q, users, dim, clip, grad_bound, lam, mu) -> None:
    """Re-render the three tradeoff panels from an existing sweep CSV."""
    rows = reporting.read_sweep_csv(csv_path)
    reg = _reg(dim, clip, grad_bound, lam, mu)
    t_values = sorted({row.rounds for row in rows})
    caps = {t: tradeoff.validity_caps(q, t, reg, users) for t in t_values}
    artifacts = plotting.render_sweep_panels(rows, caps, out)
    manifest = reporting.build_manifest(
        "plot",
        {"csv": csv_path.name, "q": q, "users": users, "dim": dim, "clip": clip,
         "grad_bound": grad_bound, "lambda": lam, "mu": mu},
        None,
        artifacts,
    )
    manifest_path = Path(f"{out}.manifest.json")
    manifest_path.write_text(reporting.render_json(manifest) + "\n", encoding="ascii")
    for path in artifacts:
        click.echo(f"wrote {path}")
    click.echo(f"wrote {manifest_path}")


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except FedldpError as exc:
        _echo_json({"error": exc.code, "message": str(exc)})
        return 1
    except Exception:  # noqa: BLE001 - the documented internal-error path
        traceback.print_exc()
        return 2
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
