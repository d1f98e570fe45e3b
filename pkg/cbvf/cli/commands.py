"""CLI commands for cbvf."""

import logging
import time
from typing import TYPE_CHECKING, Callable, Optional

import click

from cbvf import __version__
from cbvf.core.errors import CBVFError, ConfigError, TruncationError

if TYPE_CHECKING:
    from cbvf.artifacts.config import RunConfig
    from cbvf.core.classk import ClassKSpec
    from cbvf.core.report import Report

logger = logging.getLogger("cbvf.cli")

EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3

VERIFY_MODES = ("viscosity", "classical", "barrier", "avoid-invariance")
SYNTH_MODES = ("max", "limit")


def _setup_logging(quiet: bool) -> None:
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _run(action: Callable[[], int]) -> None:
    """Run a command body and exit with its code; errors map to exit codes 2 and 3."""
    try:
        code = action()
    except ConfigError as e:
        click.echo(f"Config error: {e}", err=True)
        raise SystemExit(EXIT_CONFIG_ERROR)
    except (CBVFError, ArithmeticError) as e:
        click.echo(f"Error: {e}", err=True)
        raise SystemExit(EXIT_RUNTIME_ERROR)
    except OSError as e:
        click.echo(f"Error: {e}", err=True)
        raise SystemExit(EXIT_RUNTIME_ERROR)
    raise SystemExit(code)


def _require_alpha(config: "RunConfig", mode: str) -> "ClassKSpec":
    alpha = config.build_alpha()
    if alpha is None:
        raise ConfigError(f"a class-K function is required for mode '{mode}'", "alpha")
    return alpha


def _echo_report(report: "Report") -> None:
    click.echo(report.summary())
    for component in report.components:
        click.echo(f"  {component.summary()}")
    for note in report.notes:
        click.echo(f"  note: {note}")
    for witness in report.witnesses[:3]:
        click.echo(
            f"  witness x={list(witness.state)} t/T={witness.time:g}: "
            f"measured {witness.measured:.6g}, required {witness.required:.6g}"
        )


config_option = click.option(
    "--config", "config_path", required=True, type=click.Path(), help="Run config (JSON)"
)
out_option = click.option("--out", "out_dir", default="out", help="Output directory")
seed_option = click.option("--seed", type=int, default=None, help="Override the config seed")
quiet_option = click.option("--quiet", is_flag=True, help="Only log warnings and errors")


@click.group()
@click.version_option(version=__version__, prog_name="cbvf")
def cli() -> None:
    """cbvf - control barrier value functions on grids.

    Solve anti-discounted Hamilton-Jacobi value functions, decide whether a
    function is a viscosity control barrier function, and build new ones.

    Exit codes: 0 pass, 1 fail, 2 config error, 3 runtime error, 4 inconclusive.
    """
    pass


@cli.command()
@config_option
@out_option
@seed_option
@quiet_option
def solve(config_path: str, out_dir: str, seed: Optional[int], quiet: bool) -> None:
    """Solve the value function at every checkpoint and write the fields.

    Writes v_T<T>.csv with a .json grid sidecar per checkpoint plus
    manifest.json. Without "alpha" in the config the avoid value is solved.

    Example:
        cbvf solve --config configs/scalar_example.json --out out/scalar
    """
    _setup_logging(quiet)

    def action() -> int:
        from cbvf.analyzers.verify import clamp_nonneg
        from cbvf.artifacts.config import load_config
        from cbvf.artifacts.writer import ArtifactWriter, RunManifest
        from cbvf.solver.marching import solve_avoid, solve_cbvf

        config = load_config(config_path)
        system = config.build_system()
        alpha = config.build_alpha()
        params = config.solver_params()
        raw = config.build_field()
        g = clamp_nonneg(raw)
        if g is not raw:
            logger.warning("g has negative values; solving for %s", g.label)

        writer = ArtifactWriter(out_dir)
        started = time.perf_counter()
        try:
            if alpha is None:
                series = solve_avoid(system, g, params)
            else:
                series = solve_cbvf(system, alpha, g, params)
        except TruncationError as e:
            if e.partial is not None:
                writer.write_series(e.partial)
                click.echo(f"Partial series written to {out_dir}", err=True)
            raise

        writer.write_series(series)
        writer.write_manifest(
            RunManifest(
                system=system.to_dict(),
                alpha=alpha.to_dict() if alpha is not None else None,
                grid=g.grid.to_dict(),
                params={**params.to_dict(), "seed": config.seed if seed is None else seed},
                wall_clock=time.perf_counter() - started,
                steps=series.steps,
            )
        )
        kind = "avoid value" if alpha is None else f"CB-VF ({alpha.kind})"
        click.echo(f"Solved {kind} for '{system.name}' to T={series.horizon:g}")
        click.echo(f"  Checkpoints: {len(series)}  Steps: {series.steps}")
        click.echo(f"  Output: {out_dir}")
        return 0

    _run(action)


@cli.command()
@config_option
@click.option(
    "--mode", type=click.Choice(VERIFY_MODES), default="viscosity", help="Which check to run"
)
@out_option
@seed_option
@quiet_option
def verify(
    config_path: str, mode: str, out_dir: str, seed: Optional[int], quiet: bool
) -> None:
    """Check the config's g as a barrier function and write report.json.

    Modes:
        viscosity         time invariance of the value function started from max(0, g)
        classical         max_u ∇g·f >= -α(g) on seeded samples of the grid box
        barrier           closed-loop rollouts against the Barrier Guarantee bound
        avoid-invariance  time invariance of the avoid value, plus verify.alphas

    Example:
        cbvf verify --config configs/double_integrator.json --mode viscosity
    """
    _setup_logging(quiet)

    def action() -> int:
        from cbvf.analyzers.verify import (
            barrier_rollouts,
            barrier_verdict,
            check_avoid_time_invariance,
            check_classical_cbf,
            verify_viscosity_cbf,
        )
        from cbvf.artifacts.config import load_config
        from cbvf.artifacts.writer import ArtifactWriter
        from cbvf.utils.sampling import Lcg64

        config = load_config(config_path)
        system = config.build_system()
        settings = config.verify
        run_seed = config.seed if seed is None else seed
        writer = ArtifactWriter(out_dir)

        if mode == "viscosity":
            report = verify_viscosity_cbf(
                system,
                _require_alpha(config, mode),
                config.build_field(),
                config.solver_params(),
                settings.tol,
                settings.margin_band,
            )
        elif mode == "classical":
            grid = config.build_grid()
            samples = Lcg64(run_seed).sample_box(grid.lo, grid.hi, settings.classical_samples)
            report = check_classical_cbf(
                system,
                _require_alpha(config, mode),
                config.g_function(),
                samples,
                tol=settings.classical_tol,
                control_resolution=config.solver.control_resolution,
            )
        elif mode == "barrier":
            alpha = _require_alpha(config, mode)
            params = config.barrier_params(run_seed)
            rollouts = barrier_rollouts(system, alpha, config.build_field(), params)
            report = barrier_verdict(rollouts, alpha, params.theta, params.tol)
            for rollout in rollouts:
                if rollout.trajectory is None:
                    continue
                writer.write_trajectory(rollout.trajectory, f"trajectory_{rollout.index}.csv")
                writer.write_theta_log(
                    rollout.theta_log.to_frame(), f"theta_log_{rollout.index}.csv"
                )
        else:
            alphas = config.extra_alphas()
            alpha = config.build_alpha()
            if alpha is not None:
                alphas.insert(0, alpha)
            report = check_avoid_time_invariance(
                system,
                config.build_field(),
                alphas,
                config.solver_params(),
                settings.tol,
                settings.margin_band,
            )

        writer.write_report(report)
        _echo_report(report)
        return report.exit_code

    _run(action)


@cli.command()
@out_option
@seed_option
@quiet_option
def counterexample(out_dir: str, seed: Optional[int], quiet: bool) -> None:
    """Show a classical barrier whose safe set is not control invariant.

    Passes (exit 0) when h = 1 - x1² - x2² satisfies the classical inequality
    on 10^4 seeded samples in [-2, 2]^2 for counterexample_2d, and the
    bang-bang signal with at most six switches on [0, 0.5] that keeps h highest,
    found by searching over its switch times, still takes the state from (1, 0)
    to h < -1e-4. That trajectory is written to trajectory.csv.

    Example:
        cbvf counterexample --out out/counterexample
    """
    _setup_logging(quiet)

    def action() -> int:
        from cbvf.analyzers.counterexample import CounterexampleParams, run_counterexample
        from cbvf.artifacts.writer import ArtifactWriter

        params = CounterexampleParams(seed=0 if seed is None else seed)
        report, escape = run_counterexample(params)
        writer = ArtifactWriter(out_dir)
        writer.write_trajectory(escape.trajectory)
        writer.write_report(report)
        _echo_report(report)
        return report.exit_code

    _run(action)


@cli.command()
@config_option
@click.option("--mode", type=click.Choice(SYNTH_MODES), default="limit", help="Construction")
@out_option
@seed_option
@quiet_option
def synth(config_path: str, mode: str, out_dir: str, seed: Optional[int], quiet: bool) -> None:
    """Build a new barrier function and verify it.

    Modes:
        max    max{g, g2}, checked at synth.max_tol_factor times the tolerance of g
        limit  march the value function of g until it stops changing (h_inf.csv,
               convergence.csv)

    Example:
        cbvf synth --config configs/double_integrator.json --mode limit
    """
    _setup_logging(quiet)

    def action() -> int:
        from cbvf.analyzers.synth import limit_cbvf, pointwise_max
        from cbvf.analyzers.verify import (
            clamp_nonneg,
            default_invariance_tolerance,
            verify_viscosity_cbf,
        )
        from cbvf.artifacts.config import load_config
        from cbvf.artifacts.writer import ArtifactWriter

        config = load_config(config_path)
        system = config.build_system()
        alpha = _require_alpha(config, f"synth {mode}")
        params = config.solver_params()
        band = config.verify.margin_band
        writer = ArtifactWriter(out_dir)

        if mode == "max":
            h1 = config.build_field("g")
            h2 = config.build_field("g2")
            single = config.verify.tol
            if single is None:
                single = default_invariance_tolerance(clamp_nonneg(h1))
            combined = pointwise_max(h1, h2)
            report = verify_viscosity_cbf(
                system, alpha, combined, params, config.synth.max_tol_factor * single, band
            )
            writer.write_field(combined, "h_max")
        else:
            g = clamp_nonneg(config.build_field())
            result = limit_cbvf(system, alpha, g, params, config.convergence_params(), band)
            report = result.report
            writer.write_field(result.field, "h_inf", result.T_reached)
            writer.write_history(result.history_frame())
            if result.converged:
                click.echo(f"Converged from T={result.T_converge:g}")
            else:
                click.echo(f"No convergence by T={result.T_reached:g}")

        writer.write_report(report)
        _echo_report(report)
        return report.exit_code

    _run(action)


if __name__ == "__main__":
    cli()
