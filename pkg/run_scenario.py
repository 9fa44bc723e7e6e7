#!/usr/bin/env python3
"""
Command-line entry point: validate a scenario file, run it and write its outputs
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import typer
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from config import DEFAULT_SEED, LOG_LEVEL, LOG_TO_FILE, SCENARIO_ORDER, resolve_output_dir
from exceptions import ConfigurationError, FisheryModelError
from io_utils import OutputManager
from run_session import RunPhase, clear_run_session, create_run_session
from scenarios.calibrate_scenario import calibrate_scenario
from scenarios.feedback_scenario import feedback_scenario
from scenarios.kfp_scenario import kfp_scenario
from scenarios.policy_scenario import policy_scenario
from scenarios.simulate_scenario import simulate_scenario
from scenarios.spatial_scenario import spatial_scenario
from utils import setup_logging
from validation_utils import load_config_file

logger = logging.getLogger(__name__)

console = Console()
app = typer.Typer(help="Fishery quota-control scenarios", add_completion=False)

SCENARIO_RUNNERS = {
    "simulate": simulate_scenario,
    "calibrate": calibrate_scenario,
    "kfp": kfp_scenario,
    "policy": policy_scenario,
    "feedback": feedback_scenario,
    "spatial": spatial_scenario,
}

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3


class ScenarioRun:
    """Runs one scenario file from validation to manifest"""

    def __init__(self, config_path: Path, seed: Optional[int] = None, out: Optional[Path] = None,
                 progress: bool = False):
        self.config_path = Path(config_path)
        self.seed_override = seed
        self.out_override = out
        self.progress = progress
        self.data: Dict[str, Any] = {}
        self.config = None
        self.seed = DEFAULT_SEED
        self.out_dir: Optional[Path] = None
        self.session = None
        self.result: Dict[str, Any] = {}

    def validate(self):
        """Raises ConfigurationError; nothing is written before this passes"""
        self.data, validation = load_config_file(self.config_path)
        self.config = validation.details["config"]
        if self.seed_override is not None:
            self.seed = self.seed_override
        elif self.config.seed is not None:
            self.seed = self.config.seed
        self.out_dir = resolve_output_dir(self.config.scenario, self.out_override, self.config.output_dir)
        logger.info(f"Config {self.config_path} is a valid {self.config.scenario} scenario")
        return self.config

    def execute(self) -> Dict[str, Any]:
        if self.config is None:
            self.validate()
        scenario = self.config.scenario
        self.session = create_run_session(self.data, self.seed, self.out_dir)
        self.session.start_phase(RunPhase.VALIDATION)
        outputs = OutputManager(self.out_dir, self.session)
        outputs.prepare()
        if LOG_TO_FILE:
            setup_logging(logging.getLevelName(logging.getLogger().level), self.out_dir)

        self.result = SCENARIO_RUNNERS[scenario].run(self.config, self.seed, outputs, self.progress)
        self._log_step(scenario, self.result)
        if self.result.get("success"):
            self.session.start_phase(RunPhase.COMPLETION)
            self.session.write_manifest()
        return self.result

    def _log_step(self, step_name: str, result: Dict[str, Any]):
        if result.get("success"):
            logger.info(f"{step_name.capitalize()} scenario: {result.get('files', 0)} files written")
        else:
            logger.error(f"{step_name.capitalize()} scenario failed: {result.get('error', 'Unknown error')}")

    def print_summary(self):
        if self.session is None:
            return
        summary = self.session.get_session_summary()
        console.print()
        console.print(create_files_table(self.session))
        metrics = self.result.get("metrics", {})
        if metrics:
            console.print()
            console.print(create_metrics_table(metrics))

        if self.result.get("success"):
            status_text = f"Scenario {summary['scenario']} completed"
            panel_style = "green"
        else:
            status_text = f"Scenario {summary['scenario']} failed: {self.result.get('error', 'Unknown error')}"
            panel_style = "red"
        console.print()
        console.print(Panel(
            f"[bold]{status_text}[/bold]\n\n"
            f"Session: {summary['session_id']} ({summary['current_phase']})\n"
            f"Seed: {summary['seed']}\n"
            f"Output directory: {self.out_dir}\n"
            f"Files: {summary['files']}\n"
            f"Warnings: {summary['warnings']}, errors: {summary['errors']}",
            title="Run Summary",
            border_style=panel_style,
        ))


def _format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return ", ".join(_format_value(v) for v in np.ravel(value))
    return str(value)


def create_files_table(session) -> Table:
    """Create the table of written files with their content hashes"""
    table = Table(title="Run Outputs", show_header=True)
    table.add_column("File", style="cyan")
    table.add_column("Kind", style="yellow")
    table.add_column("SHA-256", style="green")
    for record in sorted(session.files.values(), key=lambda r: r.path):
        table.add_row(record.path, record.kind, record.sha256[:16])
    return table


def create_metrics_table(metrics: Dict[str, Any]) -> Table:
    table = Table(title="Key Results", show_header=True)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="magenta")
    for key, value in metrics.items():
        table.add_row(key, _format_value(value))
    return table


def _report_config_errors(path: Path, errors: List[str]):
    console.print(f"[red]Invalid scenario file {path}[/red]")
    for error in errors:
        console.print(f"  [red]{error}[/red]")


@app.command()
def run(
    config: Path = typer.Argument(..., help="Scenario file (JSON)"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the seed of the scenario file"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory"),
    validate_only: bool = typer.Option(False, "--validate-only", help="Only check the scenario file"),
    verbose: bool = typer.Option(False, "--verbose", help="Enable verbose logging"),
    progress: bool = typer.Option(False, "--progress", help="Show progress bars"),
):
    """Run a scenario: simulate, calibrate, kfp, policy, feedback or spatial"""
    setup_logging("DEBUG" if verbose else LOG_LEVEL)
    runner = ScenarioRun(config, seed, out, progress)
    try:
        runner.validate()
    except ConfigurationError as e:
        _report_config_errors(config, e.errors)
        raise typer.Exit(code=EXIT_CONFIG)
    if validate_only:
        console.print(f"[green]{config} is a valid {runner.config.scenario} scenario[/green]")
        raise typer.Exit(code=EXIT_OK)

    try:
        result = runner.execute()
    except (FisheryModelError, ValueError, OSError) as e:
        logger.error(f"Scenario failed: {e}")
        console.print(f"[red]{type(e).__name__}: {e}[/red]")
        raise typer.Exit(code=EXIT_MODEL)
    finally:
        runner.print_summary()
        clear_run_session()
    if not result.get("success"):
        raise typer.Exit(code=EXIT_MODEL)


@app.command()
def validate(config: Path = typer.Argument(..., help="Scenario file (JSON)")):
    """Check a scenario file without running it"""
    setup_logging(LOG_LEVEL)
    try:
        scenario = ScenarioRun(config).validate()
    except ConfigurationError as e:
        _report_config_errors(config, e.errors)
        raise typer.Exit(code=EXIT_CONFIG)
    console.print(f"[green]{config} is a valid {scenario.scenario} scenario[/green]")


@app.command("list")
def list_scenarios():
    """List the scenario tags"""
    for tag in SCENARIO_ORDER:
        console.print(tag)


if __name__ == "__main__":
    app()
