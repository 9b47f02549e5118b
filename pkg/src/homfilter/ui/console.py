"""Console output handling with consistent styling"""

import math
from rich.console import Console
from rich.table import Table
from rich.panel import Panel
from rich.text import Text
from rich.status import Status
from typing import TYPE_CHECKING, Optional, Union
from contextlib import contextmanager

from ..ui.style import (
    StyleType,
    DEFAULT_PANEL,
    DEFAULT_TABLE,
    format_status_message,
    get_check_symbol,
)

if TYPE_CHECKING:
    from ..core.report import ExperimentReport

console = Console(force_terminal=True, color_system="auto")
_current_status: Optional[Status] = None


class StyledStatus:
    """Status wrapper that keeps updated text in the loading style"""

    def __init__(self, status: Status):
        self._status = status

    def update(self, new_message: str):
        self._status.update(
            f"[{StyleType.LOADING}]{new_message}[/{StyleType.LOADING}]"
        )

    def __getattr__(self, attr):
        return getattr(self._status, attr)


@contextmanager
def progress_status(message: str):
    """Display a progress status message with consistent styling.

    Example:
        with progress_status("Running strong-convergence sweep...") as status:
            report = run_strong_convergence(config)
    """
    global _current_status

    with Status(
        f"[{StyleType.LOADING}]{message}[/{StyleType.LOADING}]",
        console=console,
        spinner="dots",
        spinner_style=f"{StyleType.LOADING}",
    ) as status:
        _current_status = status
        try:
            yield StyledStatus(status)
        finally:
            _current_status = None


def stop_status() -> None:
    """Stop displaying the current status message"""
    global _current_status
    if _current_status is not None:
        _current_status.stop()
        _current_status = None


def print_error(message: str):
    """Display error message"""
    stop_status()
    console.print(format_status_message(message, "error"))


def print_warning(message: str):
    """Display warning message"""
    console.print(format_status_message(message, "warning"))


def print_success(message: str):
    """Display success message"""
    console.print(format_status_message(message, "success"))


def format_number(value: float) -> str:
    """Format a metric value for tables"""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    if value == 0 or 1e-3 <= abs(value) < 1e4:
        return f"{value:.4f}"
    return f"{value:.3e}"


def create_report_table(report: "ExperimentReport") -> Table:
    """Create per-epsilon report table with consistent styling"""
    table = Table(
        title=f"{report.kind} ({report.model_name})",
        show_header=DEFAULT_TABLE.show_header,
        header_style=DEFAULT_TABLE.header_style,
        title_justify=DEFAULT_TABLE.title_justify,
        expand=DEFAULT_TABLE.expand,
        padding=DEFAULT_TABLE.padding,
    )

    table.add_column("ε", style=StyleType.EPSILON, justify="right")
    table.add_column("Metric", style=StyleType.METRIC)
    table.add_column("Value", style=StyleType.VALUE, justify="right")
    table.add_column("SE", style=StyleType.STD_ERROR, justify="right")
    table.add_column("Reps", justify="right")
    table.add_column("Aborts", justify="right")

    for row in report.rows:
        table.add_row(
            format_number(row.epsilon),
            row.metric,
            format_number(row.value),
            format_number(row.se),
            str(row.replications),
            str(row.aborts),
        )

    return table


def create_checks_text(report: "ExperimentReport") -> Text:
    """Create acceptance check summary with consistent styling"""
    content = Text()

    if report.slope is not None:
        content.append("Log-log slope: ")
        content.append(f"{report.slope:.4f}", style="cyan")
        low, high = report.slope_ci
        content.append(f"  (95% CI {low:.4f} .. {high:.4f})\n", style="dim")
        content.append("\n")

    content.append("Acceptance checks:\n")
    for check in report.checks:
        content.append(get_check_symbol(check.passed))
        content.append(f" {check.name}")
        if check.detail:
            content.append(f"  {check.detail}", style="dim")
        content.append("\n")

    if content.plain.endswith("\n"):
        content.remove_suffix("\n")

    return content


def create_summary_panel(title: str, content: Union[str, Text]) -> Panel:
    """Create summary panel with consistent styling"""
    return Panel.fit(
        content,
        title=title,
        title_align=DEFAULT_PANEL.title_align,
        border_style=DEFAULT_PANEL.border_style,
        padding=DEFAULT_PANEL.padding,
    )


def display_panel(title: str, content: Union[str, Text]) -> None:
    """Display a panel with consistent styling and spacing."""
    console.print()
    console.print(create_summary_panel(title, content))
    console.print()


def display_report(report: "ExperimentReport") -> None:
    """Display a full experiment report: table plus check panel"""
    print_table(create_report_table(report))
    display_panel(
        f"Report ({report.wall_clock:.1f}s, seed {report.seed})",
        create_checks_text(report),
    )


def print_table(table: Table) -> None:
    """Print table with consistent padding"""
    console.print()
    console.print(table)
