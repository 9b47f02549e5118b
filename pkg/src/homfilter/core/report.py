"""Experiment reports and their CSV / TOML artifacts"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import tomlkit

from .config import ExperimentConfig


def format_value(value: Any) -> str:
    """17 significant digits for floats, plain text otherwise"""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


@dataclass
class ReportRow:
    epsilon: float
    metric: str
    value: float
    se: float
    replications: int
    aborts: int = 0


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ExperimentReport:
    """Per-ε rows, acceptance checks and the config that produced them"""

    kind: str
    model_name: str
    seed: int
    config: ExperimentConfig
    rows: List[ReportRow] = field(default_factory=list)
    checks: List[CheckResult] = field(default_factory=list)
    slope: Optional[float] = None
    slope_ci: Optional[Tuple[float, float]] = None
    wall_clock: float = 0.0
    notes: List[str] = field(default_factory=list)

    def add_row(self, *args, **kwargs) -> ReportRow:
        row = ReportRow(*args, **kwargs)
        self.rows.append(row)
        return row

    def check(self, name: str, passed: bool, detail: str = "") -> CheckResult:
        result = CheckResult(name, bool(passed), detail)
        self.checks.append(result)
        return result

    def metric(self, name: str) -> List[ReportRow]:
        return [row for row in self.rows if row.metric == name]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def write(self, out_dir: Path) -> List[Path]:
        """Write rows, checks, config echo and provenance under ``out_dir``

        Wall-clock time only appears in the provenance file, so the CSVs
        of two runs with the same config and seed are byte-identical.
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = self.kind.replace("-", "_")
        written = []

        path = out_dir / f"{stem}.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(
                ["epsilon", "metric", "value", "se", "replications", "aborts"]
            )
            for row in self.rows:
                writer.writerow(
                    [
                        format_value(float(row.epsilon)),
                        row.metric,
                        format_value(float(row.value)),
                        format_value(float(row.se)),
                        row.replications,
                        row.aborts,
                    ]
                )
        written.append(path)

        path = out_dir / f"{stem}_checks.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["check", "passed", "detail"])
            for check in self.checks:
                writer.writerow(
                    [check.name, format_value(check.passed), check.detail]
                )
            if self.slope is not None:
                low, high = self.slope_ci
                writer.writerow(
                    [
                        "loglog-slope",
                        "",
                        f"{format_value(self.slope)} "
                        f"[{format_value(low)}, {format_value(high)}]",
                    ]
                )
        written.append(path)

        path = out_dir / f"{stem}_config.toml"
        path.write_text(self.config.to_toml(), encoding="utf-8")
        written.append(path)

        path = out_dir / f"{stem}_provenance.toml"
        path.write_text(tomlkit.dumps(self.provenance()), encoding="utf-8")
        written.append(path)
        return written

    def provenance(self) -> Dict[str, Any]:
        from .. import __version__

        return {
            "kind": self.kind,
            "model": self.model_name,
            "seed": str(self.seed),
            "wall_clock_seconds": (
                self.wall_clock if math.isfinite(self.wall_clock) else -1.0
            ),
            "passed": self.passed,
            "homfilter_version": __version__,
            "notes": list(self.notes),
        }
