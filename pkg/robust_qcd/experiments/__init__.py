import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from robust_qcd.calibration import EstimateWithError
from robust_qcd.distributions import Seed

EXPERIMENTS = ("table1", "table2", "table3", "bayes-curve", "lfd", "jsb", "srp", "far", "custom")


class ConfigError(ValueError):
    pass


class AcceptanceMiss(AssertionError):
    pass


@dataclass(frozen=True)
class Budget:
    # replications per delay or false alarm cell
    runs_per_cell: int = 10_000
    # total replications a single threshold search may spend
    calibration_cap: int = 100_000

    @property
    def is_dry_run(self) -> bool:
        return self.runs_per_cell == 0

    def to_dict(self) -> Dict[str, Any]:
        return {"runs_per_cell": self.runs_per_cell, "calibration_cap": self.calibration_cap}


@dataclass(frozen=True)
class Cell:
    row: str
    column: str
    estimate: Optional[EstimateWithError] = None
    seed: Optional[Seed] = None
    budget: Optional[Budget] = None
    # threshold the evaluated detector was calibrated to
    eta: Optional[float] = None
    error: Optional[str] = None

    @property
    def value(self) -> float:
        return self.estimate.value if self.estimate is not None else math.nan

    @property
    def stderr(self) -> float:
        return self.estimate.stderr if self.estimate is not None else math.nan

    def to_dict(self) -> Dict[str, Any]:
        return {
            "row": self.row,
            "column": self.column,
            "estimate": self.estimate.to_dict() if self.estimate is not None else None,
            "seed": self.seed.to_dict() if self.seed is not None else None,
            "budget": self.budget.to_dict() if self.budget is not None else None,
            "eta": self.eta,
            "error": self.error,
        }

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "Cell":
        return Cell(
            row=data["row"],
            column=data["column"],
            estimate=EstimateWithError.from_dict(data["estimate"]) if data.get("estimate") else None,
            seed=Seed(**data["seed"]) if data.get("seed") else None,
            budget=Budget(**data["budget"]) if data.get("budget") else None,
            eta=data.get("eta"),
            error=data.get("error"),
        )


@dataclass
class ResultTable:
    name: str
    experiment: str
    rows: List[str]
    columns: List[str]
    cells: List[Cell] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def get(self, row: str, column: str) -> Optional[Cell]:
        for cell in self.cells:
            if cell.row == row and cell.column == column:
                return cell
        return None

    def ordered_cells(self) -> List[Cell]:
        """
        Cells in row-major order of the declared rows and columns.
        """
        return [cell for row in self.rows for column in self.columns
                if (cell := self.get(row, column)) is not None]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "experiment": self.experiment,
            "rows": list(self.rows),
            "columns": list(self.columns),
            "cells": [cell.to_dict() for cell in self.ordered_cells()],
            "metadata": self.metadata,
        }

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "ResultTable":
        return ResultTable(
            name=data["name"],
            experiment=data["experiment"],
            rows=list(data["rows"]),
            columns=list(data["columns"]),
            cells=[Cell.from_dict(c) for c in data["cells"]],
            metadata=dict(data.get("metadata", {})),
        )


@dataclass(frozen=True)
class Curve:
    label: str
    # (x, y, stderr) with strictly increasing x
    points: Tuple[Tuple[float, float, float], ...]
