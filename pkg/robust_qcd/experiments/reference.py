import logging
import math
from typing import Callable, Dict, List, Optional

from robust_qcd.const import (
    CUSUM_RELATIVE_TOLERANCE,
    GLR_RELATIVE_TOLERANCE,
    TABLE1_REFERENCE,
    TABLE2_REFERENCE,
    TABLE2_ROBUST_SPREAD,
    TABLE3_REFERENCE,
)
from robust_qcd.experiments import Cell, ResultTable

LOGGER = logging.getLogger(__name__)

# measured robust delay may exceed the first order bound by this factor
BOUND_SLACK = 1.5
BAYES_AGREEMENT_THETA = 0.1
BAYES_SEPARATION_THETAS = (0.5, 1.0, 2.0, 3.0)
SRP_BASE_THETA = 2.0


def _key(value: float) -> str:
    return f"{value:g}"


def _pooled(a: Cell, b: Cell) -> float:
    return math.sqrt(a.stderr ** 2 + b.stderr ** 2)


class _Checker:
    """
    Collects the acceptance misses of a single table.
    """

    def __init__(self, table: ResultTable):
        self.table = table
        self.misses: List[str] = []

    def cell(self, row: str, column: str) -> Optional[Cell]:
        cell = self.table.get(row, column)
        if cell is None:
            return None
        if cell.estimate is None or math.isnan(cell.value):
            self.miss(f"{row}/{column}: no estimate ({cell.error})")
            return None
        return cell

    def miss(self, message: str):
        LOGGER.warning(f"acceptance miss in '{self.table.name}': {message}")
        self.misses.append(message)

    def relative(self, row: str, column: str, expected: float, tolerance: float):
        cell = self.cell(row, column)
        if cell is None:
            return
        deviation = abs(cell.value - expected) / expected
        if deviation > tolerance:
            self.miss(f"{row}/{column}: {cell.value:.4g} deviates {deviation:.1%} from {expected} "
                      f"(tolerance {tolerance:.0%})")

    def calibrations(self, stderr_factor: float = 2.0):
        """
        Every threshold search must have met its target within stderr_factor standard errors of its estimate.
        """
        for name, result in self.table.metadata.get("calibrations", {}).items():
            if "error" in result:
                self.miss(f"calibration {name} failed: {result['error']}")
                continue
            achieved = result["achieved"]
            if abs(achieved["value"] - result["target"]) > stderr_factor * achieved["stderr"]:
                self.miss(f"calibration {name}: achieved {achieved['value']:.6g} +/- {achieved['stderr']:.3g}, "
                          f"target {result['target']:.6g}")


def _check_table1(checker: _Checker, alpha: float):
    tolerances = (CUSUM_RELATIVE_TOLERANCE, CUSUM_RELATIVE_TOLERANCE, GLR_RELATIVE_TOLERANCE)
    for theta, expected in TABLE1_REFERENCE.items():
        row = _key(theta)
        if row not in checker.table.rows:
            continue
        for column, value, tolerance in zip(("optimal-cusum", "robust-cusum", "glr"), expected, tolerances):
            checker.relative(row, column, value, tolerance)

        robust, optimal = checker.cell(row, "robust-cusum"), checker.cell(row, "optimal-cusum")
        bound, factor = checker.cell(row, "robust-bound"), checker.cell(row, "cost-factor")
        if robust is not None and bound is not None and robust.value > BOUND_SLACK * bound.value:
            checker.miss(f"{row}: robust delay {robust.value:.4g} exceeds {BOUND_SLACK} x bound {bound.value:.4g}")
        if robust is not None and optimal is not None and factor is not None \
                and robust.value / optimal.value > factor.value:
            checker.miss(f"{row}: robust/optimal ratio {robust.value / optimal.value:.3f} "
                         f"exceeds the cost factor {factor.value:.3f}")

    # the robust test's worst case over the band is the least favorable theta
    robust = [(row, c) for row in checker.table.rows if (c := checker.table.get(row, "robust-cusum")) is not None
              and c.estimate is not None]
    for (row_a, a), (row_b, b) in zip(robust, robust[1:]):
        if float(row_a) < float(row_b) and b.value > a.value + 2 * _pooled(a, b):
            checker.miss(f"robust delay increases from theta={row_a} ({a.value:.4g}) to theta={row_b} ({b.value:.4g})")


def _check_table2(checker: _Checker, alpha: float):
    for sigma1, (robust05, optimal05, robust005, optimal005) in TABLE2_REFERENCE.items():
        row = _key(sigma1)
        if row not in checker.table.rows:
            continue
        for eps, robust, optimal in ((0.05, robust05, optimal05), (0.005, robust005, optimal005)):
            checker.relative(row, f"robust-cusum@eps={_key(eps)}", robust, CUSUM_RELATIVE_TOLERANCE)
            checker.relative(row, f"optimal-cusum@eps={_key(eps)}", optimal, CUSUM_RELATIVE_TOLERANCE)

    column = f"robust-cusum@eps={_key(0.05)}"
    values = [c.value for row in checker.table.rows if (c := checker.table.get(row, column)) is not None
              and c.estimate is not None]
    if len(values) > 1:
        spread = (max(values) - min(values)) / min(values)
        if spread >= TABLE2_ROBUST_SPREAD:
            checker.miss(f"{column} varies by {spread:.1%} across sigma1 (limit {TABLE2_ROBUST_SPREAD:.0%})")


def _check_table3(checker: _Checker, alpha: float):
    row = _key(1.0)
    if row not in checker.table.rows:
        return
    for eps, expected in zip((0.05, 0.005), TABLE3_REFERENCE[1.0]):
        checker.relative(row, f"optimal-cusum@eps={_key(eps)}", expected, CUSUM_RELATIVE_TOLERANCE)


def _check_bayes_curve(checker: _Checker, alpha: float):
    row = _key(BAYES_AGREEMENT_THETA)
    robust, optimal = checker.cell(row, "robust-shiryaev"), checker.cell(row, "optimal-shiryaev")
    if robust is not None and optimal is not None and abs(robust.value - optimal.value) > 2 * _pooled(robust, optimal):
        checker.miss(f"theta={row}: robust {robust.value:.4g} and optimal {optimal.value:.4g} disagree")

    for theta in BAYES_SEPARATION_THETAS:
        row = _key(theta)
        robust, optimal = checker.cell(row, "robust-shiryaev"), checker.cell(row, "optimal-shiryaev")
        if robust is None or optimal is None:
            continue
        if robust.value - optimal.value <= 2 * _pooled(robust, optimal):
            checker.miss(f"theta={row}: robust {robust.value:.4g} does not exceed optimal {optimal.value:.4g}")
    checker.calibrations()


def _check_far(checker: _Checker, alpha: float):
    lfd = checker.cell("lfd", "mttfa")
    if lfd is None:
        return
    target = 1.0 / alpha
    # the threshold carries the calibration error on top of the cell's own
    calibration = checker.table.metadata.get("calibrations", {}).get("robust-cusum", {}).get("achieved")
    spread = math.hypot(lfd.stderr, calibration["stderr"]) if calibration else lfd.stderr
    if abs(lfd.value - target) > 2 * spread:
        checker.miss(f"mttfa under the least favorable law {lfd.value:.6g} +/- {lfd.stderr:.3g} is not 1/alpha")
    for row in checker.table.rows:
        probe = checker.cell(row, "mttfa") if row != "lfd" else None
        if probe is not None and probe.value < lfd.value - 3 * _pooled(probe, lfd):
            checker.miss(f"sigma0={row}: mttfa {probe.value:.6g} below the least favorable {lfd.value:.6g}")


def _check_srp(checker: _Checker, alpha: float):
    base = checker.cell(_key(SRP_BASE_THETA), "robust-sr")
    if base is None:
        return
    for row in checker.table.rows:
        if float(row) <= SRP_BASE_THETA:
            continue
        cell = checker.cell(row, "robust-sr")
        if cell is not None and cell.value > base.value + 2 * _pooled(cell, base):
            checker.miss(f"theta={row}: delay {cell.value:.4g} exceeds the theta={_key(SRP_BASE_THETA)} "
                         f"delay {base.value:.4g}")


def _check_jsb(checker: _Checker, alpha: float):
    tolerance = checker.table.metadata.get("jsb_tolerance", 0.0)
    for row in checker.table.rows:
        cell = checker.cell(row, "margin")
        if cell is not None and cell.value < -tolerance:
            checker.miss(f"{row}: dominance margin {cell.value:.4g} below -{tolerance}")


CHECKS: Dict[str, Callable[[_Checker, float], None]] = {
    "table1": _check_table1,
    "table2": _check_table2,
    "table3": _check_table3,
    "bayes-curve": _check_bayes_curve,
    "far": _check_far,
    "srp": _check_srp,
    "jsb": _check_jsb,
}


def check_table(table: ResultTable, alpha: Optional[float] = None) -> List[str]:
    """
    Compares a result table with the stored reference values and the expected orderings.

    :param table: the table to check
    :param alpha: false alarm level, taken from the table metadata if omitted
    :return: a description of every miss, empty if the table passes
    """
    check = CHECKS.get(table.experiment)
    if check is None:
        LOGGER.info(f"no reference values for experiment '{table.experiment}'")
        return []
    if table.metadata.get("dry_run"):
        return []
    checker = _Checker(table)
    check(checker, alpha if alpha is not None else table.metadata["alpha"])
    return checker.misses
