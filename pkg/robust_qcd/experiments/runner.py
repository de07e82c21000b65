import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from robust_qcd.calibration import CalibrationMode, CalibrationResult, EstimateWithError
from robust_qcd.calibration.threshold import calibrate_threshold, default_max_len, estimate_mttfa
from robust_qcd.detectors import CusumSpec, GlrSpec, InvalidDetector, ShiryaevSpec, SrSpec, parse_detector
from robust_qcd.detectors.steps import StoppingRule
from robust_qcd.distributions import (
    Distribution1D,
    Exponential,
    Gaussian,
    InvalidDistribution,
    Seed,
    contaminated,
    parse_distribution,
)
from robust_qcd.experiments import Cell, ConfigError, Curve, ResultTable
from robust_qcd.experiments.config import SEED_INDEX_LIMIT, ExperimentConfig
from robust_qcd.experiments.coordinator import ExperimentCoordinator, Task
from robust_qcd.simulator import DEFAULT_JSRP_GRID, DelayEstimate, DelayMetric
from robust_qcd.simulator.bounds import asymptotic_bound
from robust_qcd.simulator.delay import estimate_add, estimate_jsrp, estimate_wdd
from robust_qcd.uncertainty import (
    DegenerateClasses,
    DensityLogRatio,
    EpsContamination,
    ExpRateRay,
    GaussianMeanBand,
    LfdPair,
    NonMonotoneLR,
    Singleton,
    UncertaintyClass,
    UnsupportedClassPair,
    parse_uncertainty_class,
)
from robust_qcd.uncertainty.dominance import check_jsb
from robust_qcd.uncertainty.lfd import describe_lfd, solve_lfd


# seed indices: calibration j uses CALIBRATION_SEED_OFFSET + j, cell i uses CELL_SEED_OFFSET + i
CALIBRATION_SEED_OFFSET = 1_000
CELL_SEED_OFFSET = 1_000_000


def derive_seed(seed: Seed, offset: int, index: int) -> Seed:
    """
    Seed of the index-th calibration or cell of an experiment, disjoint for distinct config seed indices.

    :raises ValueError: when the seed index or offset + index do not fit into 32 bits
    """
    if not 0 <= seed.index < SEED_INDEX_LIMIT or not 0 <= offset + index < SEED_INDEX_LIMIT:
        raise ValueError(f"cannot derive a seed from index {seed.index} with offset {offset} + {index}")
    return seed.child(seed.index * 2 ** 32 + offset + index)


# evaluates the (calibrated) detector of one cell: (rule, runs, seed) -> estimate
CellFunc = Callable[[Optional[StoppingRule], int, Seed], EstimateWithError]


@dataclass(frozen=True)
class CalibrationPlan:
    name: str
    rule: StoppingRule
    mode: CalibrationMode
    nu0: Distribution1D
    nu1: Optional[Distribution1D] = None
    rho: Optional[float] = None


@dataclass(frozen=True)
class CellPlan:
    row: str
    column: str
    evaluate: CellFunc
    # name of the calibration providing the detector, None for analytic cells
    calibration: Optional[str] = None
    # detector used as is when there is no calibration
    rule: Optional[StoppingRule] = None


@dataclass
class ExperimentPlan:
    rows: List[str]
    columns: List[str]
    calibrations: List[CalibrationPlan] = field(default_factory=list)
    cells: List[CellPlan] = field(default_factory=list)
    # (curve label, column) pairs; x values are the numeric row keys
    curves: List[Tuple[str, str]] = field(default_factory=list)
    reports: Dict[str, Any] = field(default_factory=dict)
    # extra table metadata
    metadata: Dict[str, Any] = field(default_factory=dict)


@dataclass
class ExperimentOutcome:
    table: ResultTable
    curves: List[Curve]
    reports: Dict[str, Any]
    wall_time: float


def _key(value: float) -> str:
    return f"{value:g}"


def _analytic(value: float, seed: Seed) -> EstimateWithError:
    return EstimateWithError(value=float(value), stderr=0.0, n_runs=0, censored_fraction=0.0, seed=seed)


def _gaussian(block: Any, what: str) -> Gaussian:
    d = parse_distribution(block)
    if not isinstance(d, Gaussian):
        raise ConfigError(f"{what} must be a gaussian distribution, got {d.describe()}")
    return d


def _floats(values: Any, what: str) -> List[float]:
    if not isinstance(values, (list, tuple)) or len(values) == 0:
        raise ConfigError(f"{what} must be a nonempty list, got {values!r}")
    return [float(v) for v in values]


def _wdd(nu0: Distribution1D, nu1: Distribution1D) -> CellFunc:
    def evaluate(rule: StoppingRule, runs: int, seed: Seed) -> EstimateWithError:
        return estimate_wdd(rule, nu0, nu1, runs, seed).estimate

    return evaluate


def _add(nu0: Distribution1D, nu1: Distribution1D, rho: float) -> CellFunc:
    def evaluate(rule: StoppingRule, runs: int, seed: Seed) -> EstimateWithError:
        return estimate_add(rule, nu0, nu1, rho, runs, seed).estimate

    return evaluate


def _jsrp(nu0: Distribution1D, nu1: Distribution1D, grid: Tuple[int, ...]) -> CellFunc:
    def evaluate(rule: StoppingRule, runs: int, seed: Seed) -> EstimateWithError:
        return estimate_jsrp(rule, nu0, nu1, runs, seed, lambda_grid=grid).estimate

    return evaluate


def _mttfa(nu0: Distribution1D, alpha: float) -> CellFunc:
    def evaluate(rule: StoppingRule, runs: int, seed: Seed) -> EstimateWithError:
        return estimate_mttfa(rule, nu0, runs, default_max_len(alpha), seed)

    return evaluate


def _constant(value: Callable[[], float]) -> CellFunc:
    def evaluate(rule: Optional[StoppingRule], runs: int, seed: Seed) -> EstimateWithError:
        return _analytic(value(), seed)

    return evaluate


def _plan_table1(config: ExperimentConfig) -> ExperimentPlan:
    params = config.params
    band = GaussianMeanBand(**{k: float(v) for k, v in params["band"].items()})
    thetas = _floats(params["thetas"], "thetas")
    for theta in thetas:
        if not band.contains(Gaussian(theta, band.sd)):
            raise ConfigError(f"theta={theta} lies outside the band [{band.lo}, {band.hi}]")
    nominal0 = Gaussian(0.0, band.sd)
    lfd = solve_lfd(Singleton(nominal0), band)

    plan = ExperimentPlan(rows=[_key(t) for t in thetas],
                          columns=["optimal-cusum", "robust-cusum", "glr", "robust-bound", "cost-factor"])
    plan.calibrations.append(CalibrationPlan("robust-cusum", StoppingRule(CusumSpec(), lfd.llr),
                                             CalibrationMode.FAR, lfd.nu0_bar))
    glr = GlrSpec(theta_lo=band.lo, theta_hi=band.hi, window=int(params["glr_window"]))
    plan.calibrations.append(CalibrationPlan("glr", StoppingRule(glr), CalibrationMode.FAR, nominal0))

    for theta in thetas:
        nu1 = Gaussian(theta, band.sd)
        optimal = solve_lfd(Singleton(nominal0), Singleton(nu1))
        optimal_name = f"optimal-cusum@theta={_key(theta)}"
        plan.calibrations.append(CalibrationPlan(optimal_name, StoppingRule(CusumSpec(), optimal.llr),
                                                 CalibrationMode.FAR, nominal0))
        row = _key(theta)
        plan.cells += [
            CellPlan(row, "optimal-cusum", _wdd(nominal0, nu1), calibration=optimal_name),
            CellPlan(row, "robust-cusum", _wdd(nominal0, nu1), calibration="robust-cusum"),
            CellPlan(row, "glr", _wdd(nominal0, nu1), calibration="glr"),
            CellPlan(row, "robust-bound",
                     _constant(lambda nu1=nu1: asymptotic_bound(nominal0, nu1, lfd, config.alpha).delay_bound)),
            CellPlan(row, "cost-factor",
                     _constant(lambda nu1=nu1: asymptotic_bound(nominal0, nu1, lfd, config.alpha).factor)),
        ]
    plan.curves = [(column, column) for column in ("optimal-cusum", "robust-cusum", "glr")]
    return plan


def _contamination_setup(params: Dict[str, Any]) -> Tuple[Gaussian, Gaussian, List[float]]:
    nominal0 = _gaussian(params["nominal0"], "nominal0")
    nominal1 = _gaussian(params["nominal1"], "nominal1")
    eps_list = _floats(params["eps"] if isinstance(params["eps"], list) else [params["eps"]], "eps")
    return nominal0, nominal1, eps_list


def _plan_contamination_table(config: ExperimentConfig, rows_are_sigma1: bool) -> ExperimentPlan:
    """
    eps-contamination tables. Rows are the post-change contaminant spread sigma1 (with fixed sigma0) or the
    pre-change contaminant spread sigma0 (with fixed sigma1); the optimal CUSUM knows the true mixtures.
    """
    params = config.params
    nominal0, nominal1, eps_list = _contamination_setup(params)
    sigmas = _floats(params["sigma1"] if rows_are_sigma1 else params["sigma0"], "row sigmas")
    fixed_sigma = float(params["sigma0"] if rows_are_sigma1 else params["sigma1"])
    label = "sigma1" if rows_are_sigma1 else "sigma0"

    columns = []
    plan = ExperimentPlan(rows=[_key(s) for s in sigmas], columns=columns)
    for eps in eps_list:
        robust_column, optimal_column = f"robust-cusum@eps={_key(eps)}", f"optimal-cusum@eps={_key(eps)}"
        if rows_are_sigma1:
            columns.append(robust_column)
            lfd = solve_lfd(EpsContamination(nominal0, eps), EpsContamination(nominal1, eps))
            plan.calibrations.append(CalibrationPlan(robust_column, StoppingRule(CusumSpec(), lfd.llr),
                                                     CalibrationMode.FAR, lfd.nu0_bar))
        columns.append(optimal_column)

        for sigma in sigmas:
            sigma0, sigma1 = (fixed_sigma, sigma) if rows_are_sigma1 else (sigma, fixed_sigma)
            nu0 = contaminated(nominal0, eps, Gaussian(nominal0.mean, sigma0))
            nu1 = contaminated(nominal1, eps, Gaussian(nominal1.mean, sigma1))
            name = f"{optimal_column},{label}={_key(sigma)}"
            plan.calibrations.append(CalibrationPlan(name, StoppingRule(CusumSpec(), DensityLogRatio(nu0, nu1)),
                                                     CalibrationMode.FAR, nu0))
            row = _key(sigma)
            if rows_are_sigma1:
                plan.cells.append(CellPlan(row, robust_column, _wdd(nu0, nu1), calibration=robust_column))
            plan.cells.append(CellPlan(row, optimal_column, _wdd(nu0, nu1), calibration=name))
    plan.curves = [(column, column) for column in columns]
    return plan


def _plan_bayes_curve(config: ExperimentConfig) -> ExperimentPlan:
    params = config.params
    band = GaussianMeanBand(**{k: float(v) for k, v in params["band"].items()})
    rho = float(params["rho"])
    thetas = _floats(params["thetas"], "thetas")
    nominal0 = Gaussian(0.0, band.sd)
    lfd = solve_lfd(Singleton(nominal0), band)
    spec = ShiryaevSpec(rho=rho)

    plan = ExperimentPlan(rows=[_key(t) for t in thetas], columns=["robust-shiryaev", "optimal-shiryaev"])
    plan.calibrations.append(CalibrationPlan("robust-shiryaev", StoppingRule(spec, lfd.llr), CalibrationMode.PFA,
                                             nominal0, lfd.nu1_under, rho))
    for theta in thetas:
        nu1 = Gaussian(theta, band.sd)
        optimal = solve_lfd(Singleton(nominal0), Singleton(nu1))
        name = f"optimal-shiryaev@theta={_key(theta)}"
        plan.calibrations.append(CalibrationPlan(name, StoppingRule(spec, optimal.llr), CalibrationMode.PFA,
                                                 nominal0, nu1, rho))
        row = _key(theta)
        plan.cells += [
            CellPlan(row, "robust-shiryaev", _add(nominal0, nu1, rho), calibration="robust-shiryaev"),
            CellPlan(row, "optimal-shiryaev", _add(nominal0, nu1, rho), calibration=name),
        ]
    plan.curves = [("robust-shiryaev", "robust-shiryaev"), ("optimal-shiryaev", "optimal-shiryaev")]
    return plan


def _classes(params: Dict[str, Any]) -> Tuple[UncertaintyClass, UncertaintyClass]:
    return parse_uncertainty_class(params["p0"]), parse_uncertainty_class(params["p1"])


def _plan_lfd(config: ExperimentConfig) -> ExperimentPlan:
    P0, P1 = _classes(config.params)
    report = describe_lfd(P0, P1, solve_lfd(P0, P1))
    plan = ExperimentPlan(rows=["lfd"], columns=[], reports={"lfd": report})
    numbers = {"a": report.get("a"), "b": report.get("b"),
               "residual-a": report.get("residuals", {}).get("a"),
               "residual-b": report.get("residuals", {}).get("b"),
               "degeneracy-limit": report.get("degeneracy_limit")}
    for column, value in numbers.items():
        if value is not None:
            plan.columns.append(column)
            plan.cells.append(CellPlan("lfd", column, _constant(lambda value=value: value)))
    return plan


def default_probes(P0: UncertaintyClass, P1: UncertaintyClass) -> List[Distribution1D]:
    """
    Members probed when a jsb config lists none: the class boundary and an interior grid for parametric
    classes, Gaussian contaminants of spread 0.1, 1 and 10 around the nominal mean for eps-contamination.
    """
    probes: List[Distribution1D] = []
    for klass in (P0, P1):
        if isinstance(klass, Singleton):
            probes.append(klass.d)
        elif isinstance(klass, GaussianMeanBand):
            probes += [Gaussian(klass.lo + (klass.hi - klass.lo) * f, klass.sd) for f in (0.0, 0.1, 0.25, 0.5, 1.0)]
        elif isinstance(klass, ExpRateRay):
            probes += [Exponential(klass.theta_min * f) for f in (1.0, 1.25, 1.5, 2.0, 4.0)]
        elif isinstance(klass, EpsContamination):
            mean = klass.nominal.mean if isinstance(klass.nominal, Gaussian) else 0.0
            probes += [contaminated(klass.nominal, klass.eps, Gaussian(mean, s)) for s in (0.1, 1.0, 10.0)]
    return probes


def _plan_jsb(config: ExperimentConfig) -> ExperimentPlan:
    params = config.params
    P0, P1 = _classes(params)
    lfd = solve_lfd(P0, P1)
    probes = [parse_distribution(p) for p in params["probes"]] or default_probes(P0, P1)
    tolerance, samples = float(params["tolerance"]), int(params["samples"])
    plan = ExperimentPlan(rows=[], columns=["margin"], metadata={"jsb_tolerance": tolerance})

    # the check runs at plan time with its own seed, its report feeds the per-member rows
    report = check_jsb(P0, P1, lfd, probes, tolerance=tolerance, n_samples=samples,
                       seed=derive_seed(config.seed, CALIBRATION_SEED_OFFSET, 0))
    plan.reports["jsb"] = report.to_dict()
    for member, margin in report.margins:
        plan.rows.append(member)
        plan.cells.append(CellPlan(member, "margin", _constant(lambda margin=margin: margin)))
    return plan


def _plan_srp(config: ExperimentConfig) -> ExperimentPlan:
    params = config.params
    nominal0 = Exponential(float(params["theta0"]))
    lfd = solve_lfd(Singleton(nominal0), ExpRateRay(float(params["theta_min"])))
    thetas = _floats(params["thetas"], "thetas")
    grid = tuple(int(v) for v in (params["lambda_grid"] or DEFAULT_JSRP_GRID))
    spec = SrSpec(r=float(params["r"]))

    plan = ExperimentPlan(rows=[_key(t) for t in thetas], columns=["robust-sr", "optimal-sr"])
    plan.calibrations.append(CalibrationPlan("robust-sr", StoppingRule(spec, lfd.llr), CalibrationMode.FAR, nominal0))
    for theta in thetas:
        nu1 = Exponential(theta)
        optimal = solve_lfd(Singleton(nominal0), Singleton(nu1))
        name = f"optimal-sr@theta={_key(theta)}"
        plan.calibrations.append(CalibrationPlan(name, StoppingRule(spec, optimal.llr), CalibrationMode.FAR, nominal0))
        row = _key(theta)
        plan.cells += [
            CellPlan(row, "robust-sr", _jsrp(nominal0, nu1, grid), calibration="robust-sr"),
            CellPlan(row, "optimal-sr", _jsrp(nominal0, nu1, grid), calibration=name),
        ]
    plan.curves = [("robust-sr", "robust-sr"), ("optimal-sr", "optimal-sr")]
    return plan


def _plan_far(config: ExperimentConfig) -> ExperimentPlan:
    params = config.params
    nominal0, nominal1, eps_list = _contamination_setup(params)
    if len(eps_list) != 1:
        raise ConfigError("the far experiment takes a single eps")
    eps = eps_list[0]
    sigmas = _floats(params["sigma0"], "sigma0")
    lfd = solve_lfd(EpsContamination(nominal0, eps), EpsContamination(nominal1, eps))

    plan = ExperimentPlan(rows=["lfd"] + [_key(s) for s in sigmas], columns=["mttfa"])
    plan.calibrations.append(CalibrationPlan("robust-cusum", StoppingRule(CusumSpec(), lfd.llr),
                                             CalibrationMode.FAR, lfd.nu0_bar))
    plan.cells.append(CellPlan("lfd", "mttfa", _mttfa(lfd.nu0_bar, config.alpha), calibration="robust-cusum"))
    for sigma in sigmas:
        nu0 = contaminated(nominal0, eps, Gaussian(nominal0.mean, sigma))
        plan.cells.append(CellPlan(_key(sigma), "mttfa", _mttfa(nu0, config.alpha), calibration="robust-cusum"))
    return plan


@dataclass(frozen=True)
class CustomSetup:
    """
    A user supplied pair of uncertainty classes with a detector built on their least favorable pair.
    """
    lfd: LfdPair
    rule: StoppingRule
    mode: CalibrationMode
    metric: DelayMetric
    rho: float
    lambda_grid: Optional[Tuple[int, ...]]
    # (name, nu0, nu1) laws the detector is evaluated under
    scenarios: List[Tuple[str, Distribution1D, Distribution1D]]

    @property
    def needs_calibration(self) -> bool:
        return math.isinf(self.rule.eta)

    def delay(self, rule: StoppingRule, nu0: Distribution1D, nu1: Distribution1D, runs: int,
              seed: Seed) -> DelayEstimate:
        if self.metric is DelayMetric.WDD:
            return estimate_wdd(rule, nu0, nu1, runs, seed, lambda_grid=self.lambda_grid)
        if self.metric is DelayMetric.ADD:
            return estimate_add(rule, nu0, nu1, self.rho, runs, seed)
        return estimate_jsrp(rule, nu0, nu1, runs, seed, lambda_grid=self.lambda_grid or DEFAULT_JSRP_GRID)


def custom_setup(config: ExperimentConfig) -> CustomSetup:
    params = config.params
    P0, P1 = _classes(params)
    lfd = solve_lfd(P0, P1)
    try:
        mode = CalibrationMode(str(params["mode"]).lower())
        metric = DelayMetric(str(params["metric"]).lower())
    except ValueError as ex:
        raise ConfigError(f"invalid mode or metric: {ex}") from ex
    scenarios = [(str(s["name"]), parse_distribution(s["nu0"]), parse_distribution(s["nu1"]))
                 for s in params["scenarios"]] or [("lfd", lfd.nu0_bar, lfd.nu1_under)]
    return CustomSetup(
        lfd=lfd,
        rule=StoppingRule(parse_detector(params["detector"]), lfd.llr),
        mode=mode,
        metric=metric,
        rho=float(params["rho"]),
        lambda_grid=tuple(int(v) for v in params["lambda_grid"]) if params["lambda_grid"] else None,
        scenarios=scenarios,
    )


def _plan_custom(config: ExperimentConfig) -> ExperimentPlan:
    setup = custom_setup(config)
    family = setup.rule.family
    plan = ExperimentPlan(rows=[name for name, _, _ in setup.scenarios], columns=[family])
    calibration = None
    if setup.needs_calibration:
        calibration = "detector"
        plan.calibrations.append(CalibrationPlan(calibration, setup.rule, setup.mode, setup.lfd.nu0_bar,
                                                 setup.lfd.nu1_under, setup.rho))
    for name, nu0, nu1 in setup.scenarios:
        def evaluate(rule: StoppingRule, runs: int, seed: Seed, nu0=nu0, nu1=nu1) -> EstimateWithError:
            return setup.delay(rule, nu0, nu1, runs, seed).estimate

        plan.cells.append(CellPlan(name, family, evaluate, calibration=calibration, rule=setup.rule))
    return plan


PLANNERS: Dict[str, Callable[[ExperimentConfig], ExperimentPlan]] = {
    "table1": _plan_table1,
    "table2": lambda config: _plan_contamination_table(config, rows_are_sigma1=True),
    "table3": lambda config: _plan_contamination_table(config, rows_are_sigma1=False),
    "bayes-curve": _plan_bayes_curve,
    "lfd": _plan_lfd,
    "jsb": _plan_jsb,
    "srp": _plan_srp,
    "far": _plan_far,
    "custom": _plan_custom,
}


def plan_experiment(config: ExperimentConfig) -> ExperimentPlan:
    """
    Builds and validates every distribution, class, least favorable pair and detector of an experiment.

    :raises ConfigError: if anything in the config is invalid
    """
    try:
        return PLANNERS[config.experiment](config)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, InvalidDistribution, InvalidDetector, DegenerateClasses,
            NonMonotoneLR, UnsupportedClassPair) as ex:
        raise ConfigError(f"invalid '{config.experiment}' config: {type(ex).__name__}: {ex}") from ex


class ExperimentRunner:
    """
    Executes an experiment: all threshold calibrations in parallel, then all table cells in parallel.
    """
    LOGGER = logging.getLogger(__name__)

    def __init__(self, config: ExperimentConfig, coordinator: Optional[ExperimentCoordinator] = None):
        self._config = config
        self._coordinator = coordinator or ExperimentCoordinator()

    def _seed(self, offset: int, index: int) -> Seed:
        return derive_seed(self._config.seed, offset, index)

    def _calibrate(self, plan: CalibrationPlan, seed: Seed) -> Callable[[logging.LoggerAdapter], CalibrationResult]:
        budget = self._config.budget

        def work(logger: logging.LoggerAdapter) -> CalibrationResult:
            result = calibrate_threshold(plan.rule, plan.mode, self._config.alpha, plan.nu0, seed, nu1=plan.nu1,
                                         rho=plan.rho, max_total_runs=budget.calibration_cap)
            logger.info(f"eta={result.eta:.10g}, {plan.mode.value}={result.achieved.value:.6g} "
                        f"+/- {result.achieved.stderr:.3g} after {result.iterations} iterates")
            return result

        return work

    def _evaluate(self, plan: CellPlan, rule: Optional[StoppingRule],
                  seed: Seed) -> Callable[[logging.LoggerAdapter], EstimateWithError]:
        runs = self._config.budget.runs_per_cell

        def work(logger: logging.LoggerAdapter) -> EstimateWithError:
            estimate = plan.evaluate(rule, runs, seed)
            logger.info(f"{estimate.value:.6g} +/- {estimate.stderr:.3g}")
            return estimate

        return work

    def run(self) -> ExperimentOutcome:
        config = self._config
        started = time.monotonic()
        plan = plan_experiment(config)
        metadata: Dict[str, Any] = {
            "alpha": config.alpha,
            "seed": config.seed.to_dict(),
            "budget": config.budget.to_dict(),
            "config_md5": config.md5,
            **plan.metadata,
        }
        if config.budget.is_dry_run:
            self.LOGGER.info(f"dry run of '{config.name}': config is valid, nothing simulated")
            table = ResultTable(name=config.name, experiment=config.experiment, rows=plan.rows,
                                columns=plan.columns, metadata=metadata | {"dry_run": True})
            return ExperimentOutcome(table=table, curves=[], reports=plan.reports,
                                     wall_time=time.monotonic() - started)

        calibration_tasks = [
            Task(name=f"calibrate {c.name}", work=self._calibrate(c, self._seed(CALIBRATION_SEED_OFFSET, j)))
            for j, c in enumerate(plan.calibrations)
        ]
        calibration_outcomes = []
        if calibration_tasks:
            calibration_outcomes = self._coordinator.run(calibration_tasks, stage="calibrating")
        calibrations = {c.name: outcome for c, outcome in zip(plan.calibrations, calibration_outcomes)}
        metadata["calibrations"] = {
            name: outcome.result.to_dict() if outcome.ok else {"error": outcome.error}
            for name, outcome in calibrations.items()
        }

        cell_tasks, cells = [], {}
        for i, cell in enumerate(plan.cells):
            seed = self._seed(CELL_SEED_OFFSET, i)
            rule, eta = cell.rule, None
            if cell.calibration is not None:
                outcome = calibrations[cell.calibration]
                if not outcome.ok:
                    cells[i] = Cell(row=cell.row, column=cell.column, seed=seed, budget=config.budget,
                                    error=f"calibration '{cell.calibration}' failed: {outcome.error}")
                    continue
                base = cell.rule or next(c.rule for c in plan.calibrations if c.name == cell.calibration)
                eta = outcome.result.eta
                rule = base.with_eta(eta)
            elif rule is not None:
                eta = rule.eta
            task = Task(name=f"{cell.row}/{cell.column}", work=self._evaluate(cell, rule, seed))
            cell_tasks.append((i, seed, eta, task))

        outcomes = []
        if cell_tasks:
            outcomes = self._coordinator.run([task for *_, task in cell_tasks], stage="evaluating")
        for (i, seed, eta, _), outcome in zip(cell_tasks, outcomes):
            cell = plan.cells[i]
            cells[i] = Cell(row=cell.row, column=cell.column, estimate=outcome.result if outcome.ok else None,
                            seed=seed, budget=config.budget, eta=eta, error=outcome.error)

        table = ResultTable(name=config.name, experiment=config.experiment, rows=plan.rows, columns=plan.columns,
                            cells=[cells[i] for i in range(len(plan.cells))], metadata=metadata)
        table.cells = table.ordered_cells()
        curves = [self._curve(table, label, column) for label, column in plan.curves]
        wall_time = time.monotonic() - started
        self.LOGGER.info(f"experiment '{config.name}' finished in {wall_time:.1f}s")
        return ExperimentOutcome(table=table, curves=[c for c in curves if c.points], reports=plan.reports,
                                 wall_time=wall_time)

    @staticmethod
    def _curve(table: ResultTable, label: str, column: str) -> Curve:
        points = []
        for row in table.rows:
            cell = table.get(row, column)
            if cell is None or math.isnan(cell.value):
                continue
            points.append((float(row), cell.value, cell.stderr))
        return Curve(label=label, points=tuple(sorted(points)))


def run_experiment(config: ExperimentConfig, coordinator: Optional[ExperimentCoordinator] = None) -> ResultTable:
    """
    Calibrates and evaluates every cell of an experiment, deterministic given the config.

    :raises ConfigError: before any simulation if the config is invalid
    """
    return ExperimentRunner(config, coordinator).run().table


def _checked_setup(config: ExperimentConfig) -> CustomSetup:
    if config.experiment != "custom":
        raise ConfigError(f"expected a 'custom' experiment config, got '{config.experiment}'")
    try:
        return custom_setup(config)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, InvalidDistribution, InvalidDetector, DegenerateClasses,
            NonMonotoneLR, UnsupportedClassPair) as ex:
        raise ConfigError(f"invalid 'custom' config: {type(ex).__name__}: {ex}") from ex


def calibrate_custom(config: ExperimentConfig) -> CalibrationResult:
    """
    Calibrates the detector of a custom config under its least favorable pair.
    """
    setup = _checked_setup(config)
    return calibrate_threshold(setup.rule, setup.mode, config.alpha, setup.lfd.nu0_bar,
                               derive_seed(config.seed, CALIBRATION_SEED_OFFSET, 0), nu1=setup.lfd.nu1_under,
                               rho=setup.rho, max_total_runs=config.budget.calibration_cap)


def evaluate_custom(config: ExperimentConfig) -> Dict[str, Any]:
    """
    Delay estimates of the detector of a custom config for every scenario.
    A detector without a finite eta is calibrated first.

    :return: {"eta": ..., "calibration": ... or None, "scenarios": {name: DelayEstimate dict}}
    """
    setup = _checked_setup(config)
    rule, calibration = setup.rule, None
    if setup.needs_calibration:
        calibration = calibrate_custom(config)
        rule = rule.with_eta(calibration.eta)
    estimates = {}
    for i, (name, nu0, nu1) in enumerate(setup.scenarios):
        seed = derive_seed(config.seed, CELL_SEED_OFFSET, i)
        estimates[name] = setup.delay(rule, nu0, nu1, config.budget.runs_per_cell, seed).to_dict()
    return {
        "eta": rule.eta,
        "calibration": calibration.to_dict() if calibration is not None else None,
        "scenarios": estimates,
    }
