import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Final

import numpy as np

from stochastic_volterra.application.cauchy import (
    DISCREPANCY_ORDER,
    cauchy_reformulation,
    contraction_band,
    forced_cauchy_residual,
)
from stochastic_volterra.application.convolution import (
    convolve_ensemble,
    interchange_discrepancy,
    regularity_probe,
    second_moment_curve,
    summary_rows,
    trajectory_rows,
)
from stochastic_volterra.application.dtos import (
    ExperimentInput,
    ExperimentKind,
    ExperimentResult,
    SuiteInput,
    SuiteResult,
)
from stochastic_volterra.application.resolvent import (
    build_resolvent,
    coarse_grid_residual,
    commutation_check,
    contraction_check,
    convergence_rates,
    exponential_bound_fit,
    resolvent_equation_residual,
    table_rows,
    yosida_resolvent_convergence,
)
from stochastic_volterra.application.stochastic import (
    cross_orthogonality_test,
    ito_isometry_test,
    martingale_mean_test,
    riemann_self_convergence,
)
from stochastic_volterra.application.verify import (
    mild_weak_equivalence_check,
    strong_solution_residual,
    weak_solution_residual,
    yosida_strong_convergence_suite,
)
from stochastic_volterra.domain.entities import VerificationReport
from stochastic_volterra.domain.exceptions import PreconditionError
from stochastic_volterra.domain.interfaces import IResultWriter
from stochastic_volterra.domain.values import FloatArray, HVector, KernelKind
from stochastic_volterra.infrastructure.numerics.kernels import (
    check_complete_positivity,
    observed_order,
)
from stochastic_volterra.infrastructure.stochastic.wiener import sample_ensemble

logger = logging.getLogger(__name__)

RESOLVENT_RESIDUAL_LIMIT: Final[float] = 1e-6
COMMUTATION_LIMIT: Final[float] = 1e-13
INTERCHANGE_LIMIT: Final[float] = 1e-12
MONTE_CARLO_SIGMAS: Final[float] = 3.0
CAUCHY_REFINEMENT: Final[int] = 4
REGULARITY_REFINEMENT: Final[int] = 4
FORCED_RESIDUAL_FACTOR: Final[float] = 10.0
CONFIG_FILENAME: Final[str] = "config.resolved.json"


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _fmt_array(values: FloatArray) -> str:
    return " ".join(_fmt(float(v)) for v in np.ravel(values))


@dataclass
class _Outcome:
    header: list[str]
    rows: FloatArray
    passed: bool
    lines: list[str] = field(default_factory=list)
    summary: dict[str, float] = field(default_factory=dict)
    extra_tables: list[tuple[str, list[str], FloatArray]] = field(default_factory=list)
    plottable: bool = True


def _strictly_decreasing(values: FloatArray) -> bool:
    return bool(np.all(values == 0.0) or np.all(np.diff(values) < 0.0))


def _completely_positive(inp: ExperimentInput) -> bool:
    kernel = inp.kernel
    if kernel.kind is KernelKind.EXPONENTIAL:
        return True
    return (
        kernel.kind is KernelKind.FRACTIONAL
        and kernel.alpha is not None
        and kernel.alpha <= 1.0
    )


def _unit_vector(dimension: int) -> HVector:
    return HVector(coeffs=np.full(dimension, 1.0 / math.sqrt(dimension)))


def _run_resolvent(inp: ExperimentInput) -> _Outcome:
    op = inp.operator
    table = build_resolvent(op, inp.kernel, inp.grid)
    v = _unit_vector(op.dimension)
    residual = resolvent_equation_residual(table, v)
    coarse = coarse_grid_residual(table, v) if inp.grid.steps % 2 == 0 else math.nan
    commutation = commutation_check(table, op, v)
    m, omega = exponential_bound_fit(table)
    identity = bool(np.all(table.s[:, 0] == 1.0))
    contraction = True
    if _completely_positive(inp) and np.all(op.eigenvalues <= 0.0):
        contraction = contraction_check(table, inp.tol_cp)
    errors = yosida_resolvent_convergence(op, inp.kernel, inp.grid, v, inp.yosida_n)
    rates = convergence_rates(errors, [float(n) for n in inp.yosida_n])

    spectral_radius = float(np.max(np.abs(op.eigenvalues)))
    commutation_limit = COMMUTATION_LIMIT * max(1.0, spectral_radius)
    passed = (
        identity
        and residual <= RESOLVENT_RESIDUAL_LIMIT
        and commutation <= commutation_limit
        and contraction
        and _strictly_decreasing(errors)
    )
    header = ["t", *(f"mode_{k + 1}" for k in range(op.dimension))]
    return _Outcome(
        header=header,
        rows=table_rows(table),
        passed=passed,
        lines=[
            f"identity_at_zero = {identity}",
            f"resolvent_residual = {_fmt(residual)}",
            f"coarse_grid_residual = {_fmt(coarse)}",
            f"commutation = {_fmt(commutation)}",
            f"bound_M = {_fmt(m)}",
            f"bound_omega = {_fmt(omega)}",
            f"contraction = {contraction}",
            f"yosida_n = {' '.join(str(n) for n in inp.yosida_n)}",
            f"yosida_errors = {_fmt_array(errors)}",
            f"yosida_rates = {_fmt_array(rates)}",
        ],
        summary={"resolvent_residual": residual, "commutation": commutation},
    )


def _run_cp_check(inp: ExperimentInput) -> _Outcome:
    header = ["t"]
    columns = [inp.grid.points]
    lines: list[str] = []
    passed = True
    for mu in inp.mu:
        report = check_complete_positivity(
            inp.kernel, mu, inp.grid, inp.tol_cp, inp.scale_r_equation
        )
        header += [f"s_mu{mu:g}", f"r_mu{mu:g}"]
        columns += [report.s_values, report.r_values]
        passed &= report.nonneg
        finite_r = report.r_values[np.isfinite(report.r_values)]
        lines.append(
            f"mu = {mu:g}: nonneg = {report.nonneg}, "
            f"min_s = {_fmt(float(report.s_values.min()))}, "
            f"min_r = {_fmt(float(finite_r.min()))}"
        )
    order = observed_order(inp.kernel, 1.0, inp.grid)
    lines.append(f"observed_order_mu1 = {_fmt(order)}")
    lines.append(f"scale_r_equation = {inp.scale_r_equation}")
    return _Outcome(
        header=header,
        rows=np.column_stack(columns),
        passed=passed,
        lines=lines,
        summary={"observed_order": order},
    )


def _run_convolve(inp: ExperimentInput) -> _Outcome:
    ensemble = sample_ensemble(inp.grid, inp.noise_modes, inp.seed, inp.paths)
    table = build_resolvent(inp.operator, inp.kernel, inp.grid)
    psi = inp.integrand
    trajectories = convolve_ensemble(table, psi, ensemble)
    moments = psi.mode_second_moments(inp.grid).sum(axis=0)
    quadrature = second_moment_curve(table.s, moments, inp.grid.dt)
    mean, stderr = trajectories.mean_square()
    _, interchange = interchange_discrepancy(inp.operator, table, psi, ensemble)

    zero_start = bool(np.all(trajectories.values[:, 0, :] == 0.0))
    integrals = trajectories.square_integrals()
    square_integrable = bool(np.all(np.isfinite(integrals)))
    gap = abs(float(mean[-1]) - float(quadrature[-1]))
    moment_ok = gap <= MONTE_CARLO_SIGMAS * float(stderr[-1]) + 1e-12
    passed = (
        zero_start
        and square_integrable
        and moment_ok
        and interchange <= INTERCHANGE_LIMIT
    )

    extra: list[tuple[str, list[str], FloatArray]] = []
    if inp.export_paths:
        path_header = ["path", "t", "mode", "value"]
        extra.append((f"{inp.name}.paths", path_header, trajectory_rows(trajectories)))
    return _Outcome(
        header=["t", "mean_sq", "stderr", "quadrature"],
        rows=summary_rows(trajectories, quadrature),
        passed=passed,
        lines=[
            f"integrand = {psi.name}",
            f"tail_budget = {_fmt(psi.tail_budget)}",
            f"zero_initial_value = {zero_start}",
            f"terminal_mean_sq = {_fmt(float(mean[-1]))}",
            f"terminal_stderr = {_fmt(float(stderr[-1]))}",
            f"terminal_quadrature = {_fmt(float(quadrature[-1]))}",
            f"square_integral_mean = {_fmt(float(integrals.mean()))}",
            f"interchange_discrepancy = {_fmt(interchange)}",
        ],
        summary={"terminal_mean_sq": float(mean[-1]), "interchange": interchange},
        extra_tables=extra,
    )


def _run_ito_check(inp: ExperimentInput) -> _Outcome:
    psi = inp.integrand
    isometry = ito_isometry_test(
        psi, inp.grid, inp.noise_modes, inp.paths, inp.seed, workers=inp.workers
    )
    passed = abs(isometry.z_score) <= MONTE_CARLO_SIGMAS
    cross_estimate = cross_stderr = 0.0
    if psi.modes >= 2:
        cross = cross_orthogonality_test(
            psi, inp.grid, 0, 1, inp.paths, inp.seed, workers=inp.workers
        )
        cross_estimate, cross_stderr = cross.estimate, cross.stderr
        passed = passed and cross.within(0.0, MONTE_CARLO_SIGMAS)
    means = martingale_mean_test(
        psi, inp.grid, inp.noise_modes, inp.paths, inp.seed, workers=inp.workers
    )
    riemann = riemann_self_convergence(
        psi, inp.grid, inp.noise_modes, min(inp.paths, 256), inp.seed
    )
    row = np.array(
        [
            [
                isometry.lhs,
                isometry.rhs,
                isometry.stderr,
                isometry.z_score,
                cross_estimate,
                cross_stderr,
                riemann,
            ]
        ]
    )
    return _Outcome(
        header=[
            "lhs",
            "rhs",
            "stderr",
            "z_score",
            "cross",
            "cross_stderr",
            "riemann_l2",
        ],
        rows=row,
        passed=passed,
        lines=[
            f"integrand = {psi.name}",
            f"tail_budget = {_fmt(psi.tail_budget)}",
            f"martingale_means = {_fmt_array(np.array([m.estimate for m in means]))}",
            f"martingale_stderr = {_fmt_array(np.array([m.stderr for m in means]))}",
        ],
        summary={"lhs": isometry.lhs, "rhs": isometry.rhs, "z_score": isometry.z_score},
        plottable=False,
    )


def _verification_outcome(report: VerificationReport, inp: ExperimentInput) -> _Outcome:
    levels = report.level_residuals
    if levels is None:
        levels = np.array([report.residual_sup_mean])
    dts = inp.grid.dt * 2.0 ** np.arange(levels.size - 1, -1, -1)
    lines = [
        f"residual_sup_mean = {_fmt(report.residual_sup_mean)}",
        f"tolerance_used = {_fmt(report.tolerance_used)}",
        f"paths = {report.paths}",
    ]
    if report.refinement_rates is not None:
        lines.append(f"refinement_rates = {_fmt_array(report.refinement_rates)}")
    passed = report.passed
    if report.integrability_witness is not None:
        witness = report.integrability_witness
        finite = bool(np.all(np.isfinite(witness)))
        lines.append(f"integrability_witness_max = {_fmt(float(witness.max()))}")
        passed = passed and finite
    if report.consistency_gap is not None:
        lines.append(f"consistency_gap = {_fmt(report.consistency_gap)}")
    return _Outcome(
        header=["dt", "residual_sup_mean"],
        rows=np.column_stack((dts, levels)),
        passed=passed,
        lines=lines,
        summary={
            "residual_sup_mean": report.residual_sup_mean,
            "tolerance_used": report.tolerance_used,
        },
    )


def _run_verify(inp: ExperimentInput) -> _Outcome:
    ensemble = sample_ensemble(inp.grid, inp.noise_modes, inp.seed, inp.paths)
    if inp.kind is ExperimentKind.VERIFY_STRONG:
        report = strong_solution_residual(
            inp.operator,
            inp.kernel,
            inp.grid,
            inp.integrand,
            ensemble,
            min_rate=inp.min_rate,
            levels=inp.levels,
        )
    elif inp.kind is ExperimentKind.VERIFY_WEAK:
        xi = HVector.basis(inp.operator.dimension, inp.xi_index)
        report = weak_solution_residual(
            inp.operator,
            inp.kernel,
            inp.grid,
            inp.integrand,
            ensemble,
            xi,
            min_rate=inp.min_rate,
            levels=inp.levels,
        )
    else:
        report = mild_weak_equivalence_check(
            inp.operator,
            inp.kernel,
            inp.grid,
            inp.integrand,
            ensemble,
            min_rate=inp.min_rate,
            levels=inp.levels,
        )
    return _verification_outcome(report, inp)


def _run_yosida_suite(inp: ExperimentInput) -> _Outcome:
    report = yosida_strong_convergence_suite(
        inp.operator,
        inp.kernel,
        inp.grid,
        inp.integrand,
        inp.seed,
        inp.yosida_n,
        inp.paths,
        noise_modes=inp.noise_modes,
    )
    decreasing = _strictly_decreasing(report.e1) and _strictly_decreasing(report.e2)
    n_values = [float(n) for n in report.n_list]
    rows = np.column_stack(
        (
            report.n_list,
            report.e1,
            report.e2,
            report.n1_sq,
            report.n2_sq,
            report.e1_quadrature,
        )
    )
    return _Outcome(
        header=["n", "e1", "e2", "n1_sq", "n2_sq", "e1_quadrature"],
        rows=rows,
        passed=decreasing and report.split_bound_holds,
        lines=[
            f"decreasing = {decreasing}",
            f"split_bound_holds = {report.split_bound_holds}",
            f"e1_rates = {_fmt_array(convergence_rates(report.e1, n_values))}",
            f"e2_rates = {_fmt_array(convergence_rates(report.e2, n_values))}",
        ],
        summary={"e1_last": float(report.e1[-1]), "e2_last": float(report.e2[-1])},
    )


def _require_divisible(inp: ExperimentInput, factor: int) -> None:
    if inp.grid.steps % factor:
        msg = (
            f"{inp.kind.value} needs steps divisible by {factor}, got {inp.grid.steps}"
        )
        raise PreconditionError(msg)


def _run_cauchy(inp: ExperimentInput) -> _Outcome:
    _require_divisible(inp, CAUCHY_REFINEMENT)
    fine = sample_ensemble(inp.grid, inp.noise_modes, inp.seed, inp.paths)
    coarse = fine.coarsen(CAUCHY_REFINEMENT)
    reports = [
        cauchy_reformulation(inp.operator, inp.kernel, ens.grid, inp.integrand, ens)
        for ens in (coarse, fine)
    ]
    coarse_gap, fine_gap = (float(r.sup_discrepancy.mean()) for r in reports)
    if fine_gap == 0.0:
        contraction = math.inf if coarse_gap > 0.0 else math.nan
    else:
        contraction = coarse_gap / fine_gap
    low, high = contraction_band(CAUCHY_REFINEMENT)
    contracts = coarse_gap == fine_gap == 0.0 or low <= contraction <= high

    forced = forced_cauchy_residual(
        inp.operator, inp.kernel, inp.grid, lambda t: np.sin(2.0 * math.pi * t)
    )
    forced_limit = FORCED_RESIDUAL_FACTOR * inp.grid.dt
    rows = np.array(
        [
            [ens.grid.dt, float(r.sup_discrepancy.mean()), float(r.ode_residual.mean())]
            for ens, r in zip((coarse, fine), reports, strict=True)
        ]
    )
    return _Outcome(
        header=["dt", "sup_discrepancy_mean", "ode_residual_mean"],
        rows=rows,
        passed=contracts and forced <= forced_limit,
        lines=[
            f"c = {_fmt(reports[-1].c)}",
            f"contraction_per_{CAUCHY_REFINEMENT}x = {_fmt(contraction)}",
            f"contraction_band = [{_fmt(low)}, {_fmt(high)}]",
            f"discrepancy_order = {_fmt(DISCREPANCY_ORDER)}",
            f"forced_ode_residual = {_fmt(forced)}",
            f"forced_ode_limit = {_fmt(forced_limit)}",
        ],
        summary={"contraction": contraction, "forced_residual": forced},
    )


def _run_regularity(inp: ExperimentInput) -> _Outcome:
    _require_divisible(inp, REGULARITY_REFINEMENT)
    fine = sample_ensemble(inp.grid, inp.noise_modes, inp.seed, inp.paths)
    reports = []
    for ens in (fine.coarsen(REGULARITY_REFINEMENT), fine):
        table = build_resolvent(inp.operator, inp.kernel, ens.grid)
        trajectories = convolve_ensemble(table, inp.integrand, ens)
        reports.append((ens.grid.dt, regularity_probe(trajectories)))
    (_, coarse), (_, fine_report) = reports
    rows = np.array([[dt, p.max_jump, p.holder_estimate] for dt, p in reports])
    return _Outcome(
        header=["dt", "max_jump", "holder_estimate"],
        rows=rows,
        passed=fine_report.max_jump <= coarse.max_jump,
        lines=[
            f"max_jump_coarse = {_fmt(coarse.max_jump)}",
            f"max_jump_fine = {_fmt(fine_report.max_jump)}",
            f"holder_estimate = {_fmt(fine_report.holder_estimate)}",
        ],
        summary={
            "max_jump": fine_report.max_jump,
            "holder": fine_report.holder_estimate,
        },
    )


_HANDLERS: Final[dict[ExperimentKind, Callable[[ExperimentInput], _Outcome]]] = {
    ExperimentKind.RESOLVENT: _run_resolvent,
    ExperimentKind.CP_CHECK: _run_cp_check,
    ExperimentKind.CONVOLVE: _run_convolve,
    ExperimentKind.ITO_CHECK: _run_ito_check,
    ExperimentKind.VERIFY_STRONG: _run_verify,
    ExperimentKind.VERIFY_WEAK: _run_verify,
    ExperimentKind.VERIFY_MILD: _run_verify,
    ExperimentKind.YOSIDA_SUITE: _run_yosida_suite,
    ExperimentKind.CAUCHY: _run_cauchy,
    ExperimentKind.REGULARITY: _run_regularity,
}


class RunExperimentUseCase:
    """1 つの実験を実行し、CSV とレポートを書き出すユースケース。"""

    def __init__(self, result_writer: IResultWriter) -> None:
        """初期化。

        Args:
            result_writer: 結果の書き出し先
        """
        self._writer = result_writer

    def execute(self, input_data: ExperimentInput) -> ExperimentResult:
        """実験を実行します。

        Args:
            input_data: 実験の入力パラメータ

        Returns:
            実験結果 (合否と書き出したファイル)

        Raises:
            DomainError: 数値計算や前提条件の違反が起きた場合
        """
        logger.info(
            "Running experiment '%s' (%s)", input_data.name, input_data.kind.value
        )
        outcome = _HANDLERS[input_data.kind](input_data)

        files = [
            self._writer.write_table(input_data.name, outcome.header, outcome.rows)
        ]
        for name, header, rows in outcome.extra_tables:
            files.append(self._writer.write_table(name, header, rows))
        report_lines = [
            f"experiment = {input_data.name}",
            f"kind = {input_data.kind.value}",
            f"kernel = {input_data.kernel.label}",
            f"operator = {input_data.operator.description}",
            f"modes = {input_data.operator.dimension}",
            f"t_end = {_fmt(input_data.grid.t_end)}",
            f"steps = {input_data.grid.steps}",
            f"seed = {input_data.seed}",
            *outcome.lines,
            f"passed = {outcome.passed}",
        ]
        files.append(self._writer.write_report(input_data.name, report_lines))
        status = "passed" if outcome.passed else "FAILED"
        logger.info("Experiment '%s' %s", input_data.name, status)
        return ExperimentResult(
            name=input_data.name,
            kind=input_data.kind,
            passed=bool(outcome.passed),
            header=tuple(outcome.header),
            files=tuple(files),
            summary=outcome.summary,
            plottable=outcome.plottable,
        )


class RunSuiteUseCase:
    """設定ファイルの実験リストを順に (または並列に) 実行するユースケース。"""

    def __init__(
        self, result_writer: IResultWriter, experiment_use_case: RunExperimentUseCase
    ) -> None:
        """初期化。

        Args:
            result_writer: 結果の書き出し先
            experiment_use_case: 個々の実験を実行するユースケース
        """
        self._writer = result_writer
        self._experiment = experiment_use_case

    def execute(self, input_data: SuiteInput) -> SuiteResult:
        """全ての実験を実行し、設定の控えと描画スクリプトを書き出します。"""
        config_path = self._writer.write_text(
            CONFIG_FILENAME, input_data.resolved_config
        )
        experiments = list(input_data.experiments)
        if input_data.parallel and input_data.threads > 1 and len(experiments) > 1:
            with ThreadPoolExecutor(max_workers=input_data.threads) as pool:
                results = list(pool.map(self._experiment.execute, experiments))
        else:
            results = [self._experiment.execute(exp) for exp in experiments]

        tables = [(r.name, list(r.header)) for r in results if r.plottable]
        plot_script = self._writer.write_plot_script(tables) if tables else None
        suite = SuiteResult(
            results=tuple(results), config_path=config_path, plot_script=plot_script
        )
        logger.info(
            "Suite finished: %d experiment(s), all passed: %s",
            len(results),
            suite.all_passed,
        )
        return suite
