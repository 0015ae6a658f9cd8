"""実験ユースケースのテスト。

テストケース:
- 各種実験の合否判定と書き出しファイル
- ステップ数の前提条件
- スイートの順序・描画スクリプト・並列実行
"""

from pathlib import Path
from typing import Any
from unittest.mock import MagicMock

import numpy as np
import pytest

from stochastic_volterra.application.dtos import (
    ExperimentInput,
    ExperimentKind,
    ExperimentResult,
    SuiteInput,
)
from stochastic_volterra.application.use_cases import (
    RunExperimentUseCase,
    RunSuiteUseCase,
)
from stochastic_volterra.domain.exceptions import PreconditionError
from stochastic_volterra.domain.values import Kernel, SpectralOperator, TimeGrid
from stochastic_volterra.infrastructure.storage.result_writer import CsvResultWriter
from stochastic_volterra.infrastructure.stochastic.integrands import build_integrand


def _input(kind: ExperimentKind, **overrides: Any) -> ExperimentInput:
    values: dict[str, Any] = {
        "name": kind.value,
        "kind": kind,
        "kernel": Kernel.exponential(),
        "operator": SpectralOperator.from_eigenvalues([-1.0]),
        "grid": TimeGrid(t_end=1.0, steps=200),
        "integrand": build_integrand("unit", 1, 1),
        "noise_modes": 1,
        "paths": 64,
    }
    values.update(overrides)
    return ExperimentInput(**values)


@pytest.fixture
def use_case(writer: CsvResultWriter) -> RunExperimentUseCase:
    """実ファイルに書き出すユースケースのフィクスチャ。"""
    return RunExperimentUseCase(result_writer=writer)


def _report(result: ExperimentResult) -> str:
    path = next(f for f in result.files if f.endswith(".report.txt"))
    return Path(path).read_text(encoding="utf-8")


def test_resolvent_experiment(use_case: RunExperimentUseCase) -> None:
    """ラプラシアンのレゾルベント実験が合格し、表とレポートを書き出すことを確認する。"""
    inp = _input(
        ExperimentKind.RESOLVENT,
        operator=SpectralOperator.dirichlet_laplacian(4),
        grid=TimeGrid(t_end=1.0, steps=1000),
    )

    result = use_case.execute(inp)

    assert result.passed
    assert result.header == ("t", "mode_1", "mode_2", "mode_3", "mode_4")
    assert [Path(f).name for f in result.files] == [
        "resolvent.csv",
        "resolvent.report.txt",
    ]
    report = _report(result)
    assert "kind = resolvent" in report
    assert "passed = True" in report
    assert result.summary["resolvent_residual"] <= 1e-6


def test_cp_check_experiment(use_case: RunExperimentUseCase) -> None:
    """Exponential カーネルの完全正値性チェックが合格することを確認する。"""
    inp = _input(
        ExperimentKind.CP_CHECK,
        grid=TimeGrid(t_end=2.0, steps=2000),
        mu=(0.0, 0.5, 1.0),
    )

    result = use_case.execute(inp)

    assert result.passed
    assert result.header == (
        "t",
        "s_mu0",
        "r_mu0",
        "s_mu0.5",
        "r_mu0.5",
        "s_mu1",
        "r_mu1",
    )
    assert "observed_order_mu1" in _report(result)


def test_convolve_experiment_exports_paths(use_case: RunExperimentUseCase) -> None:
    """確率畳み込みの実験が軌道の長い形式も書き出すことを確認する。"""
    inp = _input(
        ExperimentKind.CONVOLVE,
        kernel=Kernel.fractional(1.0),
        paths=2000,
        export_paths=True,
    )

    result = use_case.execute(inp)

    assert result.passed
    assert result.header == ("t", "mean_sq", "stderr", "quadrature")
    assert [Path(f).name for f in result.files] == [
        "convolve.csv",
        "convolve.paths.csv",
        "convolve.report.txt",
    ]
    assert result.summary["interchange"] <= 1e-12


def test_ito_check_experiment(use_case: RunExperimentUseCase) -> None:
    """Itô 等長性の実験が 1 行の表を書き、描画対象から外れることを確認する。"""
    inp = _input(
        ExperimentKind.ITO_CHECK,
        integrand=build_integrand("geometric", 2, 1),
        noise_modes=2,
        grid=TimeGrid(t_end=1.0, steps=50),
        paths=400,
    )

    result = use_case.execute(inp)

    assert not result.plottable
    assert result.summary["rhs"] == pytest.approx(0.75)
    assert "martingale_means" in _report(result)


def test_verify_strong_experiment(use_case: RunExperimentUseCase) -> None:
    """強形式の検証が細分化の各レベルを表に書き、合格することを確認する。"""
    inp = _input(
        ExperimentKind.VERIFY_STRONG, grid=TimeGrid(t_end=1.0, steps=800), paths=8
    )

    result = use_case.execute(inp)

    rows = np.loadtxt(result.files[0], delimiter=",", skiprows=1)
    assert result.passed
    assert rows.shape == (3, 2)
    np.testing.assert_allclose(rows[:, 0], [4.0 / 800.0, 2.0 / 800.0, 1.0 / 800.0])
    assert "integrability_witness_max" in _report(result)


def test_verify_weak_experiment(use_case: RunExperimentUseCase) -> None:
    """A = 0 の弱形式の検証が整合性ギャップとともに合格することを確認する。"""
    inp = _input(
        ExperimentKind.VERIFY_WEAK,
        operator=SpectralOperator.from_eigenvalues([0.0]),
        grid=TimeGrid(t_end=1.0, steps=64),
        paths=4,
    )

    result = use_case.execute(inp)

    assert result.passed
    assert result.summary["residual_sup_mean"] == 0.0
    assert "consistency_gap = 0" in _report(result)


def test_yosida_suite_experiment(use_case: RunExperimentUseCase) -> None:
    """吉田近似スイートが単調減少と分解の上界で合格することを確認する。"""
    inp = _input(
        ExperimentKind.YOSIDA_SUITE,
        operator=SpectralOperator.dirichlet_laplacian(4),
        integrand=build_integrand("modal", 4, 4),
        noise_modes=4,
        paths=200,
    )

    result = use_case.execute(inp)

    assert result.passed
    assert result.header == ("n", "e1", "e2", "n1_sq", "n2_sq", "e1_quadrature")


def test_cauchy_experiment(use_case: RunExperimentUseCase) -> None:
    """コーシー書き換えの差が 4 倍細分化で約 4 倍縮み、合格することを確認する。"""
    inp = _input(
        ExperimentKind.CAUCHY, grid=TimeGrid(t_end=1.0, steps=1000), paths=8
    )

    result = use_case.execute(inp)

    assert result.passed
    assert 2.4 <= result.summary["contraction"] <= 5.6
    report = _report(result)
    assert "contraction_band = [" in report
    assert "discrepancy_order = 1\n" in report
    assert result.summary["forced_residual"] <= 10.0 / 1000.0


def test_cauchy_experiment_needs_divisible_steps(
    use_case: RunExperimentUseCase,
) -> None:
    """ステップ数が 4 で割り切れなければ PreconditionError を発生させる。"""
    inp = _input(ExperimentKind.CAUCHY, grid=TimeGrid(t_end=1.0, steps=10))

    with pytest.raises(PreconditionError, match=r"cauchy needs steps divisible by 4"):
        use_case.execute(inp)


def test_regularity_experiment(use_case: RunExperimentUseCase) -> None:
    """A = 0 の正則性の実験で最大ジャンプが細分化で縮むことを確認する。"""
    inp = _input(
        ExperimentKind.REGULARITY,
        operator=SpectralOperator.from_eigenvalues([0.0]),
        grid=TimeGrid(t_end=1.0, steps=400),
        paths=50,
    )

    result = use_case.execute(inp)

    assert result.passed
    assert result.summary["holder"] == pytest.approx(0.5, abs=0.15)


def _result(name: str, plottable: bool = True) -> ExperimentResult:
    return ExperimentResult(
        name=name,
        kind=ExperimentKind.RESOLVENT,
        passed=True,
        header=("t", "mode_1"),
        files=(f"{name}.csv",),
        plottable=plottable,
    )


def test_suite_runs_in_order() -> None:
    """スイートが実験を順に実行し、設定と描画スクリプトを書き出すことを確認する。"""
    writer = MagicMock()
    writer.write_text.return_value = "out/config.resolved.json"
    writer.write_plot_script.return_value = "out/plots.gnu"
    experiment = MagicMock()
    experiment.execute.side_effect = lambda inp: _result(inp.name)
    suite = RunSuiteUseCase(result_writer=writer, experiment_use_case=experiment)
    inputs = (
        _input(ExperimentKind.RESOLVENT, name="first"),
        _input(ExperimentKind.RESOLVENT, name="second"),
    )

    result = suite.execute(SuiteInput(experiments=inputs, resolved_config="{}"))

    assert [r.name for r in result.results] == ["first", "second"]
    assert result.config_path == "out/config.resolved.json"
    assert result.plot_script == "out/plots.gnu"
    assert result.all_passed
    writer.write_text.assert_called_once_with("config.resolved.json", "{}")
    writer.write_plot_script.assert_called_once_with(
        [("first", ["t", "mode_1"]), ("second", ["t", "mode_1"])]
    )


def test_suite_without_plottable_results() -> None:
    """描画対象がなければ描画スクリプトを書き出さないことを確認する。"""
    writer = MagicMock()
    experiment = MagicMock()
    experiment.execute.return_value = _result("ito", plottable=False)
    suite = RunSuiteUseCase(result_writer=writer, experiment_use_case=experiment)

    result = suite.execute(
        SuiteInput(
            experiments=(_input(ExperimentKind.ITO_CHECK),), resolved_config="{}"
        )
    )

    assert result.plot_script is None
    writer.write_plot_script.assert_not_called()


def test_suite_parallel_keeps_order() -> None:
    """並列実行でも結果が入力と同じ順に並ぶことを確認する。"""
    writer = MagicMock()
    experiment = MagicMock()
    experiment.execute.side_effect = lambda inp: _result(inp.name)
    suite = RunSuiteUseCase(result_writer=writer, experiment_use_case=experiment)
    names = [f"exp{i}" for i in range(5)]
    inputs = tuple(_input(ExperimentKind.RESOLVENT, name=n) for n in names)

    result = suite.execute(
        SuiteInput(experiments=inputs, resolved_config="{}", parallel=True, threads=3)
    )

    assert [r.name for r in result.results] == names
    assert experiment.execute.call_count == 5
