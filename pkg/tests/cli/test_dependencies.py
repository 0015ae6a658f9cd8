"""設定ファイルの読み込みと実験入力の組み立てのテスト。

テストケース:
- INI の読み込みと環境変数の展開
- 既定値・実験セクション・CLI 上書きの優先順位
- 未知のセクションやキー、検証エラーのフィールドパス
- ドメインオブジェクトへの変換とコンテナの生成
"""

from pathlib import Path

import pytest

from stochastic_volterra.application.dtos import ExperimentKind
from stochastic_volterra.cli.dependencies import (
    build_experiment_input,
    build_run_config,
    build_suite_input,
    create_container,
    read_settings,
)
from stochastic_volterra.domain.exceptions import ConfigError
from stochastic_volterra.domain.values import KernelKind
from stochastic_volterra.infrastructure.storage.loaders import CsvTableLoader
from stochastic_volterra.infrastructure.storage.result_writer import CsvResultWriter


@pytest.fixture
def loader() -> CsvTableLoader:
    """ローダーのフィクスチャ。"""
    return CsvTableLoader()


def test_read_settings(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    """INI のセクションが辞書になり、環境変数が展開されることを確認する。"""
    monkeypatch.setenv("SV_TEST_SEED", "11")
    path = tmp_path / "config.ini"
    path.write_text(
        "[noise]\nseed = ${SV_TEST_SEED}\n\n[experiment:a]\nkind = resolvent\n",
        encoding="utf-8",
    )

    settings = read_settings(str(path))

    assert settings["noise"]["seed"] == "11"
    assert settings["experiment:a"]["kind"] == "resolvent"
    assert read_settings(None) == {}


def test_read_settings_missing_file(tmp_path: Path) -> None:
    """存在しないファイルで ConfigError を発生させる。"""
    with pytest.raises(ConfigError, match=r"cannot read config file") as exc_info:
        read_settings(str(tmp_path / "missing.ini"))

    assert exc_info.value.field_path == "config"


def test_defaults_for_single_experiment() -> None:
    """設定なしで 1 つの実験を既定値で組み立てられることを確認する。"""
    config = build_run_config({}, only=(ExperimentKind.CONVOLVE, "conv"))

    spec = config.experiments[0]
    assert spec.name == "conv"
    assert spec.kind is ExperimentKind.CONVOLVE
    assert spec.grid.steps == 800
    assert spec.kernel.kind == "exponential"
    assert spec.options.yosida_n == (10, 100, 1000)


def test_override_precedence() -> None:
    """既定値 < 実験セクション < CLI 上書きの順に優先されることを確認する。"""
    settings = {
        "grid": {"steps": "400"},
        "options": {"mu": "0,1"},
        "experiment:a": {"kind": "cp-check", "grid.t_end": "2.0", "levels": "2"},
        "experiment:b": {"kind": "resolvent", "grid.steps": "200"},
    }

    config = build_run_config(settings, {"grid.steps": 100, "noise.seed": None})

    first, second = config.experiments
    assert first.grid.t_end == 2.0
    assert first.grid.steps == 100
    assert first.options.levels == 2
    assert first.options.mu == (0.0, 1.0)
    assert second.grid.steps == 100
    assert second.noise.seed == 42


def test_unknown_section() -> None:
    """未知のセクションで ConfigError を発生させる。"""
    with pytest.raises(ConfigError, match=r"unknown section \[bogus\]"):
        build_run_config({"bogus": {}})


def test_experiment_without_kind() -> None:
    """kind のない実験セクションで ConfigError を発生させる。"""
    with pytest.raises(ConfigError) as exc_info:
        build_run_config({"experiment:a": {"grid.steps": "10"}})

    assert exc_info.value.field_path == "experiments.a.kind"


def test_unknown_override_key() -> None:
    """未知のセクションへの上書きキーで ConfigError を発生させる。"""
    with pytest.raises(ConfigError, match=r"unknown override key 'foo.bar'"):
        build_run_config({"experiment:a": {"kind": "resolvent", "foo.bar": "1"}})


def test_validation_error_field_path() -> None:
    """検証エラーのフィールドパスに実験名が入ることを確認する。"""
    with pytest.raises(ConfigError) as exc_info:
        build_run_config({"experiment:a": {"kind": "resolvent", "grid.steps": "0"}})

    assert exc_info.value.field_path == "experiments.a.grid.steps"


def test_cauchy_rejects_fractional_kernel() -> None:
    """α ≠ 1 の fractional カーネルでの cauchy が拒否されることを確認する。"""
    settings = {"kernel": {"kind": "fractional", "alpha": "1.5"}}

    with pytest.raises(ConfigError, match=r"a\(0\) = 0"):
        build_run_config(settings, only=(ExperimentKind.CAUCHY, "cauchy"))


def test_verify_requires_divisible_steps() -> None:
    """細分化レベルで割り切れないステップ数が拒否されることを確認する。"""
    settings = {"experiment:v": {"kind": "verify-strong", "grid.steps": "10"}}

    with pytest.raises(ConfigError, match=r"must be divisible by 4"):
        build_run_config(settings)


def test_yosida_n_must_exceed_eigenvalue() -> None:
    """n が固有値以下の吉田近似スイートが拒否されることを確認する。"""
    settings = {
        "operator": {"name": "constant", "eigenvalue": "50", "modes": "1"},
        "options": {"yosida_n": "10,100"},
    }

    with pytest.raises(ConfigError, match=r"must exceed every eigenvalue"):
        build_run_config(settings, only=(ExperimentKind.YOSIDA_SUITE, "yosida"))


def test_build_experiment_input(loader: CsvTableLoader) -> None:
    """検証済みの設定からドメインオブジェクトが組み立てられることを確認する。"""
    settings = {
        "operator": {"modes": "4"},
        "noise": {"modes": "2", "seed": "9"},
        "integrand": {"name": "unit"},
    }
    config = build_run_config(settings, only=(ExperimentKind.CONVOLVE, "conv"))

    inp = build_experiment_input(config.experiments[0], loader)

    assert inp.operator.dimension == 4
    assert inp.integrand.space_dim == 4
    assert inp.integrand.modes == 1
    assert inp.noise_modes == 2
    assert inp.seed == 9
    assert inp.grid.steps == 800


def test_build_experiment_input_tabulated_kernel(
    tmp_path: Path, loader: CsvTableLoader
) -> None:
    """tabulated カーネルが CSV から読み込まれることを確認する。"""
    table = tmp_path / "kernel.csv"
    table.write_text("t,a\n0,1\n1,0.5\n2,0.25\n", encoding="utf-8")
    settings = {"kernel": {"kind": "tabulated", "table": str(table)}}
    config = build_run_config(settings, only=(ExperimentKind.RESOLVENT, "r"))

    inp = build_experiment_input(config.experiments[0], loader)

    assert inp.kernel.kind is KernelKind.TABULATED


def test_modal_integrand_needs_enough_space_modes(loader: CsvTableLoader) -> None:
    """空間モード数より多いノイズモードの modal が ConfigError になることを確認する。"""
    settings = {"operator": {"modes": "2"}, "noise": {"modes": "4"}}
    config = build_run_config(settings, only=(ExperimentKind.CONVOLVE, "conv"))

    with pytest.raises(ConfigError) as exc_info:
        build_experiment_input(config.experiments[0], loader)

    assert exc_info.value.field_path == "integrand.name"


def test_build_suite_input(loader: CsvTableLoader) -> None:
    """スイート入力に解決済みの設定 (JSON) と並列設定が入ることを確認する。"""
    settings = {
        "experiment:a": {"kind": "resolvent"},
        "experiment:b": {"kind": "cp-check"},
    }
    config = build_run_config(settings)

    suite = build_suite_input(config, loader, parallel=True, threads=2)

    assert [e.name for e in suite.experiments] == ["a", "b"]
    assert suite.parallel
    assert suite.threads == 2
    assert '"experiments"' in suite.resolved_config


def test_create_container(tmp_path: Path) -> None:
    """出力ディレクトリを設定したコンテナが生成されることを確認する。"""
    out = tmp_path / "out"
    config = build_run_config({"output": {"directory": str(out)}})

    container = create_container(config)
    writer = container.result_writer()

    assert isinstance(writer, CsvResultWriter)
    assert out.is_dir()
