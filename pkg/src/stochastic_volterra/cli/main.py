"""コマンドラインインターフェース。

Usage:
    stochastic-volterra --config configs/default.ini --out results run
    stochastic-volterra --seed 7 convolve --steps 400 --paths 2000
"""

import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from typing import Any, Final

import click

from stochastic_volterra.application.dtos import ExperimentKind, SuiteResult
from stochastic_volterra.cli.dependencies import (
    build_run_config,
    build_suite_input,
    create_container,
    read_settings,
)
from stochastic_volterra.cli.exceptions import CliError, ExitCode
from stochastic_volterra.domain.exceptions import DomainError

logger = logging.getLogger(__name__)

LOG_FORMAT: Final[str] = "%(asctime)s %(levelname)s %(name)s: %(message)s"

COMMAND_HELP: Final[dict[ExperimentKind, str]] = {
    ExperimentKind.RESOLVENT: (
        "レゾルベント族 S(t) を計算し、方程式の残差と構造的恒等式を確認します。"
    ),
    ExperimentKind.CP_CHECK: "スカラー方程式 s, r の非負性 (完全正値性) を確認します。",
    ExperimentKind.CONVOLVE: "確率畳み込み W^Ψ の二乗平均を求積値と比べます。",
    ExperimentKind.ITO_CHECK: "Itô 等長性・直交性・リーマン和の自己収束を確認します。",
    ExperimentKind.VERIFY_STRONG: "強解としての残差を細分化しながら評価します。",
    ExperimentKind.VERIFY_WEAK: "試験ベクトル e_k に対する弱形式の残差を評価します。",
    ExperimentKind.VERIFY_MILD: (
        "全ての基底ベクトルで弱形式と mild 形式の一致を確認します。"
    ),
    ExperimentKind.YOSIDA_SUITE: "吉田近似 W_n^Ψ の W^Ψ への収束を確認します。",
    ExperimentKind.CAUCHY: "コーシー問題への書き換えと直接計算の差を確認します。",
    ExperimentKind.REGULARITY: "軌道の最大ジャンプとヘルダー指数を調べます。",
}


@dataclass(frozen=True)
class CliOptions:
    """グループ全体のオプション。"""

    config_path: str | None
    """設定ファイル。"""

    out: str | None
    """出力ディレクトリ。"""

    seed: int | None
    """乱数シード。"""

    threads: int | None
    """スレッド数。"""

    parallel: bool
    """実験を並列に実行するか。"""


def _overrides(options: CliOptions, values: Mapping[str, object]) -> dict[str, object]:
    return {
        "output.directory": options.out,
        "noise.seed": options.seed,
        "options.workers": options.threads,
        **values,
    }


def _run(
    options: CliOptions,
    only: tuple[ExperimentKind, str] | None,
    values: Mapping[str, object],
) -> None:
    try:
        settings = read_settings(options.config_path)
        config = build_run_config(settings, _overrides(options, values), only=only)
        container = create_container(config)
        suite_input = build_suite_input(
            config,
            container.table_loader(),
            parallel=options.parallel,
            threads=options.threads or 1,
        )
        result: SuiteResult = container.run_suite_use_case().execute(suite_input)
    except DomainError as e:
        logger.error("Run aborted: %s", e.message)
        raise CliError.from_domain(e) from e
    except OSError as e:
        logger.error("Cannot write results: %s", e)
        raise CliError(ExitCode.CONFIG_ERROR, f"output: {e}") from e

    for experiment in result.results:
        status = "PASS" if experiment.passed else "FAIL"
        click.echo(f"{status} {experiment.name} ({experiment.kind.value})")
    click.echo(f"config: {result.config_path}")
    code = ExitCode.SUCCESS if result.all_passed else ExitCode.VERIFICATION_FAILED
    click.get_current_context().exit(int(code))


def _grid_options(command: Callable[..., Any]) -> Callable[..., Any]:
    decorators = [
        click.option(
            "--steps", type=click.IntRange(min=1), default=None, help="ステップ数 N"
        ),
        click.option(
            "--t-end",
            type=click.FloatRange(min=0.0, min_open=True),
            default=None,
            help="終端時刻 T",
        ),
        click.option(
            "--paths",
            type=click.IntRange(min=1),
            default=None,
            help="モンテカルロのパス数",
        ),
        click.option(
            "--modes",
            type=click.IntRange(min=1),
            default=None,
            help="空間モード数 K (ノイズモード数 I も同じ値にします)",
        ),
    ]
    for decorator in reversed(decorators):
        command = decorator(command)
    return command


def _grid_values(
    steps: int | None, t_end: float | None, paths: int | None, modes: int | None
) -> dict[str, object]:
    return {
        "grid.steps": steps,
        "grid.t_end": t_end,
        "noise.paths": paths,
        "operator.modes": modes,
        "noise.modes": modes,
    }


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="INI 形式の設定ファイル",
)
@click.option(
    "--out",
    type=click.Path(file_okay=False),
    default=None,
    help="出力ディレクトリ",
)
@click.option("--seed", type=click.IntRange(min=0), default=None, help="乱数シード")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="スレッド数")
@click.option("--parallel", is_flag=True, help="実験を並列に実行する")
@click.option("--verbose", "-v", is_flag=True, help="DEBUG ログを出力する")
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: str | None,
    out: str | None,
    seed: int | None,
    threads: int | None,
    parallel: bool,
    verbose: bool,
) -> None:
    """確率 Volterra 方程式のレゾルベント族の計算と検証。"""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)
    ctx.obj = CliOptions(
        config_path=config_path,
        out=out,
        seed=seed,
        threads=threads,
        parallel=parallel,
    )


@cli.command(name="run")
@_grid_options
@click.pass_obj
def run_command(
    options: CliOptions,
    steps: int | None,
    t_end: float | None,
    paths: int | None,
    modes: int | None,
) -> None:
    """設定ファイルの実験リストを全て実行します。"""
    _run(options, None, _grid_values(steps, t_end, paths, modes))


def _register(kind: ExperimentKind, help_text: str) -> None:
    @cli.command(name=kind.value, help=help_text)
    @_grid_options
    @click.option(
        "--name", default=None, help="出力ファイル名の接頭辞 (既定はサブコマンド名)"
    )
    @click.pass_obj
    def command(
        options: CliOptions,
        steps: int | None,
        t_end: float | None,
        paths: int | None,
        modes: int | None,
        name: str | None,
    ) -> None:
        values = _grid_values(steps, t_end, paths, modes)
        _run(options, (kind, name or kind.value), values)


for _kind, _help in COMMAND_HELP.items():
    _register(_kind, _help)


def main() -> None:
    """エントリーポイント。"""
    cli(prog_name="stochastic-volterra")
