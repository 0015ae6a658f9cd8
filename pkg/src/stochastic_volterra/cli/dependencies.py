"""設定ファイルの読み込みと実験入力の組み立て。

設定ファイルはセクション付きの INI です。``[kernel]`` ``[operator]`` ``[grid]``
``[noise]`` ``[integrand]`` ``[options]`` ``[output]`` が全実験の既定値になり、
``[experiment:<name>]`` セクションが ``kind`` と上書き (``grid.steps = 400`` の
ようなドット区切りのキー、またはドットなしの ``[options]`` のキー) を持ちます。
"""

import configparser
import copy
import logging
from collections.abc import Mapping
from typing import Any, Final

from dependency_injector import providers
from pydantic import ValidationError

from stochastic_volterra.application.dtos import (
    ExperimentInput,
    ExperimentKind,
    SuiteInput,
)
from stochastic_volterra.cli.schemas import (
    ExperimentSpec,
    IntegrandSpec,
    KernelSpec,
    OperatorSpec,
    RunConfig,
)
from stochastic_volterra.core.containers import AppContainer
from stochastic_volterra.domain.exceptions import ConfigError, ShapeError
from stochastic_volterra.domain.interfaces import IIntegrandSeries
from stochastic_volterra.domain.values import Kernel, SpectralOperator, TimeGrid
from stochastic_volterra.infrastructure.storage.loaders import CsvTableLoader
from stochastic_volterra.infrastructure.stochastic.integrands import build_integrand

logger = logging.getLogger(__name__)

EXPERIMENT_SECTIONS: Final[tuple[str, ...]] = (
    "kernel",
    "operator",
    "grid",
    "noise",
    "integrand",
    "options",
)
BASE_SECTIONS: Final[tuple[str, ...]] = (*EXPERIMENT_SECTIONS, "output")
EXPERIMENT_PREFIX: Final[str] = "experiment:"

Settings = dict[str, dict[str, Any]]


def read_settings(config_path: str | None) -> Settings:
    """INI ファイルを読み込みます (``${VAR}`` は環境変数で展開)。

    Args:
        config_path: 設定ファイルのパス (None なら空の設定)

    Raises:
        ConfigError: ファイルが読めないか INI として不正な場合
    """
    if config_path is None:
        return {}
    config = providers.Configuration()
    try:
        config.from_ini(config_path, required=True)
    except OSError as e:
        msg = f"cannot read config file {config_path}: {e}"
        raise ConfigError(msg, "config") from e
    except configparser.Error as e:
        msg = f"malformed config file {config_path}: {e}"
        raise ConfigError(msg, "config") from e
    raw = config() or {}
    logger.debug("Loaded config %s: sections=%s", config_path, list(raw))
    return {str(section): dict(values or {}) for section, values in raw.items()}


def _apply_overrides(target: Settings, overrides: Mapping[str, object]) -> None:
    for key, value in overrides.items():
        if value is None:
            continue
        section, _, field = key.partition(".")
        if section in target:
            target[section][field] = value


def _experiment_payload(
    name: str,
    values: Mapping[str, Any],
    base: Settings,
    overrides: Mapping[str, object],
) -> dict[str, Any]:
    merged = {section: dict(base[section]) for section in EXPERIMENT_SECTIONS}
    entries = dict(values)
    kind = entries.pop("kind", None)
    if kind is None:
        msg = "every experiment section needs a kind"
        raise ConfigError(msg, f"experiments.{name}.kind")
    for key, value in entries.items():
        section, dot, field = key.partition(".")
        if not dot:
            section, field = "options", key
        if section not in merged:
            msg = f"unknown override key '{key}'"
            raise ConfigError(msg, f"experiments.{name}.{key}")
        merged[section][field] = value
    _apply_overrides(merged, overrides)
    return {"name": name, "kind": kind, **merged}


def _validate(payload: Mapping[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(payload)
    except ValidationError as e:
        errors = e.errors()
        loc = list(errors[0]["loc"])
        if len(loc) > 1 and loc[0] == "experiments" and isinstance(loc[1], int):
            loc[1] = payload["experiments"][loc[1]]["name"]
        message = errors[0]["msg"]
        if len(errors) > 1:
            message = f"{message} (and {len(errors) - 1} more error(s))"
        raise ConfigError(message, ".".join(str(part) for part in loc)) from e


def build_run_config(
    settings: Settings,
    overrides: Mapping[str, object] | None = None,
    only: tuple[ExperimentKind, str] | None = None,
) -> RunConfig:
    """INI の設定と CLI の上書きから RunConfig を組み立てます。

    Args:
        settings: ``read_settings`` の結果
        overrides: ``"noise.seed"`` のようなドット区切りのキーと値 (None は無視)
        only: 指定すると設定ファイルの実験リストの代わりにこの (種類, 名前) の
            実験 1 つだけを既定値で組み立てます

    Returns:
        RunConfig: 検証済みの設定

    Raises:
        ConfigError: 未知のセクションやキー、または検証エラー (フィールドパス付き)
    """
    overrides = overrides or {}
    for section in settings:
        if section not in BASE_SECTIONS and not section.startswith(EXPERIMENT_PREFIX):
            msg = f"unknown section [{section}]"
            raise ConfigError(msg, section)
    base: Settings = {
        section: copy.deepcopy(settings.get(section, {})) for section in BASE_SECTIONS
    }
    _apply_overrides(base, overrides)

    if only is not None:
        kind, name = only
        experiments = [_experiment_payload(name, {"kind": kind.value}, base, overrides)]
    else:
        experiments = [
            _experiment_payload(
                section.removeprefix(EXPERIMENT_PREFIX), values, base, overrides
            )
            for section, values in settings.items()
            if section.startswith(EXPERIMENT_PREFIX)
        ]
    return _validate({**base, "experiments": experiments})


def _kernel(spec: KernelSpec, loader: CsvTableLoader) -> Kernel:
    if spec.kind == "fractional":
        return Kernel.fractional(spec.alpha)
    if spec.kind == "exponential":
        return Kernel.exponential()
    if spec.table is None:
        msg = "a tabulated kernel needs a table path"
        raise ConfigError(msg, "kernel.table")
    return loader.load_kernel(spec.table)


def _operator(spec: OperatorSpec, loader: CsvTableLoader) -> SpectralOperator:
    if spec.csv is not None:
        return loader.load_spectrum(spec.csv)
    if spec.name == "constant":
        return SpectralOperator.from_eigenvalues(
            [spec.eigenvalue] * spec.modes,
            description=f"constant λ={spec.eigenvalue:g}, K={spec.modes}",
        )
    return SpectralOperator.dirichlet_laplacian(spec.modes)


def _integrand(
    spec: IntegrandSpec, noise_modes: int, op: SpectralOperator, loader: CsvTableLoader
) -> IIntegrandSeries:
    if spec.name == "tabulated":
        if spec.csv is None:
            msg = "a tabulated integrand needs a CSV path"
            raise ConfigError(msg, "integrand.csv")
        psi: IIntegrandSeries = loader.load_integrand(
            spec.csv, tail_budget=spec.tail_budget
        )
    else:
        try:
            psi = build_integrand(spec.name, noise_modes, op.dimension)
        except (ValueError, ShapeError) as e:
            msg = str(e)
            raise ConfigError(msg, "integrand.name") from e
    if psi.space_dim != op.dimension:
        msg = (
            f"integrand space dimension {psi.space_dim} does not match operator "
            f"K={op.dimension}"
        )
        raise ConfigError(msg, "integrand.csv")
    return psi


def build_experiment_input(
    spec: ExperimentSpec, loader: CsvTableLoader
) -> ExperimentInput:
    """検証済みの実験設定からドメインオブジェクトを組み立てます。

    Raises:
        ConfigError: CSV が読めない場合や吉田近似の n が固有値以下の場合
    """
    op = _operator(spec.operator, loader)
    smallest_n = min(spec.options.yosida_n)
    if spec.kind is ExperimentKind.YOSIDA_SUITE and smallest_n <= op.omega:
        msg = (
            f"every n must exceed the largest eigenvalue {op.omega:g}, "
            f"got {smallest_n}"
        )
        raise ConfigError(msg, f"experiments.{spec.name}.options.yosida_n")
    psi = _integrand(spec.integrand, spec.noise.modes, op, loader)
    options = spec.options
    return ExperimentInput(
        name=spec.name,
        kind=spec.kind,
        kernel=_kernel(spec.kernel, loader),
        operator=op,
        grid=TimeGrid(t_end=spec.grid.t_end, steps=spec.grid.steps),
        integrand=psi,
        seed=spec.noise.seed,
        paths=spec.noise.paths,
        noise_modes=max(spec.noise.modes, psi.modes),
        yosida_n=options.yosida_n,
        mu=options.mu,
        xi_index=options.xi_index,
        levels=options.levels,
        min_rate=options.min_rate,
        tol_cp=options.tol_cp,
        scale_r_equation=options.scale_r_equation,
        workers=options.workers,
        export_paths=options.export_paths,
    )


def build_suite_input(
    config: RunConfig,
    loader: CsvTableLoader,
    parallel: bool = False,
    threads: int = 1,
) -> SuiteInput:
    """RunConfig から実験スイートの入力を組み立てます。"""
    experiments = tuple(
        build_experiment_input(spec, loader) for spec in config.experiments
    )
    return SuiteInput(
        experiments=experiments,
        resolved_config=config.model_dump_json(indent=2) + "\n",
        parallel=parallel,
        threads=threads,
    )


def create_container(config: RunConfig) -> AppContainer:
    """出力ディレクトリを設定した DI コンテナを生成します。"""
    container = AppContainer()
    container.config.from_dict({"output": {"directory": config.output.directory}})
    return container
