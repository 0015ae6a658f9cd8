"""Dependency Injection コンテナ。"""

from dependency_injector import containers, providers

from stochastic_volterra.application.use_cases import (
    RunExperimentUseCase,
    RunSuiteUseCase,
)
from stochastic_volterra.infrastructure.storage.loaders import CsvTableLoader
from stochastic_volterra.infrastructure.storage.result_writer import CsvResultWriter


class AppContainer(containers.DeclarativeContainer):
    """アプリケーション全体の DI コンテナ。"""

    config = providers.Configuration()

    # Infrastructure
    result_writer = providers.Singleton(
        CsvResultWriter,
        output_dir=config.output.directory,
    )

    table_loader = providers.Singleton(CsvTableLoader)

    # Application
    run_experiment_use_case = providers.Factory(
        RunExperimentUseCase,
        result_writer=result_writer,
    )

    run_suite_use_case = providers.Factory(
        RunSuiteUseCase,
        result_writer=result_writer,
        experiment_use_case=run_experiment_use_case,
    )
