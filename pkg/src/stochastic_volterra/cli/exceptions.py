"""CLI の終了コードと例外。"""

from enum import IntEnum

import click

from stochastic_volterra.domain.exceptions import (
    ConfigError,
    DomainError,
    KernelRangeError,
    PreconditionError,
    ResolventSetError,
    ShapeError,
    UnsupportedOperationError,
    VerificationError,
)


class ExitCode(IntEnum):
    """プロセスの終了コード。"""

    SUCCESS = 0
    VERIFICATION_FAILED = 1
    CONFIG_ERROR = 2
    NUMERIC_ERROR = 3
    UNSUPPORTED = 4


_EXIT_CODES: tuple[tuple[type[DomainError], ExitCode], ...] = (
    (VerificationError, ExitCode.VERIFICATION_FAILED),
    (ConfigError, ExitCode.CONFIG_ERROR),
    (ShapeError, ExitCode.CONFIG_ERROR),
    (ResolventSetError, ExitCode.CONFIG_ERROR),
    (KernelRangeError, ExitCode.CONFIG_ERROR),
    (UnsupportedOperationError, ExitCode.UNSUPPORTED),
    (PreconditionError, ExitCode.UNSUPPORTED),
)


def exit_code_for(error: DomainError) -> ExitCode:
    """ドメイン例外に対応する終了コードを返します (未分類は数値エラー扱い)。"""
    for error_type, code in _EXIT_CODES:
        if isinstance(error, error_type):
            return code
    return ExitCode.NUMERIC_ERROR


class CliError(click.ClickException):
    """終了コード付きの CLI エラー。"""

    def __init__(self, code: ExitCode, message: str) -> None:
        """初期化。

        Args:
            code: 終了コード
            message: 標準エラーに表示するメッセージ
        """
        super().__init__(message)
        self.exit_code = int(code)

    @classmethod
    def from_domain(cls, error: DomainError) -> "CliError":
        """ドメイン例外から生成します。"""
        return cls(exit_code_for(error), error.message)
