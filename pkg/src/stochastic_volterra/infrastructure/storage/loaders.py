"""CSV 入力 (テーブルカーネル、固有値列、増分の束、テーブル被積分関数) の読み込み。"""

import logging
from pathlib import Path

import numpy as np

from stochastic_volterra.domain.entities import WienerBundle
from stochastic_volterra.domain.exceptions import ConfigError
from stochastic_volterra.domain.values import (
    FloatArray,
    Kernel,
    SpectralOperator,
    TimeGrid,
)
from stochastic_volterra.infrastructure.stochastic.integrands import TabulatedIntegrand

logger = logging.getLogger(__name__)


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


class CsvTableLoader:
    """カンマ区切りの数値表を読み込み、ドメインオブジェクトに変換するクラス。

    読み込みや解析の失敗はすべて ``ConfigError`` (フィールドパス付き) に変換します。
    """

    def _read(
        self, path: str | Path, columns: int, field_path: str, require_header: bool
    ) -> FloatArray:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            msg = f"cannot read {path}: {e}"
            raise ConfigError(msg, field_path) from e

        lines = [
            line
            for line in text.splitlines()
            if line.strip() and not line.startswith("#")
        ]
        has_header = bool(lines) and not _is_number(lines[0].split(",")[0])
        if require_header and not has_header:
            msg = f"{path} must start with a header row"
            raise ConfigError(msg, field_path)
        if has_header:
            lines = lines[1:]
        if not lines:
            msg = f"{path} contains no data rows"
            raise ConfigError(msg, field_path)

        try:
            data = np.loadtxt(lines, delimiter=",", ndmin=2, dtype=np.float64)
        except ValueError as e:
            msg = f"{path} is not a numeric table: {e}"
            raise ConfigError(msg, field_path) from e
        if data.shape[1] != columns:
            msg = f"{path} must have {columns} column(s), got {data.shape[1]}"
            raise ConfigError(msg, field_path)
        logger.debug("Loaded %s: rows=%d", path, data.shape[0])
        return data

    def load_kernel(self, path: str | Path) -> Kernel:
        """2 列 (t, a(t)) の CSV からテーブルカーネルを生成します (ヘッダー行必須)。"""
        data = self._read(path, 2, "kernel.table", require_header=True)
        try:
            return Kernel.tabulated(data[:, 0], data[:, 1])
        except ValueError as e:
            raise ConfigError(str(e), "kernel.table") from e

    def load_spectrum(self, path: str | Path) -> SpectralOperator:
        """1 列の固有値 CSV から作用素を生成します (降順に並べ替えます)。"""
        data = self._read(path, 1, "operator.csv", require_header=False)
        try:
            return SpectralOperator.from_eigenvalues(
                data[:, 0], description=f"custom spectrum from {Path(path).name}"
            )
        except ValueError as e:
            raise ConfigError(str(e), "operator.csv") from e

    def load_bundle(
        self, path: str | Path, grid: TimeGrid, seed: int = 0, path_index: int = 0
    ) -> WienerBundle:
        """(mode, step, increment) 形式の CSV から増分の束を復元します (0 始まり)。"""
        data = self._read(path, 3, "noise.bundle", require_header=False)
        modes = int(data[:, 0].max()) + 1
        increments = np.full((modes, grid.steps), np.nan)
        mode_idx = data[:, 0].astype(np.int64)
        step_idx = data[:, 1].astype(np.int64)
        outside = (step_idx < 0) | (step_idx >= grid.steps) | (mode_idx < 0)
        if np.any(outside):
            msg = f"{path} has indices outside (modes, {grid.steps})"
            raise ConfigError(msg, "noise.bundle")
        increments[mode_idx, step_idx] = data[:, 2]
        if np.any(np.isnan(increments)):
            msg = f"{path} does not cover every (mode, step) pair"
            raise ConfigError(msg, "noise.bundle")
        return WienerBundle(
            grid=grid, seed=seed, increments=increments, path=path_index
        )

    def load_integrand(
        self,
        path: str | Path,
        tail_budget: float = 0.0,
        operator_tail: float | None = None,
    ) -> TabulatedIntegrand:
        """(t, mode, k, value) 形式の CSV からテーブル被積分関数を生成します。

        mode と k の添字は 0 始まりです。
        """
        data = self._read(path, 4, "integrand.csv", require_header=True)
        times, t_idx = np.unique(data[:, 0], return_inverse=True)
        mode_idx = data[:, 1].astype(np.int64)
        k_idx = data[:, 2].astype(np.int64)
        if np.any(mode_idx < 0) or np.any(k_idx < 0):
            msg = f"{path} has negative mode or k indices"
            raise ConfigError(msg, "integrand.csv")
        shape = (int(mode_idx.max()) + 1, times.size, int(k_idx.max()) + 1)
        values = np.full(shape, np.nan)
        values[mode_idx, t_idx, k_idx] = data[:, 3]
        if np.any(np.isnan(values)):
            msg = f"{path} does not cover every (t, mode, k) triple"
            raise ConfigError(msg, "integrand.csv")
        try:
            return TabulatedIntegrand(
                "tabulated",
                times,
                values,
                tail_budget=tail_budget,
                operator_tail=operator_tail,
            )
        except ValueError as e:
            raise ConfigError(str(e), "integrand.csv") from e
