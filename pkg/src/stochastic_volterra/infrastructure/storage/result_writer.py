"""実験結果の書き出しクラス。

特徴:
- 17 桁の 10 進数で CSV を書くので、再実行でバイト単位に同一
- 書き出したファイルを追跡
- gnuplot スクリプトでの描画
"""

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Final

import numpy as np

from stochastic_volterra.domain.entities import WienerBundle
from stochastic_volterra.domain.values import FloatArray

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT: Final[str] = "%.17g"
PLOT_SCRIPT_NAME: Final[str] = "plots.gnu"


class CsvResultWriter:
    """出力ディレクトリに CSV・レポート・描画スクリプトを書き出すクラス。

    Usage:
    ```python
    writer = CsvResultWriter("results")
    writer.write_table("resolvent", ["t", "mode_1"], rows)
    writer.write_plot_script([("resolvent", ["t", "mode_1"])])
    ```
    """

    _written: list[str]

    def __init__(self, output_dir: str) -> None:
        """初期化。

        Args:
            output_dir: 出力ディレクトリ (存在しなければ作成)
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self._written = []
        logger.debug("CsvResultWriter initialized: output_dir=%s", self.output_dir)

    def _track(self, path: Path) -> str:
        str_path = str(path)
        if str_path not in self._written:
            self._written.append(str_path)
        logger.debug("Wrote %s", str_path)
        return str_path

    def write_text(self, filename: str, content: str) -> str:
        """テキストファイルを書き出します。"""
        path = self.output_dir / filename
        path.write_text(content, encoding="utf-8")
        return self._track(path)

    def write_table(self, name: str, header: Sequence[str], rows: FloatArray) -> str:
        """``<name>.csv`` を固定の列順で書き出します。"""
        data = np.asarray(rows, dtype=np.float64)
        if data.ndim == 1:
            data = data.reshape(-1, len(header))
        if data.shape[1] != len(header):
            msg = f"rows have {data.shape[1]} columns but header has {len(header)}"
            raise ValueError(msg)
        path = self.output_dir / f"{name}.csv"
        np.savetxt(
            path,
            data,
            fmt=CSV_FLOAT_FORMAT,
            delimiter=",",
            header=",".join(header),
            comments="",
        )
        return self._track(path)

    def write_report(self, name: str, lines: Sequence[str]) -> str:
        """``<name>.report.txt`` を書き出します。"""
        return self.write_text(f"{name}.report.txt", "\n".join(lines) + "\n")

    def write_bundle(self, name: str, bundle: WienerBundle) -> str:
        """増分の束を (mode, step, increment) の CSV で書き出します。"""
        modes, steps = bundle.increments.shape
        mode_idx, step_idx = np.meshgrid(
            np.arange(modes), np.arange(steps), indexing="ij"
        )
        rows = np.column_stack(
            (mode_idx.ravel(), step_idx.ravel(), bundle.increments.ravel())
        )
        return self.write_table(name, ["mode", "step", "increment"], rows)

    def write_plot_script(self, tables: Sequence[tuple[str, Sequence[str]]]) -> str:
        """各 CSV の第 1 列を横軸にした gnuplot スクリプトを書き出します。"""
        lines = [
            "# gnuplot script; run with: gnuplot plots.gnu",
            "set datafile separator ','",
            "set key autotitle columnhead",
            "set terminal pngcairo size 900,600",
        ]
        for name, header in tables:
            if len(header) < 2:
                continue
            lines += [
                "",
                f"set output '{name}.png'",
                f"set title '{name}'",
                f"set xlabel '{header[0]}'",
                f"plot for [i=2:{len(header)}] '{name}.csv' using 1:i with lines",
            ]
        return self.write_text(PLOT_SCRIPT_NAME, "\n".join(lines) + "\n")

    @property
    def written(self) -> list[str]:
        """書き出したファイルのパス (書き出し順)。"""
        return list(self._written)
