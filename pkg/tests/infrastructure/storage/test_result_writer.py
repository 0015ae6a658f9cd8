from pathlib import Path

import numpy as np
import pytest

from stochastic_volterra.domain.values import TimeGrid
from stochastic_volterra.infrastructure.storage.loaders import CsvTableLoader
from stochastic_volterra.infrastructure.storage.result_writer import CsvResultWriter
from stochastic_volterra.infrastructure.stochastic.wiener import sample_bundle


def test_write_table_format(tmp_path: Path, writer: CsvResultWriter) -> None:
    """ヘッダー行と 17 桁の数値で CSV が書かれることを確認する。"""
    path = writer.write_table("curve", ["t", "value"], np.array([[0.0, 1.0 / 3.0]]))

    lines = Path(path).read_text(encoding="utf-8").splitlines()

    assert path == str(tmp_path / "curve.csv")
    assert lines[0] == "t,value"
    assert lines[1] == "0,0.33333333333333331"
    assert float(lines[1].split(",")[1]) == 1.0 / 3.0


def test_write_table_flat_rows(writer: CsvResultWriter) -> None:
    """1 次元の行データがヘッダーの列数で折り返されることを確認する。"""
    path = writer.write_table("flat", ["a", "b"], np.array([1.0, 2.0, 3.0, 4.0]))

    assert Path(path).read_text(encoding="utf-8").splitlines()[1:] == ["1,2", "3,4"]


def test_write_table_column_mismatch(writer: CsvResultWriter) -> None:
    """列数がヘッダーと合わない場合に ValueError を発生させる。"""
    with pytest.raises(ValueError, match=r"rows have 3 columns but header has 2"):
        writer.write_table("bad", ["a", "b"], np.zeros((2, 3)))


def test_write_report_and_written(writer: CsvResultWriter) -> None:
    """レポートの書き出しと書き出し済みファイルの追跡を確認する。"""
    table = writer.write_table("curve", ["t", "v"], np.zeros((1, 2)))
    report = writer.write_report("curve", ["passed = True"])
    writer.write_table("curve", ["t", "v"], np.ones((1, 2)))

    assert Path(report).name == "curve.report.txt"
    assert Path(report).read_text(encoding="utf-8") == "passed = True\n"
    assert writer.written == [table, report]


def test_write_bundle_can_be_loaded(tmp_path: Path, writer: CsvResultWriter) -> None:
    """書き出した増分の束を CsvTableLoader で復元できることを確認する。"""
    grid = TimeGrid(t_end=1.0, steps=6)
    bundle = sample_bundle(grid, modes=2, seed=9)

    path = writer.write_bundle("bundle", bundle)
    restored = CsvTableLoader().load_bundle(path, grid, seed=9)

    np.testing.assert_array_equal(restored.increments, bundle.increments)


def test_write_plot_script(writer: CsvResultWriter) -> None:
    """2 列以上の表だけが gnuplot スクリプトに含まれることを確認する。"""
    path = writer.write_plot_script(
        [("curve", ["t", "a", "b"]), ("single", ["value"])]
    )

    content = Path(path).read_text(encoding="utf-8")

    assert Path(path).name == "plots.gnu"
    assert "plot for [i=2:3] 'curve.csv' using 1:i with lines" in content
    assert "single.csv" not in content


def test_output_directory_is_created(tmp_path: Path) -> None:
    """存在しない出力ディレクトリが作成されることを確認する。"""
    target = tmp_path / "nested" / "results"

    CsvResultWriter(str(target))

    assert target.is_dir()
