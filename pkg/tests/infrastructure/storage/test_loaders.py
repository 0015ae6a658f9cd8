"""CsvTableLoader のテスト。

テストケース:
- テーブルカーネル・固有値列・増分の束・被積分関数の読み込み
- ヘッダー欠落、列数不一致、欠けた添字の ConfigError
- 存在しないファイル
"""

from pathlib import Path

import numpy as np
import pytest

from stochastic_volterra.domain.exceptions import ConfigError
from stochastic_volterra.domain.values import KernelKind, TimeGrid
from stochastic_volterra.infrastructure.storage.loaders import CsvTableLoader


@pytest.fixture
def loader() -> CsvTableLoader:
    """ローダーのフィクスチャ。"""
    return CsvTableLoader()


def _write(tmp_path: Path, name: str, content: str) -> Path:
    path = tmp_path / name
    path.write_text(content, encoding="utf-8")
    return path


def test_load_kernel(tmp_path: Path, loader: CsvTableLoader) -> None:
    """ヘッダー付き 2 列の CSV からテーブルカーネルを読み込めることを確認する。"""
    path = _write(tmp_path, "kernel.csv", "t,a\n0,1\n0.5,0.75\n1,0.5\n")

    kernel = loader.load_kernel(path)

    assert kernel.kind is KernelKind.TABULATED
    np.testing.assert_allclose(kernel.table[1], [1.0, 0.75, 0.5])


def test_load_kernel_requires_header(tmp_path: Path, loader: CsvTableLoader) -> None:
    """ヘッダーのないカーネル CSV が拒否されることを確認する。"""
    path = _write(tmp_path, "kernel.csv", "0,1\n1,0.5\n")

    with pytest.raises(ConfigError, match=r"must start with a header row") as exc_info:
        loader.load_kernel(path)

    assert exc_info.value.field_path == "kernel.table"


def test_load_kernel_invalid_table(tmp_path: Path, loader: CsvTableLoader) -> None:
    """0 から始まらない時刻列が ConfigError になることを確認する。"""
    path = _write(tmp_path, "kernel.csv", "t,a\n0.1,1\n1,0.5\n")

    with pytest.raises(ConfigError, match=r"kernel.table: table grid must start at 0"):
        loader.load_kernel(path)


def test_load_spectrum_sorts(tmp_path: Path, loader: CsvTableLoader) -> None:
    """固有値 CSV が降順に並べ替えられることを確認する。"""
    path = _write(tmp_path, "spectrum.csv", "# eigenvalues\n-4\n0\n-1\n")

    op = loader.load_spectrum(path)

    np.testing.assert_array_equal(op.eigenvalues, [0.0, -1.0, -4.0])
    assert "spectrum.csv" in op.description


def test_load_spectrum_wrong_columns(tmp_path: Path, loader: CsvTableLoader) -> None:
    """列数が合わない場合に ConfigError を発生させる。"""
    path = _write(tmp_path, "spectrum.csv", "-1,2\n-4,3\n")

    with pytest.raises(ConfigError, match=r"must have 1 column\(s\), got 2"):
        loader.load_spectrum(path)


def test_load_missing_file(tmp_path: Path, loader: CsvTableLoader) -> None:
    """存在しないファイルで ConfigError を発生させる。"""
    with pytest.raises(ConfigError, match=r"operator.csv: cannot read"):
        loader.load_spectrum(tmp_path / "missing.csv")


def test_load_empty_file(tmp_path: Path, loader: CsvTableLoader) -> None:
    """データ行のないファイルで ConfigError を発生させる。"""
    path = _write(tmp_path, "kernel.csv", "t,a\n")

    with pytest.raises(ConfigError, match=r"contains no data rows"):
        loader.load_kernel(path)


def test_load_bundle(tmp_path: Path, loader: CsvTableLoader) -> None:
    """(mode, step, increment) の CSV から増分の束を復元できることを確認する。"""
    path = _write(tmp_path, "bundle.csv", "mode,step,increment\n0,1,0.5\n0,0,0.25\n")

    grid = TimeGrid(t_end=1.0, steps=2)
    bundle = loader.load_bundle(path, grid, seed=3, path_index=2)

    np.testing.assert_array_equal(bundle.increments, [[0.25, 0.5]])
    assert bundle.seed == 3
    assert bundle.path == 2


def test_load_bundle_missing_step(tmp_path: Path, loader: CsvTableLoader) -> None:
    """欠けたステップのある束が拒否されることを確認する。"""
    path = _write(tmp_path, "bundle.csv", "0,0,0.25\n")

    with pytest.raises(ConfigError, match=r"does not cover every \(mode, step\) pair"):
        loader.load_bundle(path, TimeGrid(t_end=1.0, steps=2))


def test_load_bundle_out_of_range(tmp_path: Path, loader: CsvTableLoader) -> None:
    """グリッド外のステップ番号が拒否されることを確認する。"""
    path = _write(tmp_path, "bundle.csv", "0,0,0.25\n0,5,0.25\n")

    with pytest.raises(ConfigError, match=r"indices outside"):
        loader.load_bundle(path, TimeGrid(t_end=1.0, steps=2))


def test_load_integrand(tmp_path: Path, loader: CsvTableLoader) -> None:
    """(t, mode, k, value) の CSV からテーブル被積分関数を読み込めることを確認する。"""
    rows = ["t,mode,k,value"]
    for t in (0.0, 1.0):
        for k in (0, 1):
            rows.append(f"{t},0,{k},{t + k}")
    path = _write(tmp_path, "psi.csv", "\n".join(rows) + "\n")

    psi = loader.load_integrand(path, tail_budget=0.1)
    grid = TimeGrid(t_end=1.0, steps=2)
    table = psi.tabulate(grid, np.zeros((1, 2)))

    assert psi.modes == 1
    assert psi.space_dim == 2
    assert psi.tail_budget == 0.1
    np.testing.assert_allclose(table[0, :, 0], [0.0, 0.5])
    np.testing.assert_allclose(table[0, :, 1], [1.0, 1.5])


def test_load_integrand_incomplete(tmp_path: Path, loader: CsvTableLoader) -> None:
    """欠けた (t, mode, k) のある表が拒否されることを確認する。"""
    path = _write(tmp_path, "psi.csv", "t,mode,k,value\n0,0,0,1\n1,0,1,1\n")

    with pytest.raises(ConfigError, match=r"integrand.csv: .*does not cover every"):
        loader.load_integrand(path)


def test_load_non_numeric(tmp_path: Path, loader: CsvTableLoader) -> None:
    """数値でない行が ConfigError になることを確認する。"""
    path = _write(tmp_path, "kernel.csv", "t,a\n0,1\n1,abc\n")

    with pytest.raises(ConfigError, match=r"not a numeric table"):
        loader.load_kernel(path)
