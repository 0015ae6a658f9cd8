from pathlib import Path

import numpy as np
import pytest

from stochastic_volterra.domain.values import Kernel, SpectralOperator, TimeGrid
from stochastic_volterra.infrastructure.storage.result_writer import CsvResultWriter


@pytest.fixture
def unit_grid() -> TimeGrid:
    """[0, 1] を 1000 分割した時間グリッド (dt = 1e-3)。"""
    return TimeGrid(t_end=1.0, steps=1000)


@pytest.fixture
def coarse_grid() -> TimeGrid:
    """[0, 1] を 64 分割した小さな時間グリッド。"""
    return TimeGrid(t_end=1.0, steps=64)


@pytest.fixture
def decay_operator() -> SpectralOperator:
    """固有値 -1 の 1 モード作用素。"""
    return SpectralOperator.from_eigenvalues([-1.0], description="decay")


@pytest.fixture
def null_operator() -> SpectralOperator:
    """固有値 0 の 1 モード作用素 (S ≡ I)。"""
    return SpectralOperator.from_eigenvalues([0.0], description="null")


@pytest.fixture
def laplacian() -> SpectralOperator:
    """K = 4 の Dirichlet ラプラシアン。"""
    return SpectralOperator.dirichlet_laplacian(4)


@pytest.fixture
def heat_kernel() -> Kernel:
    """a ≡ 1 (α = 1) のカーネル。"""
    return Kernel.fractional(1.0)


@pytest.fixture
def rng() -> np.random.Generator:
    """テスト用の乱数生成器。"""
    return np.random.default_rng(2024)


@pytest.fixture
def writer(tmp_path: Path) -> CsvResultWriter:
    """一時ディレクトリに書き出す結果ライター。"""
    return CsvResultWriter(output_dir=str(tmp_path))
