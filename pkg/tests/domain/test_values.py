import math

import numpy as np
import pytest

from stochastic_volterra.domain.values import (
    HVector,
    Kernel,
    KernelKind,
    SpectralOperator,
    TimeGrid,
)


def test_time_grid_initialization() -> None:
    """TimeGrid の刻み幅とグリッド点を確認する。"""
    grid = TimeGrid(t_end=2.0, steps=4)

    assert grid.dt == 0.5
    assert grid.size == 5
    np.testing.assert_allclose(grid.points, [0.0, 0.5, 1.0, 1.5, 2.0])


def test_time_grid_validation_invalid_t_end() -> None:
    """t_end が正でない場合に ValueError を発生させる。"""
    with pytest.raises(ValueError, match=r"t_end must be a positive finite number"):
        TimeGrid(t_end=0.0, steps=10)


def test_time_grid_validation_invalid_steps() -> None:
    """steps が 1 未満の場合に ValueError を発生させる。"""
    with pytest.raises(ValueError, match=r"steps must be >= 1"):
        TimeGrid(t_end=1.0, steps=0)


def test_time_grid_refine_and_coarsen() -> None:
    """refine と coarsen が互いに逆の操作であることを確認する。"""
    grid = TimeGrid(t_end=1.0, steps=100)

    assert grid.refine(4).steps == 400
    assert grid.refine(4).coarsen(4) == grid


def test_time_grid_coarsen_not_divisible() -> None:
    """割り切れない倍率での coarsen が拒否されることを確認する。"""
    with pytest.raises(ValueError, match=r"not divisible"):
        TimeGrid(t_end=1.0, steps=10).coarsen(3)


def test_kernel_fractional_validation() -> None:
    """α が (0, 2) の外にある場合に ValueError を発生させる。"""
    with pytest.raises(ValueError, match=r"alpha must be in \(0, 2\)"):
        Kernel.fractional(2.0)
    with pytest.raises(ValueError, match=r"alpha must be in \(0, 2\)"):
        Kernel.fractional(0.0)


@pytest.mark.parametrize(
    ("alpha", "a0"),
    [(0.5, math.inf), (1.0, 1.0), (1.5, 0.0)],
)
def test_kernel_fractional_a0(alpha: float, a0: float) -> None:
    """Fractional カーネルの a(0) と特異性の判定を確認する。"""
    kernel = Kernel.fractional(alpha)

    assert kernel.a0 == a0
    assert kernel.singular is math.isinf(a0)
    assert kernel.differentiable is not math.isinf(a0)


def test_kernel_exponential_properties() -> None:
    """Exponential カーネルの属性を確認する。"""
    kernel = Kernel.exponential()

    assert kernel.kind is KernelKind.EXPONENTIAL
    assert kernel.a0 == 1.0
    assert kernel.label == "exponential"
    with pytest.raises(ValueError, match=r"has no fractional order"):
        _ = kernel.order


def test_kernel_label() -> None:
    """Fractional カーネルのラベルに次数が入ることを確認する。"""
    assert Kernel.fractional(0.5).label == "fractional(alpha=0.5)"


def test_kernel_tabulated_validation() -> None:
    """0 から始まらないテーブルが拒否されることを確認する。"""
    with pytest.raises(ValueError, match=r"must start at 0"):
        Kernel.tabulated(np.array([0.1, 0.2]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError, match=r"strictly increasing"):
        Kernel.tabulated(np.array([0.0, 0.2, 0.2]), np.array([1.0, 1.0, 1.0]))


def test_kernel_tabulated_table() -> None:
    """Tabulated カーネルの a(0) がテーブルの先頭値であることを確認する。"""
    kernel = Kernel.tabulated(np.array([0.0, 1.0]), np.array([2.0, 1.0]))

    assert kernel.a0 == 2.0
    t, values = kernel.table
    np.testing.assert_allclose(t, [0.0, 1.0])
    np.testing.assert_allclose(values, [2.0, 1.0])


def test_hvector_norms() -> None:
    """HVector のノルム・グラフノルム・内積を確認する。"""
    v = HVector.of([3.0, 4.0])

    assert v.dimension == 2
    assert v.norm() == 5.0
    assert v.graph_norm(np.array([0.0, -1.0])) == pytest.approx(math.sqrt(9 + 32))
    assert v.inner(HVector.basis(2, 1)) == 4.0
    assert HVector.zeros(3).norm() == 0.0


def test_hvector_validation() -> None:
    """2 次元配列の座標が拒否されることを確認する。"""
    with pytest.raises(ValueError, match=r"coeffs must be 1-D"):
        HVector(coeffs=np.zeros((2, 2)))


def test_dirichlet_laplacian_eigenvalues() -> None:
    """Dirichlet ラプラシアンの固有値 -(kπ)² を確認する。"""
    op = SpectralOperator.dirichlet_laplacian(3)

    np.testing.assert_allclose(op.eigenvalues, -((np.arange(1, 4) * np.pi) ** 2))
    assert op.dimension == 3
    assert op.omega == pytest.approx(-(np.pi**2))
    assert SpectralOperator.dirichlet_laplacian().dimension == 8


def test_from_eigenvalues_sorts_descending() -> None:
    """from_eigenvalues が固有値を降順に並べ替えることを確認する。"""
    op = SpectralOperator.from_eigenvalues([-4.0, 0.0, -1.0])

    np.testing.assert_array_equal(op.eigenvalues, [0.0, -1.0, -4.0])
    assert op.omega == 0.0


def test_spectral_operator_validation() -> None:
    """降順でない固有値列が拒否されることを確認する。"""
    with pytest.raises(ValueError, match=r"sorted in decreasing order"):
        SpectralOperator(eigenvalues=np.array([-1.0, 0.0]))
    with pytest.raises(ValueError, match=r"must be finite"):
        SpectralOperator(eigenvalues=np.array([np.nan]))
