import math

import numpy as np
import pytest

from stochastic_volterra.application.convolution import (
    apply_A_to_convolution,
    convolution_second_moment,
    interchange_discrepancy,
    regularity_probe,
    resolvent_convolve,
    stochastic_convolution,
    summary_rows,
    trajectory_rows,
    yosida_convolution,
)
from stochastic_volterra.application.resolvent import build_resolvent
from stochastic_volterra.application.stochastic import ito_path
from stochastic_volterra.domain.entities import TrajectorySet
from stochastic_volterra.domain.exceptions import PreconditionError, ShapeError
from stochastic_volterra.domain.values import Kernel, SpectralOperator, TimeGrid
from stochastic_volterra.infrastructure.stochastic.integrands import (
    TabulatedIntegrand,
    build_integrand,
)
from stochastic_volterra.infrastructure.stochastic.wiener import (
    sample_bundle,
    sample_ensemble,
)


def test_resolvent_convolve_matches_direct_sum(rng: np.random.Generator) -> None:
    """FFT による畳み込みが素朴な二重ループと一致することを確認する。"""
    steps = 6
    s = rng.standard_normal((2, steps + 1))
    drive = rng.standard_normal((3, steps, 2))

    out = resolvent_convolve(s, drive)

    expected = np.zeros((3, steps + 1, 2))
    for j in range(1, steps + 1):
        for m in range(j):
            expected[:, j, :] += s[:, j - m] * drive[:, m, :]
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_resolvent_convolve_unit_modes(rng: np.random.Generator) -> None:
    """s ≡ 1 のモードでは累積和 (Itô 積分) になることを確認する。"""
    drive = rng.standard_normal((2, 5, 1))

    out = resolvent_convolve(np.ones((1, 6)), drive)

    np.testing.assert_array_equal(out[:, 1:, 0], np.cumsum(drive[:, :, 0], axis=1))
    np.testing.assert_array_equal(out[:, 0, 0], 0.0)


def test_resolvent_convolve_shape_error() -> None:
    """ラグ表の形状が合わない場合に ShapeError を発生させる。"""
    with pytest.raises(ShapeError, match=r"lag table must have shape \(1, 6\)"):
        resolvent_convolve(np.ones((1, 4)), np.zeros((1, 5, 1)))


def test_null_operator_gives_ito_integral(
    null_operator: SpectralOperator, coarse_grid: TimeGrid
) -> None:
    """A = 0 では W^Ψ が Itô 積分に一致することを確認する。"""
    table = build_resolvent(null_operator, Kernel.fractional(0.5), coarse_grid)
    psi = build_integrand("smooth", 1, 1)
    bundle = sample_bundle(coarse_grid, modes=1, seed=4)

    w = stochastic_convolution(table, psi, bundle)

    np.testing.assert_allclose(w.values, ito_path(psi, bundle).values, atol=1e-14)


def test_zero_integrand_gives_zero(
    laplacian: SpectralOperator, coarse_grid: TimeGrid
) -> None:
    """Ψ ≡ 0 なら W^Ψ が恒等的に 0 になることを確認する。"""
    table = build_resolvent(laplacian, Kernel.exponential(), coarse_grid)
    bundle = sample_bundle(coarse_grid, modes=2, seed=0)

    w = stochastic_convolution(table, build_integrand("zero", 2, 4), bundle)

    assert np.max(np.abs(w.values)) == 0.0


def test_stochastic_convolution_validation(
    laplacian: SpectralOperator, coarse_grid: TimeGrid
) -> None:
    """次元やグリッドが合わない場合に ShapeError を発生させる。"""
    table = build_resolvent(laplacian, Kernel.exponential(), coarse_grid)

    with pytest.raises(ShapeError, match=r"does not match 4 modes"):
        stochastic_convolution(
            table,
            build_integrand("unit", 1, 2),
            sample_bundle(coarse_grid, modes=1, seed=0),
        )
    with pytest.raises(ShapeError, match=r"differs from noise grid"):
        stochastic_convolution(
            table,
            build_integrand("unit", 1, 4),
            sample_bundle(TimeGrid(t_end=1.0, steps=32), modes=1, seed=0),
        )


def test_convolution_second_moment_quadrature(
    decay_operator: SpectralOperator, heat_kernel: Kernel, unit_grid: TimeGrid
) -> None:
    """λ = -1, a ≡ 1 の E|W(1)|² の求積値が (1 - e^{-2})/2 に近いことを確認する。"""
    table = build_resolvent(decay_operator, heat_kernel, unit_grid)

    value = convolution_second_moment(table, build_integrand("unit", 1, 1))

    assert value == pytest.approx((1.0 - math.exp(-2.0)) / 2.0, abs=1e-3)
    assert convolution_second_moment(table, build_integrand("unit", 1, 1), 0) == 0.0


@pytest.mark.slow
def test_convolution_second_moment_monte_carlo(
    decay_operator: SpectralOperator, heat_kernel: Kernel, unit_grid: TimeGrid
) -> None:
    """E|W(1)|² のモンテカルロ推定が 3 標準誤差以内で求積値に一致することを確認する。"""
    table = build_resolvent(decay_operator, heat_kernel, unit_grid)
    psi = build_integrand("unit", 1, 1)
    ensemble = sample_ensemble(unit_grid, modes=1, seed=42, paths=20000)

    mean, stderr = stochastic_convolution(table, psi, ensemble).mean_square()

    expected = convolution_second_moment(table, psi)
    assert abs(mean[-1] - expected) <= 3.0 * stderr[-1]


def test_interchange_discrepancy(unit_grid: TimeGrid) -> None:
    """A(W^Ψ) と AΨ の畳み込みの差が丸め誤差程度であることを確認する。"""
    op = SpectralOperator.dirichlet_laplacian(8)
    table = build_resolvent(op, Kernel.fractional(0.5), unit_grid)
    psi = build_integrand("modal", 8, 8)
    bundle = sample_bundle(unit_grid, modes=8, seed=42)

    applied, gap = interchange_discrepancy(op, table, psi, bundle)

    assert gap <= 1e-12
    np.testing.assert_allclose(
        applied.values,
        stochastic_convolution(table, psi, bundle).values * op.eigenvalues,
    )


def test_apply_A_to_convolution(
    laplacian: SpectralOperator, coarse_grid: TimeGrid
) -> None:
    """A を掛けた値が固有値倍になることを確認する。"""
    table = build_resolvent(laplacian, Kernel.exponential(), coarse_grid)
    psi = build_integrand("modal", 4, 4)
    bundle = sample_bundle(coarse_grid, modes=4, seed=1)

    applied = apply_A_to_convolution(laplacian, table, psi, bundle)

    direct = stochastic_convolution(table, psi, bundle)
    np.testing.assert_allclose(applied.values, direct.values * laplacian.eigenvalues)


def test_apply_A_requires_square_integrable_image(
    decay_operator: SpectralOperator, coarse_grid: TimeGrid
) -> None:
    """AΨ の切り捨て寄与が無限大なら PreconditionError を発生させる。"""
    table = build_resolvent(decay_operator, Kernel.exponential(), coarse_grid)
    psi = TabulatedIntegrand(
        "table",
        np.array([0.0, 1.0]),
        np.ones((1, 2, 1)),
        operator_tail=math.inf,
    )

    with pytest.raises(PreconditionError, match=r"is not declared square integrable"):
        apply_A_to_convolution(
            decay_operator, table, psi, sample_bundle(coarse_grid, modes=1, seed=0)
        )


def test_yosida_convolution_converges(
    decay_operator: SpectralOperator, heat_kernel: Kernel, unit_grid: TimeGrid
) -> None:
    """大きな n で W_n^Ψ が W^Ψ に近づくことを確認する。"""
    psi = build_integrand("unit", 1, 1)
    bundle = sample_bundle(unit_grid, modes=1, seed=42)
    table = build_resolvent(decay_operator, heat_kernel, unit_grid)

    exact = stochastic_convolution(table, psi, bundle).values
    approx = yosida_convolution(
        decay_operator, heat_kernel, unit_grid, 10**6, psi, bundle
    ).values

    assert np.max(np.abs(approx - exact)) <= 1e-4


def test_yosida_convolution_error_decreases(
    laplacian: SpectralOperator, unit_grid: TimeGrid
) -> None:
    """n = 100 の誤差が n = 10 より小さいことを確認する。"""
    kernel = Kernel.exponential()
    psi = build_integrand("modal", 4, 4)
    bundle = sample_bundle(unit_grid, modes=4, seed=42)
    exact = stochastic_convolution(
        build_resolvent(laplacian, kernel, unit_grid), psi, bundle
    ).values

    errors = [
        np.max(
            np.linalg.norm(
                yosida_convolution(laplacian, kernel, unit_grid, n, psi, bundle).values
                - exact,
                axis=2,
            )
        )
        for n in (10, 100)
    ]

    assert errors[1] < errors[0]


def test_regularity_of_brownian_motion(null_operator: SpectralOperator) -> None:
    """ブラウン運動のヘルダー指数の推定値が 1/2 に近いことを確認する。"""
    grid = TimeGrid(t_end=1.0, steps=1000)
    table = build_resolvent(null_operator, Kernel.exponential(), grid)
    ensemble = sample_ensemble(grid, modes=1, seed=42, paths=200)

    w = stochastic_convolution(table, build_integrand("unit", 1, 1), ensemble)
    report = regularity_probe(w)

    assert report.holder_estimate == pytest.approx(0.5, abs=0.1)
    assert report.max_jump > 0.0


def test_regularity_of_zero_paths(coarse_grid: TimeGrid) -> None:
    """恒等的に 0 の軌道では最大ジャンプ 0、指数 inf になることを確認する。"""
    traj = TrajectorySet(grid=coarse_grid, values=np.zeros((2, coarse_grid.size, 1)))

    report = regularity_probe(traj)

    assert report.max_jump == 0.0
    assert math.isinf(report.holder_estimate)


def test_regularity_single_step() -> None:
    """1 ステップのグリッドでは指数が nan になることを確認する。"""
    grid = TimeGrid(t_end=1.0, steps=1)
    traj = TrajectorySet(grid=grid, values=np.array([[[0.0], [1.0]]]))

    report = regularity_probe(traj)

    assert report.max_jump == 1.0
    assert math.isnan(report.holder_estimate)


def test_summary_rows(coarse_grid: TimeGrid) -> None:
    """要約行が (t, mean, stderr[, quadrature]) になることを確認する。"""
    traj = TrajectorySet(grid=coarse_grid, values=np.ones((3, coarse_grid.size, 2)))

    rows = summary_rows(traj)
    with_quadrature = summary_rows(traj, np.zeros(coarse_grid.size))

    assert rows.shape == (coarse_grid.size, 3)
    np.testing.assert_array_equal(rows[:, 1], 2.0)
    np.testing.assert_array_equal(rows[:, 2], 0.0)
    assert with_quadrature.shape == (coarse_grid.size, 4)


def test_trajectory_rows() -> None:
    """長い形式の行が (path, t, mode, value) の順に並ぶことを確認する。"""
    grid = TimeGrid(t_end=1.0, steps=2)
    values = np.arange(12, dtype=np.float64).reshape(2, 3, 2)

    rows = trajectory_rows(TrajectorySet(grid=grid, values=values), first_path=5)

    assert rows.shape == (12, 4)
    np.testing.assert_array_equal(rows[0], [5.0, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(rows[3], [5.0, 0.5, 1.0, 3.0])
    np.testing.assert_array_equal(rows[-1], [6.0, 1.0, 1.0, 11.0])
