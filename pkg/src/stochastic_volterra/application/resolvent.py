"""レゾルベント族 S(t) と吉田近似族 S_n(t) の構築と検証。"""

import logging
import math
from collections.abc import Sequence
from typing import Final

import numpy as np

from stochastic_volterra.domain.entities import ResolventTable
from stochastic_volterra.domain.exceptions import (
    PreconditionError,
    ShapeError,
    SingularStepError,
)
from stochastic_volterra.domain.values import (
    FloatArray,
    HVector,
    Kernel,
    SpectralOperator,
    TimeGrid,
)
from stochastic_volterra.infrastructure.numerics.spectral_operator import (
    yosida_eigenvalues,
)
from stochastic_volterra.infrastructure.numerics.volterra_solver import (
    build_weights,
    solve_second_kind,
)

logger = logging.getLogger(__name__)

# 指数有界性のフィットで丸め誤差とみなす幅
BOUND_FIT_TOLERANCE: Final[float] = 1e-12


def build_resolvent(
    op: SpectralOperator,
    kernel: Kernel,
    grid: TimeGrid,
    yosida_n: int | None = None,
) -> ResolventTable:
    """各モードで s = 1 + λ_eff·a⋆s を解いてレゾルベント表を作ります。

    Args:
        op: 生成作用素 A
        kernel: 畳み込みカーネル
        grid: 時間グリッド
        yosida_n: 指定すると A_n の固有値で S_n(t) を作ります

    Returns:
        ResolventTable: レゾルベント表

    Raises:
        ResolventSetError: yosida_n が最大固有値以下の場合
        SingularStepError: 前進代入が破綻した場合 (モード番号付き)
    """
    if yosida_n is None:
        effective = op.eigenvalues.copy()
    else:
        effective = yosida_eigenvalues(op, yosida_n)
    weights = build_weights(kernel, grid)
    try:
        s = solve_second_kind(weights, effective, np.ones(grid.size))
    except SingularStepError as e:
        msg = f"mode {e.mode}: {e.message}"
        raise SingularStepError(msg, step=e.step, mode=e.mode) from e

    logger.debug(
        "Built resolvent: kernel=%s, modes=%d, steps=%d, yosida_n=%s",
        kernel.label,
        op.dimension,
        grid.steps,
        yosida_n,
    )
    return ResolventTable(
        operator=op,
        kernel=kernel,
        grid=grid,
        s=s,
        effective_eigenvalues=effective,
        yosida_n=yosida_n,
    )


def _check_vector(table: ResolventTable, v: HVector) -> None:
    if v.dimension != table.modes:
        msg = f"vector dimension {v.dimension} does not match {table.modes} modes"
        raise ShapeError(msg)


def apply_resolvent(table: ResolventTable, j: int, v: HVector) -> HVector:
    """S(t_j)v を返します。"""
    _check_vector(table, v)
    if not 0 <= j < table.grid.size:
        msg = f"grid index {j} is outside 0..{table.grid.steps}"
        raise PreconditionError(msg)
    return HVector(coeffs=table.s[:, j] * v.coeffs)


def _residual_on(
    s: FloatArray, eff: FloatArray, kernel: Kernel, grid: TimeGrid, v: HVector
) -> float:
    sv = s * v.coeffs[:, np.newaxis]
    conv = build_weights(kernel, grid).convolve(sv)
    residual = sv - v.coeffs[:, np.newaxis] - eff[:, np.newaxis] * conv
    return float(np.max(np.linalg.norm(residual, axis=0)))


def resolvent_equation_residual(table: ResolventTable, v: HVector) -> float:
    """max_j |S(t_j)v - v - ∫₀^{t_j} a(t_j - τ)AS(τ)v dτ|_H (同じ積分重みで評価)。"""
    _check_vector(table, v)
    return _residual_on(
        table.s, table.effective_eigenvalues, table.kernel, table.grid, v
    )


def coarse_grid_residual(table: ResolventTable, v: HVector) -> float:
    """1 つおきの点に間引いた表を 2 倍粗いグリッドの重みで評価した残差。"""
    _check_vector(table, v)
    if table.grid.steps % 2:
        msg = (
            "coarse-grid residual needs an even number of steps, got "
            f"{table.grid.steps}"
        )
        raise PreconditionError(msg)
    return _residual_on(
        table.s[:, ::2],
        table.effective_eigenvalues,
        table.kernel,
        table.grid.coarsen(2),
        v,
    )


def commutation_check(table: ResolventTable, op: SpectralOperator, v: HVector) -> float:
    """max_j |AS(t_j)v - S(t_j)Av|_H。対角表現では丸め誤差のみ。"""
    _check_vector(table, v)
    lam = op.eigenvalues[:, np.newaxis]
    col = v.coeffs[:, np.newaxis]
    gap = lam * (table.s * col) - table.s * (lam * col)
    return float(np.max(np.linalg.norm(gap, axis=0)))


def contraction_check(table: ResolventTable, tol: float = 1e-8) -> bool:
    """全モード・全時刻で -tol <= s <= 1 + tol か。"""
    return bool(np.all(table.s >= -tol) and np.all(table.s <= 1.0 + tol))


def exponential_bound_fit(table: ResolventTable) -> tuple[float, float]:
    """max_k |s[k][j]| <= M e^{ωt_j} となる最小の M >= 1, ω >= 0 を求めます。

    Returns:
        tuple[float, float]: (M, ω)
    """
    envelope = np.max(np.abs(table.s), axis=0)
    t = table.grid.points
    with np.errstate(divide="ignore"):
        log_env = np.log(envelope)
    base = max(float(log_env[0]), 0.0)
    slopes = (log_env[1:] - base) / t[1:]
    omega = max(0.0, float(np.max(slopes)))
    if omega <= BOUND_FIT_TOLERANCE:
        omega = 0.0
    m = max(1.0, float(np.max(envelope * np.exp(-omega * t))))
    if m - 1.0 <= BOUND_FIT_TOLERANCE:
        m = 1.0
    return m, omega


def yosida_resolvent_convergence(
    op: SpectralOperator,
    kernel: Kernel,
    grid: TimeGrid,
    v: HVector,
    n_list: Sequence[int],
) -> FloatArray:
    """各 n について sup_j |S_n(t_j)v - S(t_j)v|_H を返します。"""
    base = build_resolvent(op, kernel, grid)
    _check_vector(base, v)
    errors = np.empty(len(n_list))
    for idx, n in enumerate(n_list):
        approx = build_resolvent(op, kernel, grid, yosida_n=n)
        diff = (approx.s - base.s) * v.coeffs[:, np.newaxis]
        errors[idx] = float(np.max(np.linalg.norm(diff, axis=0)))
    return errors


def convergence_rates(errors: FloatArray, params: Sequence[float]) -> FloatArray:
    """経験的な収束次数 log(e_i/e_{i+1}) / log(p_{i+1}/p_i) を求めます。

    両方 0 なら inf (厳密) とします。
    """
    rates = np.empty(max(len(errors) - 1, 0))
    for i in range(rates.size):
        upper, lower = float(errors[i]), float(errors[i + 1])
        if lower == 0.0:
            rates[i] = math.inf
        elif upper == 0.0:
            rates[i] = -math.inf
        else:
            rates[i] = math.log(upper / lower) / math.log(params[i + 1] / params[i])
    return rates


def table_rows(table: ResolventTable) -> FloatArray:
    """CSV 用に (t, mode_1, ..., mode_K) の行を返します。"""
    return np.column_stack((table.grid.points, table.s.T))
