"""畳み込みカーネル a(t) の評価と完全正値性の数値チェック。"""

import logging
import math
from typing import Final

import numpy as np
from scipy import special

from stochastic_volterra.domain.entities import CompletePositivityReport
from stochastic_volterra.domain.exceptions import (
    KernelDomainError,
    KernelRangeError,
    NumericError,
    PreconditionError,
    UnsupportedOperationError,
)
from stochastic_volterra.domain.values import FloatArray, Kernel, KernelKind, TimeGrid
from stochastic_volterra.infrastructure.numerics.volterra_solver import (
    build_weights,
    solve_second_kind,
)

logger = logging.getLogger(__name__)

DEFAULT_CP_TOLERANCE: Final[float] = 1e-8


def _check_argument(kernel: Kernel, t: FloatArray, singular_at_zero: bool) -> None:
    if np.any(t < 0.0) or (singular_at_zero and np.any(t == 0.0)):
        bad = float(t[(t < 0.0) | ((t == 0.0) & singular_at_zero)][0])
        msg = f"kernel {kernel.label} is not defined at t={bad}"
        raise KernelDomainError(msg, t=bad)
    if kernel.kind is KernelKind.TABULATED:
        grid, _ = kernel.table
        if np.any(t > grid[-1]):
            bad = float(t[t > grid[-1]][0])
            msg = f"t={bad} is outside the tabulated range [0, {grid[-1]}]"
            raise KernelRangeError(msg, t=bad)


def evaluate_array(kernel: Kernel, t: FloatArray) -> FloatArray:
    """a(t) を配列でまとめて評価します。

    Raises:
        KernelDomainError: t < 0、または特異カーネルで t = 0 の場合
        KernelRangeError: テーブルの範囲外の場合
    """
    t = np.asarray(t, dtype=np.float64)
    _check_argument(kernel, t, kernel.singular)
    if kernel.kind is KernelKind.EXPONENTIAL:
        return np.exp(-t)
    if kernel.kind is KernelKind.TABULATED:
        grid, values = kernel.table
        return np.asarray(np.interp(t, grid, values))
    alpha = kernel.order
    if alpha == 1.0:
        return np.ones_like(t)
    return np.asarray(t ** (alpha - 1.0) * special.rgamma(alpha))


def evaluate(kernel: Kernel, t: float) -> float:
    """a(t) を評価します。"""
    return float(evaluate_array(kernel, np.array([t]))[0])


def evaluate_derivative(kernel: Kernel, t: float) -> float:
    """ȧ(t) を評価します。

    Raises:
        UnsupportedOperationError: ȧ が局所可積分でない (a(0) = +inf) 場合
    """
    if not kernel.differentiable:
        msg = f"kernel {kernel.label} is not differentiable (a(0) = +inf)"
        raise UnsupportedOperationError(msg)
    arr = np.array([t], dtype=np.float64)
    if kernel.kind is KernelKind.EXPONENTIAL:
        _check_argument(kernel, arr, singular_at_zero=False)
        return -math.exp(-t)
    if kernel.kind is KernelKind.TABULATED:
        _check_argument(kernel, arr, singular_at_zero=False)
        grid, values = kernel.table
        idx = int(np.clip(np.searchsorted(grid, t, side="right") - 1, 0, grid.size - 2))
        return float((values[idx + 1] - values[idx]) / (grid[idx + 1] - grid[idx]))
    alpha = kernel.order
    if alpha == 1.0:
        _check_argument(kernel, arr, singular_at_zero=False)
        return 0.0
    # α ∈ (1, 2): ȧ(t) = t^{α-2}/Γ(α-1) は t = 0 で特異
    _check_argument(kernel, arr, singular_at_zero=True)
    return float(t ** (alpha - 2.0) * special.rgamma(alpha - 1.0))


def integrate(kernel: Kernel, t: float) -> float:
    """∫₀ᵗ a(τ) dτ を閉じた形 (テーブルは区分線形の厳密積分) で返します。"""
    return float(integrate_array(kernel, np.array([t]))[0])


def integrate_array(kernel: Kernel, t: FloatArray) -> FloatArray:
    """∫₀ᵗ a(τ) dτ を配列でまとめて評価します。"""
    t = np.asarray(t, dtype=np.float64)
    _check_argument(kernel, t, singular_at_zero=False)
    if kernel.kind is KernelKind.EXPONENTIAL:
        return np.asarray(-np.expm1(-t))
    if kernel.kind is KernelKind.FRACTIONAL:
        alpha = kernel.order
        return np.asarray(t**alpha * special.rgamma(alpha + 1.0))
    grid, values = kernel.table
    cumulative = np.concatenate(
        ([0.0], np.cumsum(0.5 * np.diff(grid) * (values[1:] + values[:-1])))
    )
    idx = np.clip(np.searchsorted(grid, t, side="right") - 1, 0, grid.size - 2)
    at_t = np.interp(t, grid, values)
    return np.asarray(cumulative[idx] + 0.5 * (t - grid[idx]) * (values[idx] + at_t))


def check_complete_positivity(
    kernel: Kernel,
    mu: float,
    grid: TimeGrid,
    tol: float = DEFAULT_CP_TOLERANCE,
    scale_r_equation: bool = True,
) -> CompletePositivityReport:
    """s + μ a⋆s = 1 と r + μ a⋆r = a を解き、非負性を判定します。

    特異カーネル (a(0) = +inf) では r を直接求めず、積分形
    R + μ a⋆R = ∫₀ᵗ a を解いて r をセル平均 (R_j - R_{j-1})/dt として返します。
    このとき r[0] = +inf です。

    Args:
        kernel: 畳み込みカーネル
        mu: パラメータ μ >= 0
        grid: 時間グリッド
        tol: 非負性の許容値
        scale_r_equation: False にすると r の方程式の係数を μ ではなく 1 にします

    Returns:
        CompletePositivityReport: s, r と判定結果

    Raises:
        PreconditionError: μ < 0 の場合
        NumericError: 解が有限でない場合
    """
    if mu < 0.0:
        msg = f"mu must be >= 0, got {mu}"
        raise PreconditionError(msg)
    weights = build_weights(kernel, grid)
    t = grid.points
    s_values = solve_second_kind(weights, -mu, np.ones(grid.size))
    r_coeff = -mu if scale_r_equation else -1.0

    if kernel.singular:
        primitive = solve_second_kind(weights, r_coeff, integrate_array(kernel, t))
        r_values = np.empty(grid.size)
        r_values[0] = math.inf
        r_values[1:] = np.diff(primitive) / grid.dt
        finite_r = r_values[1:]
    else:
        r_values = solve_second_kind(weights, r_coeff, evaluate_array(kernel, t))
        finite_r = r_values

    if not (np.all(np.isfinite(s_values)) and np.all(np.isfinite(finite_r))):
        msg = "complete positivity solve produced non-finite values"
        raise NumericError(msg, diagnostics=f"steps={grid.steps}, dt={grid.dt:.6g}")

    nonneg = bool(np.min(s_values) >= -tol and np.min(finite_r) >= -tol)
    logger.debug(
        "Complete positivity: kernel=%s, mu=%g, min_s=%.3e, min_r=%.3e",
        kernel.label,
        mu,
        float(np.min(s_values)),
        float(np.min(finite_r)),
    )
    return CompletePositivityReport(
        mu=mu,
        grid=grid,
        s_values=s_values,
        r_values=r_values,
        nonneg=nonneg,
        tolerance=tol,
    )


def observed_order(kernel: Kernel, mu: float, grid: TimeGrid) -> float:
    """s の 2 倍細分化による自己収束次数 log2(|s_h - s_{h/2}| / |s_{h/2} - s_{h/4}|)。

    差が 0 (厳密解) の場合は inf を返します。
    """
    solutions = [
        check_complete_positivity(kernel, mu, grid.refine(f)).s_values
        for f in (1, 2, 4)
    ]
    coarse_gap = float(np.max(np.abs(solutions[0] - solutions[1][::2])))
    fine_gap = float(np.max(np.abs(solutions[1][::2] - solutions[2][::4])))
    if coarse_gap == 0.0 or fine_gap == 0.0:
        return math.inf
    return math.log2(coarse_gap / fine_gap)
