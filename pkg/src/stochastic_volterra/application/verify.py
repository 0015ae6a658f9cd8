"""定理レベルの検証: 強解・弱解・マイルド解の恒等式と吉田近似の収束スイート。

合否の許容値は絶対値ではなく細分化 (同じブラウン運動の増分を合算した
粗いグリッドとの比較) から決めます。
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from typing import Final

import numpy as np

from stochastic_volterra.application.convolution import (
    resolvent_convolve,
    second_moment_curve,
)
from stochastic_volterra.application.resolvent import build_resolvent, convergence_rates
from stochastic_volterra.application.stochastic import (
    as_ensemble,
    cumulative,
    noise_drive,
    warn_tail_budget,
)
from stochastic_volterra.domain.entities import (
    VerificationReport,
    WienerBundle,
    WienerEnsemble,
    YosidaSuiteReport,
)
from stochastic_volterra.domain.exceptions import (
    NumericError,
    PreconditionError,
    ShapeError,
    VerificationError,
)
from stochastic_volterra.domain.interfaces import IIntegrandSeries
from stochastic_volterra.domain.values import (
    FloatArray,
    HVector,
    Kernel,
    SpectralOperator,
    TimeGrid,
)
from stochastic_volterra.infrastructure.numerics.spectral_operator import j_eigenvalues
from stochastic_volterra.infrastructure.numerics.volterra_solver import build_weights
from stochastic_volterra.infrastructure.stochastic.wiener import sample_ensemble

logger = logging.getLogger(__name__)

CONSISTENCY_TOLERANCE: Final[float] = 1e-12
DEFAULT_MIN_RATE: Final[float] = 0.4
DEFAULT_LEVELS: Final[int] = 3
REFINEMENT_FACTOR: Final[int] = 2

Noise = WienerBundle | WienerEnsemble
ResidualFn = Callable[[WienerEnsemble], FloatArray]


@dataclass(frozen=True, eq=False)
class StrongResidual:
    """強形式の残差とその構成要素。

    Attributes:
        residual (FloatArray): W - a⋆AW - itô (paths, steps + 1, K)
        solution (FloatArray): W^Ψ
        witness (FloatArray): パスごとの ∫₀ᵀ |a(T-τ)AW(τ)|_H dτ
    """

    residual: FloatArray
    solution: FloatArray
    witness: FloatArray


def _check_dimensions(op: SpectralOperator, psi: IIntegrandSeries) -> None:
    if psi.space_dim != op.dimension:
        msg = (
            f"integrand space dimension {psi.space_dim} "
            f"does not match {op.dimension} modes"
        )
        raise ShapeError(msg)


def strong_residual(
    op: SpectralOperator,
    kernel: Kernel,
    psi: IIntegrandSeries,
    ensemble: WienerEnsemble,
) -> StrongResidual:
    """W^Ψ(t_j) - Σ w[j][l]·AW^Ψ(t_l) - ∫₀^{t_j} Ψ dW を全パスで計算します。

    Raises:
        NumericError: 可積分性の証拠が有限でない場合
    """
    _check_dimensions(op, psi)
    grid = ensemble.grid
    table = build_resolvent(op, kernel, grid)
    drive = noise_drive(psi, ensemble)
    solution = resolvent_convolve(table.s, drive)
    weights = build_weights(kernel, grid)
    conv = weights.convolve(solution, axis=1)
    residual = solution - op.eigenvalues * conv - cumulative(drive)

    magnitude = np.linalg.norm(solution * op.eigenvalues, axis=2)
    witness = np.asarray(weights.convolve(magnitude, axis=1)[:, -1])
    if not np.all(np.isfinite(witness)):
        msg = "integrability witness of a⋆AW is not finite"
        raise NumericError(msg, diagnostics=f"steps={grid.steps}, dt={grid.dt:.6g}")
    return StrongResidual(residual=residual, solution=solution, witness=witness)


def weak_residual(
    op: SpectralOperator,
    kernel: Kernel,
    psi: IIntegrandSeries,
    ensemble: WienerEnsemble,
    xi: FloatArray,
) -> tuple[FloatArray, float]:
    """⟨X, ξ⟩ - ⟨a⋆X, A*ξ⟩ - ⟨itô, ξ⟩ を試験ベクトルの行列 ξ (R, K) について計算します。

    Returns:
        tuple[FloatArray, float]: 形状 (paths, steps + 1, R) の弱形式の残差と、
        強形式の残差を ξ に射影した値との最大差
    """
    _check_dimensions(op, psi)
    xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
    if xi.shape[1] != op.dimension:
        msg = f"test vectors must have {op.dimension} coordinates, got {xi.shape[1]}"
        raise ShapeError(msg)
    grid = ensemble.grid
    table = build_resolvent(op, kernel, grid)
    drive = noise_drive(psi, ensemble)
    solution = resolvent_convolve(table.s, drive)
    conv = build_weights(kernel, grid).convolve(solution, axis=1)
    ito = cumulative(drive)
    # 対角表現では A* = A
    adjoint_xi = xi * op.eigenvalues
    weak = solution @ xi.T - conv @ adjoint_xi.T - ito @ xi.T

    strong = (solution - op.eigenvalues * conv - ito) @ xi.T
    scale = max(1.0, float(np.max(np.abs(strong), initial=0.0)))
    gap = float(np.max(np.abs(weak - strong), initial=0.0))
    if gap > CONSISTENCY_TOLERANCE * scale:
        msg = f"weak residual disagrees with the projected strong residual by {gap:.3e}"
        raise VerificationError(msg, gap)
    return np.asarray(weak), gap


def strong_residual_fn(
    op: SpectralOperator, kernel: Kernel, psi: IIntegrandSeries
) -> ResidualFn:
    """パスごとの sup_t |強形式の残差|_H を返す関数を作ります。"""

    def evaluate(ensemble: WienerEnsemble) -> FloatArray:
        result = strong_residual(op, kernel, psi, ensemble)
        return np.asarray(np.linalg.norm(result.residual, axis=2).max(axis=1))

    return evaluate


def weak_residual_fn(
    op: SpectralOperator, kernel: Kernel, psi: IIntegrandSeries, xi: FloatArray
) -> ResidualFn:
    """パスごとの sup_t |弱形式の残差| を返す関数を作ります (ξ が複数なら H ノルム)。"""

    def evaluate(ensemble: WienerEnsemble) -> FloatArray:
        weak, _ = weak_residual(op, kernel, psi, ensemble, xi)
        return np.asarray(np.linalg.norm(weak, axis=2).max(axis=1))

    return evaluate


def refinement_study(
    residual: ResidualFn,
    ensemble: WienerEnsemble,
    levels: int = DEFAULT_LEVELS,
    factor: int = REFINEMENT_FACTOR,
    min_rate: float = DEFAULT_MIN_RATE,
    name: str = "refinement",
) -> VerificationReport:
    """最も細かいアンサンブルを合算して粗いレベルを作り、残差の収束次数を測ります。

    許容値は最も粗いレベルの平均残差を (dt_fine/dt_coarse)^{min_rate} 倍した値です。

    Args:
        residual: アンサンブルからパスごとの sup 残差を返す関数
        ensemble: 最も細かいグリッドのアンサンブル
        levels: レベル数 (>= 2)
        factor: レベル間の細分化倍率
        min_rate: 要求する収束次数
        name: 検証名

    Returns:
        VerificationReport: 最も細かいレベルの残差、次数、使用した許容値

    Raises:
        PreconditionError: ステップ数が factor^{levels-1} で割り切れない場合
    """
    if levels < 2 or factor < 2:
        msg = f"levels and factor must be >= 2, got {levels} and {factor}"
        raise PreconditionError(msg)
    span = factor ** (levels - 1)
    if ensemble.grid.steps % span:
        msg = (
            f"steps ({ensemble.grid.steps}) must be divisible by "
            f"{span} for {levels} levels"
        )
        raise PreconditionError(msg)

    per_level = [
        residual(ensemble.coarsen(factor**depth) if depth else ensemble)
        for depth in range(levels - 1, -1, -1)
    ]
    means = np.array([float(r.mean()) for r in per_level])
    dts = [ensemble.grid.dt * factor ** (levels - 1 - i) for i in range(levels)]
    rates = convergence_rates(means, [1.0 / dt for dt in dts])
    tolerance = float(means[0] * factor ** (-min_rate * (levels - 1)))
    finest = per_level[-1]
    logger.info(
        "Refinement study '%s': residual means=%s, rates=%s, tolerance=%.3e",
        name,
        np.array2string(means, precision=4),
        np.array2string(rates, precision=3),
        tolerance,
    )
    return VerificationReport(
        name=name,
        grid=ensemble.grid,
        paths=ensemble.paths,
        residual_sup_mean=float(means[-1]),
        residual_sup_per_path=finest,
        tolerance_used=tolerance,
        refinement_rates=rates,
        level_residuals=means,
    )


def _report(
    name: str,
    residual: ResidualFn,
    ensemble: WienerEnsemble,
    tolerance: float | None,
    min_rate: float,
    levels: int,
) -> VerificationReport:
    if tolerance is None:
        return refinement_study(
            residual, ensemble, levels=levels, min_rate=min_rate, name=name
        )
    per_path = residual(ensemble)
    return VerificationReport(
        name=name,
        grid=ensemble.grid,
        paths=ensemble.paths,
        residual_sup_mean=float(per_path.mean()),
        residual_sup_per_path=per_path,
        tolerance_used=tolerance,
    )


def strong_solution_residual(
    op: SpectralOperator,
    kernel: Kernel,
    grid: TimeGrid,
    psi: IIntegrandSeries,
    bundle: Noise,
    tolerance: float | None = None,
    min_rate: float = DEFAULT_MIN_RATE,
    levels: int = 2,
) -> VerificationReport:
    """W^Ψ = a⋆AW^Ψ + Σ∫Ψ_i dW_i の残差を評価します。

    tolerance を省略すると、増分を合算した粗いグリッド (levels 段) の残差から
    許容値を決めます。ステップ数は 2^{levels-1} で割り切れる必要があります。

    Args:
        op: 生成作用素 A
        kernel: 畳み込みカーネル
        grid: 最も細かい時間グリッド
        psi: 被積分関数列 (AΨ の切り捨て寄与が有限であること)
        bundle: grid 上の増分
        tolerance: 絶対許容値 (None なら細分化から決定)
        min_rate: 細分化で要求する収束次数
        levels: 細分化レベル数

    Returns:
        VerificationReport: 残差の統計と可積分性の証拠

    Raises:
        PreconditionError: AΨ の切り捨て寄与が無限大かステップ数が割り切れない場合
        NumericError: 可積分性の証拠が有限でない場合
    """
    ensemble = _matching_ensemble(grid, bundle)
    _require_operator_image(op, psi)
    warn_tail_budget(psi)
    residual = strong_residual_fn(op, kernel, psi)
    report = _report("strong", residual, ensemble, tolerance, min_rate, levels)
    witness = strong_residual(op, kernel, psi, ensemble).witness
    return replace(report, integrability_witness=witness)


def weak_solution_residual(
    op: SpectralOperator,
    kernel: Kernel,
    grid: TimeGrid,
    psi: IIntegrandSeries,
    bundle: Noise,
    xi: HVector,
    tolerance: float | None = None,
    min_rate: float = DEFAULT_MIN_RATE,
    levels: int = 2,
) -> VerificationReport:
    """X = W^Ψ, X_0 = 0 として弱形式の残差を試験ベクトル ξ について評価します。

    Raises:
        VerificationError: 射影した強形式の残差と 1e-12 を超えて食い違う場合
    """
    ensemble = _matching_ensemble(grid, bundle)
    if xi.dimension != op.dimension:
        msg = f"xi has dimension {xi.dimension}, expected {op.dimension}"
        raise ShapeError(msg)
    _, gap = weak_residual(op, kernel, psi, ensemble, xi.coeffs)
    residual = weak_residual_fn(op, kernel, psi, xi.coeffs)
    report = _report("weak", residual, ensemble, tolerance, min_rate, levels)
    return replace(report, consistency_gap=gap)


def mild_weak_equivalence_check(
    op: SpectralOperator,
    kernel: Kernel,
    grid: TimeGrid,
    psi: IIntegrandSeries,
    bundle: Noise,
    tolerance: float | None = None,
    min_rate: float = DEFAULT_MIN_RATE,
    levels: int = 2,
) -> VerificationReport:
    """マイルド解の公式で作った過程が全ての基底ベクトルで弱形式を満たすかを調べます。"""
    ensemble = _matching_ensemble(grid, bundle)
    basis = np.eye(op.dimension)
    _, gap = weak_residual(op, kernel, psi, ensemble, basis)
    residual = weak_residual_fn(op, kernel, psi, basis)
    report = _report("mild", residual, ensemble, tolerance, min_rate, levels)
    return replace(report, consistency_gap=gap)


def _matching_ensemble(grid: TimeGrid, bundle: Noise) -> WienerEnsemble:
    ensemble = as_ensemble(bundle)
    if ensemble.grid != grid:
        msg = f"noise grid {ensemble.grid} differs from {grid}"
        raise ShapeError(msg)
    return ensemble


def _require_operator_image(op: SpectralOperator, psi: IIntegrandSeries) -> None:
    tail = psi.with_operator(op.eigenvalues).tail_budget
    if not math.isfinite(tail):
        msg = f"A·{psi.name} must have a finite tail budget, got {tail}"
        raise PreconditionError(msg)


def yosida_strong_convergence_suite(
    op: SpectralOperator,
    kernel: Kernel,
    grid: TimeGrid,
    psi: IIntegrandSeries,
    seed: int,
    n_list: Sequence[int],
    paths: int,
    noise_modes: int | None = None,
) -> YosidaSuiteReport:
    """共通乱数で sup_t Ê|W_n - W|² と sup_t Ê|A_n W_n - AW|² を n ごとに推定します。

    A_n W_n - AW = N1 + N2 (N1 = J_n((S_n - S)⋆AΨ), N2 = (A_n - A)W) に分解し、
    全ての t で Ê|A_n W_n - AW|² <= 3(Ê|N1|² + Ê|N2|²) を確かめます。

    Raises:
        PreconditionError: n_list が狭義単調増加でない場合
        ResolventSetError: n が最大固有値以下の場合
    """
    if any(b <= a for a, b in zip(n_list, n_list[1:], strict=False)):
        msg = f"n_list must be strictly increasing, got {list(n_list)}"
        raise PreconditionError(msg)
    _check_dimensions(op, psi)
    _require_operator_image(op, psi)
    ensemble = sample_ensemble(grid, noise_modes or psi.modes, seed, paths)
    lam = op.eigenvalues
    drive = noise_drive(psi, ensemble)
    image_drive = noise_drive(psi.with_operator(lam), ensemble)
    moments = psi.mode_second_moments(grid).sum(axis=0)

    base = build_resolvent(op, kernel, grid)
    solution = resolvent_convolve(base.s, drive)
    image = lam * solution
    base_image = resolvent_convolve(base.s, image_drive)

    size = len(n_list)
    e1, e2, n1_sq, n2_sq, quad = (np.zeros(size) for _ in range(5))
    bound_holds = True
    for idx, n in enumerate(n_list):
        table = build_resolvent(op, kernel, grid, yosida_n=n)
        lam_n = table.effective_eigenvalues
        approx = resolvent_convolve(table.s, drive)

        e1_curve = np.mean(np.sum((approx - solution) ** 2, axis=2), axis=0)
        e2_curve = np.mean(np.sum((lam_n * approx - image) ** 2, axis=2), axis=0)
        image_n = resolvent_convolve(table.s, image_drive)
        n1 = j_eigenvalues(op, n) * (image_n - base_image)
        n2 = (lam_n - lam) * solution
        n1_curve = np.mean(np.sum(n1**2, axis=2), axis=0)
        n2_curve = np.mean(np.sum(n2**2, axis=2), axis=0)

        slack = CONSISTENCY_TOLERANCE * max(1.0, float(e2_curve.max()))
        bound_holds &= bool(np.all(e2_curve <= 3.0 * (n1_curve + n2_curve) + slack))
        e1[idx] = float(e1_curve.max())
        e2[idx] = float(e2_curve.max())
        n1_sq[idx] = float(n1_curve.max())
        n2_sq[idx] = float(n2_curve.max())
        quad[idx] = float(second_moment_curve(table.s - base.s, moments, grid.dt).max())
        logger.debug("Yosida n=%d: e1=%.3e e2=%.3e", n, e1[idx], e2[idx])

    return YosidaSuiteReport(
        n_list=np.asarray(n_list, dtype=np.float64),
        e1=e1,
        e2=e2,
        n1_sq=n1_sq,
        n2_sq=n2_sq,
        e1_quadrature=quad,
        split_bound_holds=bound_holds,
        paths=paths,
    )
