"""左端点リーマン和による Itô 積分と、そのモンテカルロ検定。

すべての検定はパス番号をキーに増分を生成するため、チャンク分割や
スレッド数を変えても同じ推定値になります。
"""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import Final, TypeVar

import numpy as np

from stochastic_volterra.domain.entities import (
    IsometryReport,
    MonteCarloEstimate,
    TrajectorySet,
    WienerBundle,
    WienerEnsemble,
)
from stochastic_volterra.domain.exceptions import PreconditionError, ShapeError
from stochastic_volterra.domain.interfaces import IIntegrandSeries
from stochastic_volterra.domain.values import FloatArray, HVector, TimeGrid
from stochastic_volterra.infrastructure.stochastic.wiener import sample_ensemble

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_CHUNK: Final[int] = 256
MIN_ISOMETRY_PATHS: Final[int] = 100
# これを超える切り捨て寄与は警告する
TAIL_BUDGET_WARNING: Final[float] = 1e-3


def as_ensemble(noise: WienerBundle | WienerEnsemble) -> WienerEnsemble:
    """束をアンサンブルに揃えます。"""
    if isinstance(noise, WienerBundle):
        return noise.as_ensemble()
    return noise


def warn_tail_budget(psi: IIntegrandSeries) -> None:
    """切り捨てたモードの寄与が大きければ警告します。"""
    if psi.tail_budget > TAIL_BUDGET_WARNING:
        logger.warning(
            "Truncated noise modes of '%s' carry tail budget %.3e (> %.0e); "
            "increase the number of noise modes",
            psi.name,
            psi.tail_budget,
            TAIL_BUDGET_WARNING,
        )


def noise_drive(psi: IIntegrandSeries, ensemble: WienerEnsemble) -> FloatArray:
    """各ステップの寄与 Σ_i Ψ_i(t_l)·ΔW_i(t_l) を (paths, steps, K) で返します。

    Raises:
        ShapeError: psi.modes がアンサンブルのモード数を超える場合
    """
    if psi.modes > ensemble.modes:
        msg = (
            f"integrand needs {psi.modes} noise modes but the bundle has "
            f"{ensemble.modes}"
        )
        raise ShapeError(msg)
    increments = ensemble.increments[:, : psi.modes, :]
    table = psi.tabulate(ensemble.grid, increments)
    return np.asarray(np.einsum("...ilk,...il->...lk", table, increments))


def cumulative(drive: FloatArray) -> FloatArray:
    """ステップごとの寄与を累積し、t_0 = 0 を含む (paths, steps + 1, K) にします。"""
    paths, steps, space_dim = drive.shape
    out = np.zeros((paths, steps + 1, space_dim))
    out[:, 1:, :] = np.cumsum(drive, axis=1)
    return out


def ito_path(
    psi: IIntegrandSeries, noise: WienerBundle | WienerEnsemble
) -> TrajectorySet:
    """全グリッド点での ∫₀^{t_j} Ψ dW を返します。"""
    ensemble = as_ensemble(noise)
    return TrajectorySet(
        grid=ensemble.grid,
        values=cumulative(noise_drive(psi, ensemble)),
        label=f"ito[{psi.name}]",
    )


def ito_integral(psi: IIntegrandSeries, bundle: WienerBundle, up_to: int) -> HVector:
    """Σ_{i<=I} Σ_{j<up_to} Ψ_i(t_j)·ΔW_i(t_j) を返します。

    Args:
        psi: 被積分関数列
        bundle: 増分の束
        up_to: 上端のグリッド番号 (0..steps)

    Returns:
        HVector: 積分値

    Raises:
        ShapeError: モード数が足りない場合
        PreconditionError: up_to がグリッド外の場合
    """
    if not 0 <= up_to <= bundle.grid.steps:
        msg = f"up_to must be in 0..{bundle.grid.steps}, got {up_to}"
        raise PreconditionError(msg)
    drive = noise_drive(psi, bundle.as_ensemble())[0]
    return HVector(coeffs=drive[:up_to].sum(axis=0))


def isometry_rhs(psi: IIntegrandSeries, grid: TimeGrid) -> float:
    """∫₀ᵀ Σ_i E|Ψ_i(τ)|² dτ の左端点求積。"""
    return float(psi.mode_second_moments(grid).sum() * grid.dt)


def map_path_chunks(
    paths: int,
    fn: Callable[[int, int], T],
    chunk: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> list[T]:
    """パスを (first_path, count) のチャンクに分けて fn を順序どおりに適用します。"""
    if chunk < 1 or workers < 1:
        msg = f"chunk and workers must be >= 1, got {chunk} and {workers}"
        raise PreconditionError(msg)
    starts = list(range(0, paths, chunk))

    def run(start: int) -> T:
        return fn(start, min(chunk, paths - start))

    if workers == 1 or len(starts) == 1:
        return [run(start) for start in starts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, starts))


def _mean_and_stderr(samples: FloatArray) -> tuple[float, float]:
    mean = float(samples.mean())
    if samples.size < 2:
        return mean, 0.0
    return mean, float(samples.std(ddof=1) / math.sqrt(samples.size))


def ito_isometry_test(
    psi: IIntegrandSeries,
    grid: TimeGrid,
    modes: int,
    paths: int,
    seed: int,
    chunk: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> IsometryReport:
    """E|∫₀ᵀ Ψ dW|² のモンテカルロ推定と ∫ Σ_i E|Ψ_i|² の求積を比べます。

    Raises:
        PreconditionError: paths < 100 の場合
    """
    if paths < MIN_ISOMETRY_PATHS:
        msg = f"paths must be >= {MIN_ISOMETRY_PATHS}, got {paths}"
        raise PreconditionError(msg)
    warn_tail_budget(psi)

    def terminal_squares(first: int, count: int) -> FloatArray:
        ensemble = sample_ensemble(grid, modes, seed, count, first_path=first)
        terminal = noise_drive(psi, ensemble).sum(axis=1)
        return np.asarray(np.sum(terminal**2, axis=1))

    samples = np.concatenate(map_path_chunks(paths, terminal_squares, chunk, workers))
    lhs, stderr = _mean_and_stderr(samples)
    rhs = isometry_rhs(psi, grid)
    logger.info(
        "Ito isometry for '%s': lhs=%.6f rhs=%.6f stderr=%.2e paths=%d",
        psi.name,
        lhs,
        rhs,
        stderr,
        paths,
    )
    return IsometryReport(lhs=lhs, rhs=rhs, stderr=stderr, paths=paths)


def cross_orthogonality_test(
    psi: IIntegrandSeries,
    grid: TimeGrid,
    i: int,
    j: int,
    paths: int,
    seed: int,
    chunk: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> MonteCarloEstimate:
    """E⟨∫Ψ_i dW_i, ∫Ψ_j dW_j⟩_H を推定します (モード番号は 0 始まり)。

    Raises:
        PreconditionError: i == j の場合
        ShapeError: モード番号が範囲外の場合
    """
    if i == j:
        msg = f"cross orthogonality needs distinct modes, got i = j = {i}"
        raise PreconditionError(msg)
    if not (0 <= i < psi.modes and 0 <= j < psi.modes):
        msg = f"modes {i} and {j} must be in 0..{psi.modes - 1}"
        raise ShapeError(msg)

    def inner_products(first: int, count: int) -> FloatArray:
        ensemble = sample_ensemble(grid, psi.modes, seed, count, first_path=first)
        increments = ensemble.increments
        table = np.broadcast_to(
            psi.tabulate(grid, increments),
            (count, psi.modes, grid.steps, psi.space_dim),
        )
        int_i = np.einsum("plk,pl->pk", table[:, i], increments[:, i])
        int_j = np.einsum("plk,pl->pk", table[:, j], increments[:, j])
        return np.asarray(np.sum(int_i * int_j, axis=1))

    samples = np.concatenate(map_path_chunks(paths, inner_products, chunk, workers))
    estimate, stderr = _mean_and_stderr(samples)
    return MonteCarloEstimate(estimate=estimate, stderr=stderr, paths=paths)


def martingale_mean_test(
    psi: IIntegrandSeries,
    grid: TimeGrid,
    modes: int,
    paths: int,
    seed: int,
    chunk: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> list[MonteCarloEstimate]:
    """空間モードごとに E[∫₀ᵀ Ψ dW] を推定します (0 に近いはず)。"""

    def terminals(first: int, count: int) -> FloatArray:
        ensemble = sample_ensemble(grid, modes, seed, count, first_path=first)
        return np.asarray(noise_drive(psi, ensemble).sum(axis=1))

    samples = np.concatenate(map_path_chunks(paths, terminals, chunk, workers), axis=0)
    estimates = []
    for k in range(samples.shape[1]):
        mean, stderr = _mean_and_stderr(samples[:, k])
        estimates.append(MonteCarloEstimate(estimate=mean, stderr=stderr, paths=paths))
    return estimates


def riemann_self_convergence(
    psi: IIntegrandSeries, grid: TimeGrid, modes: int, paths: int, seed: int
) -> float:
    """dt と dt/2 のリーマン和の差の L² ノルム (E|I_dt(T) - I_{dt/2}(T)|²)^{1/2}。

    細かいグリッドで増分を生成し、粗いグリッドではそれを合算して使います。
    """
    fine = sample_ensemble(grid.refine(2), modes, seed, paths)
    coarse = fine.coarsen(2)
    fine_terminal = noise_drive(psi, fine).sum(axis=1)
    coarse_terminal = noise_drive(psi, coarse).sum(axis=1)
    gap = np.sum((fine_terminal - coarse_terminal) ** 2, axis=1)
    return float(math.sqrt(gap.mean()))
