"""確率畳み込み W^Ψ(t) = Σ_i ∫₀ᵗ S(t-τ)Ψ_i(τ)dW_i(τ) とその派生量。

離散化は左端点で、t_j の値は Σ_{l<j} S(t_j - t_l)·Ψ(t_l)ΔW(t_l) です。
"""

import logging
import math
from typing import Final

import numpy as np
from scipy import signal

from stochastic_volterra.application.resolvent import build_resolvent
from stochastic_volterra.application.stochastic import (
    as_ensemble,
    cumulative,
    noise_drive,
    warn_tail_budget,
)
from stochastic_volterra.domain.entities import (
    RegularityReport,
    ResolventTable,
    TrajectorySet,
    WienerBundle,
    WienerEnsemble,
)
from stochastic_volterra.domain.exceptions import (
    PreconditionError,
    ShapeError,
    VerificationError,
)
from stochastic_volterra.domain.interfaces import IIntegrandSeries
from stochastic_volterra.domain.values import (
    FloatArray,
    Kernel,
    SpectralOperator,
    TimeGrid,
)

logger = logging.getLogger(__name__)

INTERCHANGE_TOLERANCE: Final[float] = 1e-12
# ヘルダー指数の回帰に使う最大ラグ
MAX_HOLDER_LAG: Final[int] = 10


def resolvent_convolve(s: FloatArray, drive: FloatArray) -> FloatArray:
    """X[p, j, k] = Σ_{l<j} s[k, j-l]·drive[p, l, k] を計算します。

    Args:
        s: 形状 (K, steps + 1) のラグごとの係数 (s[:, 0] は使いません)
        drive: 形状 (paths, steps, K) のステップごとの寄与

    Returns:
        FloatArray: 形状 (paths, steps + 1, K)。t_0 の値は 0
    """
    paths, steps, space_dim = drive.shape
    if s.shape != (space_dim, steps + 1):
        msg = f"lag table must have shape ({space_dim}, {steps + 1}), got {s.shape}"
        raise ShapeError(msg)
    out = np.zeros((paths, steps + 1, space_dim))
    unit = np.all(s[:, 1:] == 1.0, axis=1)
    if np.any(unit):
        # S ≡ I のモードは Itô 積分と同じ累積和にする
        out[:, 1:, unit] = np.cumsum(drive[:, :, unit], axis=1)
    rest = np.flatnonzero(~unit)
    if rest.size:
        lags = s[rest, 1:].T[np.newaxis, :, :]
        full = signal.fftconvolve(drive[:, :, rest], lags, axes=1)
        out[:, 1:, rest] = full[:, :steps, :]
    return out


def _check_compatible(
    table: ResolventTable, psi: IIntegrandSeries, ensemble: WienerEnsemble
) -> None:
    if table.grid != ensemble.grid:
        msg = f"resolvent grid {table.grid} differs from noise grid {ensemble.grid}"
        raise ShapeError(msg)
    if psi.space_dim != table.modes:
        msg = (
            f"integrand space dimension {psi.space_dim} "
            f"does not match {table.modes} modes"
        )
        raise ShapeError(msg)


def convolve_ensemble(
    table: ResolventTable,
    psi: IIntegrandSeries,
    ensemble: WienerEnsemble,
    label: str | None = None,
) -> TrajectorySet:
    """アンサンブルの全パスについて確率畳み込みを計算します。"""
    _check_compatible(table, psi, ensemble)
    warn_tail_budget(psi)
    values = resolvent_convolve(table.s, noise_drive(psi, ensemble))
    name = "W" if table.yosida_n is None else f"W_{table.yosida_n}"
    return TrajectorySet(
        grid=ensemble.grid,
        values=values,
        label=label or f"{name}[{psi.name}]",
    )


def stochastic_convolution(
    table: ResolventTable,
    psi: IIntegrandSeries,
    bundle: WienerBundle | WienerEnsemble,
) -> TrajectorySet:
    """確率畳み込み W^Ψ を返します (束なら 1 パス、アンサンブルなら全パス)。

    Raises:
        ShapeError: グリッドや次元が一致しない場合
    """
    return convolve_ensemble(table, psi, as_ensemble(bundle))


def interchange_discrepancy(
    op: SpectralOperator,
    table: ResolventTable,
    psi: IIntegrandSeries,
    bundle: WienerBundle | WienerEnsemble,
) -> tuple[TrajectorySet, float]:
    """A(W^Ψ) と AΨ の畳み込みを比べ、(A W^Ψ, 相対的な最大差) を返します。"""
    ensemble = as_ensemble(bundle)
    direct = stochastic_convolution(table, psi, ensemble)
    applied = direct.values * op.eigenvalues
    image = convolve_ensemble(table, psi.with_operator(op.eigenvalues), ensemble)
    scale = max(1.0, float(np.max(np.abs(image.values), initial=0.0)))
    gap = float(np.max(np.abs(applied - image.values), initial=0.0)) / scale
    label = f"A{direct.label}"
    return TrajectorySet(grid=ensemble.grid, values=applied, label=label), gap


def apply_A_to_convolution(  # noqa: N802
    op: SpectralOperator,
    table: ResolventTable,
    psi: IIntegrandSeries,
    bundle: WienerBundle | WienerEnsemble,
) -> TrajectorySet:
    """A を W^Ψ にモードごとに掛けた値を返し、AΨ の畳み込みと一致することを確かめます。

    Raises:
        PreconditionError: AΨ の切り捨て寄与が有限でない場合
        VerificationError: 両辺の差が 1e-12 (相対) を超えた場合
    """
    image_tail = psi.with_operator(op.eigenvalues).tail_budget
    if not math.isfinite(image_tail):
        msg = (
            f"integrand A·{psi.name} is not declared square integrable "
            f"(tail budget {image_tail})"
        )
        raise PreconditionError(msg)
    applied, gap = interchange_discrepancy(op, table, psi, bundle)
    if gap > INTERCHANGE_TOLERANCE:
        msg = f"A does not commute with the stochastic integral: discrepancy {gap:.3e}"
        raise VerificationError(msg, gap)
    logger.debug("Interchange discrepancy %.3e for '%s'", gap, psi.name)
    return applied


def yosida_convolution(
    op: SpectralOperator,
    kernel: Kernel,
    grid: TimeGrid,
    n: int,
    psi: IIntegrandSeries,
    bundle: WienerBundle | WienerEnsemble,
) -> TrajectorySet:
    """S_n の表で畳み込んだ W_n^Ψ を返します (同じ増分を共有)。"""
    table = build_resolvent(op, kernel, grid, yosida_n=n)
    return stochastic_convolution(table, psi, bundle)


def second_moment_curve(lags: FloatArray, moments: FloatArray, dt: float) -> FloatArray:
    """Σ_k Σ_{l<j} lags[k, j-l]²·moments[l, k]·dt を全ての j について返します。

    Args:
        lags: 形状 (K, steps + 1) の係数 (S の表や S_n - S の差)
        moments: 形状 (steps, K) の Σ_i E[Ψ_ik(t_l)²]
        dt: 時間刻み
    """
    curve = resolvent_convolve(lags**2, moments[np.newaxis, :, :] * dt)
    return np.asarray(curve[0].sum(axis=1))


def convolution_second_moment(
    table: ResolventTable, psi: IIntegrandSeries, j: int | None = None
) -> float:
    """E|W^Ψ(t_j)|² の求積値 Σ_i ∫ E|S(t_j - τ)Ψ_i(τ)|² dτ (j を省略すると終端)。"""
    if psi.space_dim != table.modes:
        msg = (
            f"integrand space dimension {psi.space_dim} "
            f"does not match {table.modes} modes"
        )
        raise ShapeError(msg)
    moments = psi.mode_second_moments(table.grid).sum(axis=0)
    curve = second_moment_curve(table.s, moments, table.grid.dt)
    return float(curve[table.grid.steps if j is None else j])


def _increment_rms(values: FloatArray, lag: int) -> float:
    increments = values[:, lag:] - values[:, :-lag]
    return math.sqrt(float(np.mean(np.sum(increments**2, axis=2))))


def regularity_probe(trajectories: TrajectorySet) -> RegularityReport:
    """最大ジャンプと経験的なヘルダー指数を求めます。

    ヘルダー指数はラグ h = 1..min(10, steps) における増分の RMS の
    両対数回帰の傾きです。増分がすべて 0 なら inf、ラグが 2 つ未満なら nan。

    Raises:
        PreconditionError: グリッド点が 2 つ未満の場合
    """
    values = trajectories.values
    steps = trajectories.grid.steps
    if values.shape[1] < 2:
        msg = "regularity probe needs at least 2 grid points"
        raise PreconditionError(msg)
    jumps = np.linalg.norm(np.diff(values, axis=1), axis=2)
    max_jump = float(jumps.max())

    lags = np.arange(1, min(MAX_HOLDER_LAG, steps) + 1)
    if lags.size < 2:
        return RegularityReport(max_jump=max_jump, holder_estimate=math.nan)
    rms = np.array([_increment_rms(values, int(h)) for h in lags])
    if np.all(rms == 0.0):
        return RegularityReport(max_jump=max_jump, holder_estimate=math.inf)
    if np.any(rms == 0.0):
        return RegularityReport(max_jump=max_jump, holder_estimate=math.nan)
    slope = np.polyfit(np.log(lags * trajectories.grid.dt), np.log(rms), 1)[0]
    return RegularityReport(max_jump=max_jump, holder_estimate=float(slope))


def summary_rows(
    trajectories: TrajectorySet, quadrature: FloatArray | None = None
) -> FloatArray:
    """(t, mean|X|², stderr[, quadrature]) の行を返します。"""
    mean, stderr = trajectories.mean_square()
    columns = [trajectories.grid.points, mean, stderr]
    if quadrature is not None:
        columns.append(quadrature)
    return np.column_stack(columns)


def trajectory_rows(trajectories: TrajectorySet, first_path: int = 0) -> FloatArray:
    """(path, t, mode, value) の長い形式の行を返します (mode は 0 始まり)。"""
    paths, size, space_dim = trajectories.values.shape
    p_idx, j_idx, k_idx = np.meshgrid(
        np.arange(paths) + first_path,
        np.arange(size),
        np.arange(space_dim),
        indexing="ij",
    )
    return np.column_stack(
        (
            p_idx.ravel(),
            trajectories.grid.points[j_idx.ravel()],
            k_idx.ravel(),
            trajectories.values.ravel(),
        )
    )
