"""第 2 種スカラー Volterra 方程式の積分重みと前進代入ソルバー。

未知関数を各小区間で線形補間し、カーネルを解析的に積分する積分法
(product integration) を使います。重みはラグについて Toeplitz で、
第 0 列 (t_0 の寄与) だけが別の値を持ちます。

    w[j][j] = diag
    w[j][l] = lag[j - l]   (1 <= l <= j - 1)
    w[j][0] = start[j]

分数カーネルの解は t^α, t^{2α}, ... の項を持ち、区分線形補間では
t = 0 付近の精度が落ちます。そのため先頭の数点に開始重み
correction[j][l] (l < width) を加え、1, t と t^{kα} (kα < 2) を
厳密に積分させます。開始重みは l > j の点にも掛かるので、先頭の
width - 1 ステップは連立方程式として解きます。
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Final

import numpy as np
from scipy import signal, special

from stochastic_volterra.domain.exceptions import (
    KernelRangeError,
    NumericError,
    ShapeError,
    SingularStepError,
    UnsupportedOperationError,
)
from stochastic_volterra.domain.values import FloatArray, Kernel, KernelKind, TimeGrid

logger = logging.getLogger(__name__)

# |1 - λ·diag| がこれ未満なら前進代入を打ち切る
SINGULAR_STEP_TOLERANCE: Final[float] = 1e-12

# 特異点から離れたセルのモーメントは Gauss-Legendre で求める
NEAR_FIELD_CELLS: Final[int] = 32
GAUSS_LEGENDRE_NODES: Final[int] = 8

# φ2(z) の級数展開に切り替える |z|
_SERIES_SWITCH: Final[float] = 0.1

# 開始重みで厳密に扱う t^{kα} の個数の上限
STARTING_EXPONENTS_MAX: Final[int] = 6


@dataclass(frozen=True, eq=False)
class QuadratureWeights:
    """積分重み表。

    Attributes:
        grid (TimeGrid): 時間グリッド
        lag (FloatArray): 長さ steps + 1。lag[0] は対角重み
        start (FloatArray): 長さ steps + 1。start[j] = w[j][0] (start[0] = 0)
        label (str): 重みの由来 (ログ用)
        correction (FloatArray | None): 形状 (steps + 1, width) の開始重み。
            correction[0] = 0
    """

    grid: TimeGrid
    lag: FloatArray
    start: FloatArray
    label: str = ""
    correction: FloatArray | None = None

    def __post_init__(self) -> None:
        """配列形状をバリデーションし、読み取り専用にします。"""
        size = self.grid.size
        if self.lag.shape != (size,) or self.start.shape != (size,):
            msg = (
                f"lag and start must have shape ({size},), "
                f"got {self.lag.shape} and {self.start.shape}"
            )
            raise ValueError(msg)
        if self.correction is not None:
            shape = self.correction.shape
            if len(shape) != 2 or shape[0] != size or not 2 <= shape[1] <= size:
                msg = f"correction must have shape ({size}, width), got {shape}"
                raise ValueError(msg)
            self.correction.flags.writeable = False
        self.lag.flags.writeable = False
        self.start.flags.writeable = False

    @property
    def diag(self) -> float:
        """対角重み w[j][j]。"""
        return float(self.lag[0])

    @property
    def width(self) -> int:
        """開始重みが掛かる先頭の点の数 (開始重みがなければ 0)。"""
        return 0 if self.correction is None else self.correction.shape[1]

    def row(self, j: int) -> FloatArray:
        """第 j 行 w[j][0..j] を返します。"""
        if j == 0:
            return np.zeros(1)
        out = self.lag[j::-1].copy()
        out[0] = self.start[j]
        return out

    def matrix(self) -> FloatArray:
        """開始重みを含む重み行列を返します (小さなグリッドの検査用)。"""
        size = self.grid.size
        out = np.zeros((size, size))
        for j in range(1, size):
            out[j, : j + 1] = self.row(j)
        if self.correction is not None:
            out[:, : self.width] += self.correction
        return out

    def row_sums(self) -> FloatArray:
        """Σ_l w[j][l]。x ≡ 1 に対する積分値 ∫₀^{t_j} a に一致します。"""
        out = np.zeros(self.grid.size)
        out[1:] = self.start[1:] + np.cumsum(self.lag[:-1])
        if self.correction is not None:
            out += self.correction.sum(axis=1)
        return out

    def convolve(self, x: FloatArray, axis: int = -1) -> FloatArray:
        """(a⋆x)(t_j) ≈ Σ_l w[j][l]·x_l を axis に沿って一括計算します。

        Args:
            x: axis の長さが steps + 1 の配列
            axis: 時間軸

        Returns:
            FloatArray: x と同じ形状。添字 0 は厳密に 0
        """
        moved = np.moveaxis(np.asarray(x, dtype=np.float64), axis, -1)
        size = self.grid.size
        if moved.shape[-1] != size:
            msg = f"time axis must have length {size}, got {moved.shape[-1]}"
            raise ShapeError(msg)
        lag = self.lag.reshape((1,) * (moved.ndim - 1) + (size,))
        full = signal.fftconvolve(moved, lag, axes=-1)[..., :size]
        # Toeplitz 部分が x_0 に掛けた lag[j] を start[j] に差し替える
        out = full + (self.start - self.lag) * moved[..., :1]
        if self.correction is not None:
            out = out + moved[..., : self.width] @ self.correction.T
        out[..., 0] = 0.0
        return np.moveaxis(out, -1, axis)


def _phi1(z: float) -> float:
    """(e^z - 1)/z。"""
    return 1.0 if z == 0.0 else math.expm1(z) / z


def _phi2(z: float) -> float:
    """(e^z (z - 1) + 1)/z² = Σ_{m>=2} z^{m-2}(m-1)/m!。"""
    if abs(z) < _SERIES_SWITCH:
        return math.fsum(
            z ** (m - 2) * (m - 1) / math.factorial(m) for m in range(2, 14)
        )
    return (math.exp(z) * (z - 1.0) + 1.0) / (z * z)


def _exponential_moments(
    rate: float, dt: float, cells: int
) -> tuple[FloatArray, FloatArray]:
    """カーネル e^{rate·u} のセルモーメント M0_k, M1_k (k = 0..cells-1)。"""
    z = rate * dt
    k = np.arange(cells, dtype=np.float64)
    try:
        with np.errstate(over="raise"):
            decay = np.exp(z * k)
    except FloatingPointError as e:
        msg = f"exponential weights overflow for rate={rate}"
        raise NumericError(msg, diagnostics=f"steps={cells}, dt={dt:.6g}") from e
    return decay * (dt * _phi1(z)), decay * (dt * _phi2(z))


def _fractional_moments(
    alpha: float, dt: float, cells: int
) -> tuple[FloatArray, FloatArray]:
    """カーネル u^{α-1}/Γ(α) のセルモーメント。"""
    k = np.arange(cells + 1, dtype=np.float64)
    scale = dt**alpha
    m0 = scale * special.rgamma(alpha + 1.0) * np.diff(k**alpha)
    m1 = (
        scale * special.rgamma(alpha) / (alpha + 1.0) * np.diff(k ** (alpha + 1.0))
        - k[:-1] * m0
    )
    if cells > NEAR_FIELD_CELLS:
        nodes, weights = np.polynomial.legendre.leggauss(GAUSS_LEGENDRE_NODES)
        phi = 0.5 * (nodes + 1.0)
        far = k[NEAR_FIELD_CELLS:cells, np.newaxis]
        m1[NEAR_FIELD_CELLS:] = (
            scale
            * special.rgamma(alpha)
            * (((far + phi) ** (alpha - 1.0) * phi) @ (0.5 * weights))
        )
    return m0, m1


def _piecewise_moments(
    fn: Callable[[FloatArray], FloatArray],
    breakpoints: FloatArray,
    dt: float,
    cells: int,
) -> tuple[FloatArray, FloatArray]:
    """区分多項式 (次数 <= 1) のカーネルのセルモーメントを厳密に求めます。"""
    t_end = cells * dt
    inner = breakpoints[(breakpoints > 0.0) & (breakpoints < t_end)]
    edges = np.union1d(np.arange(cells + 1, dtype=np.float64) * dt, inner)
    left, right = edges[:-1], edges[1:]
    mid = 0.5 * (left + right)
    half = 0.5 * (right - left)
    cell = np.minimum((mid / dt).astype(np.int64), cells - 1)
    offset = 1.0 / math.sqrt(3.0)
    m0 = np.zeros(cells)
    m1 = np.zeros(cells)
    for sign in (-1.0, 1.0):
        x = mid + sign * offset * half
        values = fn(x)
        phi = x / dt - cell
        m0 += np.bincount(cell, weights=half * values, minlength=cells)
        m1 += np.bincount(cell, weights=half * values * phi, minlength=cells)
    return m0, m1


def _assemble(
    m0: FloatArray, m1: FloatArray, grid: TimeGrid, label: str
) -> QuadratureWeights:
    steps = grid.steps
    lag = np.empty(grid.size)
    lag[0] = m0[0] - m1[0]
    lag[1:steps] = m1[: steps - 1] + m0[1:steps] - m1[1:steps]
    # lag[steps] は x_0 にしか掛からず start で置き換わる
    lag[steps] = m1[steps - 1]
    start = np.zeros(grid.size)
    start[1:] = m1[:steps]
    if not (np.all(np.isfinite(lag)) and np.all(np.isfinite(start))):
        msg = f"non-finite quadrature weights for {label}"
        raise NumericError(msg, diagnostics=f"steps={steps}, dt={grid.dt:.6g}")
    return QuadratureWeights(grid=grid, lag=lag, start=start, label=label)


def singular_exponents(alpha: float) -> list[float]:
    """開始重みで厳密に扱う非整数の指数 kα < 2 (小さい順、最大 6 個)。"""
    out: list[float] = []
    for k in range(1, STARTING_EXPONENTS_MAX + 1):
        gamma = k * alpha
        if gamma >= 2.0:
            break
        if abs(gamma - round(gamma)) > 1e-9:
            out.append(gamma)
    return out


def _with_starting_correction(
    base: QuadratureWeights, alpha: float
) -> QuadratureWeights:
    """u^{α-1}/Γ(α) の重みに開始重みを加えます。

    開始重み c[j] は V c[j] = b[j] の解です。V[q][l] = t_l^{γ_q} は
    先頭 width 点での冪、b[j][q] は ∫₀^{t_j} a(t_j - τ)τ^{γ_q}dτ と
    元の重みによる値の差です。γ = 0, 1 では b = 0 なので線形関数の
    厳密さは保たれます。
    """
    exponents = np.array([0.0, 1.0, *singular_exponents(alpha)])
    width = exponents.size
    grid = base.grid
    if width == 2 or grid.steps < width - 1:
        return base
    t = grid.points
    powers = t ** exponents[:, np.newaxis]
    coeff = special.gamma(exponents + 1.0) * special.rgamma(exponents + alpha + 1.0)
    exact = coeff[:, np.newaxis] * t ** (exponents + alpha)[:, np.newaxis]
    defect = exact - base.convolve(powers)
    defect[:, 0] = 0.0
    # t_l^γ = dt^γ·l^γ なので行を dt^γ で割って l^γ の行列を解く
    nodes = np.arange(width, dtype=np.float64)
    vander = nodes[np.newaxis, :] ** exponents[:, np.newaxis]
    scaled = defect / (grid.dt**exponents)[:, np.newaxis]
    correction = np.ascontiguousarray(np.linalg.solve(vander, scaled).T)
    return replace(base, correction=correction)


def _tabulated_moments(
    kernel: Kernel, grid: TimeGrid, derivative: bool
) -> tuple[FloatArray, FloatArray]:
    t, values = kernel.table
    if grid.t_end > t[-1] * (1.0 + 1e-12):
        msg = f"grid end {grid.t_end} exceeds tabulated range [0, {t[-1]}]"
        raise KernelRangeError(msg, grid.t_end)
    if derivative:
        slopes = np.diff(values) / np.diff(t)

        def fn(x: FloatArray) -> FloatArray:
            idx = np.clip(np.searchsorted(t, x, side="right") - 1, 0, t.size - 2)
            return np.asarray(slopes[idx])

    else:

        def fn(x: FloatArray) -> FloatArray:
            return np.asarray(np.interp(x, t, values))

    return _piecewise_moments(fn, t, grid.dt, grid.steps)


@lru_cache(maxsize=64)
def build_weights(
    kernel: Kernel, grid: TimeGrid, derivative: bool = False
) -> QuadratureWeights:
    """カーネル a (derivative=True なら ȧ) の積分重みを構築します。

    Args:
        kernel: 畳み込みカーネル
        grid: 時間グリッド
        derivative: 導関数カーネル ȧ の重みを構築するか

    Returns:
        QuadratureWeights: 積分重み表

    Raises:
        UnsupportedOperationError: ȧ が存在しないカーネルで derivative=True の場合
        KernelRangeError: グリッドがテーブルの範囲を超える場合
    """
    if derivative and not kernel.differentiable:
        msg = f"kernel {kernel.label} has no locally integrable derivative"
        raise UnsupportedOperationError(msg)

    dt, cells = grid.dt, grid.steps
    label = f"{'d/dt ' if derivative else ''}{kernel.label}"
    if kernel.kind is KernelKind.EXPONENTIAL:
        m0, m1 = _exponential_moments(-1.0, dt, cells)
        if derivative:
            m0, m1 = -m0, -m1
    elif kernel.kind is KernelKind.FRACTIONAL:
        order = kernel.order - 1.0 if derivative else kernel.order
        if derivative and order == 0.0:
            m0, m1 = np.zeros(cells), np.zeros(cells)
        else:
            m0, m1 = _fractional_moments(order, dt, cells)
    else:
        m0, m1 = _tabulated_moments(kernel, grid, derivative)

    weights = _assemble(m0, m1, grid, label)
    if kernel.kind is KernelKind.FRACTIONAL and not derivative:
        weights = _with_starting_correction(weights, kernel.order)
    logger.debug(
        "Built weights: %s, steps=%d, diag=%.3e, starting width=%d",
        label,
        grid.steps,
        weights.diag,
        weights.width,
    )
    return weights


@lru_cache(maxsize=256)
def semigroup_weights(rate: float, grid: TimeGrid) -> QuadratureWeights:
    """カーネル e^{rate·u} の積分重み (生成作用素 cA の半群 T̃ のモード成分)。"""
    m0, m1 = _exponential_moments(rate, grid.dt, grid.steps)
    return _assemble(m0, m1, grid, f"exp({rate:g}·t)")


def _solve_starting_block(
    weights: QuadratureWeights,
    correction: FloatArray,
    lam: FloatArray,
    rhs: FloatArray,
    x: FloatArray,
) -> int:
    """x_1..x_{width-1} を連立方程式として解き、次に進む添字を返します。"""
    width = correction.shape[1]
    rows = np.zeros((width - 1, width))
    for j in range(1, width):
        rows[j - 1, : j + 1] = weights.row(j)
    rows += correction[1:width]
    system = np.eye(width - 1) - lam[:, np.newaxis, np.newaxis] * rows[:, 1:]
    known = rhs[:, 1:width] + lam[:, np.newaxis] * rows[:, 0] * x[:, :1]
    try:
        x[:, 1:width] = np.linalg.solve(system, known[..., np.newaxis])[..., 0]
    except np.linalg.LinAlgError as e:
        msg = f"starting block of {width - 1} steps is singular; refine the grid"
        raise SingularStepError(msg, step=1) from e
    return width


def solve_second_kind(
    weights: QuadratureWeights,
    lam: float | FloatArray,
    f: FloatArray,
) -> FloatArray:
    """x(t_j) = f(t_j) + λ·Σ_l w[j][l]·x(t_l) を前進代入で解きます。

    λ が配列の場合は各要素 (モード) について同時に解きます。

    Args:
        weights: 積分重み表
        lam: スカラーまたは形状 (K,) の λ
        f: 形状 (steps + 1,) または (K, steps + 1) の右辺

    Returns:
        FloatArray: λ がスカラーで f が 1 次元なら (steps + 1,)、他は (K, steps + 1)

    Raises:
        ShapeError: f の長さがグリッドと一致しない場合
        SingularStepError: 1 - λ·w[j][j] がほぼ 0 の場合
        NumericError: 解が有限でなくなった場合
    """
    grid = weights.grid
    f_arr = np.asarray(f, dtype=np.float64)
    if f_arr.shape[-1] != grid.size:
        msg = f"f must have length {grid.size}, got {f_arr.shape[-1]}"
        raise ShapeError(msg)
    scalar = np.ndim(lam) == 0 and f_arr.ndim == 1
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    modes = max(lam_arr.size, f_arr.shape[0] if f_arr.ndim == 2 else 1)
    if lam_arr.size not in (1, modes) or f_arr.ndim > 2:
        msg = f"lambda of size {lam_arr.size} does not match f of shape {f_arr.shape}"
        raise ShapeError(msg)
    lam_arr = np.broadcast_to(lam_arr, (modes,))
    rhs = np.broadcast_to(f_arr, (modes, grid.size))

    diag = weights.diag
    denom = 1.0 - lam_arr * diag
    bad = np.flatnonzero(np.abs(denom) < SINGULAR_STEP_TOLERANCE)
    if bad.size:
        mode = int(bad[0])
        msg = (
            f"1 - lambda*w[j][j] vanishes for lambda={lam_arr[mode]:g} "
            f"(dt={grid.dt:.3g}); refine the grid"
        )
        raise SingularStepError(msg, step=1, mode=mode)
    stiff = np.flatnonzero(-lam_arr * diag > 1.0)
    if stiff.size:
        logger.warning(
            "Stiff modes %s: -lambda*w_jj > 1 at dt=%.3g, solution may oscillate",
            stiff.tolist(),
            grid.dt,
        )

    lag, start = weights.lag, weights.start
    x = np.empty((modes, grid.size))
    x[:, 0] = rhs[:, 0]
    correction = weights.correction
    first = 1
    if correction is not None:
        first = _solve_starting_block(weights, correction, lam_arr, rhs, x)
    for j in range(first, grid.size):
        history = x[:, 1:j] @ lag[j - 1 : 0 : -1] + start[j] * x[:, 0]
        if correction is not None:
            history += x[:, : weights.width] @ correction[j]
        x[:, j] = (rhs[:, j] + lam_arr * history) / denom

    if not np.all(np.isfinite(x)):
        msg = "Volterra solution is not finite"
        raise NumericError(msg, diagnostics=f"steps={grid.steps}, dt={grid.dt:.6g}")
    return x[0] if scalar else x
