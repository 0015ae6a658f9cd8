"""組み込みの被積分関数列 Ψ = (Ψ_i)。

決定論的な族は左端点での値の表 (I, N, K) を返し、ランダムな族
(``BrownianFeedbackIntegrand``) はパスごとの表 (..., I, N, K) を返します。
"""

import math
from abc import ABC, abstractmethod
from collections.abc import Callable
from typing import Final

import numpy as np

from stochastic_volterra.domain.exceptions import PreconditionError, ShapeError
from stochastic_volterra.domain.interfaces import IIntegrandSeries
from stochastic_volterra.domain.values import FloatArray, TimeGrid

Envelope = Callable[[FloatArray], FloatArray]


class BaseIntegrand(ABC):
    """被積分関数列の共通実装。

    表は ``evaluate`` を t_0, t_1, ... の順に呼んで作ります。ステップ l では
    W(t_0..t_l) だけを渡すので、ランダムな族も将来の増分を読めません。
    """

    def __init__(
        self, name: str, modes: int, space_dim: int, tail_budget: float = 0.0
    ) -> None:
        """初期化。

        Args:
            name: ラベル
            modes: ノイズモード数 I
            space_dim: 空間モード数 K
            tail_budget: 切り捨てたモードの Σ sup_t E|Ψ_i|²
        """
        if modes < 1 or space_dim < 1:
            msg = f"modes and space_dim must be >= 1, got {modes} and {space_dim}"
            raise ValueError(msg)
        if not tail_budget >= 0.0:
            msg = f"tail_budget must be >= 0, got {tail_budget}"
            raise ValueError(msg)
        self._name = name
        self._modes = modes
        self._space_dim = space_dim
        self._tail_budget = tail_budget

    @property
    def name(self) -> str:
        """ラベル。"""
        return self._name

    @property
    def modes(self) -> int:
        """ノイズモード数 I。"""
        return self._modes

    @property
    def space_dim(self) -> int:
        """空間モード数 K。"""
        return self._space_dim

    @property
    def deterministic(self) -> bool:
        """値がブラウン運動に依存しないか。"""
        return True

    @property
    def tail_budget(self) -> float:
        """切り捨てたモード i > I の Σ sup_t E|Ψ_i(t)|²。"""
        return self._tail_budget

    @abstractmethod
    def mode_second_moments(self, grid: TimeGrid) -> FloatArray:
        """E[Ψ_ik(t_l)²] を形状 (I, N, K) で返します。"""

    @abstractmethod
    def _evaluate(self, step: int, grid: TimeGrid, history: FloatArray) -> FloatArray:
        """検証済みの history から (..., I, K) の値を返します。"""

    def evaluate(self, step: int, grid: TimeGrid, history: FloatArray) -> FloatArray:
        """Ψ(t_step) をブラウン運動の t_step までの値だけから評価します。

        Args:
            step: グリッド添字 (0 <= step < steps)
            grid: 時間グリッド
            history: 形状 (..., I, step + 1) の W_i(t_0..t_step)

        Returns:
            FloatArray: 形状 (..., I, K)

        Raises:
            ShapeError: step や history の形状が不正な場合
        """
        if not 0 <= step < grid.steps:
            msg = f"step={step} out of range (N={grid.steps})"
            raise ShapeError(msg)
        if history.ndim < 2 or history.shape[-2:] != (self.modes, step + 1):
            msg = (
                f"history must have shape (..., {self.modes}, {step + 1}), got "
                f"{history.shape}"
            )
            raise ShapeError(msg)
        return self._evaluate(step, grid, history)

    def tabulate(self, grid: TimeGrid, increments: FloatArray) -> FloatArray:
        """左端点 t_0..t_{N-1} での値の表を作ります。

        Args:
            grid: 時間グリッド
            increments: 形状 (..., I, N) の増分

        Returns:
            FloatArray: 形状 (..., I, N, K)

        Raises:
            ShapeError: 増分の形状が不正な場合
        """
        steps = grid.steps
        if increments.ndim < 2 or increments.shape[-2:] != (self.modes, steps):
            msg = (
                f"increments must have shape (..., {self.modes}, {steps}), got "
                f"{increments.shape}"
            )
            raise ShapeError(msg)
        path = np.zeros((*increments.shape[:-1], steps + 1))
        path[..., 1:] = np.cumsum(increments, axis=-1)
        out = np.empty((*increments.shape, self.space_dim))
        for step in range(steps):
            out[..., step, :] = self.evaluate(step, grid, path[..., : step + 1])
        return out

    def operator_tail_budget(self, eigenvalues: FloatArray) -> float:
        """AΨ の切り捨てモードの寄与。切り捨てた Ψ_i が保持モードに載ると仮定します。"""
        if self._tail_budget == 0.0:
            return 0.0
        return self._tail_budget * float(np.max(eigenvalues**2))

    def with_operator(self, eigenvalues: FloatArray) -> IIntegrandSeries:
        """AΨ を返します。"""
        return OperatorImage(self, eigenvalues)


class DeterministicIntegrand(BaseIntegrand):
    """時間だけに依存する被積分関数列。"""

    @abstractmethod
    def profile(self, grid: TimeGrid) -> FloatArray:
        """左端点 t_0..t_{N-1} での値 (I, N, K)。"""

    def tabulate(self, grid: TimeGrid, increments: FloatArray) -> FloatArray:  # noqa: ARG002
        """増分を読まずに表 (I, N, K) を返します。"""
        return self.profile(grid)

    def mode_second_moments(self, grid: TimeGrid) -> FloatArray:
        """決定論的なので値の 2 乗そのもの。"""
        return np.asarray(self.profile(grid) ** 2)

    def _evaluate(self, step: int, grid: TimeGrid, history: FloatArray) -> FloatArray:
        value = self.profile(grid)[:, step]
        return np.broadcast_to(value, (*history.shape[:-2], *value.shape))


class SeparableIntegrand(DeterministicIntegrand):
    """Ψ_i(t) = g(t)·v_i の形の被積分関数列。"""

    def __init__(
        self,
        name: str,
        vectors: FloatArray,
        envelope: Envelope | None = None,
        tail_budget: float = 0.0,
    ) -> None:
        """初期化。

        Args:
            name: ラベル
            vectors: 形状 (I, K) の係数ベクトル v_i
            envelope: 時間包絡 g(t) (None なら 1)
            tail_budget: 切り捨てたモードの寄与
        """
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            msg = f"vectors must be 2-D (I, K), got shape {vectors.shape}"
            raise ValueError(msg)
        super().__init__(name, vectors.shape[0], vectors.shape[1], tail_budget)
        self._vectors = vectors
        self._envelope = envelope

    def profile(self, grid: TimeGrid) -> FloatArray:
        """g(t_l)·v_i を (I, N, K) で返します。"""
        t = grid.points[:-1]
        env = np.ones_like(t) if self._envelope is None else self._envelope(t)
        profile = env[np.newaxis, :, np.newaxis] * self._vectors[:, np.newaxis, :]
        return np.asarray(profile)


class TabulatedIntegrand(DeterministicIntegrand):
    """時刻表の値を区分線形補間する被積分関数列 (利用者が PUC と宣言したもの)。"""

    def __init__(
        self,
        name: str,
        table_t: FloatArray,
        values: FloatArray,
        tail_budget: float = 0.0,
        operator_tail: float | None = None,
    ) -> None:
        """初期化。

        Args:
            name: ラベル
            table_t: 形状 (M,) の時刻列 (0 始まり、狭義単調増加)
            values: 形状 (I, M, K) の値
            tail_budget: 切り捨てたモードの寄与
            operator_tail: AΨ の切り捨てモードの寄与 (None なら既定の見積もり)
        """
        table_t = np.asarray(table_t, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 3 or values.shape[1] != table_t.size:
            msg = f"values must have shape (I, {table_t.size}, K), got {values.shape}"
            raise ValueError(msg)
        if table_t.size < 2 or table_t[0] != 0.0 or not np.all(np.diff(table_t) > 0.0):
            msg = "table times must start at 0 and be strictly increasing"
            raise ValueError(msg)
        super().__init__(name, values.shape[0], values.shape[2], tail_budget)
        self._table_t = table_t
        self._values = values
        self._operator_tail = operator_tail

    def profile(self, grid: TimeGrid) -> FloatArray:
        """表を左端点に補間します。"""
        if grid.t_end > self._table_t[-1] * (1.0 + 1e-12):
            msg = (
                f"grid end {grid.t_end} exceeds integrand table range "
                f"{self._table_t[-1]}"
            )
            raise PreconditionError(msg)
        t = grid.points[:-1]
        out = np.empty((self.modes, t.size, self.space_dim))
        for i in range(self.modes):
            for k in range(self.space_dim):
                out[i, :, k] = np.interp(t, self._table_t, self._values[i, :, k])
        return out

    def operator_tail_budget(self, eigenvalues: FloatArray) -> float:
        """宣言値があればそれを返します。"""
        if self._operator_tail is not None:
            return self._operator_tail
        return super().operator_tail_budget(eigenvalues)


class BrownianFeedbackIntegrand(BaseIntegrand):
    """適合的なランダム被積分関数 Ψ_1(t) = scale·W_1(t)·e_1。"""

    def __init__(self, space_dim: int, scale: float = 1.0) -> None:
        """初期化。"""
        super().__init__("brownian", 1, space_dim)
        self._scale = scale

    @property
    def deterministic(self) -> bool:
        """ブラウン運動に依存します。"""
        return False

    def mode_second_moments(self, grid: TimeGrid) -> FloatArray:
        """E W_1(t_l)² = t_l。"""
        out = np.zeros((1, grid.steps, self.space_dim))
        out[0, :, 0] = self._scale**2 * grid.points[:-1]
        return out

    def _evaluate(
        self,
        step: int,
        grid: TimeGrid,  # noqa: ARG002
        history: FloatArray,
    ) -> FloatArray:
        out = np.zeros((*history.shape[:-2], 1, self.space_dim))
        out[..., 0, 0] = self._scale * history[..., 0, step]
        return out


class OperatorImage(BaseIntegrand):
    """AΨ (対角作用素を各係数に掛けた列)。"""

    def __init__(self, base: BaseIntegrand, eigenvalues: FloatArray) -> None:
        """初期化。"""
        eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
        if eigenvalues.shape != (base.space_dim,):
            msg = (
                f"eigenvalues must have shape ({base.space_dim},), got "
                f"{eigenvalues.shape}"
            )
            raise ShapeError(msg)
        # inf の宣言も保持し、利用側で前提条件として弾く
        super().__init__(
            f"A·{base.name}",
            base.modes,
            base.space_dim,
            base.operator_tail_budget(eigenvalues),
        )
        self._base = base
        self._eigenvalues = eigenvalues

    @property
    def deterministic(self) -> bool:
        """元の列に従います。"""
        return self._base.deterministic

    def tabulate(self, grid: TimeGrid, increments: FloatArray) -> FloatArray:
        """元の表の最終軸に固有値を掛けます。"""
        return np.asarray(self._base.tabulate(grid, increments) * self._eigenvalues)

    def mode_second_moments(self, grid: TimeGrid) -> FloatArray:
        """λ_k² E[Ψ_ik²]。"""
        return np.asarray(self._base.mode_second_moments(grid) * self._eigenvalues**2)

    def _evaluate(self, step: int, grid: TimeGrid, history: FloatArray) -> FloatArray:
        return np.asarray(self._base.evaluate(step, grid, history) * self._eigenvalues)


def _unit_rows(
    rows: int, space_dim: int, column_of: Callable[[int], int]
) -> FloatArray:
    out = np.zeros((rows, space_dim))
    for i in range(rows):
        out[i, column_of(i)] = 2.0 ** (-(i + 1) / 2.0)
    return out


def zero_integrand(modes: int, space_dim: int) -> SeparableIntegrand:
    """Ψ ≡ 0。"""
    return SeparableIntegrand("zero", np.zeros((modes, space_dim)))


def unit_integrand(modes: int, space_dim: int) -> SeparableIntegrand:  # noqa: ARG001
    """Ψ_1 ≡ e_1 (1 モード)。"""
    vectors = np.zeros((1, space_dim))
    vectors[0, 0] = 1.0
    return SeparableIntegrand("unit", vectors)


def geometric_integrand(modes: int, space_dim: int) -> SeparableIntegrand:
    """Ψ_i ≡ 2^{-i/2}·e_1 (i = 1..I)。切り捨ての寄与は 2^{-I}。"""
    vectors = _unit_rows(modes, space_dim, lambda _: 0)
    return SeparableIntegrand("geometric", vectors, tail_budget=2.0**-modes)


def modal_integrand(modes: int, space_dim: int) -> SeparableIntegrand:
    """Ψ_i ≡ 2^{-i/2}·e_i (i = 1..I, I <= K)。"""
    if modes > space_dim:
        msg = f"modal integrand needs modes <= space_dim, got {modes} > {space_dim}"
        raise ShapeError(msg)
    vectors = _unit_rows(modes, space_dim, lambda i: i)
    return SeparableIntegrand("modal", vectors, tail_budget=2.0**-modes)


def smooth_integrand(modes: int, space_dim: int) -> SeparableIntegrand:  # noqa: ARG001
    """Ψ_1(t) = cos(2πt)·e_1。"""
    vectors = np.zeros((1, space_dim))
    vectors[0, 0] = 1.0
    return SeparableIntegrand(
        "smooth", vectors, envelope=lambda t: np.cos(2.0 * math.pi * t)
    )


def brownian_integrand(modes: int, space_dim: int) -> BrownianFeedbackIntegrand:  # noqa: ARG001
    """Ψ_1(t) = W_1(t)·e_1。"""
    return BrownianFeedbackIntegrand(space_dim)


BUILTIN_INTEGRANDS: Final[dict[str, Callable[[int, int], BaseIntegrand]]] = {
    "zero": zero_integrand,
    "unit": unit_integrand,
    "geometric": geometric_integrand,
    "modal": modal_integrand,
    "smooth": smooth_integrand,
    "brownian": brownian_integrand,
}


def build_integrand(name: str, modes: int, space_dim: int) -> BaseIntegrand:
    """名前から組み込みの被積分関数列を生成します。"""
    try:
        factory = BUILTIN_INTEGRANDS[name]
    except KeyError as e:
        msg = (
            f"unknown integrand '{name}', expected one of {sorted(BUILTIN_INTEGRANDS)}"
        )
        raise ValueError(msg) from e
    return factory(modes, space_dim)
