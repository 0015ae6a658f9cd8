import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Final

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]

DEFAULT_MODES: Final[int] = 8
"""既定の切断次元 K とノイズモード数 I。"""


class KernelKind(str, Enum):
    """畳み込みカーネル a(t) の種類。"""

    FRACTIONAL = "fractional"
    EXPONENTIAL = "exponential"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class TimeGrid:
    """区間 [0, T] の一様時間グリッドを表す値オブジェクト。

    Attributes:
        t_end (float): 終端時刻 T (> 0)
        steps (int): 分割数 (>= 1)
    """

    t_end: float
    steps: int

    def __post_init__(self) -> None:
        """グリッドのパラメータをバリデーションします。"""
        if not (self.t_end > 0.0 and math.isfinite(self.t_end)):
            msg = f"t_end must be a positive finite number, got {self.t_end}"
            raise ValueError(msg)
        if self.steps < 1:
            msg = f"steps must be >= 1, got {self.steps}"
            raise ValueError(msg)

    @property
    def dt(self) -> float:
        """時間刻み幅 dt = T / steps。"""
        return self.t_end / self.steps

    @property
    def points(self) -> FloatArray:
        """グリッド点 t_j = j·dt (j = 0..steps)。"""
        return np.linspace(0.0, self.t_end, self.steps + 1)

    @property
    def size(self) -> int:
        """グリッド点の個数 (steps + 1)。"""
        return self.steps + 1

    def refine(self, factor: int) -> "TimeGrid":
        """刻み幅を 1/factor にした細かいグリッドを返します。"""
        if factor < 1:
            msg = f"factor must be >= 1, got {factor}"
            raise ValueError(msg)
        return TimeGrid(t_end=self.t_end, steps=self.steps * factor)

    def coarsen(self, factor: int) -> "TimeGrid":
        """刻み幅を factor 倍にした粗いグリッドを返します。"""
        if factor < 1 or self.steps % factor != 0:
            msg = f"steps={self.steps} is not divisible by factor={factor}"
            raise ValueError(msg)
        return TimeGrid(t_end=self.t_end, steps=self.steps // factor)


@dataclass(frozen=True, eq=False)
class Kernel:
    """スカラー畳み込みカーネル a(t) を表す値オブジェクト。

    生成は ``Kernel.fractional`` / ``Kernel.exponential`` / ``Kernel.tabulated``
    を使用してください。

    Attributes:
        kind (KernelKind): カーネルの種類
        alpha (float | None): Fractional の次数 α ∈ (0, 2)
        table_t (FloatArray | None): Tabulated の時刻列 (0 始まり、狭義単調増加)
        table_values (FloatArray | None): Tabulated の値列
    """

    kind: KernelKind
    alpha: float | None = None
    table_t: FloatArray | None = field(default=None, repr=False)
    table_values: FloatArray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        """種類ごとのパラメータをバリデーションします。"""
        if self.kind is KernelKind.FRACTIONAL:
            if self.alpha is None or not (0.0 < self.alpha < 2.0):
                msg = f"alpha must be in (0, 2), got {self.alpha}"
                raise ValueError(msg)
        elif self.kind is KernelKind.TABULATED:
            self._validate_table()

    def _validate_table(self) -> None:
        t, values = self.table_t, self.table_values
        if t is None or values is None:
            msg = "tabulated kernel requires table_t and table_values"
            raise ValueError(msg)
        if t.ndim != 1 or t.shape != values.shape or t.size < 2:
            msg = (
                f"table shapes must match and hold >= 2 points, got {t.shape} and "
                f"{values.shape}"
            )
            raise ValueError(msg)
        if t[0] != 0.0:
            msg = f"table grid must start at 0, got {t[0]}"
            raise ValueError(msg)
        if not np.all(np.diff(t) > 0.0):
            msg = "table grid must be strictly increasing"
            raise ValueError(msg)
        if not np.all(np.isfinite(values)):
            msg = "table values must be finite"
            raise ValueError(msg)

    @classmethod
    def fractional(cls, alpha: float) -> "Kernel":
        """a(t) = t^{α-1}/Γ(α) を生成します。"""
        return cls(kind=KernelKind.FRACTIONAL, alpha=float(alpha))

    @classmethod
    def exponential(cls) -> "Kernel":
        """a(t) = e^{-t} を生成します。"""
        return cls(kind=KernelKind.EXPONENTIAL)

    @classmethod
    def tabulated(cls, t: FloatArray, values: FloatArray) -> "Kernel":
        """区分線形補間されるテーブルカーネルを生成します。"""
        return cls(
            kind=KernelKind.TABULATED,
            table_t=np.asarray(t, dtype=np.float64),
            table_values=np.asarray(values, dtype=np.float64),
        )

    @property
    def order(self) -> float:
        """Fractional の次数 α。

        Raises:
            ValueError: Fractional 以外のカーネルの場合
        """
        if self.alpha is None:
            msg = f"{self.kind.value} kernel has no fractional order"
            raise ValueError(msg)
        return self.alpha

    @property
    def table(self) -> tuple[FloatArray, FloatArray]:
        """Tabulated の (時刻列, 値列)。

        Raises:
            ValueError: Tabulated 以外のカーネルの場合
        """
        if self.table_t is None or self.table_values is None:
            msg = f"{self.kind.value} kernel has no table"
            raise ValueError(msg)
        return self.table_t, self.table_values

    @property
    def a0(self) -> float:
        """a(0) の値 (特異カーネルでは +inf)。"""
        if self.kind is KernelKind.EXPONENTIAL:
            return 1.0
        if self.kind is KernelKind.TABULATED:
            return float(self.table[1][0])
        if self.order < 1.0:
            return math.inf
        return 1.0 if self.order == 1.0 else 0.0

    @property
    def singular(self) -> bool:
        """t = 0 で特異 (a(0) = +inf) かどうか。"""
        return math.isinf(self.a0)

    @property
    def differentiable(self) -> bool:
        """ȧ が存在して局所可積分かどうか (a(0) が有限であることと同値)。"""
        return math.isfinite(self.a0)

    @property
    def label(self) -> str:
        """ログやレポート用のラベル。"""
        if self.kind is KernelKind.FRACTIONAL:
            return f"fractional(alpha={self.alpha:g})"
        return self.kind.value


@dataclass(frozen=True, eq=False)
class HVector:
    """作用素の固有基底で表した H の元を表す値オブジェクト。

    Attributes:
        coeffs (FloatArray): 固有基底での座標 (長さ K)
    """

    coeffs: FloatArray

    def __post_init__(self) -> None:
        """座標配列をバリデーションします。"""
        if self.coeffs.ndim != 1:
            msg = f"coeffs must be 1-D, got {self.coeffs.ndim}-D"
            raise ValueError(msg)

    @classmethod
    def of(cls, values: "list[float] | FloatArray") -> "HVector":
        """配列ライクから HVector を生成します。"""
        return cls(coeffs=np.asarray(values, dtype=np.float64))

    @classmethod
    def zeros(cls, dimension: int) -> "HVector":
        """零ベクトルを生成します。"""
        return cls(coeffs=np.zeros(dimension))

    @classmethod
    def basis(cls, dimension: int, index: int) -> "HVector":
        """第 index 基底ベクトル e_{index+1} を生成します (0 始まり)。"""
        coeffs = np.zeros(dimension)
        coeffs[index] = 1.0
        return cls(coeffs=coeffs)

    @property
    def dimension(self) -> int:
        """次元 K。"""
        return int(self.coeffs.size)

    def norm(self) -> float:
        """H ノルム |v|_H。"""
        return float(np.linalg.norm(self.coeffs))

    def graph_norm(self, eigenvalues: FloatArray) -> float:
        """グラフノルム |v|_{D(A)} = (|v|² + |Av|²)^{1/2}。"""
        return float(np.sqrt(np.sum((1.0 + eigenvalues**2) * self.coeffs**2)))

    def inner(self, other: "HVector") -> float:
        """内積 ⟨v, w⟩_H。"""
        return float(np.dot(self.coeffs, other.coeffs))


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """切断した正規直交基底上の対角作用素として表した生成作用素 A。

    Attributes:
        eigenvalues (FloatArray): 固有値 λ_1 >= λ_2 >= ... >= λ_K
        description (str): 作用素の説明ラベル
    """

    eigenvalues: FloatArray
    description: str = ""

    def __post_init__(self) -> None:
        """固有値列をバリデーションします。"""
        ev = self.eigenvalues
        if ev.ndim != 1 or ev.size < 1:
            msg = f"eigenvalues must be a non-empty 1-D array, got shape {ev.shape}"
            raise ValueError(msg)
        if not np.all(np.isfinite(ev)):
            msg = "eigenvalues must be finite"
            raise ValueError(msg)
        if not np.all(np.diff(ev) <= 0.0):
            msg = "eigenvalues must be sorted in decreasing order"
            raise ValueError(msg)

    @classmethod
    def dirichlet_laplacian(cls, modes: int = DEFAULT_MODES) -> "SpectralOperator":
        """(0,1) 上の Dirichlet ラプラシアン λ_k = -(kπ)² を生成します。"""
        if modes < 1:
            msg = f"modes must be >= 1, got {modes}"
            raise ValueError(msg)
        k = np.arange(1, modes + 1, dtype=np.float64)
        return cls(
            eigenvalues=-((k * np.pi) ** 2),
            description=f"Dirichlet Laplacian on (0,1), K={modes}",
        )

    @classmethod
    def from_eigenvalues(
        cls, values: "list[float] | FloatArray", description: str = "custom"
    ) -> "SpectralOperator":
        """固有値列から作用素を生成します (降順に並べ替えます)。"""
        ev = np.sort(np.asarray(values, dtype=np.float64))[::-1].copy()
        return cls(eigenvalues=ev, description=description)

    @property
    def dimension(self) -> int:
        """切断次元 K。"""
        return int(self.eigenvalues.size)

    @property
    def omega(self) -> float:
        """生成上界 ω = max_k λ_k。"""
        return float(self.eigenvalues[0])
