from dataclasses import dataclass, field

import numpy as np

from stochastic_volterra.domain.values import (
    FloatArray,
    Kernel,
    SpectralOperator,
    TimeGrid,
)


@dataclass(frozen=True, eq=False)
class ResolventTable:
    """モードごとのスカラーレゾルベント s_λ(t_j) の表。S(t) または S_n(t) を表す。

    Attributes:
        operator (SpectralOperator): 生成作用素 A
        kernel (Kernel): 畳み込みカーネル a
        grid (TimeGrid): 時間グリッド
        s (FloatArray): 形状 (K, steps + 1) のレゾルベント値
        yosida_n (int | None): 吉田近似の n (真の族 S(t) では None)
        effective_eigenvalues (FloatArray): 各モードの固有値 (λ_k または A_n の固有値)
    """

    operator: SpectralOperator
    kernel: Kernel
    grid: TimeGrid
    s: FloatArray
    effective_eigenvalues: FloatArray
    yosida_n: int | None = None

    def __post_init__(self) -> None:
        """表の形状をバリデーションします。"""
        expected = (self.operator.dimension, self.grid.size)
        if self.s.shape != expected:
            msg = f"s must have shape {expected}, got {self.s.shape}"
            raise ValueError(msg)

    @property
    def modes(self) -> int:
        """モード数 K。"""
        return self.operator.dimension

    def at(self, j: int) -> FloatArray:
        """グリッド点 t_j における全モードの値 s[:, j] を返します。"""
        return self.s[:, j]


@dataclass(frozen=True, eq=False)
class WienerBundle:
    """1 本のパスに対する独立スカラー Wiener 過程の増分の束。

    Attributes:
        grid (TimeGrid): 時間グリッド
        seed (int): 乱数シード
        path (int): パス番号 (乱数ストリームのキーの一部)
        increments (FloatArray): 形状 (modes, steps) の N(0, dt) 増分
    """

    grid: TimeGrid
    seed: int
    increments: FloatArray
    path: int = 0

    def __post_init__(self) -> None:
        """増分配列の形状をバリデーションします。"""
        if self.increments.ndim != 2 or self.increments.shape[1] != self.grid.steps:
            msg = (
                f"increments must have shape (modes, {self.grid.steps}), "
                f"got {self.increments.shape}"
            )
            raise ValueError(msg)

    @property
    def modes(self) -> int:
        """ノイズモード数 I。"""
        return int(self.increments.shape[0])

    def values(self) -> FloatArray:
        """W_i(t_j) = Σ_{l<j} ΔW_i(t_l) を形状 (modes, steps + 1) で返します。"""
        out = np.zeros((self.modes, self.grid.size))
        out[:, 1:] = np.cumsum(self.increments, axis=1)
        return out

    def as_ensemble(self) -> "WienerEnsemble":
        """1 パスのアンサンブルとして返します。"""
        return WienerEnsemble(
            grid=self.grid,
            seed=self.seed,
            increments=self.increments[np.newaxis, :, :],
            first_path=self.path,
        )


@dataclass(frozen=True, eq=False)
class WienerEnsemble:
    """モンテカルロ用に複数パスの増分をまとめたアンサンブル。

    Attributes:
        grid (TimeGrid): 時間グリッド
        seed (int): 乱数シード
        increments (FloatArray): 形状 (paths, modes, steps) の増分
        first_path (int): 先頭パスのパス番号
    """

    grid: TimeGrid
    seed: int
    increments: FloatArray
    first_path: int = 0

    def __post_init__(self) -> None:
        """増分配列の形状をバリデーションします。"""
        if self.increments.ndim != 3 or self.increments.shape[2] != self.grid.steps:
            msg = (
                f"increments must have shape (paths, modes, {self.grid.steps}), "
                f"got {self.increments.shape}"
            )
            raise ValueError(msg)

    @property
    def paths(self) -> int:
        """パス数。"""
        return int(self.increments.shape[0])

    @property
    def modes(self) -> int:
        """ノイズモード数 I。"""
        return int(self.increments.shape[1])

    def bundle(self, p: int) -> WienerBundle:
        """第 p パスの束を返します。"""
        return WienerBundle(
            grid=self.grid,
            seed=self.seed,
            increments=self.increments[p],
            path=self.first_path + p,
        )

    def values(self) -> FloatArray:
        """W_i(t_j) を形状 (paths, modes, steps + 1) で返します。"""
        out = np.zeros((self.paths, self.modes, self.grid.size))
        out[:, :, 1:] = np.cumsum(self.increments, axis=2)
        return out

    def coarsen(self, factor: int) -> "WienerEnsemble":
        """増分を factor 個ずつ合算して粗いグリッドのアンサンブルを返します。

        細かいグリッドの増分の和が粗いグリッドの増分に一致するため、
        粗い計算と細かい計算は同じブラウン運動の標本路を近似します。
        """
        coarse = self.grid.coarsen(factor)
        summed = self.increments.reshape(
            self.paths, self.modes, coarse.steps, factor
        ).sum(axis=3)
        return WienerEnsemble(
            grid=coarse, seed=self.seed, increments=summed, first_path=self.first_path
        )


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    """H 値過程のモンテカルロ・アンサンブル (モード係数のパス)。

    Attributes:
        grid (TimeGrid): 時間グリッド
        values (FloatArray): 形状 (paths, steps + 1, K) の値
        label (str): 系列のラベル
    """

    grid: TimeGrid
    values: FloatArray
    label: str = ""

    def __post_init__(self) -> None:
        """値配列の形状をバリデーションします。"""
        if self.values.ndim != 3 or self.values.shape[1] != self.grid.size:
            msg = (
                f"values must have shape (paths, {self.grid.size}, K), "
                f"got {self.values.shape}"
            )
            raise ValueError(msg)

    @property
    def paths(self) -> int:
        """パス数。"""
        return int(self.values.shape[0])

    @property
    def modes(self) -> int:
        """空間モード数 K。"""
        return int(self.values.shape[2])

    def norms(self) -> FloatArray:
        """|X_p(t_j)|_H を形状 (paths, steps + 1) で返します。"""
        return np.asarray(np.linalg.norm(self.values, axis=2))

    def sup_norms(self) -> FloatArray:
        """パスごとの sup_t |X_p(t)|_H。"""
        return np.asarray(self.norms().max(axis=1))

    def square_integrals(self) -> FloatArray:
        """パスごとの ∫₀ᵀ |X(t)|²_H dt (台形則)。"""
        sq = np.sum(self.values**2, axis=2)
        return np.asarray(np.trapezoid(sq, dx=self.grid.dt, axis=1))

    def mean_square(self) -> tuple[FloatArray, FloatArray]:
        """各時刻の E|X(t)|² の推定値と標準誤差を返します。"""
        sq = np.sum(self.values**2, axis=2)
        mean = sq.mean(axis=0)
        if self.paths < 2:
            return mean, np.zeros_like(mean)
        stderr = sq.std(axis=0, ddof=1) / np.sqrt(self.paths)
        return mean, stderr

    def scaled(self, factor: float, label: str | None = None) -> "TrajectorySet":
        """係数倍した系列を返します。"""
        return TrajectorySet(
            grid=self.grid,
            values=self.values * factor,
            label=self.label if label is None else label,
        )


@dataclass(frozen=True, eq=False)
class VerificationReport:
    """定理レベルの検証結果。

    合否は ``residual_sup_mean <= tolerance_used`` で決まり、
    使用した許容値は常に記録されます。

    Attributes:
        name (str): 検証名
        grid (TimeGrid): 最も細かいグリッド
        paths (int): パス数
        residual_sup_mean (float): パスごとの sup_t |残差|_H の平均
        residual_sup_per_path (FloatArray): パスごとの sup_t |残差|_H
        tolerance_used (float): 判定に使った許容値
        refinement_rates (FloatArray | None): 細分化で観測された収束次数
        level_residuals (FloatArray | None): 各細分化レベルの residual_sup_mean (粗い順)
        consistency_gap (float | None): 強形式・弱形式の整合性ギャップ
        integrability_witness (FloatArray | None): ∫₀ᵀ |a(T-τ)AX(τ)|_H dτ (パスごと)
    """

    name: str
    grid: TimeGrid
    paths: int
    residual_sup_mean: float
    residual_sup_per_path: FloatArray
    tolerance_used: float
    refinement_rates: FloatArray | None = None
    level_residuals: FloatArray | None = None
    consistency_gap: float | None = None
    integrability_witness: FloatArray | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        """合否 (residual_sup_mean <= tolerance_used)。"""
        return bool(self.residual_sup_mean <= self.tolerance_used)


@dataclass(frozen=True, eq=False)
class CompletePositivityReport:
    """完全正値性チェックの結果。

    Attributes:
        mu (float): パラメータ μ
        grid (TimeGrid): 時間グリッド
        s_values (FloatArray): s + μ a⋆s = 1 の解
        r_values (FloatArray): r + μ a⋆r = a の解 (特異カーネルではセル平均、r[0] = inf)
        nonneg (bool): s, r がともに -tol 以上か
        tolerance (float): 判定に使った許容値
    """

    mu: float
    grid: TimeGrid
    s_values: FloatArray
    r_values: FloatArray
    nonneg: bool
    tolerance: float


@dataclass(frozen=True)
class IsometryReport:
    """Itô 等長性の検定結果。"""

    lhs: float
    rhs: float
    stderr: float
    paths: int

    @property
    def z_score(self) -> float:
        """(lhs - rhs) / stderr。stderr = 0 なら差が 0 のとき 0 を返します。"""
        diff = self.lhs - self.rhs
        if self.stderr == 0.0:
            return 0.0 if diff == 0.0 else float("inf")
        return diff / self.stderr


@dataclass(frozen=True)
class MonteCarloEstimate:
    """平均値のモンテカルロ推定と標準誤差。"""

    estimate: float
    stderr: float
    paths: int

    def within(self, target: float, sigmas: float = 3.0) -> bool:
        """推定値が target から sigmas 標準誤差以内にあるか。"""
        return abs(self.estimate - target) <= sigmas * self.stderr


@dataclass(frozen=True, eq=False)
class CauchyReport:
    """コーシー問題への書き換えと直接計算の比較結果。

    Attributes:
        w_direct (TrajectorySet): 直接計算した確率畳み込み
        w_reformulated (TrajectorySet): c·A·Y_c + ∫Ψ dW で再構成した値
        y (TrajectorySet): 半群積分 Y_c
        sup_discrepancy (FloatArray): パスごとの sup_t |W_direct - W_reformulated|_H
        ode_residual (FloatArray): パスごとの内点での |Y' - cAY - F|_H の最大値
        c (float): a(0)
    """

    w_direct: TrajectorySet
    w_reformulated: TrajectorySet
    y: TrajectorySet
    sup_discrepancy: FloatArray
    ode_residual: FloatArray
    c: float


@dataclass(frozen=True)
class RegularityReport:
    """軌道の連続性プローブの結果。"""

    max_jump: float
    holder_estimate: float


@dataclass(frozen=True, eq=False)
class YosidaSuiteReport:
    """吉田近似による確率畳み込みの収束スイートの結果。

    Attributes:
        n_list (FloatArray): 吉田近似のパラメータ n
        e1 (FloatArray): sup_t Ê|W_n - W|²
        e2 (FloatArray): sup_t Ê|A_n W_n - A W|²
        n1_sq (FloatArray): sup_t Ê|J_n((S_n - S)⋆AΨ)|²
        n2_sq (FloatArray): sup_t Ê|(A_n - A)(S⋆Ψ)|²
        e1_quadrature (FloatArray): sup_t E|W_n - W|² の決定論的求積値
        split_bound_holds (bool): 全ての t, n で Ê|A_n W_n - A W|² <= 3(N1² + N2²) か
        paths (int): パス数
    """

    n_list: FloatArray
    e1: FloatArray
    e2: FloatArray
    n1_sq: FloatArray
    n2_sq: FloatArray
    e1_quadrature: FloatArray
    split_bound_holds: bool
    paths: int

    @property
    def monotone(self) -> bool:
        """e1, e2 がともに n について狭義単調減少か。"""
        return bool(np.all(np.diff(self.e1) < 0.0) and np.all(np.diff(self.e2) < 0.0))
