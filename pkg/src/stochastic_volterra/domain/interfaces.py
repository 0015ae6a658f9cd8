from collections.abc import Sequence
from typing import Protocol

from stochastic_volterra.domain.values import FloatArray, TimeGrid


class IIntegrandSeries(Protocol):
    """確率積分の被積分関数列 Ψ = (Ψ_i) のインターフェース。

    適合性: ステップ j の値はパス値 W(t_0), ..., W(t_j) にしか依存しません。
    ``evaluate`` にはそのプレフィックスだけが渡され、``tabulate`` も
    ステップごとに ``evaluate`` を通して表を組み立てます。
    """

    @property
    def name(self) -> str:
        """ラベル。"""
        ...

    @property
    def modes(self) -> int:
        """ノイズモード数 I。"""
        ...

    @property
    def space_dim(self) -> int:
        """空間モード数 K。"""
        ...

    @property
    def deterministic(self) -> bool:
        """値がブラウン運動に依存しないか。"""
        ...

    @property
    def tail_budget(self) -> float:
        """切り捨てたモード i > I の Σ sup_t E|Ψ_i(t)|²。"""
        ...

    def evaluate(self, step: int, grid: TimeGrid, history: FloatArray) -> FloatArray:
        """全モードの Ψ_i(t_step) を評価します。

        Args:
            step: グリッド添字 (0 <= step < steps)
            grid: 時間グリッド
            history: 形状 (..., I, step + 1) のパス値 W(t_0)..W(t_step)

        Returns:
            FloatArray: 形状 (..., I, K) の値
        """
        ...

    def tabulate(self, grid: TimeGrid, increments: FloatArray) -> FloatArray:
        """左端点 t_0..t_{N-1} での値をまとめて返します。

        Args:
            grid: 時間グリッド
            increments: 形状 (..., I, N) の増分

        Returns:
            FloatArray: (..., I, N, K) にブロードキャスト可能な配列
        """
        ...

    def mode_second_moments(self, grid: TimeGrid) -> FloatArray:
        """E[Ψ_ik(t_l)²] を形状 (I, N, K) で返します。"""
        ...

    def operator_tail_budget(self, eigenvalues: FloatArray) -> float:
        """AΨ の切り捨てモードの Σ sup_t E|AΨ_i(t)|²。"""
        ...

    def with_operator(self, eigenvalues: FloatArray) -> "IIntegrandSeries":
        """AΨ を返します。"""
        ...


class IResultWriter(Protocol):
    """実験結果の書き出し先のインターフェース。"""

    def write_text(self, filename: str, content: str) -> str:
        """テキストファイルを書き出します。

        Returns:
            str: 書き出したファイルのパス
        """
        ...

    def write_table(
        self, name: str, header: Sequence[str], rows: FloatArray
    ) -> str:
        """``<name>.csv`` を書き出します。"""
        ...

    def write_report(self, name: str, lines: Sequence[str]) -> str:
        """``<name>.report.txt`` を書き出します。"""
        ...

    def write_plot_script(self, tables: Sequence[tuple[str, Sequence[str]]]) -> str:
        """CSV を参照する ``plots.gnu`` を書き出します。"""
        ...
