from dataclasses import dataclass, field
from enum import Enum

from stochastic_volterra.domain.interfaces import IIntegrandSeries
from stochastic_volterra.domain.values import (
    DEFAULT_MODES,
    Kernel,
    SpectralOperator,
    TimeGrid,
)


class ExperimentKind(str, Enum):
    """実験の種類 (CLI のサブコマンド名と同じ)。"""

    RESOLVENT = "resolvent"
    CP_CHECK = "cp-check"
    CONVOLVE = "convolve"
    ITO_CHECK = "ito-check"
    VERIFY_STRONG = "verify-strong"
    VERIFY_WEAK = "verify-weak"
    VERIFY_MILD = "verify-mild"
    YOSIDA_SUITE = "yosida-suite"
    CAUCHY = "cauchy"
    REGULARITY = "regularity"


@dataclass(frozen=True, eq=False)
class ExperimentInput:
    """1 つの実験の入力パラメータ (既定値を解決済み)。"""

    name: str
    """出力ファイル名の接頭辞。"""

    kind: ExperimentKind
    """実験の種類。"""

    kernel: Kernel
    """畳み込みカーネル。"""

    operator: SpectralOperator
    """生成作用素。"""

    grid: TimeGrid
    """最も細かい時間グリッド。"""

    integrand: IIntegrandSeries
    """被積分関数列。"""

    seed: int = 42
    """乱数シード。"""

    paths: int = 256
    """モンテカルロのパス数。"""

    noise_modes: int = DEFAULT_MODES
    """生成するノイズモード数 I (被積分関数のモード数以上)。"""

    yosida_n: tuple[int, ...] = (10, 100, 1000)
    """吉田近似のパラメータ列。"""

    mu: tuple[float, ...] = (0.0, 0.5, 1.0, 10.0)
    """完全正値性チェックの μ。"""

    xi_index: int = 0
    """弱形式の試験ベクトル e_k の k (0 始まり)。"""

    levels: int = 3
    """細分化レベル数。"""

    min_rate: float = 0.4
    """要求する収束次数。"""

    tol_cp: float = 1e-8
    """非負性判定の許容値。"""

    scale_r_equation: bool = True
    """r の方程式にも μ を掛けるか。"""

    workers: int = 1
    """モンテカルロのスレッド数。"""

    export_paths: bool = False
    """軌道を (path, t, mode, value) 形式でも書き出すか。"""


@dataclass(frozen=True)
class ExperimentResult:
    """1 つの実験の結果。"""

    name: str
    """実験名。"""

    kind: ExperimentKind
    """実験の種類。"""

    passed: bool
    """合否。"""

    header: tuple[str, ...]
    """CSV の列名。"""

    files: tuple[str, ...]
    """書き出したファイル。"""

    summary: dict[str, float] = field(default_factory=dict)
    """主要な数値。"""

    plottable: bool = True
    """描画スクリプトの対象にするか。"""


@dataclass(frozen=True)
class SuiteInput:
    """実験スイートの入力。"""

    experiments: tuple[ExperimentInput, ...]
    """実行する実験 (設定ファイルの順)。"""

    resolved_config: str
    """既定値を解決した設定 (JSON)。"""

    parallel: bool = False
    """実験を並列に実行するか。"""

    threads: int = 1
    """並列実行時のスレッド数。"""


@dataclass(frozen=True)
class SuiteResult:
    """実験スイートの結果。"""

    results: tuple[ExperimentResult, ...]
    """実験ごとの結果 (入力と同じ順)。"""

    config_path: str
    """書き出した設定ファイル。"""

    plot_script: str | None = None
    """書き出した描画スクリプト (描画対象がなければ None)。"""

    @property
    def all_passed(self) -> bool:
        """全ての実験が合格したか (実験が 0 件なら True)。"""
        return all(result.passed for result in self.results)
