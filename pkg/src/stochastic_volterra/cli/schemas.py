"""実行設定のスキーマ定義 (Pydantic)。

全てのフィールドに既定値があり、既定値を解決した設定は
``config.resolved.json`` として出力ディレクトリに書き出されます。
"""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from stochastic_volterra.application.dtos import ExperimentKind
from stochastic_volterra.domain.values import DEFAULT_MODES

REFINED_KINDS = frozenset({ExperimentKind.CAUCHY, ExperimentKind.REGULARITY})
VERIFY_KINDS = frozenset(
    {
        ExperimentKind.VERIFY_STRONG,
        ExperimentKind.VERIFY_WEAK,
        ExperimentKind.VERIFY_MILD,
    }
)
# cauchy / regularity は dt と dt/4 を比べる
REFINED_FACTOR = 4


def _split_list(value: object) -> object:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class KernelSpec(_Spec):
    """畳み込みカーネルの設定。"""

    kind: Literal["fractional", "exponential", "tabulated"] = Field(
        "exponential", description="カーネルの種類"
    )
    alpha: float = Field(
        1.0, gt=0.0, lt=2.0, description="fractional の次数 α (a(t) = t^{α-1}/Γ(α))"
    )
    table: str | None = Field(
        None, description="tabulated の CSV パス (ヘッダー付き 2 列 t,a)"
    )

    @model_validator(mode="after")
    def _require_table(self) -> "KernelSpec":
        if self.kind == "tabulated" and not self.table:
            msg = "kernel.table is required for a tabulated kernel"
            raise ValueError(msg)
        return self


class OperatorSpec(_Spec):
    """生成作用素 A の設定。"""

    name: Literal["dirichlet-laplacian", "constant"] = Field(
        "dirichlet-laplacian", description="組み込みの作用素名"
    )
    modes: int = Field(DEFAULT_MODES, ge=1, description="切断次元 K")
    eigenvalue: float = Field(-1.0, description="constant の固有値 λ (全モード共通)")
    csv: str | None = Field(
        None, description="固有値 CSV のパス (指定すると name と modes より優先)"
    )


class GridSpec(_Spec):
    """時間グリッドの設定。"""

    t_end: float = Field(1.0, gt=0.0, description="終端時刻 T")
    steps: int = Field(800, ge=1, description="ステップ数 N (dt = T/N)")


class NoiseSpec(_Spec):
    """ブラウン運動の増分の設定。"""

    modes: int = Field(DEFAULT_MODES, ge=1, description="生成するノイズモード数 I")
    seed: int = Field(42, ge=0, description="乱数シード")
    paths: int = Field(256, ge=1, description="モンテカルロのパス数")


class IntegrandSpec(_Spec):
    """被積分関数列 Ψ の設定。"""

    name: Literal[
        "zero", "unit", "geometric", "modal", "smooth", "brownian", "tabulated"
    ] = Field("modal", description="組み込みの被積分関数名")
    csv: str | None = Field(
        None, description="tabulated の CSV パス (ヘッダー付き 4 列 t,mode,k,value)"
    )
    tail_budget: float = Field(
        0.0, ge=0.0, description="tabulated で宣言する切り捨てモードの寄与"
    )

    @model_validator(mode="after")
    def _require_csv(self) -> "IntegrandSpec":
        if self.name == "tabulated" and not self.csv:
            msg = "integrand.csv is required for a tabulated integrand"
            raise ValueError(msg)
        return self


class OptionsSpec(_Spec):
    """実験ごとの解析パラメータ。"""

    yosida_n: tuple[int, ...] = Field(
        (10, 100, 1000), description="吉田近似のパラメータ列 (カンマ区切り)"
    )
    mu: tuple[float, ...] = Field(
        (0.0, 0.5, 1.0, 10.0), description="完全正値性チェックの μ (カンマ区切り)"
    )
    xi_index: int = Field(0, ge=0, description="弱形式の試験ベクトル e_k の k")
    levels: int = Field(3, ge=2, description="細分化レベル数")
    min_rate: float = Field(0.4, gt=0.0, description="要求する収束次数")
    tol_cp: float = Field(1e-8, gt=0.0, description="非負性判定の許容値")
    scale_r_equation: bool = Field(True, description="r の方程式にも μ を掛けるか")
    workers: int = Field(1, ge=1, description="モンテカルロのスレッド数")
    export_paths: bool = Field(False, description="軌道を長い形式の CSV でも書き出すか")

    @field_validator("yosida_n", "mu", mode="before")
    @classmethod
    def _comma_list(cls, value: object) -> object:
        return _split_list(value)

    @field_validator("yosida_n")
    @classmethod
    def _positive_n(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value or any(n <= 0 for n in value):
            msg = f"yosida_n must be a non-empty list of positive integers, got {value}"
            raise ValueError(msg)
        return value

    @field_validator("mu")
    @classmethod
    def _nonnegative_mu(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value or any(m < 0.0 for m in value):
            msg = f"mu must be a non-empty list of values >= 0, got {value}"
            raise ValueError(msg)
        return value


class OutputSpec(_Spec):
    """出力先の設定。"""

    directory: str = Field("results", description="出力ディレクトリ")


class ExperimentSpec(_Spec):
    """既定値と上書きを解決した 1 つの実験の設定。"""

    name: str = Field(
        ..., pattern=r"^[A-Za-z0-9_.-]+$", description="出力ファイル名の接頭辞"
    )
    kind: ExperimentKind = Field(..., description="実験の種類 (サブコマンド名)")
    kernel: KernelSpec = Field(default_factory=KernelSpec, description="カーネル")
    operator: OperatorSpec = Field(default_factory=OperatorSpec, description="作用素")
    grid: GridSpec = Field(default_factory=GridSpec, description="時間グリッド")
    noise: NoiseSpec = Field(default_factory=NoiseSpec, description="ノイズ")
    integrand: IntegrandSpec = Field(
        default_factory=IntegrandSpec, description="被積分関数列"
    )
    options: OptionsSpec = Field(
        default_factory=OptionsSpec, description="解析パラメータ"
    )

    @model_validator(mode="after")
    def _check_compatibility(self) -> "ExperimentSpec":
        """カーネル・作用素・グリッドと実験の種類の組み合わせを検証します。"""
        if self.kind is ExperimentKind.CAUCHY and self.kernel.kind == "fractional":
            alpha = self.kernel.alpha
            if alpha != 1.0:
                a0 = "infinite" if alpha < 1.0 else "0"
                msg = (
                    "kernel.alpha: the Cauchy reformulation needs a finite nonzero "
                    f"a(0), but the fractional kernel with alpha={alpha:g} has a(0) = "
                    f"{a0}"
                )
                raise ValueError(msg)
        if self.kind in REFINED_KINDS and self.grid.steps % REFINED_FACTOR != 0:
            msg = (
                f"grid.steps must be divisible by {REFINED_FACTOR} for "
                f"{self.kind.value}, got {self.grid.steps}"
            )
            raise ValueError(msg)
        if self.kind in VERIFY_KINDS:
            factor = 2 ** (self.options.levels - 1)
            if self.grid.steps % factor != 0:
                msg = (
                    f"grid.steps must be divisible by {factor} for "
                    f"{self.options.levels} refinement levels, got {self.grid.steps}"
                )
                raise ValueError(msg)
        if (
            self.kind is ExperimentKind.YOSIDA_SUITE
            and self.operator.csv is None
            and self.operator.name == "constant"
            and min(self.options.yosida_n) <= self.operator.eigenvalue
        ):
            msg = (
                "options.yosida_n must exceed every eigenvalue, "
                f"got n={min(self.options.yosida_n)} <= {self.operator.eigenvalue:g}"
            )
            raise ValueError(msg)
        return self


class RunConfig(_Spec):
    """実行設定全体。

    セクション ``[kernel]`` などが全実験の既定値となり、
    ``[experiment:<name>]`` セクションがそれを上書きします。
    """

    kernel: KernelSpec = Field(default_factory=KernelSpec, description="カーネル")
    operator: OperatorSpec = Field(default_factory=OperatorSpec, description="作用素")
    grid: GridSpec = Field(default_factory=GridSpec, description="時間グリッド")
    noise: NoiseSpec = Field(default_factory=NoiseSpec, description="ノイズ")
    integrand: IntegrandSpec = Field(
        default_factory=IntegrandSpec, description="被積分関数列"
    )
    options: OptionsSpec = Field(
        default_factory=OptionsSpec, description="解析パラメータ"
    )
    output: OutputSpec = Field(default_factory=OutputSpec, description="出力先")
    experiments: tuple[ExperimentSpec, ...] = Field(
        (), description="実行する実験 (設定ファイルの順)"
    )
