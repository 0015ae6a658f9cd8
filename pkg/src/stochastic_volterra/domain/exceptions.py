class DomainError(Exception):
    """ドメイン層で発生する例外の基底クラス。

    Attributes:
        message (str): エラーメッセージ
    """

    def __init__(self, message: str = "A domain error occurred") -> None:
        """初期化メソッド。

        Args:
            message (str): エラーの詳細メッセージ
        """
        self.message = message
        super().__init__(self.message)


class KernelDomainError(DomainError):
    """特異カーネルを定義域外 (t <= 0) で評価しようとした場合の例外。"""

    def __init__(self, message: str, t: float) -> None:
        """初期化メソッド。"""
        self.t = t
        super().__init__(message)


class KernelRangeError(DomainError):
    """テーブルカーネルの範囲外で評価しようとした場合の例外。"""

    def __init__(self, message: str, t: float) -> None:
        """初期化メソッド。"""
        self.t = t
        super().__init__(message)


class UnsupportedOperationError(DomainError):
    """カーネルやパラメータの組み合わせが未対応の場合の例外。"""

    def __init__(self, message: str = "Unsupported operation") -> None:
        """初期化メソッド。"""
        super().__init__(message)


class ShapeError(DomainError):
    """配列の次元・モード数が一致しない場合の例外。"""

    def __init__(self, message: str = "Shape mismatch") -> None:
        """初期化メソッド。"""
        super().__init__(message)


class ResolventSetError(DomainError):
    """n がレゾルベント集合の条件 n > λ を満たさない場合の例外。"""

    def __init__(self, message: str, n: float, eigenvalue: float) -> None:
        """初期化メソッド。"""
        self.n = n
        self.eigenvalue = eigenvalue
        super().__init__(message)


class SingularStepError(DomainError):
    """前進代入で 1 - λ·w[j][j] がほぼ 0 になった場合の例外。

    Attributes:
        step (int): 問題の発生した時間ステップ
        mode (int | None): 問題の発生したモード (0 始まり、不明なら None)
    """

    def __init__(self, message: str, step: int, mode: int | None = None) -> None:
        """初期化メソッド。"""
        self.step = step
        self.mode = mode
        super().__init__(message)


class NumericError(DomainError):
    """求積や級数評価が数値的に破綻した場合の例外。"""

    def __init__(
        self, message: str = "Numeric failure", diagnostics: str | None = None
    ) -> None:
        """初期化メソッド。

        Args:
            message: エラーメッセージ
            diagnostics: グリッド幅などの診断情報
        """
        self.diagnostics = diagnostics
        if diagnostics:
            message = f"{message} ({diagnostics})"
        super().__init__(message)


class PreconditionError(DomainError):
    """演算の前提条件 (可積分性、モード指定など) が満たされない場合の例外。"""

    def __init__(self, message: str = "Precondition violated") -> None:
        """初期化メソッド。"""
        super().__init__(message)


class VerificationError(DomainError):
    """機械精度で成り立つべき構造的恒等式が破れた場合の例外。"""

    def __init__(self, message: str, discrepancy: float) -> None:
        """初期化メソッド。"""
        self.discrepancy = discrepancy
        super().__init__(message)


class ConfigError(DomainError):
    """実行設定が不正な場合の例外。

    Attributes:
        field_path (str): 問題のあるフィールドのパス (例: "kernel.alpha")
    """

    def __init__(self, message: str, field_path: str = "") -> None:
        """初期化メソッド。"""
        self.field_path = field_path
        if field_path:
            message = f"{field_path}: {message}"
        super().__init__(message)
