"""実引数の Mittag-Leffler 関数 E_α(z) = Σ_k z^k / Γ(αk + 1)。

Volterra ソルバーとは独立に評価し、分数カーネルのレゾルベントの検算に使います。
"""

import math
from typing import Final

import numpy as np
from scipy import special

from stochastic_volterra.domain.exceptions import UnsupportedOperationError
from stochastic_volterra.domain.values import FloatArray

# 級数の最大項はおよそ exp(|z|^{1/α})。打ち消し誤差を抑えるための上限
SERIES_RADIUS: Final[float] = 20.0
# 正の z では項のオーバーフローだけが制約
POSITIVE_RADIUS: Final[float] = 650.0

_MAX_SERIES_TERMS: Final[int] = 5000
_MAX_ASYMPTOTIC_TERMS: Final[int] = 80


def _series(alpha: float, z: float) -> float:
    log_z = math.log(abs(z))
    negative = z < 0.0
    peak = abs(z) ** (1.0 / alpha) / alpha
    terms: list[float] = [1.0]
    for k in range(1, _MAX_SERIES_TERMS):
        magnitude = math.exp(k * log_z - float(special.gammaln(alpha * k + 1.0)))
        terms.append(-magnitude if negative and k % 2 else magnitude)
        if k > peak and magnitude < 1e-17 * max(1.0, abs(terms[0])):
            break
    return math.fsum(terms)


def _asymptotic(alpha: float, z: float) -> float:
    """z → -∞ (0 < α < 1) の漸近展開 -Σ_{k>=1} z^{-k}/Γ(1 - αk) (最小項で打ち切り)。"""
    terms: list[float] = []
    previous = math.inf
    for k in range(1, _MAX_ASYMPTOTIC_TERMS):
        term = -(z ** (-k)) * float(special.rgamma(1.0 - alpha * k))
        size = abs(term)
        if size > previous and size != 0.0:
            break
        terms.append(term)
        if size != 0.0:
            previous = size
    return math.fsum(terms)


def mittag_leffler(alpha: float, z: float) -> float:
    """E_α(z) を評価します。

    Args:
        alpha: 次数 α ∈ (0, 2)
        z: 実引数

    Returns:
        float: E_α(z)

    Raises:
        UnsupportedOperationError: α や z が対応範囲外の場合
    """
    if not (0.0 < alpha < 2.0) or not math.isfinite(z):
        msg = (
            "mittag_leffler supports alpha in (0, 2) and finite z, got "
            f"alpha={alpha}, z={z}"
        )
        raise UnsupportedOperationError(msg)
    if z == 0.0:
        return 1.0
    if alpha == 1.0:
        return math.exp(z)

    radius = abs(z) ** (1.0 / alpha)
    if z > 0.0:
        if radius > POSITIVE_RADIUS:
            msg = f"E_{alpha}({z}) overflows double precision"
            raise UnsupportedOperationError(msg)
        return _series(alpha, z)
    if radius <= SERIES_RADIUS:
        return _series(alpha, z)
    if alpha < 1.0:
        return _asymptotic(alpha, z)
    msg = (
        f"E_{alpha}({z}) is outside the supported range (|z|^(1/alpha) > "
        f"{SERIES_RADIUS})"
    )
    raise UnsupportedOperationError(msg)


def mittag_leffler_curve(alpha: float, lam: float, t: FloatArray) -> FloatArray:
    """E_α(λ t^α) をグリッド上で返します (分数カーネルのスカラーレゾルベント)。"""
    return np.array([mittag_leffler(alpha, lam * float(ti) ** alpha) for ti in t])
