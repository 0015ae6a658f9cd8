"""対角作用素 A のモードごとのスカラー (吉田近似 A_n, J_n = nR(n, A), 半群)。"""

import math

import numpy as np

from stochastic_volterra.domain.exceptions import (
    PreconditionError,
    ResolventSetError,
    ShapeError,
)
from stochastic_volterra.domain.values import FloatArray, HVector, SpectralOperator


def apply(op: SpectralOperator, v: HVector) -> HVector:
    """Av を固有基底の座標ごとの積で計算します。

    Raises:
        ShapeError: 次元が一致しない場合
    """
    if v.dimension != op.dimension:
        msg = (
            f"vector dimension {v.dimension} does not match operator dimension "
            f"{op.dimension}"
        )
        raise ShapeError(msg)
    return HVector(coeffs=op.eigenvalues * v.coeffs)


def _check_resolvent_set(n: float, lam: float) -> None:
    if not n > lam:
        msg = f"n={n} must exceed the eigenvalue {lam} (resolvent set condition)"
        raise ResolventSetError(msg, n=n, eigenvalue=lam)


def yosida_scalar(n: float, lam: float) -> float:
    """A_n = n²R(n, A) - nI の固有値 nλ/(n - λ)。

    Raises:
        ResolventSetError: n <= λ の場合
    """
    _check_resolvent_set(n, lam)
    return n * lam / (n - lam)


def j_scalar(n: float, lam: float) -> float:
    """J_n = nR(n, A) の固有値 n/(n - λ)。"""
    _check_resolvent_set(n, lam)
    return n / (n - lam)


def semigroup_scalar(t: float, lam: float) -> float:
    """半群 e^{tA} の固有値 e^{λt}。"""
    if t < 0.0:
        msg = f"t must be >= 0, got {t}"
        raise PreconditionError(msg)
    return math.exp(lam * t)


def yosida_eigenvalues(op: SpectralOperator, n: float) -> FloatArray:
    """A_n の固有値列。"""
    _check_resolvent_set(n, op.omega)
    return n * op.eigenvalues / (n - op.eigenvalues)


def j_eigenvalues(op: SpectralOperator, n: float) -> FloatArray:
    """J_n の固有値列。"""
    _check_resolvent_set(n, op.omega)
    return n / (n - op.eigenvalues)


def graph_norms(op: SpectralOperator, values: FloatArray) -> FloatArray:
    """最終軸をモード座標とみなしてグラフノルム |x|_{D(A)} を返します。"""
    weights = np.sqrt(1.0 + op.eigenvalues**2)
    return np.asarray(np.linalg.norm(values * weights, axis=-1))
