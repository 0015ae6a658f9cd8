"""カウンタベース乱数 (Philox) による Wiener 増分のサンプリング。

ストリームは (seed, path, mode) をキーに生成するので、パスやモードの
分割・並列化・チャンク分けに関係なく同じ増分が得られます。
"""

import logging

import numpy as np

from stochastic_volterra.domain.entities import WienerBundle, WienerEnsemble
from stochastic_volterra.domain.exceptions import PreconditionError
from stochastic_volterra.domain.values import FloatArray, TimeGrid

logger = logging.getLogger(__name__)


def stream(seed: int, path: int, mode: int) -> np.random.Generator:
    """(seed, path, mode) に対応する独立な乱数ストリームを返します。"""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(path, mode))
    return np.random.Generator(np.random.Philox(sequence))


def _validate(modes: int, seed: int) -> None:
    if modes < 1:
        msg = f"modes must be >= 1, got {modes}"
        raise PreconditionError(msg)
    if seed < 0:
        msg = f"seed must be >= 0, got {seed}"
        raise PreconditionError(msg)


def _path_increments(grid: TimeGrid, modes: int, seed: int, path: int) -> FloatArray:
    scale = np.sqrt(grid.dt)
    out = np.empty((modes, grid.steps))
    for mode in range(modes):
        out[mode] = stream(seed, path, mode).standard_normal(grid.steps) * scale
    return out


def sample_bundle(grid: TimeGrid, modes: int, seed: int, path: int = 0) -> WienerBundle:
    """1 パス分の N(0, dt) 増分を生成します。

    Args:
        grid: 時間グリッド
        modes: ノイズモード数 I (>= 1)
        seed: 乱数シード (>= 0)
        path: パス番号

    Returns:
        WienerBundle: 形状 (modes, steps) の増分
    """
    _validate(modes, seed)
    return WienerBundle(
        grid=grid,
        seed=seed,
        increments=_path_increments(grid, modes, seed, path),
        path=path,
    )


def sample_ensemble(
    grid: TimeGrid, modes: int, seed: int, paths: int, first_path: int = 0
) -> WienerEnsemble:
    """パス first_path .. first_path + paths - 1 の増分をまとめて生成します。"""
    _validate(modes, seed)
    if paths < 1:
        msg = f"paths must be >= 1, got {paths}"
        raise PreconditionError(msg)
    increments = np.empty((paths, modes, grid.steps))
    for p in range(paths):
        increments[p] = _path_increments(grid, modes, seed, first_path + p)
    logger.debug(
        "Sampled ensemble: seed=%d, paths=%d..%d, modes=%d, steps=%d",
        seed,
        first_path,
        first_path + paths - 1,
        modes,
        grid.steps,
    )
    return WienerEnsemble(
        grid=grid, seed=seed, increments=increments, first_path=first_path
    )
