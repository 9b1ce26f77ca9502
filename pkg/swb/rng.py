"""
Переносимый генератор случайных чисел.

Philox4x64-10 с ключом (seed, stream): поток полностью задаётся парой целых чисел
и опубликованными константами алгоритма. Равномерные числа берутся из старших
52 бит сырых 64-битных слов, нормальные - через обратную функцию распределения.
"""
import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_SCALE = float(1 << 52)


class PortableRandom:
    """Детерминированный поток случайных чисел для генераторов и бутстрепа"""

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or stream < 0:
            raise ValueError("seed and stream must be non-negative")
        self.seed = int(seed)
        self.stream = int(stream)
        key = np.array([self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        self._bit_generator = np.random.Philox(key=key)

    def uniform(self, size) -> np.ndarray:
        """Равномерные числа строго внутри (0, 1)"""
        count = int(np.prod(size))
        raw = self._bit_generator.random_raw(count)
        values = ((raw >> np.uint64(12)).astype(np.float64) + 0.5) / _SCALE
        return values.reshape(size)

    def normal(self, size) -> np.ndarray:
        """Стандартные нормальные числа: ndtri от равномерных"""
        return ndtri(self.uniform(size))

    def integers(self, high: int, size) -> np.ndarray:
        """Целые числа из [0, high) через равномерные"""
        values = np.floor(self.uniform(size) * high).astype(np.int64)
        return np.minimum(values, high - 1)

    def categorical(self, probs, size: int) -> np.ndarray:
        """Индексы категорий с вероятностями probs"""
        cumulative = np.cumsum(np.asarray(probs, dtype=float))
        cumulative /= cumulative[-1]
        index = np.searchsorted(cumulative, self.uniform(size), side="right")
        return np.minimum(index, len(cumulative) - 1)
