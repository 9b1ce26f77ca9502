"""
Иерархия исключений пакета swb
"""


class SwbError(Exception):
    """Базовое исключение: хранит имя модуля, в котором произошла ошибка"""

    module = "swb"


class TextprocError(SwbError):
    module = "textproc"


class IsaError(SwbError):
    module = "isa"


class WellbeingError(SwbError):
    module = "wellbeing"


class LeadLagError(SwbError):
    module = "leadlag"


class NoOverlapError(LeadLagError):
    """Интервалы наблюдений двух рядов не пересекаются"""


class StatsError(SwbError):
    module = "stats"


class SynthError(SwbError):
    module = "synth"


class ConfigError(SwbError):
    module = "cli"


class UncoveredCorpusError(IsaError):
    """Ни один тестовый документ не попал в векторы обучающего корпуса"""
