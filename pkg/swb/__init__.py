"""
swb: оценка распределений мнений по текстам, индекс социального благополучия,
запаздывания между асинхронными рядами, канонические корреляции и регрессии
"""
from .errors import (ConfigError, IsaError, LeadLagError, NoOverlapError, StatsError, SwbError, SynthError,
                     TextprocError, WellbeingError)

__version__ = "0.1.0"

__all__ = [
    'SwbError',
    'TextprocError',
    'IsaError',
    'WellbeingError',
    'LeadLagError',
    'NoOverlapError',
    'StatsError',
    'SynthError',
    'ConfigError',
]
