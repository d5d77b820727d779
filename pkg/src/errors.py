"""Excepciones del solver. El CLI traduce ConfigError -> 2 y NumericalFailure -> 3."""
from typing import Optional


class ShockFcError(Exception):
    pass


class ConfigError(ShockFcError):
    pass


class FcAssetError(ShockFcError):
    pass


class WeightFileError(ShockFcError):
    pass


class GridMismatchError(ShockFcError):
    pass


class VacuumError(ShockFcError):
    pass


class NumericalFailure(ShockFcError):
    def __init__(self, message: str, step: Optional[int] = None, time: Optional[float] = None,
                 field: Optional[str] = None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.field = field

    def __str__(self):
        base = super().__str__()
        extra = []
        if self.step is not None:
            extra.append(f'step={self.step}')
        if self.time is not None:
            extra.append(f't={self.time:.6g}')
        if self.field:
            extra.append(f'field={self.field}')
        return f"{base} ({', '.join(extra)})" if extra else base


class StateValidityError(NumericalFailure):
    def __init__(self, message: str, index=None, **kw):
        super().__init__(message, **kw)
        self.index = index


class TrainingDivergedError(NumericalFailure):
    pass
