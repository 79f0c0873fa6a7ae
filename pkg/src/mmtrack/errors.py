"""Exception hierarchy shared by every stage of the pipeline."""


class MMTrackError(Exception):
    pass


class ParseError(MMTrackError):
    pass


class ValidationError(MMTrackError, ValueError):
    """Config or script invariant violated. ``field`` names the offender."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class DomainError(MMTrackError, ValueError):
    pass


class AmbiguityError(DomainError):
    pass


class CapacityError(MMTrackError, ValueError):
    pass


class StaleError(MMTrackError):
    pass


class EmptyError(MMTrackError, ValueError):
    pass


class HistoryError(MMTrackError):
    pass


class NotifierError(MMTrackError):
    pass


class InsufficientData(MMTrackError, ValueError):
    pass


class ScriptError(ValidationError):
    pass


class AlignmentError(MMTrackError, ValueError):
    pass
