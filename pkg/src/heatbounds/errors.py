"""Exception hierarchy shared by all heatbounds modules."""


class HeatboundsError(Exception):
    """Base class for all errors raised by this package."""


class InputError(HeatboundsError):
    """Malformed or empty input data (grids, sample sets, ...)."""


class ParameterError(HeatboundsError):
    """Parameter combination outside the validity range of a formula."""


class EvaluationError(HeatboundsError):
    """A user-supplied evaluator returned a non-finite value."""


class CertificateError(HeatboundsError):
    """An operation required an admissible Lyapunov certificate."""


class RateError(HeatboundsError):
    """The Nash rate integral diverges for the given profile."""


class TruncationError(HeatboundsError):
    """The computational box does not capture enough invariant mass."""


class TwistError(HeatboundsError):
    """Exponential twist parameter too large for finite arithmetic."""


class SimError(HeatboundsError):
    """Too many simulated paths left the admissible region."""


class BandwidthError(HeatboundsError):
    """Kernel density estimation produced a degenerate bandwidth."""


class ConfigError(HeatboundsError):
    """Experiment configuration failed validation.

    Carries a list of field-level messages so the CLI can print them all.
    """

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))
