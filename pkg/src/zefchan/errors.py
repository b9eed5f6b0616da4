"""Exception hierarchy shared by every zefchan module."""


class ZefchanError(Exception):
    """Base class for all library errors."""


class ChannelError(ZefchanError, ValueError):
    pass


class EmptyTable(ChannelError):
    pass


class NonStochasticRow(ChannelError):
    pass


class NegativeEntry(ChannelError):
    pass


class IndexOutOfRange(ZefchanError, IndexError):
    pass


class InvalidDistribution(ZefchanError, ValueError):
    pass


class InvalidDisprover(ZefchanError, ValueError):
    pass


class MaxIterExceeded(ZefchanError):
    """Raised when Blahut-Arimoto hits ``max_iter``.

    The best result found so far is attached as ``result`` with
    ``converged=False``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class LengthMismatch(ZefchanError, ValueError):
    pass


class ImpossibleOutput(ZefchanError):
    """No codeword can produce the observed output; the transcript is corrupt."""


class BudgetExceeded(ZefchanError):
    pass


class NoValidCode(ZefchanError):
    pass


class NonterminatingConfig(ZefchanError):
    pass


class PhaseMismatch(ZefchanError):
    pass


class DegenerateConfig(ZefchanError, ValueError):
    pass


class RoundCapExceeded(ZefchanError):
    pass


class DegenerateSamples(ZefchanError, ValueError):
    pass


class ParseError(ZefchanError):
    pass


class IncompatibleArtifacts(ZefchanError):
    pass
