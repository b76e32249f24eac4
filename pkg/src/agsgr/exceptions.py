"""Exception hierarchy shared across the package."""


class AGSGRError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(AGSGRError, ValueError):
    """Input file is malformed beyond the tolerated fraction of bad rows."""


class ConfigError(AGSGRError, ValueError):
    """A configuration value is missing or violates a precondition."""


class EmptyResult(AGSGRError):
    """No candidate group satisfies the query constraints."""


class UnknownUser(AGSGRError, KeyError):
    pass


class UnknownTopic(AGSGRError, KeyError):
    pass


class NoTopic(AGSGRError):
    pass


class NoTrainingData(AGSGRError):
    """No (group, positive, negative) triples could be built."""


class EmptyGroup(AGSGRError, ValueError):
    pass
