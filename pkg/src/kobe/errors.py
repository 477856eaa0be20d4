"""Exception hierarchy.

Configuration problems (bad flags, missing config files) and data problems
(malformed or misaligned annotations, undefined scores) are kept apart so the
command line can map them to distinct exit codes.
"""


class KobeError(Exception):
    pass


class ConfigError(KobeError):
    pass


class DataError(KobeError):
    pass


class AnnotationParseError(DataError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = []
        if source is not None:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class SpanError(AnnotationParseError):
    """A mention whose offsets are negative or do not satisfy start < end."""

    def __init__(self, message, sentence_index, mention_index, line=None, source=None):
        self.sentence_index = sentence_index
        self.mention_index = mention_index
        super().__init__(
            f"sentence {sentence_index}, mention {mention_index}: {message}",
            line=line,
            source=source,
        )


class AlignmentError(DataError):
    def __init__(self, message, system=None):
        self.system = system
        super().__init__(message)


class UndefinedScoreError(DataError, ZeroDivisionError):
    """A ratio whose denominator is zero (no pivot or candidate entities)."""


class UndefinedCorrelationError(DataError):
    """Pearson correlation is undefined (constant input or too few points)."""
