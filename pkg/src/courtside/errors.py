"""Exception and warning types shared across the package."""


class CourtsideError(Exception):
    """Base class for every error raised by this package."""


class EmptyInput(CourtsideError):
    pass


class DimensionMismatch(CourtsideError):
    pass


class DecodeError(CourtsideError):
    def __init__(self, path, reason=""):
        self.path = str(path)
        msg = f"cannot decode {self.path}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class InvalidTarget(CourtsideError):
    pass


class ShapeMismatch(CourtsideError):
    pass


class IndexGap(ShapeMismatch):
    """Motion maps need frames that are adjacent in the sampled sequence."""


class BackboneError(CourtsideError):
    def __init__(self, frame_index, reason=""):
        self.frame_index = frame_index
        super().__init__(f"feature backbone failed on frame {frame_index}: {reason}")


class TooFewSamples(CourtsideError):
    pass


class DegenerateLabels(CourtsideError):
    pass


class InvalidGeometry(CourtsideError):
    pass


class MissingMetric(CourtsideError):
    pass


class DegenerateVariance(CourtsideError):
    pass


class DuplicateClip(CourtsideError):
    pass


class ParseError(CourtsideError):
    def __init__(self, msg, line=None):
        self.line = line
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)


class TooFewClips(CourtsideError):
    pass


class CourtsideWarning(UserWarning):
    pass


class DegenerateLabelsWarning(CourtsideWarning):
    pass


class EmptyTextWarning(CourtsideWarning):
    pass


class EmptyAfterStripWarning(CourtsideWarning):
    pass
