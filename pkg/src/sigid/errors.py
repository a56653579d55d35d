"""Exception hierarchy shared by every stage of the pipeline."""


class SigidError(Exception):
    """Base class; the CLI turns these into one-line diagnostics."""


class EmptyImage(SigidError):
    pass


class BadWindow(SigidError, ValueError):
    pass


class EmptySignature(SigidError):
    pass


class NoInk(SigidError):
    pass


class NoTemplates(SigidError):
    pass


class DimensionMismatch(SigidError, ValueError):
    pass


class SchemaMismatch(SigidError):
    pass


class SingularCovariance(SigidError):
    pass


class DegenerateTrainingSet(SigidError):
    pass


class UnknownSubject(SigidError, KeyError):
    pass


class EmptyTrials(SigidError):
    pass


class IoFailure(SigidError, OSError):
    pass


class ParseError(SigidError):
    def __init__(self, message, *, line=None, field=None):
        self.detail = message
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


class SchemaVersionMismatch(SigidError):
    def __init__(self, kind, found, expected):
        super().__init__(
            f"{kind}: file has schema version {found}, this build reads version {expected}"
        )
        self.found = found
        self.expected = expected
