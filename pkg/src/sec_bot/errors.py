class SecError(Exception):
    pass


class MalformedObservationError(SecError, ValueError):
    pass


class ContractViolation(SecError):
    """An operation was invoked outside its contract (e.g. a non-incident fed to the balancer)."""


class MilestoneRangeError(SecError, IndexError):
    pass


class PersistenceError(SecError):
    pass


class FormatVersionError(PersistenceError):
    pass


class ChecksumError(PersistenceError):
    def __init__(self, path, expected: str, actual: str):
        super().__init__(f"checksum mismatch in {path}: expected {expected}, got {actual}")
        self.path = path


class TruncatedFileError(PersistenceError):
    pass


class StateSpaceMismatchError(PersistenceError):
    pass


class CatalogueLayoutError(PersistenceError):
    """The catalogue directory does not match its manifest."""


class MissingCatalogueFileError(CatalogueLayoutError, FileNotFoundError):
    def __init__(self, path):
        super().__init__(f"catalogue file missing: {path}")
        self.path = path


class NonContiguousIndexError(CatalogueLayoutError):
    pass


class MissingResultsError(SecError, FileNotFoundError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("missing result files: " + ", ".join(str(m) for m in self.missing))
