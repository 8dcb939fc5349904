"""Exception hierarchy shared by the decoders and the analysis pipeline."""


class AutoComplyError(Exception):
    """Base class for every error raised by this package."""


# --- APK container --------------------------------------------------------

class NotAZipArchive(AutoComplyError):
    pass


class MissingManifest(AutoComplyError):
    pass


class CorruptEntry(AutoComplyError):
    pass


# --- binary XML -----------------------------------------------------------

class NotAxml(AutoComplyError):
    pass


class TruncatedChunk(AutoComplyError):
    pass


class StringPoolCorrupt(AutoComplyError):
    pass


# --- DEX ------------------------------------------------------------------

class BadMagic(AutoComplyError):
    pass


class TruncatedSection(AutoComplyError):
    pass


class BadIndex(AutoComplyError):
    pass


class CyclicHierarchy(AutoComplyError):
    pass


# --- text fixtures --------------------------------------------------------

class SchemaViolation(AutoComplyError):
    """A text fixture does not match the fixture schema.

    ``path`` points at the offending field, e.g. ``classes[0].methods[2].insns[1]``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


# --- analysis -------------------------------------------------------------

class BudgetExceeded(AutoComplyError):
    """Path exploration hit its state or step budget; the result is inconclusive."""
