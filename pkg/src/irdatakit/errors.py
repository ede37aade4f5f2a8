"""Exception hierarchy shared by every irdatakit module."""


class IRDatasetsError(Exception):
    """Base class for all errors raised by irdatakit."""


class SchemaViolation(IRDatasetsError):
    def __init__(self, field_name, reason):
        self.field_name = field_name
        self.reason = reason
        super().__init__(f"{field_name}: {reason}")


class UnknownField(IRDatasetsError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown field {name!r}")


class ParseError(IRDatasetsError):
    def __init__(self, context, message):
        self.context = context
        self.message = message
        if context is None:
            super().__init__(message)
        else:
            super().__init__(
                f"{context.source_name}:{context.line_number}: {message}")


class UnsupportedFormat(IRDatasetsError):
    def __init__(self, entity_type, fmt):
        self.entity_type = entity_type
        self.format = fmt
        super().__init__(f"format {fmt!r} not supported for {entity_type}")


class UnknownDataset(IRDatasetsError):
    def __init__(self, dataset_id, suggestions=()):
        self.dataset_id = dataset_id
        self.suggestions = list(suggestions)
        msg = f"unknown dataset {dataset_id!r}"
        if self.suggestions:
            msg += "; did you mean " + ", ".join(repr(s) for s in self.suggestions) + "?"
        super().__init__(msg)


class UnsupportedEntity(IRDatasetsError):
    def __init__(self, dataset_id, entity_type):
        self.dataset_id = dataset_id
        self.entity_type = entity_type
        super().__init__(f"{dataset_id} does not provide {entity_type}")


class FileMissing(IRDatasetsError, FileNotFoundError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"file not found: {path}")


class HashMismatch(IRDatasetsError):
    def __init__(self, expected, actual, path=None):
        self.expected = expected
        self.actual = actual
        self.path = path
        super().__init__(f"sha256 mismatch: expected {expected}, got {actual}")


class ManualFileRequired(IRDatasetsError):
    def __init__(self, instructions, dest=None):
        self.instructions = instructions
        self.dest = dest
        msg = instructions if dest is None else f"{instructions}\nPlace the file at: {dest}"
        super().__init__(msg)


class LicenseNotAccepted(IRDatasetsError):
    def __init__(self, notice):
        self.notice = notice
        super().__init__(
            "license terms must be accepted before downloading "
            "(answer 'yes' or pass --accept-licenses):\n" + notice)


class NetworkError(IRDatasetsError):
    pass


class StorageError(IRDatasetsError):
    pass


class DuplicateDocId(StorageError):
    def __init__(self, doc_id):
        self.doc_id = doc_id
        super().__init__(f"duplicate doc_id {doc_id!r}")


class IncompleteStore(StorageError):
    pass


class DocNotFound(IRDatasetsError, KeyError):
    def __init__(self, doc_id):
        self.doc_id = doc_id
        super().__init__(doc_id)

    def __str__(self):
        return f"document not found: {self.doc_id!r}"


class CorruptGzip(IRDatasetsError):
    def __init__(self, position, reason="corrupt gzip stream"):
        self.position = position
        super().__init__(f"{reason} at compressed byte {position}")


class OutOfRange(IRDatasetsError, IndexError):
    pass


class IndexMismatch(IRDatasetsError):
    def __init__(self, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(f"checkpoint index built for {expected}, file hashes to {actual}")


class InvalidSlice(IRDatasetsError, ValueError):
    pass
