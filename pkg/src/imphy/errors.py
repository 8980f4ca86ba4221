"""Exception hierarchy shared by every module.

Each class carries a stable ``code`` used as the prefix of CLI error lines.
"""


class ImphyError(Exception):
    code = "E_IMPHY"


class InvalidOrderError(ImphyError, ValueError):
    code = "E_ORDER"


class DomainError(ImphyError, ValueError):
    code = "E_DOMAIN"


class UsageError(ImphyError, ValueError):
    code = "E_USAGE"


class CapacityError(ImphyError, ValueError):
    code = "E_CAPACITY"


class NotACodewordError(ImphyError, ValueError):
    code = "E_NOT_CODEWORD"
