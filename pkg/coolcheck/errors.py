"""Exception classes raised by Coolcheck.

Every error the library raises derives from :class:`CoolcheckError`, so callers
(the CLI in particular) can map them to a single exit code.
"""
from typing import List, NamedTuple, Optional


__all__ = [
    'CoolcheckError',
    'TermSyntaxError',
    'Diagnostic',
    'SpecError',
    'BudgetError',
    'FrontierError',
    'LaxModelError',
    'TechniqueError',
    'CertificateError',
    'ReportSignatureError',
    'UsageError',
    ]


class CoolcheckError(Exception):
    """Base class for all Coolcheck errors.
    """


class TermSyntaxError(CoolcheckError):
    """Raised when a term cannot be parsed or does not fit the signature.
    """
    def __init__(self, message: str, line: Optional[int]=None,
                 column: Optional[int]=None, code: str='syntax'):
        self.code = code
        self.line = line
        self.column = column
        if line is not None:
            message = f'{message} (line {line}, column {column})'
        super().__init__(message)


class Diagnostic(NamedTuple):
    code: str
    message: str
    rule: Optional[str] = None
    line: Optional[int] = None

    def __str__(self):
        where = f' in rule {self.rule}' if self.rule else ''
        at = f' (line {self.line})' if self.line else ''
        return f'{self.code}{where}{at}: {self.message}'


class SpecError(CoolcheckError):
    """Raised when a language specification violates the positive GSOS
    format. Carries every diagnostic found, not just the first.
    """
    def __init__(self, diagnostics: List[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__('; '.join(str(d) for d in self.diagnostics))


class BudgetError(CoolcheckError):
    """Raised when an exploration budget is unusable (e.g. zero states).
    """


class FrontierError(CoolcheckError):
    """Raised when a computation needs transitions of a state whose outgoing
    transitions were never computed.
    """
    def __init__(self, state, message: str='frontier state encountered'):
        self.state = state
        super().__init__(f'{message}: {state}')


class LaxModelError(CoolcheckError):
    """Raised when a lax-model check is asked about an LTS without term
    states.
    """


class TechniqueError(CoolcheckError):
    """Raised for malformed or inapplicable up-to technique expressions.
    """


class CertificateError(CoolcheckError):
    """Raised when a certificate file is malformed.
    """


class ReportSignatureError(CoolcheckError):
    """Raised when a signed report fails verification.
    """


class UsageError(CoolcheckError):
    """Raised when command-line flags fail validation.
    """
    def __init__(self, message: str, errors: Optional[dict]=None):
        self.errors = errors or {}
        super().__init__(message)
