"""Signed check reports.

A report is serialized with :class:`itsdangerous.URLSafeSerializer` so that a
verdict can be passed around and later checked against the signing key.
"""
from typing import Any, Union

from itsdangerous import BadData, URLSafeSerializer
from starlette.datastructures import Secret

from coolcheck.errors import ReportSignatureError


__all__ = ['REPORT_SALT', 'sign_report', 'load_signed_report']


REPORT_SALT = 'coolcheck-report'


def _serializer(secret_key: Union[str, Secret]) -> URLSafeSerializer:
    # handle Secret instances
    if isinstance(secret_key, Secret):
        secret_key = str(secret_key)
    if not secret_key:
        raise ReportSignatureError('The signing key is missing.')
    return URLSafeSerializer(secret_key, salt=REPORT_SALT)


def sign_report(payload: Any, secret_key: Union[str, Secret]) -> str:
    """Return a signed token carrying ``payload``.

    Args:
      payload: Any JSON-serializable value, usually a report's ``to_json()``.
      secret_key (str or Secret): The signing key.

    Returns:
      str: The URL-safe signed token.

    """
    return _serializer(secret_key).dumps(payload)


def load_signed_report(token: str, secret_key: Union[str, Secret]) -> Any:
    """Verify ``token`` and return the payload it carries.

    Raises:
      ReportSignatureError: If the token is missing or fails verification.

    """
    if not token:
        raise ReportSignatureError('The report token is missing.')

    try:
        return _serializer(secret_key).loads(token.strip())
    except BadData:
        raise ReportSignatureError('The report signature is invalid.') from None
