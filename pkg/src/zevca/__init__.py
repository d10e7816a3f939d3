"""Zero-velocity complex action (ZEVCA) package

Local semiclassical propagation of the complex phase at a fixed position, in
real and imaginary time, with a split-operator grid solver as reference.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("zevca")
except PackageNotFoundError:
    __version__ = "unknown"

USER_AGENT = f"zevca/{__version__}"

import os

import sentry_sdk

# Bad user input, not defects; never reported
USER_INPUT_EXCEPTIONS = {"ConfigError", "ValidationError"}


def before_send(event, hint):
    """Drop events caused by invalid configuration files or flags."""
    if "exc_info" in hint:
        exc_type, exc_value, _ = hint["exc_info"]
        if exc_type is not None and exc_type.__name__ in USER_INPUT_EXCEPTIONS:
            return None
    return event


def init_error_reporting() -> bool:
    """Enable sentry-sdk when ZEVCA_SENTRY_DSN is set.

    Returns:
        True if error reporting was initialized.
    """
    dsn = os.getenv("ZEVCA_SENTRY_DSN")
    if not dsn:
        return False
    sentry_sdk.init(
        dsn=dsn,
        release=USER_AGENT,
        traces_sample_rate=0.0,
        send_default_pii=False,
        before_send=before_send,
    )
    return True
