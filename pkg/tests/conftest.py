import logging

import pytest


@pytest.fixture(autouse=True)
def _drop_cli_log_handlers():
    """CLI commands attach stderr handlers to the root logger; detach them between tests."""
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if type(handler) is logging.StreamHandler:
            root.removeHandler(handler)
