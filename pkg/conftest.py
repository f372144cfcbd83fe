# pytest_plugins must be declared in the rootdir conftest
pytest_plugins = "datalad_next.tests.fixtures"

from pathlib import Path

import pytest


@pytest.hookimpl(tryfirst=True)
def pytest_ignore_collect(collection_path, config):
    # datalad's pytest plugin answers this firstresult hook with False for
    # every directory, which would bypass pytest's own --ignore handling
    ignore = [Path(p).absolute() for p in config.getoption("ignore") or []]
    if any(collection_path == p or p in collection_path.parents
           for p in ignore):
        return True
    return None
