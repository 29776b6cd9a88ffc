import shutil

import pytest


@pytest.fixture(scope="session")
def decoder_cli():
    """Path of the decoder command line; the external contract under test."""
    path = shutil.which("tpclab")
    if path is None:
        pytest.skip("decoder CLI not on PATH")
    return path
