"""Session plumbing for the extractor tests.

Hub access is disabled up front so a wrong model path fails fast instead of
probing the network, and transformers chatter is silenced so pytest output
stays readable. The miniature backbones under ``fixtures`` are regenerated
by ``make_fixtures.py``.
"""

from __future__ import annotations

import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")

import pytest


@pytest.fixture(scope="session", autouse=True)
def _quiet_transformers():
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()
