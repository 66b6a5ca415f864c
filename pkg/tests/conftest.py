"""Shared test setup.

The thread count must be pinned before numba is imported anywhere so the
determinism tests can switch between 1 and 4 workers on any host.
"""
import os

os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import warnings

import numba

warnings.filterwarnings("ignore", category=numba.NumbaWarning)
