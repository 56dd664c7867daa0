"""Desk-scale test harness: stub behavior mechanisms, repository seeding,
and a load generator with latency percentiles."""

from .stubs import StaticContentServer, StubService, run_stub  # noqa: F401
from .seed import ContentModel, seed_repository  # noqa: F401
from .load import LoadProfile, LoadReport, run_load  # noqa: F401
