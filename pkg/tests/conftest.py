import pytest
from scenarios import golden_bundle

from factpipe.config import PipelineConfig


@pytest.fixture
def make_offline(tmp_path):
    """Save a bundle and return an offline config pointing at it."""
    counter = {"n": 0}

    def _make(bundle=None, **overrides):
        counter["n"] += 1
        root = tmp_path / f"run{counter['n']}"
        (bundle or golden_bundle()).save(root / "fixtures")
        return PipelineConfig(offline_mode=True, fixtures_dir=str(root / "fixtures"),
                              data_dir=str(root / "data"), **overrides)

    return _make
