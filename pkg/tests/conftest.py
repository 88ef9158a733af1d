import pytest

from suzuki_tower import pipeline as PL


@pytest.fixture(scope="session")
def ws(tmp_path_factory):
    """One workspace for the whole session, so each geometry is built once."""
    cache = tmp_path_factory.mktemp("cache")
    return PL.Workspace(PL.PipelineConfig(cache_dir=cache))
