import pytest

from gaitbo.pipeline import desk_scale_config, run_full_pipeline


@pytest.fixture(scope="session")
def desk_cfg():
    return desk_scale_config()


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory, desk_cfg):
    """One full desk-scale pipeline run shared by every test that needs it."""
    out = tmp_path_factory.mktemp("desk_run")
    paths = run_full_pipeline(desk_cfg, str(out))
    return {"out": str(out), "paths": paths}
