import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rtgl import _backend  # noqa: E402

BACKENDS = ["python"] + (["compiled"] if _backend.BACKEND_NAME == "compiled" else [])

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sbm_config_path():
    return ROOT / "data" / "sbm_200_2c.toml"


@pytest.fixture(scope="session")
def sbm_run(tmp_path_factory):
    """One full run of the committed synthetic benchmark, shared across tests."""
    from rtgl.pipeline import load_config, run_pipeline

    out = tmp_path_factory.mktemp("sbm_run")
    cfg = load_config(ROOT / "data" / "sbm_200_2c.toml", out_dir=str(out))
    return cfg, run_pipeline(cfg)


# Acceptance tests record one verdict per criterion here; printed after the run.
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        verdict, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{verdict}] {n}. {title}: {detail}")
