import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from datagen import write_acic_dgp, write_ihdp_files, write_twins_file


@pytest.fixture(scope="session")
def ihdp_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("ihdp")
    write_ihdp_files(d, range(1, 11))
    return d


@pytest.fixture(scope="session")
def twins_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("twins")
    write_twins_file(d)
    return d


@pytest.fixture(scope="session")
def acic_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("acic")
    write_acic_dgp(d, dgp_id="dgp_a")
    return d
