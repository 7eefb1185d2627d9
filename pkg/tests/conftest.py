import os
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent

# Paths probed for the fetched kidney-disease table (see README / fetch-data).
CKD_CANDIDATES = (
    os.environ.get("DINET_CKD_ARFF"),
    REPO_ROOT / "data" / "ckd" / "chronic_kidney_disease_full.arff",
    REPO_ROOT / "data" / "ckd" / "chronic_kidney_disease.arff",
)


def ckd_path():
    for cand in CKD_CANDIDATES:
        if cand and Path(cand).exists():
            return Path(cand)
    return None


@pytest.fixture(scope="session")
def ckd_arff():
    path = ckd_path()
    if path is None:
        pytest.skip("kidney-disease dataset not fetched (run: dinet fetch-data)")
    return path
