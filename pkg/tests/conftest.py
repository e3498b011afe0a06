import os

import numpy as np
import pytest
from httpx import ASGITransport, AsyncClient

os.environ["ENV"] = "test"
os.environ.setdefault("MML_THREADS", "2")

from app.main import app as fastapi_app  # noqa: E402
from app.services.datagen import Dataset  # noqa: E402


@pytest.fixture
async def client():
    transport = ASGITransport(app=fastapi_app)
    async with AsyncClient(transport=transport, base_url="http://test") as c:
        yield c


def make_dataset(x, y) -> Dataset:
    labels = np.asarray(y, dtype=np.int8)
    return Dataset(x=np.asarray(x, dtype=np.float64), y=labels, y_tilde=labels)


@pytest.fixture
def dataset_from():
    return make_dataset


@pytest.fixture
def two_point_data() -> Dataset:
    return make_dataset([[1.0, 0.0], [-1.0, 0.0]], [1, -1])


@pytest.fixture
def contradictory_data() -> Dataset:
    return make_dataset([[1.0, 0.0], [1.0, 0.0]], [1, -1])
