import pytest
from pydantic import ValidationError

from app.core.config import Settings


def _settings(**overrides) -> Settings:
    return Settings(ENV="test", **overrides)


def test_blank_thread_count_means_all_cores(monkeypatch) -> None:
    monkeypatch.setattr("app.core.config.os.cpu_count", lambda: 8)
    settings = _settings(MML_THREADS="  ")
    assert settings.threads is None
    assert settings.thread_cap() == 8


def test_thread_cap_clamps_requested_workers() -> None:
    settings = _settings(MML_THREADS=4)
    assert settings.thread_cap() == 4
    assert settings.thread_cap(2) == 2
    assert settings.thread_cap(16) == 4
    assert settings.thread_cap(0) == 1


def test_log_level_is_normalized() -> None:
    assert _settings(MML_LOG_LEVEL=" debug ").log_level == "DEBUG"


def test_unknown_log_level_is_rejected() -> None:
    with pytest.raises(ValidationError):
        _settings(MML_LOG_LEVEL="chatty")


@pytest.mark.parametrize(
    "overrides",
    [
        {"MML_THREADS": 0},
        {"MML_DEFAULT_TRIALS": 0},
        {"MML_M_TEST": 99},
        {"MML_MAX_REQUEST_BYTES": 512},
        {"MML_MAX_SPEC_REQUEST_BYTES": 512},
        {"MML_API_MAX_TASKS": 0},
    ],
)
def test_limits_are_validated(overrides) -> None:
    with pytest.raises(ValidationError):
        _settings(**overrides)


def test_spec_request_cap_never_exceeds_the_general_cap() -> None:
    assert _settings().spec_request_cap() == 64 * 1024
    assert _settings(MML_MAX_REQUEST_BYTES=4096).spec_request_cap() == 4096


def test_local_env_detection() -> None:
    assert _settings().is_local_env()
    assert not Settings(ENV="production").is_local_env()
