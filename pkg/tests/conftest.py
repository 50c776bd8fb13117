# tests/conftest.py
import pytest

from src.config import HashConfig

SC_KEY = bytes(range(16))


@pytest.fixture
def sc_key() -> bytes:
    return SC_KEY


@pytest.fixture
def h128() -> HashConfig:
    return HashConfig()


@pytest.fixture
def h32() -> HashConfig:
    return HashConfig(key_bits=32)


@pytest.fixture
def h12() -> HashConfig:
    return HashConfig(key_bits=12)
