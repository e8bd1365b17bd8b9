import pytest

from helpers import (example1_instance, example2_instance, example3_instance)


@pytest.fixture
def example1():
    return example1_instance()


@pytest.fixture
def example2():
    return example2_instance()


@pytest.fixture
def example2_gf2():
    return example2_instance(characteristic=2)


@pytest.fixture
def example3():
    return example3_instance()
