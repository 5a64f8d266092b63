import hypothesis
import pytest

from framefuse.autodiff import set_debug_checks

hypothesis.settings.register_profile(
    "framefuse", deadline=None, max_examples=50, derandomize=True)
hypothesis.settings.load_profile("framefuse")


@pytest.fixture(autouse=True, scope="session")
def debug_checks():
    set_debug_checks(True)
    yield
    set_debug_checks(False)
