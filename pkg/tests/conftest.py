import logging

from hypothesis import settings

settings.register_profile("repro", derandomize=True, deadline=None, max_examples=60)
settings.load_profile("repro")


def pytest_configure(config):
    # truncation warnings are expected on some oracle runs
    logging.getLogger("relchaos.pde").setLevel(logging.ERROR)
