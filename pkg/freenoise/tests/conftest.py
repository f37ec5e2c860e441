def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: long sampling runs, deselect with -m 'not slow'")
