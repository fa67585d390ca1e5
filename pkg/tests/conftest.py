import numpy as np
import pytest

from localseg.data import SynthConfig, generate_synthetic_dataset


def nested_matmul(a, b):
    """Triple-loop reference product, summing left to right."""
    n, m = len(a), len(b[0])
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(len(b)):
                s += a[i][k] * b[k][j]
            out[i, j] = s
    return out


def random_binary(rng, shape, p=0.4, nonempty=True):
    m = (rng.random(shape) < p).astype(np.uint8)
    if nonempty and not m.any():
        m.flat[rng.integers(m.size)] = 1
    return m


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic_dataset(SynthConfig(size=16, per_class=6, seed=3))


@pytest.fixture(scope="session")
def default_dataset():
    return generate_synthetic_dataset(SynthConfig(seed=1))


@pytest.fixture(scope="session")
def trained_split0(default_dataset):
    """Default 2000-episode run holding out the first class (circle)."""
    from localseg.data import holdout_split
    from localseg.training import TrainConfig, train

    train_names, test_names = holdout_split(default_dataset.names, 0)
    result = train(default_dataset.subset(train_names), TrainConfig(seed=1))
    return train_names, test_names, result


class _Criterion:
    def __init__(self, sink, number, title):
        self.sink, self.number, self.title, self.detail = sink, number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        line = f"[{status}] criterion {self.number}: {self.title}"
        if self.detail:
            line += f" ({self.detail})"
        self.sink.append(line)
        print(line)
        return False


@pytest.fixture
def criterion(request):
    """Context manager recording one PASS/FAIL line per acceptance criterion."""
    sink = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])
    return lambda number, title: _Criterion(sink, number, title)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
