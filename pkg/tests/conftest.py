import numpy as np
import pytest

from shipbow import kernels

KERNEL_FUNCS = ("window_sums", "greedy_select", "smo_solve", "transfer_pass")


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    impl = kernels.BACKENDS[request.param]
    for name in KERNEL_FUNCS:
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    monkeypatch.setattr(kernels, "_impl", impl)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def blob_image(cx, cy, sigma=4.0, size=128):
    yy, xx = np.mgrid[0:size, 0:size]
    return np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2))


def rgb_from_gray(gray):
    g = np.clip(np.rint(np.asarray(gray) * 255), 0, 255).astype(np.uint8)
    return np.repeat(g[..., None], 3, axis=2)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A 3-class synthetic dataset with 12 images per class."""
    from shipbow.synthetic import generate_dataset

    root = tmp_path_factory.mktemp("small_syn")
    generate_dataset(root, seed=7, per_class=12)
    return root


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_report(request):
    """Record one ``ACCEPTANCE n PASS|FAIL|SKIP ...`` line for the run summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, passed, detail):
        status = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
        line = f"ACCEPTANCE {number} {status} {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
