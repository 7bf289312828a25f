import numpy as np
import pytest

from fpmfft import SpeedFunction

_acceptance = []


def const_model(pid, speed, xs, ys):
    """Speed function with the same speed at every (x, y) of the grid."""
    return SpeedFunction.from_speeds(pid, {(x, y): speed for x in xs for y in ys})


def random_model(rng, pid, n, ys=None, dips=True):
    """Random discrete model at ``y = n`` (and optional extra lengths), speeds in [1, 100]."""
    ys = [n] if ys is None else ys
    speeds = {}
    for y in ys:
        k = int(rng.integers(1, n + 1))
        xs = np.sort(rng.choice(np.arange(1, n + 1), size=k, replace=False))
        s = rng.uniform(1, 100, size=k)
        if dips and k > 2:
            hit = rng.random(k) < 0.2
            s[hit] = rng.uniform(1, 3, size=int(hit.sum()))
        speeds.update({(int(x), y): float(v) for x, v in zip(xs, s)})
    return SpeedFunction.from_speeds(pid, speeds)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _acceptance.append((marker.args[0], rep.outcome.upper(), item.function.__doc__.strip().splitlines()[0]))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome, title in sorted(_acceptance, key=lambda r: int(r[0][2:])):
        terminalreporter.write_line(f"{'PASS' if outcome == 'PASSED' else 'FAIL'}  {label}  {title}")
