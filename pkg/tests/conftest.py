import random
from fractions import Fraction

import pytest

from contentcast.catalog import ContentObject, ServiceRequest


def random_scenario(rnd: random.Random, *, equal_deadlines=True, max_objects=7, max_users=6, force_shared=None):
    """Small scenario in which every catalog object is requested by someone.

    With ``equal_deadlines`` every request falls at the horizon T. Sharing
    (an object wanted by two or more users) can be forced on or off.
    """
    L = rnd.randint(1, max_objects)
    catalog = [ContentObject(i, rnd.randint(1, 400)) for i in range(L)]
    K = rnd.randint(2 if force_shared else 1, max_users)
    if force_shared is False:
        K = min(K, L)
        owners = [rnd.randrange(K) for _ in range(L)]
        for k in range(K):
            owners[k] = k
        sets = [{l for l in range(L) if owners[l] == k} for k in range(K)]
    else:
        sets = [set(rnd.sample(range(L), rnd.randint(1, L))) for _ in range(K)]
        for l in range(L):
            if not any(l in s for s in sets):
                sets[rnd.randrange(K)].add(l)
        if force_shared and not _shared(sets):
            l = rnd.randrange(L)
            for s in sets[:2]:
                s.add(l)
    T = Fraction(rnd.randint(1, 400), rnd.choice([1, 2, 4, 8]))
    if equal_deadlines:
        times = [T] * K
    else:
        times = [T * Fraction(rnd.randint(1, 64), 64) for _ in range(K)]
        times[rnd.randrange(K)] = T
    reqs = [ServiceRequest(k, times[k], frozenset(sets[k])) for k in range(K)]
    return catalog, reqs, T


def _shared(sets):
    seen = set()
    for s in sets:
        if seen & s:
            return True
        seen |= s
    return False


def has_shared_object(requests):
    return _shared([set(r.object_ids) for r in requests])


@pytest.fixture
def rnd():
    return random.Random(12345)


# acceptance reporting: one PASS/FAIL line per criterion, from real outcomes

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _ACCEPTANCE[n] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, verdict = _ACCEPTANCE[n]
        terminalreporter.write_line(f"{verdict} criterion {n}: {title}")
