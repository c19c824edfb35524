import pytest

from mrspline.problems import MassSpringChain, build_chain_ivp, modal_solution

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def chain():
    return MassSpringChain.reference()


@pytest.fixture(scope="session")
def chain_ivp(chain):
    return build_chain_ivp(chain, 0.0, 40.0)


@pytest.fixture(scope="session")
def chain_exact(chain):
    return modal_solution(chain)


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects (criterion, passed, detail) verdicts for the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_ACCEPTANCE, [])
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(log, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
