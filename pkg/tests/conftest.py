import numpy as np
import pytest

from vemstokes.polymesh import FAMILIES, generate


def sample_cells(count, seed=0):
    """Vertex arrays of ``count`` cells drawn evenly from all five families."""
    rng = np.random.default_rng(seed)
    per = -(-count // len(FAMILIES))
    out = []
    for i, fam in enumerate(FAMILIES):
        mesh = generate("square", fam, int(rng.integers(4, 8)), seed=int(rng.integers(1000)))
        picks = rng.choice(mesh.n_cells, size=min(per, mesh.n_cells), replace=False)
        out += [(fam, mesh.cell_vertices(int(k))) for k in picks]
    return out[:count]


@pytest.fixture(scope="session")
def random_cells():
    return sample_cells(60, seed=2024)


@pytest.fixture(scope="session")
def pentagon():
    return np.array([[0.0, 0.0], [1.0, 0.1], [1.3, 0.8], [0.5, 1.2], [-0.2, 0.7]])


@pytest.fixture(scope="session")
def nonconvex_cell():
    # arrow-shaped hexagon with a reflex vertex
    return np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.5, 0.4], [0.0, 1.0], [-0.1, 0.5]])


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per criterion and fail the test on a red criterion."""
    lines = request.config.acceptance_lines

    def report(number, title, checks, seconds, budget):
        checks = list(checks) + [(f"runtime {seconds:.1f}s < {budget}s", seconds < budget, "")]
        ok = all(c[1] for c in checks)
        head = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}"
        body = [f"    [{'ok' if passed else 'XX'}] {name} {detail}".rstrip()
                for name, passed, detail in checks]
        lines.append("\n".join([head, *body]))
        print(lines[-1])
        failed = [c[0] for c in checks if not c[1]]
        assert not failed, f"criterion {number} failed: {failed}"

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for block in sorted(config.acceptance_lines, key=lambda b: int(b.split()[1])):
            terminalreporter.write_line(block)
