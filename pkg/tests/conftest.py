import numpy as np
import pytest

from mcfndgen import GenConfig, Pcg32, Topology, generate

_ACCEPTANCE: dict[str, str] = {}


def record_acceptance(name: str, detail: str = "") -> None:
    """Mark an acceptance criterion as passed (failures surface via pytest)."""
    _ACCEPTANCE[name] = detail


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        detail = _ACCEPTANCE[name]
        suffix = f"  ({detail})" if detail else ""
        terminalreporter.write_line(f"PASS  {name}{suffix}")


@pytest.fixture(scope="session")
def analog_r05():
    """A 10-node, 60-arc, 25-commodity instance (ring plus random chords).

    Capacities sit comfortably above the total demand volume so that
    moderate multiplicative spreads keep every scenario routable.
    """
    config = GenConfig(
        topology=Topology.CIRCULAR,
        node_count=10,
        commodity_count=25,
        extra_random_arcs=40,
        dem_min=10.0,
        dem_max=100.0,
        cap_min=1500.0,
        cap_max=3000.0,
        fix_min=50.0,
        fix_max=200.0,
        var_min=1.0,
        var_max=10.0,
    )
    instance = generate(config, Pcg32(4567, 1234))
    assert (instance.node_count, instance.arc_count, instance.commodity_count) == (10, 60, 25)
    return instance


@pytest.fixture
def tiny_instance():
    """2 nodes, 1 arc, 1 commodity: the smallest meaningful instance."""
    from mcfndgen import Commodity, DetInstance, Graph

    return DetInstance(
        graph=Graph(node_count=2, arcs=((0, 1),)),
        commodities=(Commodity(0, 1, 40.0),),
        fixed_cost=np.array([100.0]),
        capacity=np.array([50.0]),
        var_cost=np.array([[3.0]]),
    )
