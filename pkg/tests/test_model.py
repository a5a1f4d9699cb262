import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcfndgen import (
    Commodity,
    ConfigError,
    DetInstance,
    GenConfig,
    Graph,
    ParamFamily,
    Pcg32,
    RandomizationSelection,
    ScenarioMatrix,
    Topology,
    flatten,
    generate,
    node_balance,
    total_volume,
    validate,
)
from mcfndgen.formats import write_std


def _instance(n_nodes, arcs, commodities, **kwargs):
    n_a, n_k = len(arcs), len(commodities)
    defaults = dict(
        fixed_cost=np.ones(n_a),
        capacity=np.ones(n_a),
        var_cost=np.ones((n_a, n_k)),
    )
    defaults.update(kwargs)
    return DetInstance(
        graph=Graph(node_count=n_nodes, arcs=tuple(arcs)),
        commodities=tuple(commodities),
        **defaults,
    )


def test_node_balance_origin_destination():
    inst = _instance(6, [(0, 1)], [Commodity(2, 5, 40.0)])
    assert node_balance(inst, 0).tolist() == [0, 0, 40, 0, 0, -40]


def test_node_balance_zero_demand():
    inst = _instance(4, [(0, 1)], [Commodity(1, 2, 0.0)])
    assert node_balance(inst, 0).tolist() == [0, 0, 0, 0]


def test_node_balance_override():
    inst = _instance(6, [(0, 1)], [Commodity(2, 5, 40.0)])
    assert node_balance(inst, 0, demand_override=15).tolist() == [0, 0, 15, 0, 0, -15]


def test_node_balance_bad_index():
    inst = _instance(3, [(0, 1)], [Commodity(0, 1, 1.0)])
    with pytest.raises(IndexError):
        node_balance(inst, 1)


@given(
    origin=st.integers(0, 7),
    destination=st.integers(0, 7),
    demand=st.floats(0, 1e9, allow_nan=False),
)
def test_node_balance_always_sums_to_zero(origin, destination, demand):
    if origin == destination:
        destination = (destination + 1) % 8
    inst = _instance(8, [(0, 1)], [Commodity(origin, destination, demand)])
    assert node_balance(inst, 0).sum() == 0.0


def test_validate_accepts_well_formed(tiny_instance):
    assert validate(tiny_instance) == []


def test_validate_reports_self_loop():
    inst = _instance(2, [(0, 0)], [Commodity(0, 1, 1.0)])
    assert validate(inst) == ["self-loop at arc 0"]


def test_validate_reports_negative_capacity():
    inst = _instance(
        2,
        [(0, 1), (1, 0), (0, 1), (1, 0)],
        [Commodity(0, 1, 1.0)],
        capacity=np.array([1.0, 1.0, 1.0, -1.0]),
    )
    report = validate(inst)
    assert report == ["negative capacity at arc 3"]


def test_validate_reports_parallel_when_forbidden():
    graph = Graph(node_count=2, arcs=((0, 1), (0, 1)), no_parallel=True)
    inst = DetInstance(
        graph=graph,
        commodities=(Commodity(0, 1, 1.0),),
        fixed_cost=np.ones(2),
        capacity=np.ones(2),
        var_cost=np.ones((2, 1)),
    )
    assert any("parallel" in v for v in validate(inst))


def test_total_volume():
    inst = _instance(
        3,
        [(0, 1)],
        [Commodity(0, 1, 10.0), Commodity(1, 2, 25.0), Commodity(0, 2, 5.0)],
    )
    assert total_volume(inst) == 40.0


def test_total_volume_no_commodities():
    inst = _instance(2, [(0, 1)], [])
    assert total_volume(inst) == 0.0


def test_total_volume_against_file_pass(analog_r05):
    # independent recount: pull the demand column straight out of the text
    text = write_std(analog_r05)
    lines = text.splitlines()
    n_nodes, n_arcs, n_com, _ = map(int, lines[0].split())
    demand_lines = lines[1 + n_arcs : 1 + n_arcs + n_com]
    recount = sum(float(line.split()[2]) for line in demand_lines)
    assert total_volume(analog_r05) == pytest.approx(recount, rel=1e-15)


def test_flatten_demand_only():
    inst = _instance(
        3, [(0, 1)], [Commodity(0, 1, 10.0), Commodity(1, 2, 25.0), Commodity(0, 2, 5.0)]
    )
    sel = RandomizationSelection(frozenset({ParamFamily.DEMAND}))
    assert flatten(inst, sel).tolist() == [10.0, 25.0, 5.0]


@pytest.mark.parametrize(
    "n_arcs, n_com, expected",
    [(60, 25, 85), (83, 50, 133), (220, 100, 320), (315, 200, 515)],
)
def test_flatten_length_demand_and_capacity(n_arcs, n_com, expected):
    config = GenConfig(
        topology=Topology.RANDOM,
        node_count=20,
        commodity_count=n_com,
        extra_random_arcs=n_arcs,
    )
    inst = generate(config, Pcg32(1, n_arcs))
    sel = RandomizationSelection.from_mask(3)
    assert flatten(inst, sel).shape == (expected,)
    assert sel.variable_count(inst) == expected


def test_flatten_requires_bounds_for_com_capacity(tiny_instance):
    sel = RandomizationSelection(frozenset({ParamFamily.COM_CAPACITY}))
    with pytest.raises(ConfigError):
        flatten(tiny_instance, sel)


def test_flatten_empty_selection(tiny_instance):
    with pytest.raises(ValueError):
        RandomizationSelection.from_mask(0)
    with pytest.raises(ConfigError):
        flatten(tiny_instance, RandomizationSelection(frozenset()))


@given(mask=st.integers(1, 31), n_arcs=st.integers(1, 6), n_com=st.integers(1, 4))
@settings(max_examples=60)
def test_flatten_length_formula(mask, n_arcs, n_com):
    arcs = [(i % 3, (i + 1) % 3) for i in range(n_arcs)]
    commodities = [Commodity(0, 1, float(k + 1)) for k in range(n_com)]
    inst = _instance(
        3,
        arcs,
        commodities,
        com_capacity=np.ones((n_arcs, n_com)),
        use_com_capacity=True,
    )
    sel = RandomizationSelection.from_mask(mask)
    expected = (
        n_com * bool(mask & 1)
        + n_arcs * bool(mask & 2)
        + n_arcs * n_com * bool(mask & 4)
        + n_arcs * bool(mask & 8)
        + n_arcs * n_com * bool(mask & 16)
    )
    values = flatten(inst, sel)
    assert values.shape == (expected,)
    index = sel.variable_index(inst)
    assert len(index) == expected


def test_variable_index_canonical_order():
    inst = _instance(
        3,
        [(0, 1), (1, 2)],
        [Commodity(0, 2, 1.0), Commodity(2, 0, 2.0)],
        com_capacity=np.ones((2, 2)),
        use_com_capacity=True,
    )
    sel = RandomizationSelection.from_mask(31)
    index = sel.variable_index(inst)
    families = [fam for fam, _ in index]
    assert families == (
        [ParamFamily.DEMAND] * 2
        + [ParamFamily.ARC_CAPACITY] * 2
        + [ParamFamily.COM_CAPACITY] * 4
        + [ParamFamily.FIXED_COST] * 2
        + [ParamFamily.VAR_COST] * 4
    )
    assert index[4][1] == (0, 0) and index[5][1] == (0, 1) and index[6][1] == (1, 0)


def test_scenario_matrix_invariants():
    with pytest.raises(ValueError):
        ScenarioMatrix(np.ones((1, 2)), np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        ScenarioMatrix(np.ones((1, 2)), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        ScenarioMatrix(np.ones((0, 2)), np.array([0.5, 0.5]))
    sm = ScenarioMatrix(np.ones((2, 3)), np.full(3, 1 / 3))
    assert sm.variable_count == 2 and sm.scenario_count == 3


def test_graph_arrays_match_arcs():
    g = Graph(node_count=4, arcs=((0, 1), (2, 3), (1, 0)))
    assert g.tails.tolist() == [0, 2, 1]
    assert g.heads.tolist() == [1, 3, 0]
    assert g.arc_count == 3
