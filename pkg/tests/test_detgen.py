from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mcfndgen import (
    ConfigError,
    GenConfig,
    GenerationError,
    Graph,
    OdMode,
    Pcg32,
    Topology,
    generate,
    total_volume,
    validate,
)
from mcfndgen.detgen import (
    build_topology,
    place_commodities,
    round_half_up,
    sample_arc_parameters,
    tune_design_flow,
    tune_random_arcs,
)


def _rng():
    return Pcg32(4567, 1234)


def test_grid_3x3_lattice_counts():
    config = GenConfig(topology=Topology.GRID, grid_x=3, grid_y=3)
    graph = build_topology(config, _rng())
    assert graph.node_count == 9
    assert graph.arc_count == 24  # 2 * (3*2 + 3*2)


def test_circular_ring_counts():
    config = GenConfig(topology=Topology.CIRCULAR, node_count=5)
    graph = build_topology(config, _rng())
    assert graph.node_count == 5
    assert graph.arc_count == 10
    assert set(graph.arcs) == {(i, (i + 1) % 5) for i in range(5)} | {
        ((i + 1) % 5, i) for i in range(5)
    }


def test_grid_with_extras_allowing_parallels():
    config = GenConfig(
        topology=Topology.GRID, grid_x=2, grid_y=2, extra_random_arcs=4, allow_parallel=True
    )
    graph = build_topology(config, _rng())
    assert graph.arc_count == 12  # 8 lattice + 4 extras


def test_random_topology_requires_arcs():
    config = GenConfig(topology=Topology.RANDOM, node_count=5, extra_random_arcs=0)
    with pytest.raises(ConfigError):
        build_topology(config, _rng())


def test_saturation_error_without_parallels():
    config = GenConfig(topology=Topology.RANDOM, node_count=3, extra_random_arcs=7)
    with pytest.raises(GenerationError):
        build_topology(config, _rng())  # only 6 distinct ordered pairs exist


def test_file_topology_keeps_input_and_appends():
    base = Graph(node_count=4, arcs=((0, 1), (1, 2)))
    config = GenConfig(topology=Topology.FILE, node_count=4, extra_random_arcs=3)
    graph = build_topology(config, _rng(), graph_in=base)
    assert graph.arcs[:2] == ((0, 1), (1, 2))
    assert graph.arc_count == 5


def test_file_topology_requires_graph():
    config = GenConfig(topology=Topology.FILE)
    with pytest.raises(ConfigError):
        build_topology(config, _rng())
    with pytest.raises(ConfigError):
        build_topology(GenConfig(topology=Topology.GRID), _rng(), graph_in=Graph(2, ((0, 1),)))


def test_single_mode_draws_distinct_endpoints():
    graph = Graph(node_count=10, arcs=((0, 1),))
    config = GenConfig(commodity_count=25, od_mode=OdMode.SINGLE)
    commodities = place_commodities(graph, config, _rng())
    assert len(commodities) == 25
    assert all(c.origin != c.destination for c in commodities)


def test_shared_mode_single_od_pair():
    graph = Graph(node_count=6, arcs=((0, 1),))
    config = GenConfig(commodity_count=3, od_mode=OdMode.SHARED)
    commodities = place_commodities(graph, config, _rng())
    assert len({(c.origin, c.destination) for c in commodities}) == 1


def test_random_mode_expands_and_splits_demand():
    graph = Graph(node_count=12, arcs=((0, 1),))
    config = GenConfig(
        commodity_count=1,
        od_mode=OdMode.RANDOM,
        src_min=2,
        src_max=2,
        snk_min=2,
        snk_max=2,
        dem_min=40.0,
        dem_max=40.0,
    )
    commodities = place_commodities(graph, config, _rng())
    assert len(commodities) == 4  # 2 sources x 2 sinks
    assert all(c.demand == 10.0 for c in commodities)
    assert sum(c.demand for c in commodities) == 40.0
    sources = {c.origin for c in commodities}
    sinks = {c.destination for c in commodities}
    assert len(sources) == 2 and len(sinks) == 2
    assert sources.isdisjoint(sinks)


def test_random_mode_rejects_oversized_node_sets():
    graph = Graph(node_count=3, arcs=((0, 1),))
    config = GenConfig(
        commodity_count=1, od_mode=OdMode.RANDOM, src_min=2, src_max=2, snk_min=2, snk_max=2
    )
    with pytest.raises(ConfigError):
        place_commodities(graph, config, _rng())


def test_degenerate_cost_range():
    graph = Graph(node_count=3, arcs=((0, 1), (1, 2)))
    config = GenConfig(fix_min=100.0, fix_max=100.0)
    commodities = place_commodities(graph, config, _rng())
    inst = sample_arc_parameters(graph, commodities, config, _rng())
    assert (inst.fixed_cost == 100.0).all()


def test_capacity_integer_rounding():
    graph = Graph(node_count=3, arcs=((0, 1), (1, 2)))
    config = GenConfig(cap_min=10.2, cap_max=10.4, cap_integer=True)
    commodities = place_commodities(graph, config, _rng())
    inst = sample_arc_parameters(graph, commodities, config, _rng())
    assert (inst.capacity == 10.0).all()


def test_variable_cost_sample_mean():
    arcs = tuple((0, 1) for _ in range(1000))
    graph = Graph(node_count=2, arcs=arcs)
    config = GenConfig(commodity_count=100, var_min=1.0, var_max=9.0)
    commodities = place_commodities(graph, config, _rng())
    inst = sample_arc_parameters(graph, commodities, config, _rng())
    assert inst.var_cost.size == 100_000
    assert abs(inst.var_cost.mean() - 5.0) < 0.05


def test_round_half_up():
    assert round_half_up(np.array([7.5, 7.4, 7.6, -0.5])).tolist() == [8.0, 7.0, 8.0, 0.0]


def _tuning_fixture(n_arcs=60, use_bounds=False):
    config = GenConfig(
        topology=Topology.RANDOM,
        node_count=10,
        commodity_count=5,
        extra_random_arcs=n_arcs,
        allow_parallel=True,
        use_com_capacity=use_bounds,
        dem_min=80.0,
        dem_max=80.0,
    )
    rng = _rng()
    graph = build_topology(config, rng)
    commodities = place_commodities(graph, config, rng)
    return config, graph, commodities, sample_arc_parameters(graph, commodities, config, rng), rng


def test_tune_zero_fix_full_ratio():
    config, _, _, inst, rng = _tuning_fixture()
    tuned = tune_random_arcs(inst, replace(config, ratio_zero_fix=1.0), rng)
    assert (tuned.fixed_cost == 0.0).all()


def test_tune_full_cap_count_and_value():
    config, _, _, inst, rng = _tuning_fixture()
    volume = total_volume(inst)  # 5 commodities at demand 80
    assert volume == 400.0
    tuned = tune_random_arcs(inst, replace(config, ratio_full_cap=0.5), rng)
    assert (tuned.capacity == volume).sum() == 30
    untouched = tuned.capacity != volume
    assert np.array_equal(tuned.capacity[untouched], inst.capacity[untouched])


def test_tune_zero_ratios_change_nothing():
    config, _, _, inst, rng = _tuning_fixture(use_bounds=True)
    tuned = tune_random_arcs(inst, config, rng)
    assert np.array_equal(tuned.fixed_cost, inst.fixed_cost)
    assert np.array_equal(tuned.capacity, inst.capacity)
    assert np.array_equal(tuned.com_capacity, inst.com_capacity)


def test_tune_bound_passes():
    config, _, _, inst, rng = _tuning_fixture(use_bounds=True)
    cfg = replace(config, ratio_zero_bnd=1.0)
    tuned = tune_random_arcs(inst, cfg, rng)
    assert (tuned.com_capacity == 0.0).all()
    cfg = replace(config, ratio_max_bnd=1.0)
    tuned = tune_random_arcs(inst, cfg, rng)
    assert np.array_equal(tuned.com_capacity, np.broadcast_to(inst.capacity[:, None], (60, 5)))


def test_tune_bound_pass_noop_without_bounds(caplog):
    config, _, _, inst, rng = _tuning_fixture(use_bounds=False)
    cfg = replace(config, ratio_zero_bnd=0.5)
    with caplog.at_level("WARNING"):
        tuned = tune_random_arcs(inst, cfg, rng)
    assert tuned.com_capacity is None
    assert any("bounds are disabled" in r.message for r in caplog.records)


def test_tune_design_flow_scaling():
    config, _, _, inst, _ = _tuning_fixture(n_arcs=3)
    inst = replace(inst, fixed_cost=np.array([10.0, 0.0, 5.0]))
    cfg = replace(config, fix_multiplier=2.0)
    tuned = tune_design_flow(inst, cfg)
    assert tuned.fixed_cost.tolist() == [20.0, 0.0, 10.0]


def test_tune_design_flow_identity_and_rounding():
    config, _, _, inst, _ = _tuning_fixture(n_arcs=1)
    assert np.array_equal(tune_design_flow(inst, config).capacity, inst.capacity)
    inst = replace(inst, capacity=np.array([15.0]))
    cfg = replace(config, cap_multiplier=0.5, cap_integer=True)
    assert tune_design_flow(inst, cfg).capacity.tolist() == [8.0]  # round-half-up of 7.5


def test_tune_design_flow_rejects_bad_multipliers():
    config, _, _, inst, _ = _tuning_fixture(n_arcs=1)
    with pytest.raises(ConfigError):
        tune_design_flow(inst, replace(config, fix_multiplier=0.5))
    with pytest.raises(ConfigError):
        tune_design_flow(inst, replace(config, cap_multiplier=0.0))


def test_tune_extras_only_restricts_eligible_arcs():
    config = GenConfig(
        topology=Topology.CIRCULAR,
        node_count=6,
        commodity_count=2,
        extra_random_arcs=5,
        ratio_zero_fix=1.0,
        tune_extras_only=True,
        fix_min=9.0,
        fix_max=9.0,
    )
    inst = generate(config, _rng())
    assert (inst.fixed_cost[:12] == 9.0).all()  # ring arcs untouched
    assert (inst.fixed_cost[12:] == 0.0).all()  # all extras zeroed


def test_generate_r18_shape():
    config = GenConfig(
        topology=Topology.RANDOM, node_count=20, commodity_count=200, extra_random_arcs=315
    )
    inst = generate(config, _rng())
    assert (inst.node_count, inst.arc_count, inst.commodity_count) == (20, 315, 200)
    assert validate(inst) == []


def test_generate_deterministic():
    config = GenConfig(topology=Topology.GRID, grid_x=4, grid_y=3, commodity_count=7)
    a = generate(config, Pcg32(9, 9))
    b = generate(config, Pcg32(9, 9))
    assert a == b
    c = generate(config, Pcg32(9, 10))
    assert a != c


@given(
    seed=st.integers(0, 2**32),
    grid_x=st.integers(1, 4),
    grid_y=st.integers(2, 4),
    n_com=st.integers(1, 6),
    extras=st.integers(0, 8),
    use_bounds=st.booleans(),
    ratio=st.floats(0, 1),
)
@settings(max_examples=40, deadline=None)
def test_generated_instances_always_validate(seed, grid_x, grid_y, n_com, extras, use_bounds, ratio):
    n = grid_x * grid_y
    lattice = 2 * (grid_x * (grid_y - 1) + grid_y * (grid_x - 1))
    assume(n >= 2 and lattice + extras <= n * (n - 1))
    config = GenConfig(
        topology=Topology.GRID,
        grid_x=grid_x,
        grid_y=grid_y,
        commodity_count=n_com,
        extra_random_arcs=extras,
        use_com_capacity=use_bounds,
        ratio_zero_fix=ratio,
        ratio_full_cap=ratio,
        ratio_zero_bnd=ratio,
        ratio_max_bnd=ratio,
        cap_integer=True,
    )
    inst = generate(config, Pcg32(seed, 1))
    assert validate(inst) == []
    pairs = list(inst.graph.arcs)
    assert len(set(pairs)) == len(pairs)  # no parallels by default
    assert (inst.fixed_cost >= 0).all() and (inst.capacity >= 0).all()
