"""Log-odds to probability conversion and the detectability grid."""

import math

import numpy as np
import pytest

from mapkeeper.core import FeatureKind
from mapkeeper.sensor_model import SensorModelGrid, probability, probability_array

# logistic values computed independently at 40 digits and rounded to float64
LOGISTIC_ORACLE = {
    0.7: 0.6681877721681662,
    -10.0: 4.5397868702434395e-05,
    2.5: 0.9241418199787564,
    -2.5: 0.07585818002124355,
}


def test_probability_frozen_values():
    assert probability(0.0) == 0.5
    for logodds, expected in LOGISTIC_ORACLE.items():
        assert probability(logodds) == pytest.approx(expected, rel=1e-14)


def test_probability_matches_tanh_identity():
    # independent route: sigma(x) = (1 + tanh(x/2)) / 2
    for x in np.linspace(-30, 30, 201):
        ref = 0.5 * (1.0 + math.tanh(x / 2.0))
        assert probability(float(x)) == pytest.approx(ref, abs=1e-15)


def test_probability_extremes_do_not_overflow():
    assert probability(1000.0) == 1.0
    assert probability(-1000.0) == 0.0
    assert 0.0 < probability(-700.0) < 1e-300 or probability(-700.0) == 0.0


def test_probability_array_matches_scalar():
    xs = np.linspace(-40, 40, 401)
    vec = probability_array(xs)
    for x, v in zip(xs, vec):
        # np.exp and math.exp may differ in the last ulp
        assert v == pytest.approx(probability(float(x)), rel=1e-12)


def test_probability_monotone():
    xs = np.linspace(-20, 20, 500)
    ps = probability_array(xs)
    assert np.all(np.diff(ps) >= 0)


def test_grid_requires_divisible_extent():
    with pytest.raises(ValueError):
        SensorModelGrid(extent=10.0, cell_size=0.3)
    g = SensorModelGrid(extent=10.0, cell_size=0.5)
    assert g.n_cells == 20


def test_grid_update_and_query():
    g = SensorModelGrid(extent=10.0, cell_size=1.0, l_hit=0.7, l_miss=-0.4)
    p = (2.2, -1.7)
    assert g.query_logodds(p, FeatureKind.POLE) == 0.0
    g.update_cell(p, FeatureKind.POLE, detected=True)
    g.update_cell(p, FeatureKind.POLE, detected=True)
    g.update_cell(p, FeatureKind.POLE, detected=False)
    assert g.query_logodds(p, FeatureKind.POLE) == pytest.approx(1.0)
    # layers are independent per kind
    assert g.query_logodds(p, FeatureKind.CORNER) == 0.0
    # a different cell is untouched
    assert g.query_logodds((0.0, 0.0), FeatureKind.POLE) == 0.0


def test_grid_clamping():
    g = SensorModelGrid(extent=4.0, cell_size=1.0, l_hit=0.7, l_miss=-0.4, clamp=2.0)
    for _ in range(50):
        g.update_cell((0.0, 0.0), FeatureKind.POLE, detected=True)
    assert g.query_logodds((0.0, 0.0), FeatureKind.POLE) == 2.0
    for _ in range(50):
        g.update_cell((0.0, 0.0), FeatureKind.POLE, detected=False)
    assert g.query_logodds((0.0, 0.0), FeatureKind.POLE) == -2.0


def test_grid_out_of_extent():
    g = SensorModelGrid(extent=10.0, cell_size=0.5)
    g.update_cell((6.0, 0.0), FeatureKind.POLE, detected=True)
    assert g.skipped == 1
    assert g.query_logodds((6.0, 0.0), FeatureKind.POLE) == 0.0
    assert g.oob_queries == 1
    assert not g.contains((6.0, 0.0))
    assert g.contains((4.9, -4.9))
    # the upper edge is exclusive
    assert not g.contains((5.0, 0.0))


def test_grid_cell_index_layout():
    g = SensorModelGrid(extent=10.0, cell_size=1.0)
    assert g.cell_index((-5.0, -5.0)) == (0, 0)
    assert g.cell_index((4.9, 4.9)) == (9, 9)
    assert g.cell_index((0.0, 0.0)) == (5, 5)
    assert g.cell_index((5.0, 0.0)) is None
