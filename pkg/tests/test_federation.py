import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kahm.errors import AllClassesEmpty, ClientHasNoCells, EmptyClass, Unsupported
from kahm.federation import (
    LabeledDataset,
    assumption_score,
    build_global_model,
    class_distances,
    classify_global,
    classify_local,
    deterministic_lower_bound,
    distance_tensor,
    global_distance,
    index_by_class_client,
    induced_kernel,
    predict_global,
    predict_local,
    predict_score,
    score_from_distance,
    training_distances,
)
from kahm.fedsim import PartitionSpec, label_skew_partition
from kahm.partitioned import partitioned_distance
from kahm.synthetic import make_blobs


def test_index_singletons():
    data = LabeledDataset(np.zeros((4, 2)), [1, 1, 2, 2], [1, 2, 1, 2])
    index = index_by_class_client(data)
    assert {k: v.tolist() for k, v in index.items()} == {
        (1, 1): [0], (1, 2): [1], (2, 1): [2], (2, 2): [3],
    }


def test_index_one_block():
    data = LabeledDataset(np.zeros((5, 1)), [2] * 5, [3] * 5, class_count=2)
    index = index_by_class_client(data)
    assert list(index) == [(2, 3)]
    assert index[(2, 3)].tolist() == [0, 1, 2, 3, 4]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_index_is_a_partition(seed):
    rng = np.random.default_rng(seed)
    z = rng.integers(1, 6, size=1000)
    q = rng.integers(1, 4, size=1000)
    data = LabeledDataset(np.zeros((1000, 1)), z, q, class_count=5, client_count=3)
    index = index_by_class_client(data)
    rows = np.concatenate(list(index.values()))
    assert rows.size == 1000 and np.unique(rows).size == 1000
    for (c, qq), r in index.items():
        assert np.all(np.diff(r) > 0)
        assert np.all(z[r] == c) and np.all(q[r] == qq)


def test_dataset_validation():
    with pytest.raises(ValueError, match="label out of range"):
        LabeledDataset(np.zeros((2, 1)), [0, 1])
    with pytest.raises(ValueError, match="client id out of range"):
        LabeledDataset(np.zeros((2, 1)), [1, 2], [1, 3], client_count=2)
    with pytest.raises(ValueError):
        LabeledDataset(np.array([[0.0], [np.nan]]), [1, 2])


def test_empty_class_raises():
    data = LabeledDataset(np.random.default_rng(0).normal(size=(6, 2)), [1, 1, 1, 3, 3, 3])
    with pytest.raises(EmptyClass) as err:
        build_global_model(data)
    assert err.value.c == 2


def test_single_client_one_cell_per_class(blobs, blob_model):
    assert blob_model.cell_keys == ((1, 1), (2, 1), (3, 1))
    P = np.random.default_rng(1).uniform(-0.2, 0.7, size=(50, 2))
    for c in (1, 2, 3):
        np.testing.assert_array_equal(
            global_distance(blob_model, c, P), partitioned_distance(blob_model.cells[(c, 1)], P)
        )


def test_six_cells_reproduce_own_rows(blobs_two_clients, blob_model_two_clients):
    gm, data = blob_model_two_clients, blobs_two_clients
    assert len(gm.cells) == 6
    for (c, q), cell in gm.cells.items():
        rows = data.samples[(data.labels == c) & (data.clients == q)]
        assert cell.n_samples == rows.shape[0]
        scores = score_from_distance(partitioned_distance(cell, rows), gm.dim)
        assert scores.min() >= 0.99


def test_missing_cells_are_absent():
    data = make_blobs(20, seed=2, n_clients=2)
    clients = data.clients.copy()
    clients[data.labels == 3] = 1  # client 2 never sees class 3
    data = LabeledDataset(data.samples, data.labels, clients)
    gm = build_global_model(data)
    assert (3, 2) not in gm.cells and (3, 1) in gm.cells
    D = distance_tensor(gm, data.samples[:5])
    assert np.all(np.isinf(D[:, 2, 1]))
    assert np.all(np.isfinite(D[:, 2, 0]))


def test_aggregation_is_min_over_clients(blob_model_two_clients):
    gm = blob_model_two_clients
    P = np.random.default_rng(4).uniform(-0.3, 0.8, size=(100, 2))
    for c in (1, 2, 3):
        per_cell = np.column_stack([partitioned_distance(gm.cells[(c, q)], P) for q in gm.class_cells(c)])
        np.testing.assert_array_equal(global_distance(gm, c, P), per_cell.min(axis=1))
    best, argq = class_distances(gm, P)
    assert set(np.unique(argq)) <= {1, 2}


def test_own_training_rows_score_high(blobs, blob_model):
    d = training_distances(blob_model, blobs)
    assert np.all(score_from_distance(d, 2) > 0.99)
    for c in (1, 2, 3):
        y = blobs.samples[blobs.labels == c][0]
        assert predict_score(blob_model, c, y) > 0.99


def test_class_without_cells_is_infinite():
    data = LabeledDataset(np.eye(3), [1, 2, 3], [1, 1, 2])
    gm = build_global_model(data)
    # restrict to client 1's cells: class 3 has no cell there
    assert gm.class_cells(3) == [2]
    tensor = distance_tensor(gm, np.zeros(3), [(1, 1), (2, 1)])
    assert np.isinf(tensor[0, 2]).all()
    assert predict_local(gm, 1, np.zeros((1, 3))).scores[0, 2] == 0.0


def test_score_values():
    assert score_from_distance(0.0, 4) == 1.0
    assert score_from_distance(4.0, 4) == pytest.approx(0.367879, abs=1e-6)
    assert score_from_distance(np.inf, 4) == 0.0


def test_induced_kernel(blob_model):
    rng = np.random.default_rng(7)
    P = rng.uniform(-0.5, 1.0, size=(20, 2))
    y = P[0]
    g = global_distance(blob_model, 2, y)
    assert induced_kernel(blob_model, 2, y, y) == pytest.approx(np.exp(-2 * g / 2), rel=1e-12)
    assert induced_kernel(blob_model, 2, P[1], P[2]) == induced_kernel(blob_model, 2, P[2], P[1])
    v = predict_score(blob_model, 2, P)
    gram = np.array([[induced_kernel(blob_model, 2, a, b) for b in P] for a in P])
    np.testing.assert_allclose(gram, np.outer(v, v), rtol=1e-12)
    assert np.linalg.eigvalsh(gram).min() >= -1e-8


def test_training_accuracy_is_perfect(blobs, blob_model):
    pred = predict_global(blob_model, blobs.samples)
    assert np.all(pred.class_ids == blobs.labels)


def test_prediction_invariants(blob_model_two_clients):
    gm = blob_model_two_clients
    P = np.random.default_rng(9).uniform(-0.5, 1.0, size=(1000, 2))
    pred = predict_global(gm, P)
    np.testing.assert_array_equal(pred.scores, np.exp(-pred.distances / gm.dim))
    np.testing.assert_array_equal(pred.class_ids, np.argmax(pred.scores, axis=1) + 1)
    single = classify_global(gm, P[3])
    assert single.class_id == pred.class_ids[3]
    np.testing.assert_allclose(single.per_class_distance, pred.distances[3], rtol=1e-12)


def test_q1_global_equals_local(blob_model):
    P = np.random.default_rng(10).uniform(-0.5, 1.0, size=(500, 2))
    g = predict_global(blob_model, P)
    l = predict_local(blob_model, 1, P)
    np.testing.assert_array_equal(g.class_ids, l.class_ids)
    np.testing.assert_array_equal(g.distances, l.distances)


def test_tie_goes_to_smaller_class():
    data = LabeledDataset(np.array([[1.0, 0.0], [-1.0, 0.0]]), [2, 1])
    gm = build_global_model(data)
    pred = classify_global(gm, [0.0, 0.0])
    assert pred.per_class_distance[0] == pred.per_class_distance[1]
    assert pred.class_id == 1


def test_local_client_with_one_class():
    data = make_blobs(30, seed=5, n_clients=1)
    clients = np.where(data.labels == 3, 2, 1)
    data = LabeledDataset(data.samples, data.labels, clients)
    gm = build_global_model(data)
    P = np.random.default_rng(0).uniform(-1, 1, size=(200, 2))
    assert np.all(classify_local(gm, 2, P[0]).class_id == 3)
    assert np.all(predict_local(gm, 2, P).class_ids == 3)
    assert 3 not in set(predict_local(gm, 1, P).class_ids.tolist())


def test_local_predictions_stay_in_client_classes():
    rng = np.random.default_rng(3)
    centers = rng.uniform(0, 1, size=(10, 3))
    X = np.concatenate([c + 0.03 * rng.standard_normal((40, 3)) for c in centers])
    labels = np.repeat(np.arange(1, 11), 40)
    data, owners = label_skew_partition(X, labels, PartitionSpec(8, 0.2, seed=1))
    gm = build_global_model(data)
    P = rng.uniform(-0.2, 1.2, size=(300, 3))
    for q in range(1, 9):
        allowed = set(gm.client_cells(q))
        assert len(allowed) == 2
        assert set(predict_local(gm, q, P).class_ids.tolist()) <= allowed


def test_local_errors(blob_model):
    data = LabeledDataset(np.eye(2), [1, 2], [1, 1], client_count=2)
    gm = build_global_model(data)
    with pytest.raises(ClientHasNoCells):
        classify_local(gm, 2, [0.0, 0.0])
    with pytest.raises(ValueError):
        classify_local(blob_model, 5, [0.0, 0.0])


def test_all_classes_empty_sentinel(blob_model):
    from kahm.federation import _argmin_class

    with pytest.raises(AllClassesEmpty):
        _argmin_class(np.full((1, 3), np.inf))


def test_assumption_score(blobs, blob_model):
    assert assumption_score(blob_model, blobs) < 0.01
    # every row is its own singleton cell, so each row is reproduced exactly
    data = LabeledDataset(np.eye(3), [1, 2, 3], [1, 2, 3])
    assert assumption_score(build_global_model(data), data) == 0.0


def test_lower_bound_holds_on_random_probes(blob_model_two_clients):
    gm = blob_model_two_clients
    P = np.random.default_rng(11).uniform(-0.5, 1.0, size=(300, 2))
    for c in (1, 2, 3):
        scores = predict_score(gm, c, P)
        for y, s in zip(P, scores):
            assert s > deterministic_lower_bound(gm, c, y)


def test_lower_bound_far_probe(blob_model):
    b = deterministic_lower_bound(blob_model, 1, np.array([50.0, 50.0]))
    assert b < 1e-100
    assert predict_score(blob_model, 1, np.array([50.0, 50.0])) >= b


def test_lower_bound_equality_at_zero_distance():
    data = LabeledDataset(np.array([[0.3, 0.7], [2.0, 2.0], [2.1, 2.0]]), [1, 2, 2])
    gm = build_global_model(data)
    y = np.array([0.3, 0.7])
    assert predict_score(gm, 1, y) == 1.0
    assert deterministic_lower_bound(gm, 1, y) == 1.0
    assert predict_score(gm, 1, y) >= deterministic_lower_bound(gm, 1, y)


def test_lower_bound_refuses_partitioned_cell():
    rng = np.random.default_rng(0)
    data = LabeledDataset(rng.normal(size=(30, 2)), [1] * 15 + [2] * 15)
    gm = build_global_model(data, max_part_size=10)
    with pytest.raises(Unsupported):
        deterministic_lower_bound(gm, 1, np.zeros(2))


def test_dimension_mismatch(blob_model):
    with pytest.raises(ValueError):
        predict_global(blob_model, np.zeros((2, 3)))


def test_build_is_deterministic(blobs_two_clients):
    from kahm.io import dumps_model

    a = dumps_model(build_global_model(blobs_two_clients, seed=4, max_part_size=40))
    b = dumps_model(build_global_model(blobs_two_clients, seed=4, max_part_size=40))
    assert a == b
