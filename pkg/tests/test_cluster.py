"""The in-process cluster emulator: collectives, counters, determinism."""

import numpy as np
import pytest

from tradmm import Shard, spawn


def make_shards(rng, n_shards, rows_each, cols):
    return [Shard(rng.standard_normal((rows_each, cols))) for _ in range(n_shards)]


def test_single_shard_cluster():
    with spawn([Shard(np.ones((3, 2)))]) as cluster:
        assert cluster.n_workers == 1
        assert cluster.total_rows == 3


def test_four_equal_shards():
    rng = np.random.default_rng(50)
    with spawn(make_shards(rng, 4, 25, 10)) as cluster:
        assert cluster.n_workers == 4
        assert cluster.total_rows == 100


def test_empty_shard_list_rejected():
    with pytest.raises(ValueError):
        spawn([])


def test_inconsistent_columns_rejected():
    with pytest.raises(ValueError):
        spawn([Shard(np.ones((2, 3))), Shard(np.ones((2, 4)))])


def test_initial_states_applied():
    states = [{"y": 1}, {"y": 2}]
    with spawn([Shard(np.ones((1, 2))), Shard(np.ones((1, 2)))],
               initial_states=states) as cluster:
        assert [w.state["y"] for w in cluster.workers] == [1, 2]
    with pytest.raises(ValueError):
        spawn([Shard(np.ones((1, 2)))], initial_states=states)


def test_all_execute_identity_step_leaves_state():
    rng = np.random.default_rng(51)
    with spawn(make_shards(rng, 3, 5, 4)) as cluster:
        for w in cluster.workers:
            w.state["y"] = np.full(5, float(w.index))
        before = [w.state["y"].copy() for w in cluster.workers]
        cluster.all_execute(lambda w: w.state["y"])
        after = [w.state["y"] for w in cluster.workers]
        for b, a in zip(before, after):
            assert np.array_equal(b, a)


def test_all_execute_row_counts_sum():
    rng = np.random.default_rng(52)
    shards = [Shard(rng.standard_normal((r, 3))) for r in (7, 4, 9)]
    with spawn(shards) as cluster:
        counts = cluster.all_execute(lambda w: w.shard.rows)
        assert sum(counts) == 20


def test_all_execute_outputs_in_index_order():
    rng = np.random.default_rng(53)
    with spawn(make_shards(rng, 6, 2, 2)) as cluster:
        assert cluster.all_execute(lambda w: w.index) == [0, 1, 2, 3, 4, 5]


def test_per_worker_seeded_rng_reproducible():
    rng = np.random.default_rng(54)
    shards = make_shards(rng, 4, 3, 3)

    def draw(worker):
        return np.random.default_rng((99, worker.index)).standard_normal(4)

    with spawn(shards) as cluster:
        first = cluster.all_execute(draw)
    with spawn(shards) as cluster:
        second = cluster.all_execute(draw)
    for a, b in zip(first, second):
        assert np.array_equal(a, b)


def test_worker_exception_aborts_run():
    with spawn([Shard(np.ones((1, 1))), Shard(np.ones((1, 1)))]) as cluster:
        def boom(worker):
            if worker.index == 1:
                raise RuntimeError("worker down")
            return 0

        with pytest.raises(RuntimeError, match="worker down"):
            cluster.all_execute(boom)


def test_reduce_sum_basis_vectors():
    with spawn([Shard(np.ones((1, 2))), Shard(np.ones((1, 2)))]) as cluster:
        out = cluster.reduce_sum([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
        assert np.array_equal(out.payload, np.array([1.0, 1.0]))
        assert out.contributing == 2


def test_reduce_sum_single_worker_identity():
    with spawn([Shard(np.ones((1, 2)))]) as cluster:
        v = np.array([3.0, -1.0])
        assert np.array_equal(cluster.reduce_sum([v]).payload, v)


def test_reduce_sum_matches_serial_order():
    rng = np.random.default_rng(55)
    parts = [rng.standard_normal(30) for _ in range(8)]
    with spawn(make_shards(rng, 8, 2, 2)) as cluster:
        out = cluster.reduce_sum(parts).payload
    serial = parts[0].copy()
    for p in parts[1:]:
        serial += p
    assert np.array_equal(out, serial)


def test_reduce_sum_shape_mismatch():
    with spawn([Shard(np.ones((1, 2))), Shard(np.ones((1, 2)))]) as cluster:
        with pytest.raises(ValueError):
            cluster.reduce_sum([np.ones(2), np.ones(3)])
        with pytest.raises(ValueError):
            cluster.reduce_sum([np.ones(2)])


def test_broadcast_visible_to_all_workers():
    rng = np.random.default_rng(56)
    with spawn(make_shards(rng, 5, 2, 3)) as cluster:
        x = rng.standard_normal(3)
        cluster.broadcast(x)
        copies = cluster.all_execute(lambda w: w.x)
        assert len(copies) == 5
        for c in copies:
            assert np.array_equal(c, x)


def test_broadcast_rejects_empty_and_nonfinite():
    with spawn([Shard(np.ones((1, 2)))]) as cluster:
        with pytest.raises(ValueError):
            cluster.broadcast(np.array([]))
        with pytest.raises(ValueError):
            cluster.broadcast(np.array([np.nan]))


def test_broadcast_last_writer_wins():
    with spawn([Shard(np.ones((1, 2)))]) as cluster:
        cluster.broadcast(np.array([1.0, 1.0]))
        cluster.broadcast(np.array([2.0, 2.0]))
        assert np.array_equal(cluster.workers[0].x, np.array([2.0, 2.0]))


def test_worker_x_none_before_first_broadcast():
    with spawn([Shard(np.ones((1, 2)))]) as cluster:
        assert cluster.workers[0].x is None


def test_reduce_byte_accounting_modes():
    with spawn([Shard(np.ones((1, 4))), Shard(np.ones((1, 4)))]) as cluster:
        cluster.reduce_sum([np.ones(4), np.ones(4)])
        assert cluster.counters.bytes_up == 2 * 4 * 8  # physical payloads

        cluster.reduce_sum([np.ones(4), np.ones(4)], counted_nbytes=0)
        assert cluster.counters.bytes_up == 64  # diagnostic, uncounted

        cluster.reduce_sum([np.ones(4), np.ones(4)], counted_nbytes=100)
        assert cluster.counters.bytes_up == 164  # modeled override


def test_broadcast_byte_accounting():
    with spawn([Shard(np.ones((1, 3)))] * 4) as cluster:
        cluster.broadcast(np.ones(3))
        assert cluster.counters.bytes_down == 3 * 8 * 4
        cluster.broadcast(np.ones(3), counted_nbytes=0)
        assert cluster.counters.bytes_down == 96


def test_compute_and_barrier_seconds_accumulate():
    rng = np.random.default_rng(57)
    with spawn(make_shards(rng, 2, 200, 50)) as cluster:
        cluster.all_execute(lambda w: w.data.T @ w.data)
        up, down, compute, barrier = cluster.counters.snapshot()
        assert compute > 0.0
        assert barrier >= 0.0
        # diagnostic steps must not move the clocks
        cluster.all_execute(lambda w: w.data.sum(), diagnostic=True)
        assert cluster.counters.compute_seconds == compute


def test_serial_lane_cap_matches_parallel(monkeypatch):
    rng = np.random.default_rng(58)
    shards = make_shards(rng, 6, 10, 4)
    step = lambda w: w.data.T @ (w.data @ np.arange(4.0))

    with spawn(shards) as cluster:
        parallel = cluster.reduce_sum(cluster.all_execute(step)).payload
    monkeypatch.setenv("TADMM_THREADS", "1")
    with spawn(shards) as cluster:
        serial = cluster.reduce_sum(cluster.all_execute(step)).payload
    assert np.array_equal(parallel, serial)


def test_bad_thread_env(monkeypatch):
    monkeypatch.setenv("TADMM_THREADS", "zero")
    with spawn([Shard(np.ones((1, 1)))]) as cluster:
        with pytest.raises(ValueError):
            cluster.all_execute(lambda w: 0)
    monkeypatch.setenv("TADMM_THREADS", "0")
    with spawn([Shard(np.ones((1, 1)))]) as cluster:
        with pytest.raises(ValueError):
            cluster.all_execute(lambda w: 0)


def test_shard_validation():
    with pytest.raises(ValueError):
        Shard(np.ones((2, 2)), targets=np.ones(3))
    with pytest.raises(ValueError):
        Shard(np.array([[np.inf, 1.0]]))
    with pytest.raises(ValueError):
        Shard(np.ones((2, 2)), targets=np.array([1.0, np.nan]))
