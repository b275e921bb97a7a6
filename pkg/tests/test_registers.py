import pytest

from amosim.registers import ConfigurationError, InvariantError, SharedMemory


@pytest.fixture
def shm():
    return SharedMemory(m=3, n=5)


def test_fresh_memory_reads_zero(shm):
    assert shm.read_next(1, 2) == 0
    assert shm.read_done(1, 2, 1) == 0
    assert shm.read_flag(1) == 0


def test_write_then_read_next(shm):
    shm.write_next(2, 5)
    assert shm.read_next(1, 2) == 5


def test_next_last_write_wins():
    shm = SharedMemory(m=2, n=10)
    shm.write_next(1, 3)
    shm.write_next(1, 7)
    assert shm.read_next(2, 1) == 7


def test_write_next_zero_rejected(shm):
    with pytest.raises(InvariantError):
        shm.write_next(1, 0)


def test_write_next_accepts_sentinel_n_plus_one(shm):
    shm.write_next(1, 6)  # n + 1 is in the internal candidate domain
    assert shm.read_next(2, 1) == 6


def test_read_metering_counts_each_access(shm):
    before = shm.reads
    shm.read_next(1, 2)
    assert shm.reads == before + 1
    shm.read_done(1, 2, 1)
    shm.read_flag(3)
    assert shm.reads == before + 3
    assert shm.reads_by[1] == 2
    assert shm.reads_by[3] == 1


def test_done_write_then_read(shm):
    shm.write_done(1, 1, 4)
    assert shm.read_done(2, 1, 1) == 4


def test_done_row_prefix_enforced(shm):
    with pytest.raises(InvariantError):
        shm.write_done(1, 2, 5)  # slot 1 still empty


def test_done_write_once(shm):
    shm.write_done(1, 1, 4)
    with pytest.raises(InvariantError):
        shm.write_done(1, 1, 4)


def test_done_index_bounds(shm):
    with pytest.raises(ConfigurationError):
        shm.read_done(1, 2, 6)  # j = n + 1
    with pytest.raises(ConfigurationError):
        shm.write_done(1, 0, 1)


def test_pid_bounds():
    shm = SharedMemory(m=2, n=2)
    with pytest.raises(ConfigurationError):
        shm.read_next(1, 3)
    with pytest.raises(ConfigurationError):
        shm.write_next(0, 1)


def test_flag_monotone(shm):
    assert shm.read_flag(1) == 0
    shm.raise_flag(2)
    assert shm.read_flag(1) == 1
    shm.raise_flag(3)  # raising twice keeps it raised
    assert shm.read_flag(1) == 1


def test_wa_writes():
    wa = [0] * 6
    shm = SharedMemory(m=2, n=5, wa=wa)
    shm.wa_write(1, 3)
    assert wa[3] == 1
    shm.wa_write(2, 3)  # idempotent on the value
    assert wa[3] == 1
    assert wa[2] == 0
    assert shm.writes == 2  # each wa write metered


def test_wa_requires_buffer(shm):
    with pytest.raises(ConfigurationError):
        shm.wa_write(1, 1)


def test_snapshot_row_prefix():
    shm = SharedMemory(m=2, n=4)
    shm.write_done(2, 1, 3)
    shm.write_done(2, 2, 1)
    snap = shm.snapshot()
    assert snap["done"] == ((), (3, 1))
    assert snap["next"] == (0, 0)
