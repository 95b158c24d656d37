import numpy as np
import pytest

from core.exceptions import DatasetFormatError, DivergenceError, NodeNetError
from core.files import atomic_path, ensure_within, write_text_atomic
from core.seeding import STREAMS, make_random_state, make_rng


def test_same_seed_and_stream_repeat():
    assert np.array_equal(make_rng(3, 'init').random(5), make_rng(3, 'init').random(5))


def test_streams_are_independent():
    draws = {stream: make_rng(3, stream).random(4).tobytes() for stream in STREAMS}
    assert len(set(draws.values())) == len(STREAMS)


def test_unknown_stream_rejected():
    with pytest.raises(ValueError):
        make_rng(0, 'nonsense')


def test_negative_and_huge_seeds_accepted():
    make_rng(-1, 'split').random()
    make_rng(2 ** 70, 'split').random()
    make_random_state(-5, 'split').rand()


def test_error_messages_carry_location():
    error = DatasetFormatError('bad row', line_number=4, path='cora.content')
    assert str(error) == 'cora.content:4: bad row'
    assert isinstance(DivergenceError('nan', epoch=9), NodeNetError)
    assert 'epoch 9' in str(DivergenceError('nan', epoch=9))


def test_atomic_write_replaces_whole_file(tmp_path):
    target = tmp_path / 'nested' / 'out.txt'
    write_text_atomic(target, 'first')
    write_text_atomic(target, 'second')
    assert target.read_text() == 'second'
    assert [p.name for p in target.parent.iterdir()] == ['out.txt']


def test_atomic_write_leaves_old_file_on_failure(tmp_path):
    target = tmp_path / 'out.txt'
    target.write_text('kept')
    with pytest.raises(RuntimeError):
        with atomic_path(target) as tmp:
            tmp.write_text('partial')
            raise RuntimeError('boom')
    assert target.read_text() == 'kept'
    assert [p.name for p in tmp_path.iterdir()] == ['out.txt']


def test_ensure_within_rejects_escape(tmp_path):
    assert ensure_within(tmp_path, tmp_path / 'a' / 'b') == (tmp_path / 'a' / 'b').resolve()
    with pytest.raises(ValueError):
        ensure_within(tmp_path / 'runs', tmp_path / 'runs' / '..' / 'elsewhere')
