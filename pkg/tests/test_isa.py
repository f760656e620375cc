import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshcim.isa import (
    FuncCode,
    Instruction,
    ScheduleTable,
    Variant,
    ctype,
    decode,
    dump_schedule,
    encode,
    fetch,
    mtype,
    parse_schedule_dump,
)


class TestEncode:
    def test_ctype_all_zero(self):
        assert encode(Instruction(Variant.CTYPE)) == 0x0000

    def test_mtype_all_zero_is_opc_bit(self):
        assert encode(Instruction(Variant.MTYPE)) == 0x0001

    def test_field_overflow(self):
        with pytest.raises(ValueError):
            encode(Instruction(Variant.CTYPE, rx_ctrl=32))
        with pytest.raises(ValueError):
            encode(Instruction(Variant.MTYPE, func_op=8))

    def test_rx_placement(self):
        word = encode(Instruction(Variant.CTYPE, rx_ctrl=0b10101))
        assert (word >> 11) & 0x1F == 0b10101


class TestDecode:
    def test_zero_word(self):
        instr = decode(0x0000)
        assert instr.variant is Variant.CTYPE
        assert (instr.rx_ctrl, instr.tx_ctrl, instr.sum_ctrl, instr.buffer_ctrl) == (0, 0, 0, 0)

    def test_rx_extraction_both_variants(self):
        for low in (0, 1):
            word = (0b10101 << 11) | low
            assert decode(word).rx_ctrl == 0b10101

    def test_invalid_func_preserved(self):
        word = mtype(func=6, param=3)
        instr = decode(word)
        assert instr.func is FuncCode.INVALID
        assert instr.func_op == 6
        assert encode(instr) == word

    def test_exhaustive_totality_and_roundtrip(self):
        for word in range(0x10000):
            instr = decode(word)
            assert encode(instr) == word

    @settings(max_examples=300)
    @given(
        variant=st.sampled_from(list(Variant)),
        rx=st.integers(0, 31),
        tx=st.integers(0, 15),
        a=st.integers(0, 15),
        b=st.integers(0, 7),
    )
    def test_roundtrip_random_valid(self, variant, rx, tx, a, b):
        if variant is Variant.CTYPE:
            instr = Instruction(variant, rx, tx, sum_ctrl=a, buffer_ctrl=b & 3)
        else:
            instr = Instruction(variant, rx, tx, func_op=a & 7, func_param=b)
        assert decode(encode(instr)) == instr

    def test_roundtrip_10k_random(self):
        import random

        rng = random.Random(42)
        for _ in range(10_000):
            variant = Variant(rng.getrandbits(1))
            if variant is Variant.CTYPE:
                instr = Instruction(
                    variant, rng.getrandbits(5), rng.getrandbits(4),
                    sum_ctrl=rng.getrandbits(4), buffer_ctrl=rng.getrandbits(2),
                )
            else:
                instr = Instruction(
                    variant, rng.getrandbits(5), rng.getrandbits(4),
                    func_op=rng.getrandbits(3), func_param=rng.getrandbits(3),
                )
            assert decode(encode(instr)) == instr


class TestScheduleTable:
    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ScheduleTable([])

    def test_periodicity(self):
        words = [ctype(rx=i % 4) for i in range(4)]
        table = ScheduleTable.from_words(words)
        assert table.period == 4
        assert fetch(table, 0) == fetch(table, 4)
        assert fetch(table, 3) == fetch(table, 7)

    def test_period_one(self):
        table = ScheduleTable.from_words([mtype(func=FuncCode.BP)])
        for cycle in range(10):
            assert fetch(table, cycle).func is FuncCode.BP

    def test_sequence_repeats_for_period_66(self):
        # p = 2(P+W) with P=1, W=32
        words = [ctype(rx=(i * 7) % 32, tx=(i * 3) % 16) for i in range(66)]
        table = ScheduleTable.from_words(words)
        assert table.period == 66
        first = [table.fetch_word(c) for c in range(66)]
        second = [table.fetch_word(c) for c in range(66, 132)]
        assert first == second == words

    def test_capacity_honored_via_compression(self):
        # 450 slots of mostly idle entries compress far below 128 entries
        words = [ctype(rx=1, sum_ctrl=8)] * 2 + [0x0000] * 448
        table = ScheduleTable.from_words(words)
        assert table.period == 450
        assert len(table.entries) <= 128

    def test_capacity_overflow_rejected(self):
        words = [ctype(rx=i % 2, tx=(i // 2) % 16) for i in range(300)]
        with pytest.raises(ValueError):
            ScheduleTable.from_words(words)

    def test_fetch_matches_flat_list(self):
        words = [ctype(rx=1)] * 5 + [mtype(func=FuncCode.ACT)] * 3 + [0x0000] * 7
        table = ScheduleTable.from_words(words)
        for cycle in range(45):
            assert table.fetch_word(cycle) == words[cycle % len(words)]


class TestDump:
    def test_roundtrip(self):
        t1 = ScheduleTable.from_words([ctype(rx=2, tx=4)] * 3 + [0x0000] * 10)
        t2 = ScheduleTable.from_words([mtype(func=FuncCode.CMP, param=1)] * 4)
        text = dump_schedule(t1, 0, 3, 4) + dump_schedule(t2, 1, 0, 0)
        tables = parse_schedule_dump(text)
        assert set(tables) == {(0, 3, 4), (1, 0, 0)}
        assert tables[(0, 3, 4)].entries == t1.entries
        assert tables[(1, 0, 0)].entries == t2.entries

    def test_four_hex_digit_words(self):
        table = ScheduleTable.from_words([ctype(rx=1)])
        line = dump_schedule(table, 0, 0, 0).strip()
        word_field = line.split()[4]
        assert len(word_field) == 4
        int(word_field, 16)
