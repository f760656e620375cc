"""16-bit tile control words and their periodic schedule tables.

Word layout (bit 15 on the left):

    15..11  rx_ctrl   4 direction-accept bits (N,E,S,W) + local-PE accept
    10..7   sum       C-type: acc-enable, operand-source, buf-push, buf-pop
     6..5   buffer    C-type: 00 none, 01 read, 10 write, 11 read-then-write
    10..5   func      M-type: 3-bit opcode + 3-bit parameter selector
     4..1   tx_ctrl   4 direction-send bits (N,E,S,W)
        0   opc       0 = C-type, 1 = M-type

opc polarity and the individual sum/buffer bit meanings are a declared
convention shared by the mapper and the fabric. Reserved func opcodes
decode to FuncCode.INVALID with their raw bits preserved, so re-encoding
any decoded word reproduces it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

# rx_ctrl bits (within the 5-bit field)
RX_N, RX_E, RX_S, RX_W, RX_PE = 16, 8, 4, 2, 1
# tx_ctrl bits (within the 4-bit field)
TX_N, TX_E, TX_S, TX_W = 8, 4, 2, 1
# sum-field bits (C-type)
SUM_ACC, SUM_SRC_BUF, SUM_PUSH, SUM_POP = 8, 4, 2, 1
# buffer-field modes (C-type)
BUF_NONE, BUF_READ, BUF_WRITE, BUF_RW = 0, 1, 2, 3

SCHEDULE_CAPACITY = 128   # 16b x 128 table entries per tile


class Variant(Enum):
    CTYPE = 0
    MTYPE = 1


class FuncCode(Enum):
    ADD = 0      # partial/group-sum accumulation
    ACT = 1      # activation + requantize
    CMP = 2      # lane-wise maximum (max pooling)
    MUL = 3      # multiply by scaling factor (average pooling)
    BP = 4       # direct transmission (skip connection)
    INVALID = 7  # reserved encodings; raw bits preserved on the instruction


_VALID_FUNC_OPS = {f.value for f in FuncCode if f is not FuncCode.INVALID}


@dataclass(frozen=True)
class Instruction:
    variant: Variant
    rx_ctrl: int = 0         # 5 bits
    tx_ctrl: int = 0         # 4 bits
    sum_ctrl: int = 0        # 4 bits, C-type only
    buffer_ctrl: int = 0     # 2 bits, C-type only
    func_op: int = 0         # 3 bits, M-type only (raw)
    func_param: int = 0      # 3 bits, M-type only

    @property
    def func(self) -> FuncCode:
        if self.variant is not Variant.MTYPE:
            raise ValueError("func is only defined for M-type instructions")
        if self.func_op in _VALID_FUNC_OPS:
            return FuncCode(self.func_op)
        return FuncCode.INVALID

    @property
    def is_noop(self) -> bool:
        return encode(self) & 0xFFFE == 0


def _check_width(name: str, value: int, bits: int) -> None:
    if not 0 <= value < (1 << bits):
        raise ValueError(f"{name}={value} does not fit in {bits} bits")


def encode(instr: Instruction) -> int:
    """Pack an Instruction into its 16-bit word."""
    _check_width("rx_ctrl", instr.rx_ctrl, 5)
    _check_width("tx_ctrl", instr.tx_ctrl, 4)
    word = (instr.rx_ctrl << 11) | (instr.tx_ctrl << 1) | instr.variant.value
    if instr.variant is Variant.CTYPE:
        _check_width("sum", instr.sum_ctrl, 4)
        _check_width("buffer", instr.buffer_ctrl, 2)
        word |= (instr.sum_ctrl << 7) | (instr.buffer_ctrl << 5)
    else:
        _check_width("func_op", instr.func_op, 3)
        _check_width("func_param", instr.func_param, 3)
        word |= (instr.func_op << 8) | (instr.func_param << 5)
    return word


def decode(word: int) -> Instruction:
    """Total inverse of encode: every 16-bit word decodes, none trap."""
    if not 0 <= word <= 0xFFFF:
        raise ValueError(f"word {word:#x} is not 16 bits")
    variant = Variant(word & 1)
    rx = (word >> 11) & 0x1F
    tx = (word >> 1) & 0xF
    if variant is Variant.CTYPE:
        return Instruction(
            variant=variant, rx_ctrl=rx, tx_ctrl=tx,
            sum_ctrl=(word >> 7) & 0xF, buffer_ctrl=(word >> 5) & 0x3,
        )
    return Instruction(
        variant=variant, rx_ctrl=rx, tx_ctrl=tx,
        func_op=(word >> 8) & 0x7, func_param=(word >> 5) & 0x7,
    )


def ctype(rx: int = 0, sum_ctrl: int = 0, buffer_ctrl: int = 0, tx: int = 0) -> int:
    return encode(Instruction(Variant.CTYPE, rx, tx, sum_ctrl, buffer_ctrl))


def mtype(rx: int = 0, func: FuncCode | int = FuncCode.BP, param: int = 0, tx: int = 0) -> int:
    op = func.value if isinstance(func, FuncCode) else func
    return encode(Instruction(Variant.MTYPE, rx, tx, func_op=op, func_param=param))


class ScheduleTable:
    """Immutable periodic instruction store with run-length compression.

    Entries are (word, repeat) pairs; the period is the repeat total. The
    physical table holds at most SCHEDULE_CAPACITY entries, which is how
    periods longer than 128 slots (wide feature maps) still fit.
    """

    def __init__(self, entries: list[tuple[int, int]]):
        if not entries:
            raise ValueError("schedule table must not be empty")
        if len(entries) > SCHEDULE_CAPACITY:
            raise ValueError(
                f"{len(entries)} entries exceed table capacity {SCHEDULE_CAPACITY}"
            )
        for word, repeat in entries:
            if not 0 <= word <= 0xFFFF:
                raise ValueError(f"entry {word:#x} is not a 16-bit word")
            if repeat < 1:
                raise ValueError("entry repeat counts must be >= 1")
        self._entries = tuple((int(w), int(r)) for w, r in entries)
        bounds = []
        total = 0
        for _, repeat in self._entries:
            total += repeat
            bounds.append(total)
        self._bounds = tuple(bounds)
        self.period = total
        self._decoded = tuple(decode(w) for w, _ in self._entries)

    @classmethod
    def from_words(cls, words: list[int]) -> "ScheduleTable":
        """Build from a flat word-per-slot list, compressing runs."""
        entries: list[tuple[int, int]] = []
        for word in words:
            if entries and entries[-1][0] == word:
                entries[-1] = (word, entries[-1][1] + 1)
            else:
                entries.append((word, 1))
        return cls(entries)

    @property
    def entries(self) -> tuple[tuple[int, int], ...]:
        return self._entries

    def _index(self, cycle: int) -> int:
        slot = cycle % self.period
        lo, hi = 0, len(self._bounds) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if slot < self._bounds[mid]:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def fetch_word(self, cycle: int) -> int:
        return self._entries[self._index(cycle)][0]

    def fetch(self, cycle: int) -> Instruction:
        return self._decoded[self._index(cycle)]


def fetch(table: ScheduleTable, cycle: int) -> Instruction:
    """entries[cycle mod period]; pure in the table contents."""
    return table.fetch(cycle)


# ---------------------------------------------------------------------------
# dump format: one 4-hex-digit word per line, prefixed by tile coordinates
# and entry index, plus the repeat count so compressed tables round-trip.

def dump_schedule(table: ScheduleTable, chip: int, x: int, y: int) -> str:
    lines = []
    for idx, (word, repeat) in enumerate(table.entries):
        lines.append(f"c{chip} x{x} y{y} e{idx} {word:04x} *{repeat}")
    return "\n".join(lines) + "\n"


def parse_schedule_dump(text: str) -> dict[tuple[int, int, int], ScheduleTable]:
    """Rebuild {(chip, x, y): ScheduleTable} from dump_schedule output."""
    pending: dict[tuple[int, int, int], list[tuple[int, int]]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"line {lineno}: expected 6 fields, got {len(parts)}")
        chip, x, y, idx = (int(parts[i][1:]) for i in range(4))
        word = int(parts[4], 16)
        repeat = int(parts[5][1:])
        key = (chip, x, y)
        entries = pending.setdefault(key, [])
        if idx != len(entries):
            raise ValueError(f"line {lineno}: entry index {idx} out of order")
        entries.append((word, repeat))
    return {key: ScheduleTable(entries) for key, entries in pending.items()}
