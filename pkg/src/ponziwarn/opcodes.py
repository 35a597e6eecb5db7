"""EVM bytecode disassembly and opcode-frequency features.

A contract's code feature vector is the histogram of its opcodes over a
frozen 76-category table (``data/opcode_categories.tsv``). PUSH immediates
are data, not instructions, and never reach the histogram.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

INVALID = "INVALID"

# byte -> (mnemonic, number of immediate data bytes). Only PUSH1..PUSH32
# carry immediates. Bytes absent from this table disassemble to INVALID.
OPCODE_TABLE: dict[int, tuple[str, int]] = {
    0x00: ("STOP", 0), 0x01: ("ADD", 0), 0x02: ("MUL", 0), 0x03: ("SUB", 0),
    0x04: ("DIV", 0), 0x05: ("SDIV", 0), 0x06: ("MOD", 0), 0x07: ("SMOD", 0),
    0x08: ("ADDMOD", 0), 0x09: ("MULMOD", 0), 0x0A: ("EXP", 0),
    0x0B: ("SIGNEXTEND", 0),
    0x10: ("LT", 0), 0x11: ("GT", 0), 0x12: ("SLT", 0), 0x13: ("SGT", 0),
    0x14: ("EQ", 0), 0x15: ("ISZERO", 0), 0x16: ("AND", 0), 0x17: ("OR", 0),
    0x18: ("XOR", 0), 0x19: ("NOT", 0), 0x1A: ("BYTE", 0), 0x1B: ("SHL", 0),
    0x1C: ("SHR", 0), 0x1D: ("SAR", 0),
    0x20: ("SHA3", 0),
    0x30: ("ADDRESS", 0), 0x31: ("BALANCE", 0), 0x32: ("ORIGIN", 0),
    0x33: ("CALLER", 0), 0x34: ("CALLVALUE", 0), 0x35: ("CALLDATALOAD", 0),
    0x36: ("CALLDATASIZE", 0), 0x37: ("CALLDATACOPY", 0), 0x38: ("CODESIZE", 0),
    0x39: ("CODECOPY", 0), 0x3A: ("GASPRICE", 0), 0x3B: ("EXTCODESIZE", 0),
    0x3C: ("EXTCODECOPY", 0), 0x3D: ("RETURNDATASIZE", 0),
    0x3E: ("RETURNDATACOPY", 0), 0x3F: ("EXTCODEHASH", 0),
    0x40: ("BLOCKHASH", 0), 0x41: ("COINBASE", 0), 0x42: ("TIMESTAMP", 0),
    0x43: ("NUMBER", 0), 0x44: ("DIFFICULTY", 0), 0x45: ("GASLIMIT", 0),
    0x46: ("CHAINID", 0), 0x47: ("SELFBALANCE", 0), 0x48: ("BASEFEE", 0),
    0x49: ("BLOBHASH", 0), 0x4A: ("BLOBBASEFEE", 0),
    0x50: ("POP", 0), 0x51: ("MLOAD", 0), 0x52: ("MSTORE", 0),
    0x53: ("MSTORE8", 0), 0x54: ("SLOAD", 0), 0x55: ("SSTORE", 0),
    0x56: ("JUMP", 0), 0x57: ("JUMPI", 0), 0x58: ("PC", 0), 0x59: ("MSIZE", 0),
    0x5A: ("GAS", 0), 0x5B: ("JUMPDEST", 0), 0x5C: ("TLOAD", 0),
    0x5D: ("TSTORE", 0), 0x5E: ("MCOPY", 0), 0x5F: ("PUSH0", 0),
    0xF0: ("CREATE", 0), 0xF1: ("CALL", 0), 0xF2: ("CALLCODE", 0),
    0xF3: ("RETURN", 0), 0xF4: ("DELEGATECALL", 0), 0xF5: ("CREATE2", 0),
    0xFA: ("STATICCALL", 0), 0xFD: ("REVERT", 0), 0xFE: (INVALID, 0),
    0xFF: ("SELFDESTRUCT", 0),
}
OPCODE_TABLE.update({0x60 + n: (f"PUSH{n + 1}", n + 1) for n in range(32)})
OPCODE_TABLE.update({0x80 + n: (f"DUP{n + 1}", 0) for n in range(16)})
OPCODE_TABLE.update({0x90 + n: (f"SWAP{n + 1}", 0) for n in range(16)})
OPCODE_TABLE.update({0xA0 + n: (f"LOG{n}", 0) for n in range(5)})


class BytecodeError(ValueError):
    """Raised when hex input cannot be decoded into bytecode."""


def _load_category_table() -> tuple[list[str], dict[str, int]]:
    names: list[str] = []
    index_of: dict[str, int] = {}
    text = resources.files("ponziwarn.data").joinpath("opcode_categories.tsv").read_text()
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    for row in csv.DictReader(rows, delimiter="\t"):
        idx = int(row["index"])
        assert idx == len(names), "category table rows must be dense and ordered"
        names.append(row["category"])
        for mnemonic in row["members"].split(","):
            index_of[mnemonic.strip()] = idx
    return names, index_of


CATEGORY_NAMES, CATEGORY_INDEX = _load_category_table()
N_CATEGORIES = len(CATEGORY_NAMES)
assert N_CATEGORIES == 76


def category_of(mnemonic: str) -> int:
    """Map an opcode mnemonic to its category index; unlisted ones are INVALID."""
    return CATEGORY_INDEX.get(mnemonic, CATEGORY_INDEX[INVALID])


def disassemble(code: bytes) -> list[str]:
    """Decode bytecode into a list of opcode mnemonics, in byte order.

    PUSH1..PUSH32 consume their immediate bytes, which are not emitted.
    A PUSH truncated by end-of-code still counts; the missing immediate
    bytes are silently absorbed (deployed code routinely ends in a
    metadata trailer that decodes this way). Undefined bytes become
    INVALID.
    """
    ops = []
    i = 0
    n = len(code)
    while i < n:
        mnemonic, imm = OPCODE_TABLE.get(code[i], (INVALID, 0))
        ops.append(mnemonic)
        i += 1 + imm
    return ops


@dataclass(frozen=True)
class OpcodeHistogram:
    """Counts of disassembled opcodes over the 76 fixed categories."""

    counts: np.ndarray  # shape (76,), int64
    total: int

    def __post_init__(self):
        if self.counts.shape != (N_CATEGORIES,):
            raise ValueError(f"expected {N_CATEGORIES} categories, got {self.counts.shape}")
        if (self.counts < 0).any() or int(self.counts.sum()) != self.total:
            raise ValueError("histogram counts must be non-negative and sum to total")

    def __add__(self, other: "OpcodeHistogram") -> "OpcodeHistogram":
        return OpcodeHistogram(self.counts + other.counts, self.total + other.total)

    def frequencies(self, normalize: bool = False) -> np.ndarray:
        """Counts as float64; optionally normalized by the total opcode count."""
        freq = self.counts.astype(np.float64)
        if normalize and self.total > 0:
            freq /= self.total
        return freq


def opcode_histogram(ops: list[str]) -> OpcodeHistogram:
    counts = np.zeros(N_CATEGORIES, dtype=np.int64)
    for op in ops:
        counts[category_of(op)] += 1
    return OpcodeHistogram(counts, len(ops))


def code_histogram(code: bytes) -> OpcodeHistogram:
    return opcode_histogram(disassemble(code))


def decode_hex(text: str) -> bytes:
    """Decode hex text ('0x' prefix and surrounding whitespace allowed)."""
    cleaned = text.strip()
    if cleaned.startswith(("0x", "0X")):
        cleaned = cleaned[2:]
    if len(cleaned) % 2 != 0:
        raise BytecodeError(f"odd-length hex input: offset {len(cleaned)}")
    try:
        return bytes.fromhex(cleaned)
    except ValueError:
        for offset, ch in enumerate(cleaned):
            if ch not in "0123456789abcdefABCDEF":
                raise BytecodeError(f"non-hex character {ch!r} at offset {offset}") from None
        raise


def load_bytecode_file(path) -> bytes:
    with open(path, "r", encoding="ascii") as fh:
        return decode_hex(fh.read())
