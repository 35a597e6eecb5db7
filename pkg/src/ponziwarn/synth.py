"""Seed-deterministic synthetic dataset generator.

Real labeled Ponzi data cannot be redistributed, so desk-scale runs and
the end-to-end tests use generated accounts that mimic the two signals the
detector relies on:

* Ponzi-like bytecode leans heavily on the return-data opcode cluster
  (RETURNDATASIZE / RETURNDATACOPY plus SMOD, GASLIMIT, CODESIZE); normal
  bytecode leans on DELEGATECALL / CREATE2 / BYTE / SAR / DIFFICULTY with
  uniform noise elsewhere.
* Ponzi-like transactions follow the in-then-out star motif: investors pay
  the contract, and payouts to earlier investors are always funded by value
  received strictly earlier. Normal contracts see random bipartite traffic
  with disjoint sender and receiver pools.
"""

from __future__ import annotations

import os

import numpy as np

from .ingest import AccountData, TxRecord
from .opcodes import OPCODE_TABLE

WEI = 10**18
_BASE_TIMESTAMP = 1_500_000_000

# mnemonic -> byte, single-byte opcodes only (synthetic code never needs
# PUSH immediates, which keeps hand-checking the fixtures easy)
_BYTE_OF = {name: byte for byte, (name, imm) in OPCODE_TABLE.items() if imm == 0}

_PONZI_CODE_BIAS = ("RETURNDATASIZE", "RETURNDATACOPY", "SMOD", "GASLIMIT", "CODESIZE")
_NORMAL_CODE_BIAS = ("DELEGATECALL", "CREATE2", "BYTE", "DIFFICULTY", "SAR")
_COMMON_OPS = (
    "PUSH1", "PUSH2", "DUP1", "SWAP1", "POP", "ADD", "MSTORE", "MLOAD",
    "JUMP", "JUMPI", "JUMPDEST", "CALLVALUE", "CALLER", "SSTORE", "SLOAD",
    "ISZERO", "EQ", "STOP", "RETURN",
)


def _address(rng: np.random.Generator) -> str:
    return "0x" + "".join(rng.choice(list("0123456789abcdef"), size=40))


def _synth_bytecode(rng: np.random.Generator, biased_ops, n_ops: int) -> bytes:
    ops = list(_COMMON_OPS) + list(biased_ops)
    # biased opcodes get ~8x the probability mass of a common opcode
    weights = np.array([1.0] * len(_COMMON_OPS) + [8.0] * len(biased_ops))
    weights /= weights.sum()
    code = bytearray()
    for name in rng.choice(ops, size=n_ops, p=weights):
        if name.startswith("PUSH"):
            width = int(name[4:])
            code.append(0x60 + width - 1)
            code.extend(rng.integers(0, 256, size=width, dtype=np.uint8).tobytes())
        else:
            code.append(_BYTE_OF[name])
    return bytes(code)


def _ponzi_records(rng: np.random.Generator, target: str, n_records: int) -> list[TxRecord]:
    investors = [_address(rng) for _ in range(int(rng.integers(8, 21)))]
    funded: list[str] = []   # investors who have already paid in
    balance = 0
    records: list[TxRecord] = []
    timestamp = _BASE_TIMESTAMP + int(rng.integers(0, 10_000))
    while len(records) < n_records:
        timestamp += int(rng.integers(60, 3_600))
        pay_out = funded and balance > 0 and rng.random() < 0.45
        if pay_out:
            # pay an early investor out of previously received funds only
            recipient = funded[int(rng.integers(0, max(1, len(funded) // 2)))]
            amount = int(balance * rng.uniform(0.2, 0.8))
            if amount == 0:
                continue
            balance -= amount
            records.append(TxRecord(target, recipient, amount, timestamp, len(records)))
        else:
            investor = investors[int(rng.integers(0, len(investors)))]
            amount = int(rng.uniform(0.1, 5.0) * WEI)
            balance += amount
            if investor not in funded:
                funded.append(investor)
            records.append(TxRecord(investor, target, amount, timestamp, len(records)))
    return records


def _normal_records(rng: np.random.Generator, target: str, n_records: int) -> list[TxRecord]:
    senders = [_address(rng) for _ in range(int(rng.integers(3, 9)))]
    receivers = [_address(rng) for _ in range(int(rng.integers(3, 9)))]
    records: list[TxRecord] = []
    timestamp = _BASE_TIMESTAMP + int(rng.integers(0, 10_000))
    for _ in range(n_records):
        timestamp += int(rng.integers(60, 3_600))
        amount = int(rng.uniform(0.01, 20.0) * WEI)
        if rng.random() < 0.5:
            sender = senders[int(rng.integers(0, len(senders)))]
            records.append(TxRecord(sender, target, amount, timestamp, len(records)))
        else:
            receiver = receivers[int(rng.integers(0, len(receivers)))]
            records.append(TxRecord(target, receiver, amount, timestamp, len(records)))
    return records


def synth_generate(n_ponzi: int, n_normal: int, delta: int, m: int,
                   seed: int = 0) -> list[AccountData]:
    """Generate n_ponzi + n_normal labeled accounts, each with at least
    m * delta transaction records. Fully determined by the seed."""
    if n_ponzi < 1 or n_normal < 1:
        raise ValueError("need at least one account of each class")
    rng = np.random.Generator(np.random.Philox(seed))
    accounts = []
    for label, count in ((1, n_ponzi), (0, n_normal)):
        for _ in range(count):
            address = _address(rng)
            n_records = m * delta + int(rng.integers(0, 51))
            if label == 1:
                bytecode = _synth_bytecode(rng, _PONZI_CODE_BIAS, int(rng.integers(400, 900)))
                records = _ponzi_records(rng, address, n_records)
            else:
                bytecode = _synth_bytecode(rng, _NORMAL_CODE_BIAS, int(rng.integers(400, 900)))
                records = _normal_records(rng, address, n_records)
            accounts.append(AccountData(address, bytecode, tuple(records), label))
    return accounts


def write_dataset(accounts: list[AccountData], out_dir):
    """Write accounts in the on-disk layout load_dataset expects."""
    tx_dir = os.path.join(out_dir, "tx")
    bytecode_dir = os.path.join(out_dir, "bytecode")
    os.makedirs(tx_dir, exist_ok=True)
    os.makedirs(bytecode_dir, exist_ok=True)
    with open(os.path.join(out_dir, "labels.csv"), "w", encoding="utf-8") as labels:
        labels.write("address,label\n")
        for account in accounts:
            labels.write(f"{account.address},{account.label}\n")
            with open(os.path.join(bytecode_dir, account.address + ".hex"), "w") as fh:
                fh.write("0x" + account.bytecode.hex() + "\n")
            with open(os.path.join(tx_dir, account.address + ".csv"), "w") as fh:
                fh.write("from,to,value,timestamp\n")
                for r in account.records:
                    fh.write(f"{r.from_address},{r.to_address},{r.value},{r.timestamp}\n")
    return out_dir
