"""Loading of transaction records, labels and per-contract bytecode.

Expected on-disk layout (all paths configurable):

    tx_dir/<address>.csv        header: from,to,value,timestamp
    bytecode_dir/<address>.hex  hex text, optional 0x prefix
    labels.csv                  header: address,label   (1 Ponzi, 0 non-Ponzi)

Values are wei and parsed as arbitrary-precision ints; 64-bit would
overflow on large transfers.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

from .opcodes import load_bytecode_file

TX_FIELDS = ("from", "to", "value", "timestamp")


class IngestError(ValueError):
    """Raised for malformed transaction, label or bytecode inputs."""


@dataclass(frozen=True)
class TxRecord:
    """One timestamped transfer; ``index`` is the file row order tie-breaker."""

    from_address: str
    to_address: str
    value: int
    timestamp: int
    index: int

    @property
    def sort_key(self) -> tuple[int, int]:
        return (self.timestamp, self.index)


@dataclass(frozen=True)
class LabeledAccount:
    address: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise IngestError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class AccountData:
    """Everything known about one target contract account."""

    address: str
    bytecode: bytes
    records: tuple[TxRecord, ...]
    label: int


def normalize_address(address: str) -> str:
    # checksummed (mixed-case) and plain addresses must compare equal
    return address.strip().lower()


def parse_transactions(stream) -> list[TxRecord]:
    """Parse a from,to,value,timestamp CSV into records, row order preserved."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("transaction file is empty (missing header)") from None
    header = [h.strip().lower() for h in header]
    if header[: len(TX_FIELDS)] != list(TX_FIELDS):
        raise IngestError(f"expected header {','.join(TX_FIELDS)}, got {','.join(header)}")

    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) < 4:
            raise IngestError(f"line {lineno}: expected 4 fields, got {len(row)}")
        src = normalize_address(row[0])
        dst = normalize_address(row[1])
        if not src or not dst:
            raise IngestError(f"line {lineno}: empty from/to address")
        try:
            value = int(row[2])
            timestamp = int(row[3])
        except ValueError:
            raise IngestError(f"line {lineno}: non-integer value or timestamp") from None
        if value < 0:
            raise IngestError(f"line {lineno}: negative value {value}")
        if timestamp < 0:
            raise IngestError(f"line {lineno}: negative timestamp {timestamp}")
        records.append(TxRecord(src, dst, value, timestamp, len(records)))
    return records


def load_transaction_file(path) -> list[TxRecord]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        try:
            return parse_transactions(fh)
        except IngestError as exc:
            raise IngestError(f"{path}: {exc}") from None


def load_labels(path) -> list[LabeledAccount]:
    accounts = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                accounts.append(LabeledAccount(normalize_address(row[0]), int(row[1])))
            except (IndexError, ValueError) as exc:
                raise IngestError(f"{path} line {lineno}: {exc}") from None
    return accounts


def _find_file(directory, address: str, extensions=(".csv", ".hex", ".txt", "")) -> str | None:
    for ext in extensions:
        candidate = os.path.join(directory, address + ext)
        if os.path.isfile(candidate):
            return candidate
    return None


def known_contracts(bytecode_dir) -> frozenset[str]:
    """Addresses with a bytecode file; used to flag counterparty contracts."""
    addresses = set()
    for name in os.listdir(bytecode_dir):
        stem = name.rsplit(".", 1)[0] if "." in name else name
        addresses.add(normalize_address(stem))
    return frozenset(addresses)


def load_dataset(tx_dir, bytecode_dir, labels_file, min_tx: int = 100) -> list[AccountData]:
    """Load every labeled account, dropping those with fewer than min_tx records.

    Raises IngestError listing all labeled addresses that have no bytecode
    file; transaction-less accounts are simply filtered (a contract with no
    calls has no transaction file to parse).
    """
    labels = load_labels(labels_file)
    missing = [a.address for a in labels if _find_file(bytecode_dir, a.address) is None]
    if missing:
        raise IngestError(f"no bytecode file for labeled addresses: {', '.join(sorted(missing))}")

    dataset = []
    for account in labels:
        tx_path = _find_file(tx_dir, account.address)
        records = load_transaction_file(tx_path) if tx_path else []
        if len(records) < min_tx:
            continue
        bytecode = load_bytecode_file(_find_file(bytecode_dir, account.address))
        dataset.append(AccountData(account.address, bytecode, tuple(records), account.label))
    return dataset
