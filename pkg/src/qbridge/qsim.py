"""Statevector circuit simulator and the two-bitstring superposition builder.

The gate set is deliberately tiny (X, H, CNOT plus a terminal full
measurement): it is exactly what the bundled demo needs — preparing an
equal-weight superposition of two classical bit patterns so that two
emoticons can be displayed "at once".

Conventions fixed here and used everywhere else in the package:

- qubit ``i`` corresponds to bitstring position ``i``, leftmost = qubit 0,
  so a measured bitstring reads left to right as qubits 0..n-1;
- emoticons are two characters, each with a code point <= 255, encoded as
  two big-endian 8-bit groups (16 bits total). Wider character sets are
  intentionally unsupported.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 20

_SQRT2_INV = 1.0 / np.sqrt(2.0)
_X_MATRIX = np.array([[0, 1], [1, 0]], dtype=complex)
_H_MATRIX = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV


class QsimError(Exception):
    """Base class for simulator errors."""


class IndexOutOfRange(QsimError):
    """Gate references a qubit outside the register."""


class CircuitTooLarge(QsimError):
    """Register exceeds the supported qubit count."""


class LengthMismatch(QsimError):
    """The two bitstrings of a superposition circuit differ in length."""


class WrongLength(QsimError):
    """Emoticon text is not exactly two characters."""


class NonEncodableCharacter(QsimError):
    """Emoticon contains a character with code point > 255."""


class UndecodableKey(QsimError):
    """Counts key is not a 16-bit binary string."""


@dataclass(frozen=True)
class Gate:
    """One gate application: ``name`` in {X, H, CNOT} plus qubit operands."""

    name: str
    qubits: tuple[int, ...]

    def __post_init__(self):
        if self.name in ("X", "H"):
            if len(self.qubits) != 1:
                raise ValueError(f"{self.name} takes exactly one qubit")
        elif self.name == "CNOT":
            if len(self.qubits) != 2:
                raise ValueError("CNOT takes (control, target)")
            if self.qubits[0] == self.qubits[1]:
                raise ValueError("CNOT control and target must differ")
        else:
            raise ValueError(f"unknown gate {self.name!r}")


def X(q: int) -> Gate:
    return Gate("X", (q,))


def H(q: int) -> Gate:
    return Gate("H", (q,))


def CNOT(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target))


@dataclass(frozen=True)
class CircuitSpec:
    """Gate-list circuit description, always terminated by a full measurement."""

    num_qubits: int
    gates: tuple[Gate, ...] = ()
    measure_all: bool = True

    def validate(self) -> None:
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        if self.num_qubits > MAX_QUBITS:
            raise CircuitTooLarge(
                f"{self.num_qubits} qubits exceeds the {MAX_QUBITS}-qubit cap"
            )
        for gate in self.gates:
            for q in gate.qubits:
                if not 0 <= q < self.num_qubits:
                    raise IndexOutOfRange(
                        f"gate {gate.name} touches qubit {q} on a "
                        f"{self.num_qubits}-qubit register"
                    )

    def to_wire(self) -> dict:
        """Serialize to the wire shape used inside submission payloads."""
        gates = []
        for g in self.gates:
            gates.append([g.name, *g.qubits])
        return {"numQubits": self.num_qubits, "gates": gates}

    def to_json(self) -> str:
        return json.dumps(self.to_wire())

    @classmethod
    def from_wire(cls, doc: dict) -> "CircuitSpec":
        try:
            num_qubits = int(doc["numQubits"])
            gates = tuple(Gate(item[0], tuple(int(q) for q in item[1:])) for item in doc["gates"])
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise ValueError(f"malformed circuit document: {exc}") from exc
        circuit = cls(num_qubits=num_qubits, gates=gates)
        circuit.validate()
        return circuit

    @classmethod
    def from_json(cls, text: str) -> "CircuitSpec":
        return cls.from_wire(json.loads(text))


@dataclass(frozen=True)
class NoiseModel:
    """Readout noise only: each measured bit flips independently."""

    readout_flip_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.readout_flip_prob <= 0.5:
            raise ValueError("readout_flip_prob must lie in [0, 0.5]")


def zero_state(num_qubits: int) -> np.ndarray:
    """|0...0> on ``num_qubits`` qubits."""
    state = np.zeros(2**num_qubits, dtype=complex)
    state[0] = 1.0
    return state


def apply_gate(state: np.ndarray, gate: Gate, num_qubits: int) -> np.ndarray:
    """Apply one gate, returning a fresh statevector (input untouched)."""
    for q in gate.qubits:
        if not 0 <= q < num_qubits:
            raise IndexOutOfRange(f"qubit {q} out of range for {num_qubits} qubits")
    if gate.name == "X":
        return _apply_single(state, _X_MATRIX, gate.qubits[0], num_qubits)
    if gate.name == "H":
        return _apply_single(state, _H_MATRIX, gate.qubits[0], num_qubits)
    return _apply_cnot(state, gate.qubits[0], gate.qubits[1], num_qubits)


def _apply_single(state: np.ndarray, matrix: np.ndarray, qubit: int, n: int) -> np.ndarray:
    # Axis q of the [2]*n view is qubit q because index bit 0 is the MSB.
    tensor = np.moveaxis(state.reshape([2] * n), qubit, 0)
    out = np.tensordot(matrix, tensor, axes=([1], [0]))
    return np.moveaxis(out, 0, qubit).reshape(-1)


def _apply_cnot(state: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    tensor = state.reshape([2] * n).copy()
    sel: list = [slice(None)] * n
    sel[control] = 1
    sub = tensor[tuple(sel)]
    target_axis = target - 1 if target > control else target
    tensor[tuple(sel)] = np.flip(sub, axis=target_axis).copy()
    return tensor.reshape(-1)


def statevector(circuit: CircuitSpec) -> np.ndarray:
    """Run the circuit's gates from |0...0> and return the final state."""
    circuit.validate()
    state = zero_state(circuit.num_qubits)
    for gate in circuit.gates:
        state = apply_gate(state, gate, circuit.num_qubits)
    return state


def simulate(
    circuit: CircuitSpec,
    shots: int,
    seed: int,
    noise: NoiseModel | None = None,
) -> dict[str, int]:
    """Sample measurement counts for ``shots`` repetitions.

    Deterministic for a fixed (circuit, shots, seed, noise). Readout noise,
    when present, flips each sampled bit independently after sampling, so a
    zero flip probability reproduces the noiseless counts bit for bit.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    circuit.validate()
    n = circuit.num_qubits
    amplitudes = statevector(circuit)
    probs = np.abs(amplitudes) ** 2
    probs = probs / probs.sum()

    rng = np.random.default_rng(seed)
    outcomes = rng.choice(len(probs), size=shots, p=probs)

    shifts = np.arange(n - 1, -1, -1)
    bits = (outcomes[:, None] >> shifts[None, :]) & 1
    if noise is not None:
        flips = rng.random((shots, n)) < noise.readout_flip_prob
        bits = bits ^ flips

    packed = bits @ (1 << shifts)
    values, counts = np.unique(packed, return_counts=True)
    return {format(int(v), f"0{n}b"): int(c) for v, c in zip(values, counts)}


def build_superposition_circuit(bits_a: str, bits_b: str) -> CircuitSpec:
    """Circuit whose ideal measurement distribution is the two given patterns.

    Equal patterns collapse to a plain basis-state preparation. Otherwise the
    first differing position becomes the superposed pivot qubit; the patterns
    are swapped if needed so the pivot bit of the X-prepared pattern is 0,
    which keeps both final amplitudes real and positive (+1/sqrt(2)).
    """
    _check_bits(bits_a)
    _check_bits(bits_b)
    if len(bits_a) != len(bits_b):
        raise LengthMismatch(
            f"bit patterns differ in length: {len(bits_a)} vs {len(bits_b)}"
        )
    n = len(bits_a)
    if n > MAX_QUBITS:
        raise CircuitTooLarge(f"{n} qubits exceeds the {MAX_QUBITS}-qubit cap")

    differing = [i for i in range(n) if bits_a[i] != bits_b[i]]
    gates: list[Gate] = []
    if not differing:
        for i, bit in enumerate(bits_a):
            if bit == "1":
                gates.append(X(i))
        return CircuitSpec(num_qubits=n, gates=tuple(gates))

    pivot = differing[0]
    if bits_a[pivot] == "1":
        bits_a, bits_b = bits_b, bits_a
    for i, bit in enumerate(bits_a):
        if bit == "1":
            gates.append(X(i))
    gates.append(H(pivot))
    for i in differing[1:]:
        gates.append(CNOT(pivot, i))
    return CircuitSpec(num_qubits=n, gates=tuple(gates))


def _check_bits(bits: str) -> None:
    if not bits or len(bits) > MAX_QUBITS:
        raise ValueError(f"bit pattern length must be 1..{MAX_QUBITS}")
    if any(c not in "01" for c in bits):
        raise ValueError(f"bit pattern must contain only 0/1, got {bits!r}")


def encode_emoticon(text: str) -> str:
    """Encode a 2-character emoticon as 16 bits (two big-endian bytes)."""
    if len(text) != 2:
        raise WrongLength(f"emoticon must be exactly 2 characters, got {len(text)}")
    groups = []
    for ch in text:
        point = ord(ch)
        if point > 255:
            raise NonEncodableCharacter(
                f"character {ch!r} (code point {point}) does not fit in 8 bits"
            )
        groups.append(format(point, "08b"))
    return "".join(groups)


def decode_emoticon(bits: str) -> str:
    """Inverse of :func:`encode_emoticon`."""
    if len(bits) != 16 or any(c not in "01" for c in bits):
        raise UndecodableKey(f"not a 16-bit binary key: {bits!r}")
    return chr(int(bits[:8], 2)) + chr(int(bits[8:], 2))


def decode_counts(counts: dict[str, int]) -> dict[str, float]:
    """Map 16-bit count keys back to emoticons with relative frequencies."""
    shots = sum(counts.values())
    if shots <= 0:
        raise ValueError("counts must contain at least one shot")
    frequencies: dict[str, float] = {}
    for key, value in counts.items():
        emoticon = decode_emoticon(key)
        frequencies[emoticon] = frequencies.get(emoticon, 0.0) + value / shots
    return frequencies
