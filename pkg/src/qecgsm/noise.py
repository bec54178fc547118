"""Hardware noise presets, Kraus channels and noisy-circuit compilation.

Each preset error entry is read as an average gate infidelity.  A two-qubit
gate is a depolarizing channel followed by idling for the gate time, and the
depolarizing strength is calibrated so the composite matches the preset.
"""
from __future__ import annotations

import dataclasses
import functools
import itertools
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuit.builders import decompose_toffoli as _decompose
from .circuit.ir import Circuit, Instruction, noise
from .densop import KrausChannel
from .pauli import PauliString

PRESET_FIELDS = ("t1_us", "t2_us", "readout_time_ns", "err_1q", "gate_time_2q_ns",
                 "err_2q", "err_init", "err_readout")


@dataclass(frozen=True)
class NoisePreset:
    name: str
    t1_us: float
    t2_us: float
    readout_time_ns: float
    err_1q: float
    gate_time_2q_ns: float
    err_2q: float
    err_init: float
    err_readout: float

    def __post_init__(self):
        if self.t1_us <= 0 or self.t2_us <= 0:
            raise ValueError(f"preset {self.name!r}: coherence times must be positive")
        if self.t2_us > 2 * self.t1_us:
            raise ValueError(f"preset {self.name!r}: T2 = {self.t2_us} exceeds 2*T1")
        if self.readout_time_ns < 0 or self.gate_time_2q_ns < 0:
            raise ValueError(f"preset {self.name!r}: durations must be non-negative")
        for f in ("err_1q", "err_2q", "err_init", "err_readout"):
            if not 0 <= getattr(self, f) <= 1:
                raise ValueError(f"preset {self.name!r}: {f} must lie in [0, 1]")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping, name: str | None = None) -> NoisePreset:
        allowed = set(PRESET_FIELDS) | {"name"}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ValueError(f"unknown preset field(s): {', '.join(unknown)}")
        missing = [f for f in PRESET_FIELDS if f not in data]
        if missing:
            raise ValueError(f"missing preset field(s): {', '.join(missing)}")
        label = name or data.get("name")
        if not label:
            raise ValueError("preset needs a name")
        return cls(label, **{f: float(data[f]) for f in PRESET_FIELDS})

    def replace(self, **changes) -> NoisePreset:
        return dataclasses.replace(self, **changes)


PRESETS: dict[str, NoisePreset] = {
    "sycamore": NoisePreset("sycamore", 20, 30, 660, 1e-3, 34, 3e-3, 1e-2, 2e-2),
    "ibm_brisbane": NoisePreset("ibm_brisbane", 217, 130, 4000, 2.2e-4, 600, 7.5e-3, 1e-2, 1e-2),
    "projective": NoisePreset("projective", 1000, 1000, 200, 0, 20, 1e-4, 1e-3, 1e-3),
}


def get_preset(name: str) -> NoisePreset:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


def presets_to_json(presets: Mapping[str, NoisePreset] | None = None) -> str:
    presets = PRESETS if presets is None else presets
    return json.dumps({k: {f: getattr(p, f) for f in PRESET_FIELDS} for k, p in presets.items()}, indent=2)


def presets_from_json(text: str) -> dict[str, NoisePreset]:
    data = json.loads(text)
    return {k: NoisePreset.from_dict(v, name=k) for k, v in data.items()}


def load_preset_file(path: str | Path) -> dict[str, NoisePreset]:
    """Load a JSON file holding one preset object or a mapping name -> preset."""
    data = json.loads(Path(path).read_text())
    if "t1_us" in data:
        preset = NoisePreset.from_dict(data, name=data.get("name") or Path(path).stem)
        return {preset.name: preset}
    return {k: NoisePreset.from_dict(v, name=k) for k, v in data.items()}


# ---------------------------------------------------------------------------
# channels


def dephasing_prob(t_us: float, t1_us: float, t2_us: float) -> float:
    if t2_us > 2 * t1_us * (1 + 1e-12):
        raise ValueError(f"T2 = {t2_us} exceeds 2*T1 = {2 * t1_us}")
    rate = 1 / t2_us - 1 / (2 * t1_us)
    return 0.0 if rate <= 0 else (1 - math.exp(-t_us * rate)) / 2


@functools.lru_cache(maxsize=256)
def idle_channel(t_us: float, t1_us: float, t2_us: float) -> KrausChannel:
    """Amplitude damping with ``1 - exp(-t/T1)`` followed by pure dephasing at rate ``1/T2 - 1/(2 T1)``."""
    if t_us < 0:
        raise ValueError("idle duration must be non-negative")
    gamma = 0.0 if math.isinf(t1_us) else 1 - math.exp(-t_us / t1_us)
    pz = dephasing_prob(t_us, t1_us, t2_us)
    damp = [np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
            np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)]
    z = np.diag([1.0, -1.0]).astype(complex)
    ops = [math.sqrt(1 - pz) * a for a in damp] + [math.sqrt(pz) * (z @ a) for a in damp]
    ops = [k for k in ops if np.any(k)]
    return KrausChannel(ops, f"idle({t_us:g}us)")


@functools.lru_cache(maxsize=64)
def depolarizing(n_qubits: int, p: float) -> KrausChannel:
    """``(1-p) rho + p/(4^n - 1) * sum_{P != I} P rho P``."""
    if not 0 <= p <= 1:
        raise ValueError("depolarizing probability must lie in [0, 1]")
    ops = [math.sqrt(1 - p) * np.eye(1 << n_qubits, dtype=complex)]
    if p > 0:
        amp = math.sqrt(p / (4 ** n_qubits - 1))
        for labels in itertools.product("IXYZ", repeat=n_qubits):
            if set(labels) != {"I"}:
                ops.append(amp * PauliString.from_label("".join(labels)).to_matrix())
    return KrausChannel(ops, f"depolarizing{n_qubits}({p:g})")


@functools.lru_cache(maxsize=64)
def bit_flip(p: float) -> KrausChannel:
    ops = [math.sqrt(1 - p) * np.eye(2, dtype=complex)]
    if p > 0:
        ops.append(math.sqrt(p) * np.array([[0, 1], [1, 0]], dtype=complex))
    return KrausChannel(ops, f"bitflip({p:g})")


def tensor_channel(*channels: KrausChannel) -> KrausChannel:
    """Parallel product; the first channel acts on the lowest operator qubit."""
    ops = [np.ones((1, 1), dtype=complex)]
    for ch in channels:
        ops = [np.kron(k, o) for o in ops for k in ch.kraus_ops]
    return KrausChannel(ops, "x".join(ch.label for ch in channels))


def compose(*channels: KrausChannel) -> KrausChannel:
    """Sequential composition; ``channels[0]`` acts first."""
    ops = [np.eye(channels[0].kraus_ops[0].shape[0], dtype=complex)]
    for ch in channels:
        ops = [k @ o for o in ops for k in ch.kraus_ops]
    return KrausChannel(ops, "o".join(ch.label for ch in reversed(channels)))


def process_fidelity(ch: KrausChannel) -> float:
    d = ch.kraus_ops[0].shape[0]
    return float(sum(abs(np.trace(k)) ** 2 for k in ch.kraus_ops).real / d ** 2)


def average_infidelity(ch: KrausChannel) -> float:
    d = ch.kraus_ops[0].shape[0]
    return d * (1 - process_fidelity(ch)) / (d + 1)


def depolarizing_for_infidelity(n_qubits: int, r: float) -> float:
    d = 1 << n_qubits
    return r * (d + 1) / d


# ---------------------------------------------------------------------------
# models


def two_qubit_idle(preset: NoisePreset, duration_ns: float | None = None) -> KrausChannel:
    t = (preset.gate_time_2q_ns if duration_ns is None else duration_ns) / 1000
    one = idle_channel(t, preset.t1_us, preset.t2_us)
    return tensor_channel(one, one)


def calibrate_2q_depolarizing(preset: NoisePreset, strict: bool = True) -> float:
    """Depolarizing probability that makes depolarizing-after-idle hit ``err_2q``.

    Process fidelity is affine in the depolarizing probability, so the solve
    is exact; :func:`composite_2q_infidelity` re-checks it numerically.  When
    idling alone already exceeds ``err_2q`` this raises, or returns 0 with
    ``strict=False`` (the gate error is then set by its duration).
    """
    idle2 = two_qubit_idle(preset)
    r_idle = average_infidelity(idle2)
    if r_idle > preset.err_2q + 1e-15:
        if not strict:
            return 0.0
        raise ValueError(f"preset {preset.name!r}: idling alone ({r_idle:.3g}) exceeds err_2q ({preset.err_2q})")
    d2 = 16
    f_idle = process_fidelity(idle2)
    f_target = 1 - preset.err_2q * 5 / 4
    # F(D_p o E) = (1 - p) F_E + p (1 - F_E) / (d^2 - 1)
    slope = f_idle - (1 - f_idle) / (d2 - 1)
    return max(0.0, (f_idle - f_target) / slope)


def composite_2q_infidelity(preset: NoisePreset, p_dep: float) -> float:
    return average_infidelity(compose(two_qubit_idle(preset), depolarizing(2, p_dep)))


@dataclass(frozen=True)
class NoiseModel:
    preset: NoisePreset
    p1: float = 0.0
    p2: float = 0.0
    perfect_control: bool = False
    noiseless: bool = False
    multi_factor: float = 2.0
    _extra: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_preset(cls, preset: NoisePreset | str, perfect_control: bool = False,
                    noiseless: bool = False, strict: bool = True) -> NoiseModel:
        if isinstance(preset, str):
            preset = get_preset(preset)
        if noiseless:
            return cls(preset, noiseless=True)
        if perfect_control:
            return cls(preset, 0.0, 0.0, perfect_control=True)
        p1 = depolarizing_for_infidelity(1, preset.err_1q)
        return cls(preset, p1, calibrate_2q_depolarizing(preset, strict))

    @classmethod
    def ideal(cls) -> NoiseModel:
        return cls(PRESETS["projective"], noiseless=True)

    def with_times(self, readout_time_ns: float | None = None,
                   gate_time_2q_ns: float | None = None) -> NoiseModel:
        changes = {}
        if readout_time_ns is not None:
            changes["readout_time_ns"] = readout_time_ns
        if gate_time_2q_ns is not None:
            changes["gate_time_2q_ns"] = gate_time_2q_ns
        return NoiseModel.from_preset(self.preset.replace(**changes), self.perfect_control, self.noiseless, strict=False)

    @property
    def gate_time_us(self) -> float:
        return self.preset.gate_time_2q_ns / 1000

    @property
    def readout_time_us(self) -> float:
        return self.preset.readout_time_ns / 1000

    def multi_qubit_probability(self, n_qubits: int) -> float:
        if n_qubits == 1:
            return self.p1
        if n_qubits == 2:
            return self.p2
        return min(1.0, self.multi_factor * self.p2)

    def _idle(self, t_us: float, targets=(), exclude=()) -> Instruction:
        return noise("idle", targets, (t_us, self.preset.t1_us, self.preset.t2_us), exclude)


def compile_noisy(circuit: Circuit, model: NoiseModel, decompose_toffoli: bool = False) -> Circuit:
    """Insert noise instructions following the hardware rules of the model.

    * reset: bit-flip mixture with the initialization error;
    * gates: depolarizing on the gate's qubits right after the gate (none for
      gates marked ``ideal``);
    * layers with two-qubit gates: global idle for one gate time; gates on
      three or more qubits double the depolarizing strength and the idle time;
    * measurements: global idle for the readout time on every live qubit not
      being measured, then the classical record flips with ``err_readout``;
    * explicit idles: idle channel on the listed qubits.

    ``decompose_toffoli`` first rewrites each CCZ into five two-qubit gates, so
    it is charged as ordinary two-qubit gates instead of a native gate.
    """
    if decompose_toffoli:
        circuit = _decompose(circuit)
    if model.noiseless:
        return circuit.copy()
    out = Circuit(circuit.n_qubits, name=circuit.name, checks=circuit.checks)
    for layer in _compile_layers(circuit.layers, model):
        out.append(*layer)
    out.n_clbits = max(out.n_clbits, circuit.n_clbits)
    return out


def _compile_layers(layers, model: NoiseModel) -> list[tuple[Instruction, ...]]:
    preset = model.preset
    out: list[tuple[Instruction, ...]] = []
    for layer in layers:
        measured = tuple(q for inst in layer if inst.kind == "measure" for q in inst.targets)
        if measured:
            out.append((model._idle(model.readout_time_us, exclude=measured),))
        main: list[Instruction] = []
        after: list[Instruction] = []
        duration = 0.0
        for inst in layer:
            if inst.kind == "measure":
                main.append(dataclasses.replace(inst, params=(preset.err_readout,)))
            elif inst.kind == "reset":
                main.append(inst)
                if preset.err_init > 0:
                    after.append(noise("bitflip", inst.targets, (preset.err_init,)))
            elif inst.kind == "gate":
                main.append(inst)
                if inst.ideal:
                    continue
                k = len(inst.targets)
                p = model.multi_qubit_probability(k)
                if p > 0:
                    after.append(noise("depolarizing", inst.targets, (p,)))
                if k >= 2:
                    duration = max(duration, model.gate_time_us * (1 if k == 2 else model.multi_factor))
            elif inst.kind == "idle":
                main.append(model._idle(inst.params[0], inst.targets))
            elif inst.kind == "cond":
                body = _compile_layers(inst.body, model)
                main.append(dataclasses.replace(inst, body=tuple(body)))
            else:
                main.append(inst)
        out.append(tuple(main))
        if after:
            out.append(tuple(after))
        if duration > 0:
            out.append((model._idle(duration),))
    return out


def channel_for(inst: Instruction) -> KrausChannel:
    """Kraus channel described by a ``noise`` instruction (targets given per qubit for idles)."""
    if inst.name == "idle":
        return idle_channel(*inst.params)
    if inst.name == "depolarizing":
        return depolarizing(len(inst.targets), inst.params[0])
    if inst.name == "bitflip":
        return bit_flip(inst.params[0])
    raise ValueError(f"unknown noise channel {inst.name!r}")
