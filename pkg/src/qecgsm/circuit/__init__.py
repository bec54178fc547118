"""Circuit IR, gate matrices, builders and text export."""
from .builders import (build_canonical_sm, build_gsm_pauli_rotations, build_gsm_sandwich, build_iceberg_gsm,
                       build_mshot_gsm, build_shor_style_gsm_422, build_state_prep, build_steane_gsm,
                       ccz_decomposition, connectivity, decompose_toffoli, iceberg_decoder)
from .gates import circuit_unitary, gate_matrix
from .ir import (Check, Circuit, Condition, Instruction, cond, depth_2q, gate, idle, measure, noise, reset,
                 schedule_gates, toffoli_depth)
from .qasm import export_text, parse_text

__all__ = [
    "Check", "Circuit", "Condition", "Instruction", "build_canonical_sm", "build_gsm_pauli_rotations",
    "build_gsm_sandwich", "build_iceberg_gsm", "build_mshot_gsm", "build_shor_style_gsm_422",
    "build_state_prep", "build_steane_gsm", "ccz_decomposition", "circuit_unitary", "cond", "connectivity", "decompose_toffoli", "depth_2q",
    "export_text", "gate", "gate_matrix", "iceberg_decoder", "idle", "measure", "noise", "parse_text",
    "reset", "schedule_gates", "toffoli_depth",
]
