"""OpenQASM-2 flavoured text export with a matching parser.

Gates with a QASM 2 counterpart are emitted natively; multi-controlled phases
and Pauli rotations become opaque declarations.  Everything QASM 2 cannot
express (layers, X-basis readout, idles, noise, conditional blocks, checks)
is carried in ``// @`` pragma comments so the text parses back to an equal
:class:`Circuit`.
"""
from __future__ import annotations

import re

from .ir import Check, Circuit, Condition, Instruction

HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'
_NATIVE = {"H": "h", "X": "x", "Y": "y", "Z": "z", "S": "s", "SDG": "sdg", "CX": "cx", "CZ": "cz",
           "CCZ": "ccz", "PHASE": "u1"}
_FROM_NATIVE = {v: k for k, v in _NATIVE.items()}
_CCZ_DEF = "gate ccz a,b,c { h c; ccx a,b,c; h c; }"


def _num(x: float) -> str:
    return repr(float(x))


def _qargs(qs) -> str:
    return ",".join(f"q[{q}]" for q in qs)


def _opaque_name(inst: Instruction) -> str:
    if inst.name == "MCZ":
        return f"mcz_{len(inst.targets)}"
    return f"{inst.name.lower()}_{inst.pauli}"


def _declarations(circuit: Circuit) -> list[str]:
    decls: dict[str, str] = {}
    for inst in circuit.walk():
        if inst.kind != "gate":
            continue
        if inst.name == "CCZ":
            decls["ccz"] = _CCZ_DEF
        elif inst.name in ("MCZ", "PAULIROT", "CPAULIROT"):
            name = _opaque_name(inst)
            args = ",".join(f"a{i}" for i in range(len(inst.targets)))
            theta = "(theta) " if inst.name != "MCZ" else " "
            decls[name] = f"opaque {name}{theta}{args};"
    return [decls[k] for k in sorted(decls)]


def _attrs(inst: Instruction) -> str:
    parts = []
    if inst.ideal:
        parts.append("ideal")
    if inst.kind == "measure" and inst.params:
        parts.append("p=" + ",".join(_num(p) for p in inst.params))
    return (" // @" + " ".join(parts)) if parts else ""


def _emit(inst: Instruction, out: list[str]) -> None:
    if inst.kind == "gate":
        if inst.name in _NATIVE:
            params = f"({_num(inst.params[0])})" if inst.name == "PHASE" else ""
            out.append(f"{_NATIVE[inst.name]}{params} {_qargs(inst.targets)};{_attrs(inst)}")
        else:
            params = f"({_num(inst.params[0])})" if inst.name != "MCZ" else ""
            out.append(f"{_opaque_name(inst)}{params} {_qargs(inst.targets)};{_attrs(inst)}")
    elif inst.kind == "measure":
        q, c = inst.targets[0], inst.clbit
        if inst.basis == "X":
            out.append(f"h q[{q}]; measure q[{q}] -> c[{c}]; // @xmeasure" + _attrs(inst).replace(" // @", " "))
        else:
            out.append(f"measure q[{q}] -> c[{c}];{_attrs(inst)}")
    elif inst.kind == "reset":
        out.append(f"reset q[{inst.targets[0]}];")
    elif inst.kind == "idle":
        out.append(f"// @idle {_num(inst.params[0])} {','.join(map(str, inst.targets))}")
    elif inst.kind == "noise":
        out.append(f"// @noise {inst.name} params={','.join(_num(p) for p in inst.params)} "
                   f"targets={','.join(map(str, inst.targets))} exclude={','.join(map(str, inst.exclude))}")
    elif inst.kind == "cond":
        checks = " ".join(f"{','.join(map(str, c.bits))}:{c.flag_parity}" for c in inst.condition.checks)
        out.append(f"// @if {inst.condition.mode} {checks}")
        for layer in inst.body:
            out.append("// @layer")
            for sub in layer:
                _emit(sub, out)
        out.append("// @endif")


def export_text(circuit: Circuit) -> str:
    """Deterministic text form of ``circuit``."""
    out = [HEADER.rstrip("\n")]
    out += _declarations(circuit)
    if circuit.name:
        out.append(f"// @name {circuit.name}")
    for check in circuit.checks:
        out.append(f"// @check {','.join(map(str, check.bits))}:{check.flag_parity}")
    if circuit.n_qubits:
        out.append(f"qreg q[{circuit.n_qubits}];")
    if circuit.n_clbits:
        out.append(f"creg c[{circuit.n_clbits}];")
    for layer in circuit.layers:
        out.append("// @layer")
        for inst in layer:
            _emit(inst, out)
    return "\n".join(out) + "\n"


_Q = re.compile(r"q\[(\d+)\]")
_GATE_LINE = re.compile(r"^([a-z0-9_]+?)(?:_([IXYZ]+|\d+))?(?:\(([^)]*)\))?\s+([^;]*);(.*)$")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t != "")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t != "")


def _parse_checks(tokens) -> tuple[Check, ...]:
    out = []
    for tok in tokens:
        bits, parity = tok.split(":")
        out.append(Check(_ints(bits), int(parity)))
    return tuple(out)


def _parse_attrs(text: str) -> dict:
    attrs = {"ideal": False, "params": ()}
    text = text.strip()
    if text.startswith("// @"):
        for tok in text[4:].split():
            if tok == "ideal":
                attrs["ideal"] = True
            elif tok.startswith("p="):
                attrs["params"] = _floats(tok[2:])
    return attrs


def _parse_instruction(line: str) -> Instruction:
    if line.startswith("// @idle "):
        _, _, t, qs = line.split(" ", 3)
        return Instruction("idle", "idle", _ints(qs), (float(t),))
    if line.startswith("// @noise "):
        fields = line.split(" ")
        kv = dict(f.split("=", 1) for f in fields[3:])
        return Instruction("noise", fields[2], _ints(kv["targets"]), _floats(kv["params"]),
                           exclude=_ints(kv["exclude"]))
    if line.startswith("reset "):
        return Instruction("reset", "reset", (int(_Q.search(line).group(1)),))
    if line.startswith("h ") and "// @xmeasure" in line:
        q = int(_Q.search(line).group(1))
        c = int(re.search(r"c\[(\d+)\]", line).group(1))
        attrs = _parse_attrs("// @" + line.split("// @xmeasure", 1)[1])
        return Instruction("measure", "measure", (q,), attrs["params"], clbit=c, basis="X")
    if line.startswith("measure "):
        q = int(_Q.search(line).group(1))
        c = int(re.search(r"c\[(\d+)\]", line).group(1))
        attrs = _parse_attrs(line.split(";", 1)[1])
        return Instruction("measure", "measure", (q,), attrs["params"], clbit=c, basis="Z")
    m = _GATE_LINE.match(line)
    if not m:
        raise ValueError(f"cannot parse line: {line!r}")
    head, suffix, params, args, rest = m.groups()
    targets = tuple(int(x) for x in _Q.findall(args))
    attrs = _parse_attrs(rest)
    values = _floats(params) if params else ()
    if head in ("paulirot", "cpaulirot"):
        return Instruction("gate", head.upper(), targets, values, suffix, ideal=attrs["ideal"])
    if head == "mcz":
        return Instruction("gate", "MCZ", targets, ideal=attrs["ideal"])
    name = head if suffix is None else f"{head}_{suffix}"
    if name not in _FROM_NATIVE:
        raise ValueError(f"unknown gate {name!r}")
    return Instruction("gate", _FROM_NATIVE[name], targets, values, ideal=attrs["ideal"])


def parse_text(text: str) -> Circuit:
    """Inverse of :func:`export_text`."""
    n_qubits = n_clbits = 0
    name = ""
    checks: list[Check] = []
    stack: list[list[list[Instruction]]] = [[]]
    conditions: list[Condition] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith(("OPENQASM", "include", "gate ", "opaque ")):
            continue
        if line.startswith("qreg "):
            n_qubits = int(re.search(r"\[(\d+)\]", line).group(1))
        elif line.startswith("creg "):
            n_clbits = int(re.search(r"\[(\d+)\]", line).group(1))
        elif line.startswith("// @name "):
            name = line[len("// @name "):]
        elif line.startswith("// @check "):
            checks += _parse_checks(line.split()[2:])
        elif line == "// @layer":
            stack[-1].append([])
        elif line.startswith("// @if "):
            tokens = line.split()
            conditions.append(Condition(_parse_checks(tokens[3:]), tokens[2]))
            stack.append([])
        elif line == "// @endif":
            body = stack.pop()
            cond = Instruction("cond", "if", condition=conditions.pop(), body=tuple(tuple(l) for l in body))
            stack[-1][-1].append(cond)
        elif line.startswith("//") and not line.startswith(("// @idle", "// @noise")):
            continue
        else:
            stack[-1][-1].append(_parse_instruction(line))
    circ = Circuit(n_qubits, name=name, checks=tuple(checks))
    for layer in stack[0]:
        circ.append(*layer)
    circ.n_clbits = max(circ.n_clbits, n_clbits)
    return circ
