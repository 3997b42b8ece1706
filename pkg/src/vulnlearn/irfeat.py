"""Control-flow features from a textual SSA-style intermediate representation.

The grammar is deliberately small so the toolkit does not depend on a
compiler: ``define <name> {`` opens a function, ``label:`` lines open basic
blocks, instructions are ``%r = <opcode> <operands>`` or
``<opcode> <operands>`` with comma-separated operands, and ``;`` starts a
comment. Files use the ``.tir`` extension.

Per function we extract the control flow graph, a 9-bit opcode-category
vector and an intra-block use-def matrix per basic block, and assemble them
into a fixed 116-dimensional feature vector:
105 block-averaged strictly-upper-triangular entries of the 15x15 use-def
matrix, 9 block-averaged opcode-category bits, the mean of the CFG
adjacency matrix, and the basic-block count.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO

import numpy as np


class IrParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownOpcodeWarning(UserWarning):
    """An opcode outside the category table; it will be categorized 'other'."""


@dataclass
class Instruction:
    result: Optional[str]
    opcode: str
    operands: list[str]
    line: int = 0


@dataclass
class BasicBlock:
    label: str
    instructions: list[Instruction] = field(default_factory=list)


@dataclass
class IrFunction:
    name: str
    blocks: list[BasicBlock]
    edges: list[tuple[int, int]]


CATEGORIES = (
    "conditional",
    "aggregate",
    "binary",
    "bit_binary",
    "conversion",
    "memory_address",
    "termination",
    "vector_operation",
    "other",
)

OPCODE_CATEGORY: dict[str, str] = {}
for _ops, _cat in (
    (("icmp", "fcmp", "select"), "conditional"),
    (("extractvalue", "insertvalue"), "aggregate"),
    (
        ("add", "fadd", "sub", "fsub", "mul", "fmul",
         "div", "udiv", "sdiv", "fdiv", "rem", "urem", "srem", "frem"),
        "binary",
    ),
    (("and", "or", "xor", "shl", "lshr", "ashr"), "bit_binary"),
    (("trunc", "zext", "sext", "fptoint", "inttofp", "bitcast"), "conversion"),
    (("alloca", "load", "store", "getelementptr"), "memory_address"),
    (("br", "switch", "ret", "unreachable"), "termination"),
    (("extractelement", "insertelement", "shufflevector"), "vector_operation"),
):
    for _op in _ops:
        OPCODE_CATEGORY[_op] = _cat

TERMINATORS = frozenset({"br", "switch", "ret", "unreachable"})

USE_DEF_SIZE = 15
_N_TRI = USE_DEF_SIZE * (USE_DEF_SIZE - 1) // 2  # 105
BUILD_VECTOR_DIM = _N_TRI + len(CATEGORIES) + 2  # 116
_TRI_IDX = np.triu_indices(USE_DEF_SIZE, k=1)

_DEFINE_RE = re.compile(r"define\s+([\w.$@%]+)\s*\{\s*$")
_LABEL_RE = re.compile(r"([A-Za-z_][\w.]*):\s*$")
_INSTR_RE = re.compile(r"(?:(%[\w.]+)\s*=\s*)?([A-Za-z_][\w.]*)\s*(.*)$")
_LABEL_NAME_RE = re.compile(r"[A-Za-z_][\w.]*$")

_ENTRY_LABEL = "<entry>"


def category_of(opcode: str) -> str:
    return OPCODE_CATEGORY.get(opcode, "other")


def _branch_targets(inst: Instruction) -> list[str]:
    """Label operands of a terminator; bare names are targets, %vars and
    numeric constants are not."""
    targets = []
    for op in inst.operands:
        if op.startswith("%"):
            continue
        if _LABEL_NAME_RE.fullmatch(op):
            targets.append(op)
    return targets


def parse_ir(text: str) -> list[IrFunction]:
    """Parse the textual IR into functions with recovered CFG edges.

    Raises :class:`IrParseError` for structural problems (missing
    terminator, instruction after a terminator, duplicate SSA definition,
    branch to an undefined label). Unknown opcodes only produce an
    :class:`UnknownOpcodeWarning`.
    """
    functions: list[IrFunction] = []
    name: str | None = None
    blocks: list[BasicBlock] = []
    current: BasicBlock | None = None
    warned: set[str] = set()

    def close_block(lineno: int) -> None:
        if current is None:
            return
        if not current.instructions:
            raise IrParseError(f"empty basic block '{current.label}'", lineno)
        if current.instructions[-1].opcode not in TERMINATORS:
            raise IrParseError(
                f"block '{current.label}' does not end with a terminator", lineno
            )

    def finish_function(lineno: int) -> None:
        nonlocal name, blocks, current
        close_block(lineno)
        if not blocks:
            raise IrParseError(f"function '{name}' has no basic blocks", lineno)
        functions.append(_link_function(name, blocks))
        name, blocks, current = None, [], None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue

        if name is None:
            m = _DEFINE_RE.match(line)
            if not m:
                raise IrParseError(f"expected 'define <name> {{', got {line!r}", lineno)
            name = m.group(1)
            continue

        if line == "}":
            finish_function(lineno)
            continue

        m = _LABEL_RE.match(line)
        if m:
            close_block(lineno)
            label = m.group(1)
            if any(b.label == label for b in blocks):
                raise IrParseError(f"duplicate label '{label}'", lineno)
            current = BasicBlock(label=label)
            blocks.append(current)
            continue

        m = _INSTR_RE.match(line)
        if not m:
            raise IrParseError(f"cannot parse instruction {line!r}", lineno)
        result, opcode, rest = m.group(1), m.group(2), m.group(3)
        operands = [p.strip() for p in rest.split(",") if p.strip()] if rest else []
        if opcode not in OPCODE_CATEGORY and opcode not in warned:
            warned.add(opcode)
            warnings.warn(
                f"unknown opcode '{opcode}' at line {lineno}; categorized as 'other'",
                UnknownOpcodeWarning,
                stacklevel=2,
            )
        if current is None:
            current = BasicBlock(label=_ENTRY_LABEL)
            blocks.append(current)
        elif current.instructions and current.instructions[-1].opcode in TERMINATORS:
            raise IrParseError(
                f"instruction after terminator in block '{current.label}'", lineno
            )
        current.instructions.append(
            Instruction(result=result, opcode=opcode, operands=operands, line=lineno)
        )

    if name is not None:
        raise IrParseError(f"unterminated function '{name}'", len(text.splitlines()))
    return functions


def _link_function(name: str, blocks: list[BasicBlock]) -> IrFunction:
    label_index = {b.label: i for i, b in enumerate(blocks)}

    defined: dict[str, int] = {}
    for block in blocks:
        for inst in block.instructions:
            if inst.result is not None:
                if inst.result in defined:
                    raise IrParseError(
                        f"variable {inst.result} defined twice (first at line "
                        f"{defined[inst.result]})",
                        inst.line,
                    )
                defined[inst.result] = inst.line

    edges: set[tuple[int, int]] = set()
    for i, block in enumerate(blocks):
        term = block.instructions[-1]
        if term.opcode in ("ret", "unreachable"):
            continue
        targets = _branch_targets(term)
        if term.opcode in ("br", "switch") and not targets:
            raise IrParseError(f"'{term.opcode}' without a target label", term.line)
        for label in targets:
            j = label_index.get(label)
            if j is None:
                raise IrParseError(f"branch to undefined label '{label}'", term.line)
            edges.add((i, j))

    return IrFunction(name=name, blocks=blocks, edges=sorted(edges))


def parse_ir_file(path: str) -> list[IrFunction]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_ir(fh.read())


def op_vec(block: BasicBlock) -> np.ndarray:
    """9-bit indicator of opcode categories present in the block."""
    bits = np.zeros(len(CATEGORIES), dtype=np.int8)
    for inst in block.instructions:
        bits[CATEGORIES.index(category_of(inst.opcode))] = 1
    return bits


def use_def_matrix(block: BasicBlock) -> np.ndarray:
    """Symmetric n x n matrix linking a definition at instruction i to uses
    at instructions j within the same block; zero diagonal."""
    n = len(block.instructions)
    mat = np.zeros((n, n), dtype=np.int8)
    for i, inst in enumerate(block.instructions):
        if inst.result is None:
            continue
        for j, other in enumerate(block.instructions):
            if j != i and inst.result in other.operands:
                mat[i, j] = 1
                mat[j, i] = 1
    return mat


def build_vector(func: IrFunction) -> np.ndarray:
    """Assemble the 116-dimensional feature vector for one function."""
    n_blocks = len(func.blocks)
    if n_blocks == 0:
        raise ValueError(f"function '{func.name}' has no basic blocks")

    tri_sum = np.zeros(_N_TRI, dtype=np.float64)
    op_sum = np.zeros(len(CATEGORIES), dtype=np.float64)
    for block in func.blocks:
        mat = use_def_matrix(block)
        boxed = np.zeros((USE_DEF_SIZE, USE_DEF_SIZE), dtype=np.float64)
        s = min(mat.shape[0], USE_DEF_SIZE)
        boxed[:s, :s] = mat[:s, :s]
        tri_sum += boxed[_TRI_IDX]
        op_sum += op_vec(block)

    adjacency_mean = len(func.edges) / float(n_blocks * n_blocks)
    vec = np.concatenate(
        [tri_sum / n_blocks, op_sum / n_blocks, [adjacency_mean], [float(n_blocks)]]
    )
    assert vec.shape == (BUILD_VECTOR_DIM,)
    return vec


# --- CSV export -----------------------------------------------------------

CSV_HEADER = "fid," + ",".join(f"f{i}" for i in range(BUILD_VECTOR_DIM))


def write_feature_csv(
    rows: Iterable[tuple[str, np.ndarray]], fh: TextIO, header_comment: str | None = None
) -> None:
    if header_comment:
        fh.write(f"# {header_comment}\n")
    fh.write(CSV_HEADER + "\n")
    for fid, vec in rows:
        fh.write(fid + "," + ",".join(repr(float(v)) for v in vec) + "\n")


def read_feature_csv(path: str) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#") or line.startswith("fid,"):
                continue
            fid, _, rest = line.partition(",")
            vec = np.array([float(v) for v in rest.split(",")], dtype=np.float64)
            if vec.shape != (BUILD_VECTOR_DIM,):
                raise ValueError(
                    f"feature row for {fid!r} has {vec.shape[0]} values, "
                    f"expected {BUILD_VECTOR_DIM}"
                )
            out[fid] = vec
    return out
