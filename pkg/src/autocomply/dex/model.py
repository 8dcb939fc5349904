from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

# Instruction kinds kept by the selective decoder.
INVOKE = "invoke"
RETURN = "return"
CONST_NULL = "const_null"
BRANCH = "branch"
THROW = "throw"
MOVE_RESULT = "move_result"
OTHER = "other"

ACC_STATIC = 0x8
ACC_PRIVATE = 0x2
ACC_NATIVE = 0x100
ACC_ABSTRACT = 0x400
ACC_CONSTRUCTOR = 0x10000


@dataclass(frozen=True, order=True)
class MethodRef:
    owner: str
    name: str
    descriptor: str

    def __str__(self) -> str:
        return f"{self.owner}->{self.name}{self.descriptor}"

    @property
    def returns_void(self) -> bool:
        return self.descriptor.endswith(")V")


@dataclass(frozen=True)
class DecodedInsn:
    offset: int
    kind: str
    length: int
    opcode: int = -1
    target: Optional[MethodRef] = None
    method_idx: Optional[int] = None
    flavor: Optional[str] = None
    args: tuple[int, ...] = ()
    # return / const_null / move_result register; None for return-void
    register: Optional[int] = None
    targets: tuple[int, ...] = ()
    falls_through: bool = True
    # registers overwritten by an OTHER instruction, and copy source for move-object
    writes: tuple[int, ...] = ()
    copy_from: Optional[int] = None
    # a return whose operand is a null literal (text fixtures only)
    null_literal: bool = False


@dataclass(frozen=True)
class TryBlock:
    start: int
    end: int
    handlers: tuple[int, ...]


@dataclass(frozen=True)
class CodeItem:
    registers: int
    instructions: tuple[DecodedInsn, ...]
    try_handlers: tuple[TryBlock, ...] = ()
    insns_size: int = 0
    ins_size: int = 0
    # (offset, length) of switch / array payload tables skipped as data
    payloads: tuple[tuple[int, int], ...] = ()

    def at(self, offset: int) -> DecodedInsn:
        for insn in self.instructions:
            if insn.offset == offset:
                return insn
        raise KeyError(offset)


@dataclass(frozen=True)
class DexMethod:
    owner: str
    name: str
    descriptor: str
    code: Optional[CodeItem] = None
    access_flags: int = 0

    @property
    def ref(self) -> MethodRef:
        return MethodRef(self.owner, self.name, self.descriptor)


@dataclass(frozen=True)
class DexClass:
    name: str
    superclass: Optional[str]
    interfaces: tuple[str, ...] = ()
    methods: tuple[DexMethod, ...] = field(default_factory=tuple)
    access_flags: int = 0

    def find(self, name: str, descriptor: Optional[str] = None) -> list[DexMethod]:
        return [m for m in self.methods
                if m.name == name and (descriptor is None or m.descriptor == descriptor)]


def type_to_name(descriptor: str) -> str:
    """``Lcom/example/Foo;`` -> ``com.example.Foo``; other descriptors unchanged."""
    if descriptor.startswith("L") and descriptor.endswith(";"):
        return descriptor[1:-1].replace("/", ".")
    return descriptor


def name_to_type(name: str) -> str:
    if name.startswith("[") or len(name) == 1:
        return name
    return "L" + name.replace(".", "/") + ";"


def descriptor_params(descriptor: str) -> list[str]:
    """Split ``(ILjava/lang/String;[J)V`` into parameter type descriptors."""
    body = descriptor[1:descriptor.index(")")]
    out, i = [], 0
    while i < len(body):
        j = i
        while body[j] == "[":
            j += 1
        if body[j] == "L":
            j = body.index(";", j)
        out.append(body[i:j + 1])
        i = j + 1
    return out


def descriptor_return(descriptor: str) -> str:
    return descriptor[descriptor.index(")") + 1:]
