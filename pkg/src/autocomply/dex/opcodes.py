"""Dalvik opcode table: mnemonic and instruction format for every opcode byte.

The format's leading digit is the instruction width in 16-bit code units.
Unassigned opcodes are listed as ``unused`` with format 10x.
"""

from __future__ import annotations

FORMAT_UNITS = {
    "10x": 1, "12x": 1, "11n": 1, "11x": 1, "10t": 1,
    "20t": 2, "20bc": 2, "22x": 2, "21t": 2, "21s": 2, "21h": 2, "21c": 2,
    "23x": 2, "22b": 2, "22t": 2, "22s": 2, "22c": 2,
    "30t": 3, "32x": 3, "31i": 3, "31t": 3, "31c": 3, "35c": 3, "3rc": 3,
    "45cc": 4, "4rcc": 4,
    "51l": 5,
}

_RAW = [
    (0x00, "nop", "10x"),
    (0x01, "move", "12x"),
    (0x02, "move/from16", "22x"),
    (0x03, "move/16", "32x"),
    (0x04, "move-wide", "12x"),
    (0x05, "move-wide/from16", "22x"),
    (0x06, "move-wide/16", "32x"),
    (0x07, "move-object", "12x"),
    (0x08, "move-object/from16", "22x"),
    (0x09, "move-object/16", "32x"),
    (0x0A, "move-result", "11x"),
    (0x0B, "move-result-wide", "11x"),
    (0x0C, "move-result-object", "11x"),
    (0x0D, "move-exception", "11x"),
    (0x0E, "return-void", "10x"),
    (0x0F, "return", "11x"),
    (0x10, "return-wide", "11x"),
    (0x11, "return-object", "11x"),
    (0x12, "const/4", "11n"),
    (0x13, "const/16", "21s"),
    (0x14, "const", "31i"),
    (0x15, "const/high16", "21h"),
    (0x16, "const-wide/16", "21s"),
    (0x17, "const-wide/32", "31i"),
    (0x18, "const-wide", "51l"),
    (0x19, "const-wide/high16", "21h"),
    (0x1A, "const-string", "21c"),
    (0x1B, "const-string/jumbo", "31c"),
    (0x1C, "const-class", "21c"),
    (0x1D, "monitor-enter", "11x"),
    (0x1E, "monitor-exit", "11x"),
    (0x1F, "check-cast", "21c"),
    (0x20, "instance-of", "22c"),
    (0x21, "array-length", "12x"),
    (0x22, "new-instance", "21c"),
    (0x23, "new-array", "22c"),
    (0x24, "filled-new-array", "35c"),
    (0x25, "filled-new-array/range", "3rc"),
    (0x26, "fill-array-data", "31t"),
    (0x27, "throw", "11x"),
    (0x28, "goto", "10t"),
    (0x29, "goto/16", "20t"),
    (0x2A, "goto/32", "30t"),
    (0x2B, "packed-switch", "31t"),
    (0x2C, "sparse-switch", "31t"),
    (0x2D, "cmpl-float", "23x"),
    (0x2E, "cmpg-float", "23x"),
    (0x2F, "cmpl-double", "23x"),
    (0x30, "cmpg-double", "23x"),
    (0x31, "cmp-long", "23x"),
    (0x32, "if-eq", "22t"),
    (0x33, "if-ne", "22t"),
    (0x34, "if-lt", "22t"),
    (0x35, "if-ge", "22t"),
    (0x36, "if-gt", "22t"),
    (0x37, "if-le", "22t"),
    (0x38, "if-eqz", "21t"),
    (0x39, "if-nez", "21t"),
    (0x3A, "if-ltz", "21t"),
    (0x3B, "if-gez", "21t"),
    (0x3C, "if-gtz", "21t"),
    (0x3D, "if-lez", "21t"),
]

_ARRAY_OPS = ["aget", "aget-wide", "aget-object", "aget-boolean", "aget-byte", "aget-char", "aget-short",
              "aput", "aput-wide", "aput-object", "aput-boolean", "aput-byte", "aput-char", "aput-short"]
_FIELD_SUFFIXES = ["", "-wide", "-object", "-boolean", "-byte", "-char", "-short"]
_UNOPS = ["neg-int", "not-int", "neg-long", "not-long", "neg-float", "neg-double",
          "int-to-long", "int-to-float", "int-to-double", "long-to-int", "long-to-float", "long-to-double",
          "float-to-int", "float-to-long", "float-to-double", "double-to-int", "double-to-long",
          "double-to-float", "int-to-byte", "int-to-char", "int-to-short"]
_BINOP_NAMES = ["add", "sub", "mul", "div", "rem", "and", "or", "xor", "shl", "shr", "ushr"]
_BINOPS = ([f"{op}-int" for op in _BINOP_NAMES] + [f"{op}-long" for op in _BINOP_NAMES]
           + [f"{op}-float" for op in _BINOP_NAMES[:5]] + [f"{op}-double" for op in _BINOP_NAMES[:5]])
_LIT16 = ["add-int/lit16", "rsub-int", "mul-int/lit16", "div-int/lit16", "rem-int/lit16",
          "and-int/lit16", "or-int/lit16", "xor-int/lit16"]
_LIT8 = ["add-int/lit8", "rsub-int/lit8", "mul-int/lit8", "div-int/lit8", "rem-int/lit8",
         "and-int/lit8", "or-int/lit8", "xor-int/lit8", "shl-int/lit8", "shr-int/lit8", "ushr-int/lit8"]


def _build() -> list[tuple[str, str]]:
    table: list[tuple[str, str]] = [("unused", "10x")] * 256
    for op, name, fmt in _RAW:
        table[op] = (name, fmt)
    for i, name in enumerate(_ARRAY_OPS):
        table[0x44 + i] = (name, "23x")
    for i, suffix in enumerate(_FIELD_SUFFIXES):
        table[0x52 + i] = ("iget" + suffix, "22c")
        table[0x59 + i] = ("iput" + suffix, "22c")
        table[0x60 + i] = ("sget" + suffix, "21c")
        table[0x67 + i] = ("sput" + suffix, "21c")
    for i, kind in enumerate(["virtual", "super", "direct", "static", "interface"]):
        table[0x6E + i] = (f"invoke-{kind}", "35c")
        table[0x74 + i] = (f"invoke-{kind}/range", "3rc")
    for i, name in enumerate(_UNOPS):
        table[0x7B + i] = (name, "12x")
    for i, name in enumerate(_BINOPS):
        table[0x90 + i] = (name, "23x")
        table[0xB0 + i] = (name + "/2addr", "12x")
    for i, name in enumerate(_LIT16):
        table[0xD0 + i] = (name, "22s")
    for i, name in enumerate(_LIT8):
        table[0xD8 + i] = (name, "22b")
    table[0xFA] = ("invoke-polymorphic", "45cc")
    table[0xFB] = ("invoke-polymorphic/range", "4rcc")
    table[0xFC] = ("invoke-custom", "35c")
    table[0xFD] = ("invoke-custom/range", "3rc")
    table[0xFE] = ("const-method-handle", "21c")
    table[0xFF] = ("const-method-type", "21c")
    return table


OPCODES: list[tuple[str, str]] = _build()
NAME_TO_OPCODE = {name: op for op, (name, _) in enumerate(OPCODES) if name != "unused"}

# switch / array payload pseudo-opcodes (full first code unit)
PACKED_SWITCH_PAYLOAD = 0x0100
SPARSE_SWITCH_PAYLOAD = 0x0200
FILL_ARRAY_DATA_PAYLOAD = 0x0300


def units(opcode: int) -> int:
    return FORMAT_UNITS[OPCODES[opcode][1]]


def name(opcode: int) -> str:
    return OPCODES[opcode][0]


def fmt(opcode: int) -> str:
    return OPCODES[opcode][1]


def _writes_wide(mnemonic: str) -> bool:
    base = mnemonic.split("/")[0]
    if base in ("move-wide", "move-result-wide", "aget-wide", "iget-wide", "sget-wide") or base.startswith("const-wide"):
        return True
    if "-to-" in base:
        return base.rsplit("-to-", 1)[1] in ("long", "double")
    return base.endswith("-long") or base.endswith("-double")


def _build_dest() -> dict[int, bool]:
    """Opcodes whose first register operand is written, mapped to wide-ness."""
    dest: dict[int, bool] = {}
    writers = list(range(0x01, 0x0E)) + list(range(0x12, 0x1D)) + list(range(0x20, 0x24))
    writers += list(range(0x2D, 0x32)) + list(range(0x44, 0x4B)) + list(range(0x52, 0x59))
    writers += list(range(0x60, 0x67)) + list(range(0x7B, 0xE3)) + [0xFE, 0xFF]
    for op in writers:
        mnemonic = OPCODES[op][0]
        if mnemonic == "unused":
            continue
        # comparisons produce an int even for wide operands
        wide = _writes_wide(mnemonic) and not mnemonic.startswith("cmp")
        dest[op] = wide
    return dest


DEST_WRITERS: dict[int, bool] = _build_dest()
