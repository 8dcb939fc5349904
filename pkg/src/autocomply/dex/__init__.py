from .hierarchy import lookup_method, merge_multidex, name_matches, subclasses_of
from .model import CodeItem, DecodedInsn, DexClass, DexMethod, MethodRef, TryBlock
from .parser import DexFile, parse_dex

__all__ = [
    "CodeItem", "DecodedInsn", "DexClass", "DexFile", "DexMethod", "MethodRef", "TryBlock",
    "lookup_method", "merge_multidex", "name_matches", "parse_dex", "subclasses_of",
]
