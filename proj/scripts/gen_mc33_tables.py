#!/usr/bin/env python3
"""Emit the Lewiner MC33 lookup tables as a C++ include.

The tables ship with scikit-image (BSD-licensed, derived from Thomas Lewiner's
original LookUpTable.h). Usage:

    python3 scripts/gen_mc33_tables.py > src/isosurface/mc33_tables.inc
"""
import base64

import numpy as np
from skimage.measure import _marching_cubes_lewiner_luts as luts

NAMES = [
    "CASES", "TILING1", "TILING2", "TILING3_1", "TILING3_2", "TILING4_1",
    "TILING4_2", "TILING5", "TILING6_1_1", "TILING6_1_2", "TILING6_2",
    "TILING7_1", "TILING7_2", "TILING7_3", "TILING7_4_1", "TILING7_4_2",
    "TILING8", "TILING9", "TILING10_1_1", "TILING10_1_1_", "TILING10_1_2",
    "TILING10_2", "TILING10_2_", "TILING11", "TILING12_1_1", "TILING12_1_1_",
    "TILING12_1_2", "TILING12_2", "TILING12_2_", "TILING13_1", "TILING13_1_",
    "TILING13_2", "TILING13_2_", "TILING13_3", "TILING13_3_", "TILING13_4",
    "TILING13_5_1", "TILING13_5_2", "TILING14", "TEST3", "TEST4", "TEST6",
    "TEST7", "TEST10", "TEST12", "TEST13", "SUBCONFIG13",
]


def decode(entry):
    shape, text = entry
    arr = np.frombuffer(base64.decodebytes(text.encode("utf-8")), dtype="int8")
    return arr.reshape(shape)


def cxx_name(name):
    inverted = name.endswith("_")
    head, *rest = name.rstrip("_").split("_")
    out = "k" + head.capitalize() + "".join("_" + r for r in rest)
    return out + "Inv" if inverted else out


def emit(arr):
    if arr.ndim == 1:
        return "{" + ", ".join(str(int(v)) for v in arr) + "}"
    return "{\n" + ",\n".join(emit(a) for a in arr) + "}"


print("// Generated by scripts/gen_mc33_tables.py. Do not edit.")
print("// Lewiner et al. MC33 case/tiling/test tables.")
for name in NAMES:
    arr = decode(getattr(luts, name))
    dims = "".join(f"[{d}]" for d in arr.shape)
    print(f"constexpr std::int8_t {cxx_name(name)}{dims} = {emit(arr)};")
