"""Model-file serialization.

A built model is stored as a flat JSON envelope: partition assignment, core
indices, part sizes, the rescaled core-kernel entries, and k. The spectrum
is recomputed on load. Integer fields round-trip bit-exactly; kernel entries
round-trip through repr and land within 1e-12 (in practice exactly).
"""

from __future__ import annotations

import json

import numpy as np

from .coreset import CoreModel, Coreset, Partition, build_core_model, rescaled_core_kernel
from .errors import DataError
from .kernels import KernelMatrix, eigendecompose, elementary_symmetric

FORMAT = "coredpp-model-v1"


def model_to_dict(model: CoreModel) -> dict:
    return {
        "format": FORMAT,
        "n": int(model.partition.n),
        "m": int(model.partition.m),
        "k": int(model.k),
        "assignment": [int(c) for c in model.partition.assignment],
        "cores": [int(c) for c in model.coreset.cores],
        "part_sizes": [int(s) for s in model.part_sizes],
        "core_kernel": [[float(v) for v in row] for row in model.core_kernel.entries],
    }


def save_core_model(model: CoreModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def model_from_dict(payload: dict) -> CoreModel:
    if payload.get("format") != FORMAT:
        raise DataError(f"unrecognized model format {payload.get('format')!r}")
    try:
        m = int(payload["m"])
        k = int(payload["k"])
        assignment = np.asarray(payload["assignment"], dtype=np.intp)
        cores = np.asarray(payload["cores"], dtype=np.intp)
        part_sizes = np.asarray(payload["part_sizes"], dtype=np.intp)
        entries = np.asarray(payload["core_kernel"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model file: {exc}") from exc
    partition = Partition.from_assignment(assignment, m)
    coreset = Coreset(cores)
    coreset.validate_for(partition)
    if not np.array_equal(partition.part_sizes, part_sizes):
        raise DataError("part_sizes inconsistent with assignment")
    if entries.shape != (m, m):
        raise DataError(f"core_kernel must be {m}x{m}, got {entries.shape}")
    core_kernel = KernelMatrix(entries)
    spectrum = eigendecompose(core_kernel)
    normalizer = elementary_symmetric(spectrum.eigenvalues, k)
    if normalizer <= 1e-300:
        raise DataError(f"stored model is degenerate: e_{k} = {normalizer:.3g}")
    return CoreModel(partition, coreset, core_kernel, spectrum, part_sizes, k, normalizer)


def load_core_model(path) -> CoreModel:
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from exc
    return model_from_dict(payload)


def rebuild_core_model(kernel, model: CoreModel) -> CoreModel:
    """Recompute a model from its partition/coreset against a ground kernel.

    Used to check that a loaded model matches the dataset it is applied to.
    """
    check = rescaled_core_kernel(kernel, model.partition, model.coreset)
    if not np.allclose(check.entries, model.core_kernel.entries, rtol=0, atol=1e-9):
        raise DataError("model core kernel does not match the supplied dataset/kernel")
    return build_core_model(kernel, model.partition, model.coreset, model.k)
