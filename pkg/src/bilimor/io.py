"""Model directories: a small TOML manifest plus one MatrixMarket file per matrix.

Layout::

    model.toml      A = "A.mtx"
                    N = ["N1.mtx", "N2.mtx"]
                    B = "B.mtx"
                    C = "C.mtx"
                    gamma = 0.4        # optional input scaling
    A.mtx, N1.mtx, ...

``gamma``, when present, records that the stored realization is
``(A, gamma N, gamma B, C)``; the physical response is recovered by
driving it with ``u / gamma``.
"""

import hashlib
import os
import sys as _sys
from pathlib import Path

import numpy as np
import scipy.io as sio
import scipy.sparse as sp

from .exceptions import InputError
from .system import BilinearSystem

if _sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MANIFEST = "model.toml"


def write_matrix(path, M):
    """Write ``M`` losslessly (17 significant digits), sparse if mostly zero."""
    M = np.asarray(M)
    if np.iscomplexobj(M):
        raise InputError("model files hold real matrices only")
    if M.size > 100 and np.count_nonzero(M) < 0.2 * M.size:
        sio.mmwrite(str(path), sp.coo_array(M), precision=17)
    else:
        sio.mmwrite(str(path), M, precision=17)


def read_matrix(path):
    M = sio.mmread(str(path))
    if sp.issparse(M):
        M = M.toarray()
    return np.asarray(M, dtype=float)


def save_model(sys, directory, gamma=None):
    """Write ``sys`` to ``directory`` (created if needed). Returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix(directory / "A.mtx", sys.A)
    names = []
    for k, Nk in enumerate(sys.N, start=1):
        name = f"N{k}.mtx"
        write_matrix(directory / name, Nk)
        names.append(name)
    write_matrix(directory / "B.mtx", sys.B)
    write_matrix(directory / "C.mtx", sys.C)
    lines = [
        'A = "A.mtx"',
        "N = [" + ", ".join(f'"{name}"' for name in names) + "]",
        'B = "B.mtx"',
        'C = "C.mtx"',
    ]
    if gamma is not None:
        lines.append(f"gamma = {float(gamma)!r}")
    manifest = directory / MANIFEST
    atomic_write_text(manifest, "\n".join(lines) + "\n")
    return manifest


def load_model(directory):
    """Read a model directory. Returns ``(system, gamma)``; gamma may be None."""
    directory = Path(directory)
    manifest = directory / MANIFEST
    if not manifest.is_file():
        raise InputError(f"{directory} has no {MANIFEST}")
    try:
        fields = tomllib.loads(manifest.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"malformed manifest {manifest}: {exc}") from exc
    missing = {"A", "N", "B", "C"} - set(fields)
    if missing:
        raise InputError(f"manifest lacks fields {sorted(missing)}")
    if not isinstance(fields["N"], list):
        raise InputError("manifest field N must be a list")
    try:
        A = read_matrix(directory / fields["A"])
        N = [read_matrix(directory / name) for name in fields["N"]]
        B = read_matrix(directory / fields["B"])
        C = read_matrix(directory / fields["C"])
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read model matrices: {exc}") from exc
    gamma = fields.get("gamma")
    if gamma is not None and not (isinstance(gamma, (int, float)) and gamma > 0):
        raise InputError("gamma must be a positive number")
    return BilinearSystem(A, N, B, C), (None if gamma is None else float(gamma))


def model_digest(directory):
    """SHA-256 over the manifest and every file it references."""
    directory = Path(directory)
    fields = tomllib.loads((directory / MANIFEST).read_text())
    digest = hashlib.sha256((directory / MANIFEST).read_bytes())
    for name in [fields["A"], *fields["N"], fields["B"], fields["C"]]:
        digest.update((directory / name).read_bytes())
    return digest.hexdigest()


def atomic_write_text(path, text):
    """Write via a temporary file and rename so readers never see partial output."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)
