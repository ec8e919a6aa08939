from __future__ import annotations
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Union

import numpy as np


def _default(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")


def dumps_bytes(payload: Any) -> bytes:
    """Deterministic JSON: sorted keys, repr-exact floats, Infinity/NaN allowed."""
    text = json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, default=_default)
    return (text + "\n").encode("utf-8")


def atomic_write(path: Union[str, Path], data: bytes) -> Path:
    """Write to a temp file in the target directory, then rename over path."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
