"""File formats: trajectory CSV, model files, reports, digests.

Numbers serialize as the shortest decimal that round-trips the double, so
re-reading any file reproduces the in-memory values bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .dynamics import Trajectory
from .errors import FormatError
from .neural import DenseNetwork, deserialize, serialize


def fmt(x: float) -> str:
    return repr(float(x))


def write_csv(path, header, columns) -> None:
    """Write equal-length columns under a comma-separated header."""
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0])
    lines = [",".join(header)]
    for i in range(n):
        cells = []
        for c in cols:
            v = c[i]
            if isinstance(v, (bool, np.bool_)):
                cells.append("1" if v else "0")
            elif isinstance(v, str):
                cells.append(v)
            else:
                cells.append(fmt(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def trajectory_to_csv(traj: Trajectory) -> str:
    d = traj.dim
    header = ["t"] + [f"q{i + 1}" for i in range(d)] + [f"p{i + 1}" for i in range(d)]
    t = traj.times
    lines = [",".join(header)]
    for i in range(len(traj)):
        row = [fmt(t[i])] + [fmt(v) for v in traj.qs[i]] + [fmt(v) for v in traj.ps[i]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_trajectory(path, traj: Trajectory) -> None:
    Path(path).write_text(trajectory_to_csv(traj))


def read_trajectory(path) -> Trajectory:
    try:
        lines = Path(path).read_text().strip().split("\n")
        header = lines[0].split(",")
        if header[0] != "t" or (len(header) - 1) % 2 != 0:
            raise FormatError(f"bad trajectory header in {path}")
        d = (len(header) - 1) // 2
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
        if data.ndim != 2 or data.shape[1] != 1 + 2 * d or data.shape[0] < 2:
            raise FormatError(f"bad trajectory shape in {path}")
    except (ValueError, IndexError) as e:
        raise FormatError(f"cannot parse trajectory file {path}: {e}") from e
    t = data[:, 0]
    step = t[1] - t[0]
    return Trajectory(data[:, 1 : 1 + d], data[:, 1 + d :], step, t0=t[0])


def write_model(path, net: DenseNetwork) -> None:
    Path(path).write_bytes(serialize(net))


def read_model(path) -> DenseNetwork:
    p = Path(path)
    if not p.exists():
        raise FormatError(f"model file {path} does not exist")
    return deserialize(p.read_bytes())


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def write_loss_history(path, report) -> None:
    steps = [s for s, _ in report.loss_history]
    losses = [v for _, v in report.loss_history]
    write_csv(path, ["step", "loss"], [np.array(steps), np.array(losses)])


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
