"""
Output utilities: CSV tables, scanline field files and the file registry of a run
"""

import logging
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.10g"
FIELD_FLOAT_FORMAT = "%.17g"
OBSERVATION_COLUMNS = ["t1", "B1", "E1", "t2", "B2", "E2"]
J_HISTORY_COLUMNS = ["iter", "J", "step", "grad_norm"]


def write_csv(df: pd.DataFrame, path: Path) -> Path:
    """Fixed float format and line ending so identical frames give identical bytes"""
    path = Path(path)
    try:
        df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise OSError(f"Could not write {path}: {e}") from e
    logger.debug(f"Wrote {len(df)} rows to {path}")
    return path


def format_field_scanlines(xs: np.ndarray, ys: np.ndarray, values: np.ndarray) -> str:
    """``x y value`` rows, one block per x with a blank line between blocks"""
    values = np.asarray(values, dtype=float)
    if values.shape != (len(xs), len(ys)):
        raise ValueError(f"Field has shape {values.shape}, expected {(len(xs), len(ys))}")
    blocks = []
    for i, x in enumerate(xs):
        rows = [f"{FIELD_FLOAT_FORMAT % x} {FIELD_FLOAT_FORMAT % y} {FIELD_FLOAT_FORMAT % v}"
                for y, v in zip(ys, values[i])]
        blocks.append("\n".join(rows))
    return "# x y value\n" + "\n\n".join(blocks) + "\n"


def write_field_scanlines(path: Path, xs: np.ndarray, ys: np.ndarray, values: np.ndarray) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(format_field_scanlines(xs, ys, values))
    except OSError as e:
        raise OSError(f"Could not write {path}: {e}") from e
    return path


def read_field_scanlines(path: Path) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse a scanline file back into (xs, ys, values[x, y])"""
    df = pd.read_csv(path, sep=r"\s+", comment="#", header=None, names=["x", "y", "value"],
                     skip_blank_lines=True, float_precision="round_trip")
    xs = pd.unique(df["x"])
    ys = pd.unique(df["y"])
    if len(df) != len(xs) * len(ys):
        raise ValueError(f"{path} is not a complete rectangular field ({len(df)} rows)")
    values = df["value"].to_numpy().reshape(len(xs), len(ys))
    return np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), values


def trajectory_frame(trajectory, effort: bool = False) -> pd.DataFrame:
    """Columns t, B1..Bd, [E], u1..ud"""
    d = trajectory.B.shape[1]
    data = {"t": trajectory.times}
    for i in range(d):
        data[f"B{i + 1}"] = trajectory.B[:, i]
    if effort:
        data["E"] = trajectory.E
    for i in range(d):
        data[f"u{i + 1}"] = trajectory.u[:, i]
    return pd.DataFrame(data)


def ensemble_frame(stats: dict) -> pd.DataFrame:
    """Per-time mean and std of B and u over an ensemble of paths"""
    d = stats["B_mean"].shape[1]
    data = {"t": stats["times"]}
    for key in ("B_mean", "B_std", "u_mean", "u_std"):
        prefix, moment = key.split("_")
        for i in range(d):
            data[f"{prefix}{i + 1}_{moment}"] = stats[key][:, i]
    return pd.DataFrame(data)


def observations_frame(samples: Sequence) -> pd.DataFrame:
    rows = [[s.t1, s.Z[0], s.Z[1], s.t2, s.Z[2], s.Z[3]] for s in samples]
    return pd.DataFrame(rows, columns=OBSERVATION_COLUMNS)


def read_observations(path: Path) -> List:
    from calibrate import ObservationVector

    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in OBSERVATION_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"{path} lacks observation columns {missing}")
    return [ObservationVector((row.B1, row.E1, row.B2, row.E2), row.t1, row.t2)
            for row in df.itertuples(index=False)]


def j_history_frame(history: Iterable[dict]) -> pd.DataFrame:
    return pd.DataFrame(list(history), columns=J_HISTORY_COLUMNS)


class OutputManager:
    """Writes the files of one run under ``out_dir`` and registers each with the session"""

    def __init__(self, out_dir: Path, session=None):
        self.out_dir = Path(out_dir)
        self.session = session
        self.written: List[Path] = []

    def prepare(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Writing outputs to {self.out_dir}")
        return self.out_dir

    def _register(self, path: Path, kind: str) -> Path:
        self.written.append(path)
        if self.session is not None:
            self.session.register_file(path, kind)
        return path

    def csv(self, name: str, df: pd.DataFrame) -> Path:
        return self._register(write_csv(df, self.out_dir / name), "csv")

    def field(self, name: str, xs: np.ndarray, ys: np.ndarray, values: np.ndarray) -> Path:
        return self._register(write_field_scanlines(self.out_dir / name, xs, ys, values), "field")

    def trajectory(self, name: str, trajectory, effort: bool = False) -> Path:
        return self.csv(name, trajectory_frame(trajectory, effort))

    def weights(self, name: str, net) -> Path:
        from neural import save_weights

        path = self.out_dir / name
        save_weights(net, path)
        return self._register(path, "weights")
