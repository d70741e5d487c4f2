"""Dataset CSV export: header ``y1..yD[,x1..xD][,z1..zD][,is_clutter]``."""

import csv
import logging
from pathlib import Path

import numpy as np

from geometry.models import PointCloud
from manifold_lab.exceptions import SamplingError

from .models import Additive, Clutter, Dataset, Noiseless

logger = logging.getLogger(__name__)


def _cell(name, value):
    if name == "is_clutter":
        return "1" if value else "0"
    return repr(float(value))


def write_dataset(dataset, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header, table = dataset.columns()
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in table:
            writer.writerow([_cell(name, value) for name, value in zip(header, row)])
    logger.info("wrote %d %s points to %s", len(dataset), dataset.model, path)
    return path


def read_dataset(path):
    """Rebuild a Dataset from its CSV export; the model tag follows the columns."""
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header:
            raise SamplingError(f"{path} has no header row")
        rows = [[float(value) for value in row] for row in reader if row]
    table = np.array(rows, dtype=float).reshape(len(rows), len(header))

    def block(prefix):
        columns = [i for i, name in enumerate(header) if name.startswith(prefix)]
        return table[:, columns] if columns else None

    observed = block("y")
    if observed is None:
        raise SamplingError(f"{path} has no y columns")
    flags = None
    if "is_clutter" in header:
        flags = table[:, header.index("is_clutter")] > 0.5
    latent, noise = block("x"), block("z")
    if noise is not None:
        model = Additive.tag
    elif flags is not None:
        model = Clutter.tag
    else:
        model = Noiseless.tag
        latent = observed
    return Dataset(
        observed=PointCloud(observed),
        model=model,
        latent=latent,
        noise=noise,
        clutter=flags,
    )
