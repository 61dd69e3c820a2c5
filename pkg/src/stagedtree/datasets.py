"""Embedded example data: the public-domain Titanic 4-way contingency table.

2201 passengers and crew of the Titanic cross-classified by survival, sex,
age band and travelling class. Embedding the counts keeps the case-study
experiments runnable offline and byte-reproducible.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .data import CategoricalDataset
from .tree import VariableSpec

TITANIC_VARIABLES = (
    VariableSpec("Survived", ("No", "Yes")),
    VariableSpec("Sex", ("Male", "Female")),
    VariableSpec("Age", ("Child", "Adult")),
    VariableSpec("Class", ("1st", "2nd", "3rd", "Crew")),
)

# (survived, sex, age, class) level indices -> passenger count
TITANIC_CELLS = (
    ((0, 0, 0, 0), 0), ((0, 0, 0, 1), 0), ((0, 0, 0, 2), 35), ((0, 0, 0, 3), 0),
    ((0, 1, 0, 0), 0), ((0, 1, 0, 1), 0), ((0, 1, 0, 2), 17), ((0, 1, 0, 3), 0),
    ((0, 0, 1, 0), 118), ((0, 0, 1, 1), 154), ((0, 0, 1, 2), 387), ((0, 0, 1, 3), 670),
    ((0, 1, 1, 0), 4), ((0, 1, 1, 1), 13), ((0, 1, 1, 2), 89), ((0, 1, 1, 3), 3),
    ((1, 0, 0, 0), 5), ((1, 0, 0, 1), 11), ((1, 0, 0, 2), 13), ((1, 0, 0, 3), 0),
    ((1, 1, 0, 0), 1), ((1, 1, 0, 1), 13), ((1, 1, 0, 2), 14), ((1, 1, 0, 3), 0),
    ((1, 0, 1, 0), 57), ((1, 0, 1, 1), 14), ((1, 0, 1, 2), 75), ((1, 0, 1, 3), 192),
    ((1, 1, 1, 0), 140), ((1, 1, 1, 1), 80), ((1, 1, 1, 2), 76), ((1, 1, 1, 3), 20),
)


def titanic_dataset() -> CategoricalDataset:
    """The full 2201-record Titanic dataset with Survived as the class."""
    rows = []
    for cell, count in TITANIC_CELLS:
        rows.extend([cell] * count)
    return CategoricalDataset(
        TITANIC_VARIABLES, np.array(rows, dtype=np.int64), "Survived"
    )


def titanic_csv() -> str:
    """CSV rendering of the embedded dataset (header plus 2201 rows)."""
    dataset = titanic_dataset()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([v.name for v in dataset.variables])
    for i in range(dataset.n_records):
        writer.writerow(dataset.decode_record(i))
    return buf.getvalue()


def titanic_levels_sidecar() -> str:
    """Sidecar pinning the conventional level orders of the CSV rendering."""
    return "".join(
        ",".join((v.name, *v.levels)) + "\n" for v in TITANIC_VARIABLES
    )
