import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import orjson

from common.wqed.errors import OutputError

Series = Tuple[Sequence[Any], str]


def formatCell(value: Any) -> str:
    """Round-trip decimal text: 17 significant digits, 'nan' for missing values."""
    if value is None:
        return "nan"
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else format(float(value), ".17g")
    return str(value)


@dataclass
class ResultTable:
    name: str
    columns: List[str]
    units: List[str]
    rows: List[List[Any]]
    provenance: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.units) != len(self.columns):
            raise ValueError(f"table {self.name}: {len(self.columns)} columns but {len(self.units)} units")
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"table {self.name}: row of length {len(row)} for {len(self.columns)} columns")

    @classmethod
    def fromSeries(cls, name: str, series: Dict[str, Series], provenance: Dict[str, str] = None) -> "ResultTable":
        """Column-wise construction; complex columns expand into <name>_re and <name>_im."""
        columns, units, data = [], [], []
        length = None
        for column, (values, unit) in series.items():
            values = list(values)
            if length is None:
                length = len(values)
            elif len(values) != length:
                raise ValueError(f"table {name}: column {column} has {len(values)} values, expected {length}")
            if any(isinstance(value, (complex, np.complexfloating)) for value in values):
                columns += [f"{column}_re", f"{column}_im"]
                units += [unit, unit]
                data.append([None if value is None else complex(value).real for value in values])
                data.append([None if value is None else complex(value).imag for value in values])
            else:
                columns.append(column)
                units.append(unit)
                data.append(values)
        rows = [list(row) for row in zip(*data)] if data else []
        return cls(name=name, columns=columns, units=units, rows=rows, provenance=dict(provenance or {}))

    def column(self, name: str) -> List[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]

    def toCSV(self) -> str:
        buffer = io.StringIO()
        for key, value in {**self.provenance, "table": self.name, "units": ",".join(self.units)}.items():
            buffer.write(f"# {key}: {value}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows([formatCell(value) for value in row] for row in self.rows)
        return buffer.getvalue()

    def asObject(self) -> Dict[str, Any]:
        def plain(value):
            if value is None or (isinstance(value, (float, np.floating)) and math.isnan(value)):
                return None
            return value.item() if isinstance(value, np.generic) else value

        return {
            "provenance": {**self.provenance, "table": self.name},
            "columns": self.columns,
            "units": self.units,
            "rows": [[plain(value) for value in row] for row in self.rows],
        }

    def toJSON(self) -> bytes:
        return orjson.dumps(self.asObject(), option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY)

    def save(self, path, fmt: str = "csv") -> Path:
        """Write atomically: a temporary sibling is renamed over the target."""
        path = Path(path)
        tmp_path = path.with_name(path.name + ".tmp")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            payload = self.toJSON() if fmt == "json" else self.toCSV().encode("utf-8")
            with open(tmp_path, "wb") as f:
                f.write(payload)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp_path, path)
        except OSError as e:
            try:
                tmp_path.unlink(missing_ok=True)
            except OSError:
                pass
            raise OutputError(str(path), e) from e
        return path
