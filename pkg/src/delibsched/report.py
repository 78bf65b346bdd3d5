"""Plot-ready output: comment header, then one or more tables, as CSV or text."""
from __future__ import annotations

import csv
import dataclasses
from typing import Sequence, TextIO, Union

from rich.console import Console
from rich.markup import escape
from rich.table import Table as RichTable

Cell = Union[str, int, float, bool]

DECIMALS = 9


def fmt(value: Cell) -> str:
    """Fixed formatting so identical runs give identical bytes."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.{DECIMALS}f}"
    return str(value)


@dataclasses.dataclass
class Table:
    title: str
    header: Sequence[str]
    rows: list[Sequence[Cell]] = dataclasses.field(default_factory=list)

    def add(self, *row: Cell) -> None:
        self.rows.append(row)

    def formatted(self) -> list[list[str]]:
        return [[fmt(c) for c in row] for row in self.rows]


@dataclasses.dataclass
class Report:
    command: str
    seed: int
    meta: list[tuple[str, Cell]] = dataclasses.field(default_factory=list)
    tables: list[Table] = dataclasses.field(default_factory=list)

    def note(self, key: str, value: Cell) -> None:
        self.meta.append((key, value))

    def table(self, title: str, *header: str) -> Table:
        t = Table(title, header)
        self.tables.append(t)
        return t

    def header_lines(self) -> list[str]:
        lines = [f"delibsched {self.command}", f"seed: {self.seed}"]
        lines.extend(f"{k}: {fmt(v)}" for k, v in self.meta)
        return lines


def write_csv(report: Report, out: TextIO) -> None:
    for line in report.header_lines():
        out.write(f"# {line}\n")
    writer = csv.writer(out, lineterminator="\n")
    for i, table in enumerate(report.tables):
        if len(report.tables) > 1:
            if i:
                out.write("\n")
            out.write(f"# table: {table.title}\n")
        writer.writerow(table.header)
        writer.writerows(table.formatted())


def write_table(report: Report, out: TextIO) -> None:
    console = Console(file=out, width=120, no_color=True, highlight=False,
                      force_terminal=False, color_system=None)
    for line in report.header_lines():
        console.print(f"# {line}", markup=False)
    for table in report.tables:
        rt = RichTable(title=escape(table.title), title_justify="left")
        for name in table.header:
            rt.add_column(name, justify="left")
        for row in table.formatted():
            rt.add_row(*(escape(c) for c in row))
        console.print(rt)


def write_report(report: Report, out: TextIO, form: str = "csv") -> None:
    if form == "table":
        write_table(report, out)
    else:
        write_csv(report, out)
