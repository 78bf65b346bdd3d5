"""Read-only Textual browser for CSV reports written by the CLI."""
from __future__ import annotations

import csv
import dataclasses
from pathlib import Path
from typing import Any, TypeVar, Union

from rich.markup import escape
from textual.app import App, ComposeResult
from textual.binding import Binding
from textual.containers import Vertical
from textual.widgets import DataTable, Footer, Label

T = TypeVar("T")

ROWS_PER_PAGE = 20


@dataclasses.dataclass
class CsvTable:
    title: str
    header: list[str]
    rows: list[list[str]]


@dataclasses.dataclass
class Page:
    rows: list[list[str]]
    label: str
    total_rows: int


def paginate(items: list[T], per_page: int) -> list[list[T]]:
    """Split into pages of at most `per_page` items; an empty list is one empty page.

    >>> paginate([1, 2, 3, 4, 5], 2)
    [[1, 2], [3, 4], [5]]
    """
    if per_page < 1:
        raise ValueError("per_page must be positive")
    return [items[i:i + per_page] for i in range(0, len(items), per_page)] or [[]]


def read_report(path: Union[str, Path]) -> tuple[list[str], list[CsvTable]]:
    """Split a report into its `# key: value` header and its tables."""
    meta: list[str] = []
    tables: list[CsvTable] = []
    title = Path(path).stem
    block: list[list[str]] = []

    def flush() -> None:
        if block:
            tables.append(CsvTable(title, block[0], block[1:]))
            block.clear()

    with open(path, encoding="utf-8", newline="") as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("# table: "):
                flush()
                title = line[len("# table: "):]
            elif line.startswith("#"):
                if not tables and not block:
                    meta.append(line[1:].strip())
            elif not line.strip():
                flush()
            else:
                block.append(next(csv.reader([line])))
    flush()
    return meta, tables


class ResultsTable(DataTable[Any]):
    app: ResultsApp

    def __init__(self) -> None:
        super().__init__()
        self.cur_page_num = 1
        self.pages: list[Page] = []

    def on_key(self, event: Any) -> None:
        if event.key == "space" and self.cur_page_num < len(self.pages):
            self.show_page(self.cur_page_num + 1)
        if event.key == "backspace" and self.cur_page_num > 1:
            self.show_page(self.cur_page_num - 1)

    def load(self, table: CsvTable) -> None:
        self.pages = [Page(rows, table.title, len(table.rows))
                      for rows in paginate(table.rows, self.app.rows_per_page)]
        self.clear(columns=True)
        self.add_columns(*table.header)
        self.show_page(1)

    def show_page(self, num: int) -> None:
        self.cur_page_num = num
        p = self.pages[num - 1]
        has_next = num < len(self.pages)
        has_prev = num > 1
        if has_next and has_prev:
            nav = " ([orange]BS[/] ↑, [orange]Spc[/]: ↓)"
        elif has_next:
            nav = " ([orange]Spc[/] ↓)"
        elif has_prev:
            nav = " ([orange]BS[/] ↑)"
        else:
            nav = ""
        self.border_title = f"{escape(p.label)}: {p.total_rows}"
        self.border_subtitle = f"{num}/{len(self.pages)}{nav}"
        self.clear()
        self.add_rows(p.rows)


class ResultsApp(App[None]):
    TITLE = "delibsched"
    ENABLE_COMMAND_PALETTE = False
    CSS = """
    #meta {
        height: auto;
        padding: 0 1;
        color: $text-muted;
    }
    ResultsTable {
        border: round $primary;
        height: 1fr;
    }
    """
    BINDINGS = [
        Binding("n", "next_table", "Next table"),
        Binding("p", "prev_table", "Prev table"),
        Binding("ctrl+q", "quit", "Quit"),
    ]

    def __init__(self, meta: list[str], tables: list[CsvTable],
                 rows_per_page: int = ROWS_PER_PAGE) -> None:
        self.meta = meta
        self.tables = tables or [CsvTable("(empty)", [""], [])]
        self.rows_per_page = rows_per_page
        self.table_at = 0
        super().__init__()

    @classmethod
    def from_csv(cls, path: Union[str, Path], rows_per_page: int = ROWS_PER_PAGE) -> ResultsApp:
        meta, tables = read_report(path)
        return cls(meta, tables, rows_per_page)

    def compose(self) -> ComposeResult:
        with Vertical():
            yield Label(escape("\n".join(self.meta)), id="meta")
            yield ResultsTable()
        yield Footer()

    def on_mount(self) -> None:
        self.query_one(ResultsTable).load(self.tables[0])

    def action_next_table(self) -> None:
        if self.table_at < len(self.tables) - 1:
            self.table_at += 1
            self.query_one(ResultsTable).load(self.tables[self.table_at])

    def action_prev_table(self) -> None:
        if self.table_at > 0:
            self.table_at -= 1
            self.query_one(ResultsTable).load(self.tables[self.table_at])
