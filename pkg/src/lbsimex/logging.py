from __future__ import annotations
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.theme import Theme

# stdout is reserved for command output
_console = Console(
    theme=Theme({"good": "green", "warn": "yellow", "bad": "red", "dim": "grey50"}),
    stderr=True,
)
_state = {"quiet": False, "verbose": False}


def configure(quiet: bool = False, verbose: bool = False) -> None:
    _state["quiet"] = quiet
    _state["verbose"] = verbose and not quiet


def debug(msg: str):
    if _state["verbose"]:
        _console.print(f"[dim]·[/] [dim]{msg}[/]")


def info(msg: str):
    if not _state["quiet"]:
        _console.print(f"[good]ℹ[/] {msg}")


def warn(msg: str): _console.print(f"[warn]![/] {msg}")
def err(msg: str):  _console.print(f"[bad]✖[/] {msg}")


def progress() -> Progress:
    """Progress bar for replicate/bootstrap loops; silent when quiet."""
    return Progress(
        TextColumn("{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=_console,
        disable=_state["quiet"],
        transient=True,
    )
