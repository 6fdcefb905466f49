"""Human-readable reports rendered from the jinja2 templates in src/Hawkes/templates."""
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from jinja2 import Environment, FileSystemLoader, StrictUndefined, select_autoescape

from src.Hawkes.utils.pydantic_schemas import Chain, Summary

TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"

_env = Environment(
    loader=FileSystemLoader(str(TEMPLATE_DIR)),
    autoescape=select_autoescape(enabled_extensions=("html",), default_for_string=False),
    undefined=StrictUndefined,
    keep_trailing_newline=True,
)


def render(template: str, **context: Any) -> str:
    return _env.get_template(template).render(**context)


def render_summary(summary: Summary, chains: Optional[Sequence[Chain]] = None) -> str:
    acceptance = None
    if chains:
        acceptance = [[f"{rate:.3f}" for rate in chain.acceptance_rates()] for chain in chains]
    return render("summary.txt.j2", summary=summary, acceptance=acceptance)


def render_validation(checks: List[Any], passed: bool) -> str:
    return render("validation.txt.j2", checks=checks, passed=passed)


def render_bench(rows: List[Dict[str, Any]], hardware: str) -> str:
    return render("bench.txt.j2", rows=rows, hardware=hardware)
