"""Report tables: CSV files plus aligned plain-text renderings"""
import logging
from pathlib import Path
from typing import Dict, Optional

import pandas as pd
from jinja2 import Environment, StrictUndefined

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "{:.3f}"

_TEXT_TEMPLATE = """\
{{ title }}
{{ '-' * title|length }}
{{ header }}
{{ rule }}
{% for row in rows %}{{ row }}
{% endfor %}"""

_env = Environment(undefined=StrictUndefined, keep_trailing_newline=True, autoescape=False)
_template = _env.from_string(_TEXT_TEMPLATE)


def _cell(value) -> str:
    if isinstance(value, float):
        return "-" if pd.isna(value) else FLOAT_FORMAT.format(value)
    return str(value)


def render_text_table(df: pd.DataFrame, title: str) -> str:
    """Right-aligned columns; floats to 3 decimals, missing values as '-'"""
    columns = [str(c) for c in df.columns]
    cells = [[_cell(v) for v in row] for row in df.itertuples(index=False, name=None)]
    widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(columns)]
    header = "  ".join(c.rjust(w) for c, w in zip(columns, widths))
    rows = ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells]
    return _template.render(title=title, header=header, rule="  ".join("-" * w for w in widths), rows=rows)


def write_csv(df: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.3f")
    return path


def report_render(tables: Dict[str, pd.DataFrame], out_dir=None, titles: Optional[Dict[str, str]] = None) -> Dict[str, str]:
    """
    Render named tables as text and, with ``out_dir``, write ``<name>.csv`` and ``<name>.txt``

    Returns:
        name -> text rendering, in the order given
    """
    titles = titles or {}
    texts: Dict[str, str] = {}
    for name, df in tables.items():
        text = render_text_table(df, titles.get(name, name.replace("_", " ").title()))
        texts[name] = text
        if out_dir is not None:
            out = Path(out_dir)
            write_csv(df, out / f"{name}.csv")
            (out / f"{name}.txt").write_text(text, encoding="utf-8")
    if out_dir is not None:
        logger.info(f"[report] wrote {len(tables)} tables to {out_dir}")
    return texts
