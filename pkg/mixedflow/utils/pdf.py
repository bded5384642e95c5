# utils/pdf.py
from pathlib import Path

from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import mm
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle


def _fmt(value):
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value[:8]) + (" ..." if len(value) > 8 else "")
    return "" if value is None else str(value)


def _flatten(data, prefix=""):
    rows = []
    for key in sorted(data):
        value = data[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            rows.extend(_flatten(value, f"{name}."))
        else:
            rows.append((name, _fmt(value)))
    return rows


def generate_run_pdf(path, title, sections):
    """One-page run summary. ``sections`` maps a heading to a flat or nested
    dict of results; each becomes a two-column table."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = SimpleDocTemplate(
        str(path),
        pagesize=A4,
        leftMargin=18 * mm,
        rightMargin=18 * mm,
        topMargin=16 * mm,
        bottomMargin=16 * mm,
        title=title,
    )

    styles = getSampleStyleSheet()
    heading = ParagraphStyle(
        "TitleBig", parent=styles["Title"], fontSize=16, leading=20,
        alignment=1, spaceAfter=4
    )
    section = ParagraphStyle(
        "Section", parent=styles["Heading3"], fontSize=11, leading=14, spaceBefore=6
    )
    tbl_small = ParagraphStyle(
        "TblSmall", parent=styles["Normal"], fontSize=8.7, leading=11
    )

    elements = [Paragraph(title, heading), Spacer(1, 6)]

    for name, content in sections.items():
        elements.append(Paragraph(f"<b>{name}</b>", section))
        rows = [[Paragraph("<b>Quantity</b>", tbl_small), Paragraph("<b>Value</b>", tbl_small)]]
        rows += [[Paragraph(k, tbl_small), Paragraph(v, tbl_small)] for k, v in _flatten(content)]
        table = Table(rows, colWidths=[70 * mm, 104 * mm], hAlign="LEFT")
        table.setStyle(TableStyle([
            ("BOX", (0, 0), (-1, -1), 1, colors.black),
            ("INNERGRID", (0, 0), (-1, -1), 0.5, colors.black),
            ("BACKGROUND", (0, 0), (-1, 0), colors.whitesmoke),
            ("VALIGN", (0, 0), (-1, -1), "TOP"),
            ("LEFTPADDING", (0, 0), (-1, -1), 4),
            ("RIGHTPADDING", (0, 0), (-1, -1), 4),
            ("TOPPADDING", (0, 0), (-1, -1), 2),
            ("BOTTOMPADDING", (0, 0), (-1, -1), 2),
        ]))
        elements.append(table)
        elements.append(Spacer(1, 6))

    doc.build(elements)
    return path
