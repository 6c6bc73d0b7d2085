"""PDF run report.
Renders a run summary, the phase timeline and depth/yaw/offset plots of the
trace with the ReportLab library.
"""

import math
import os

from reportlab.graphics.charts.lineplots import LinePlot
from reportlab.graphics.shapes import Drawing, String
from reportlab.lib import colors
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

PLOT_WIDTH = 460
PLOT_HEIGHT = 140


def _value(v):
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.2f}"
    return str(v)


def phase_timeline(trace):
    """(phase, first trace time) for every phase change in the trace."""
    out = []
    for row in trace:
        if not out or out[-1][0] != row.phase:
            out.append((row.phase, row.t))
    return out


def _plot(title, series, color):
    drawing = Drawing(PLOT_WIDTH, PLOT_HEIGHT + 20)
    drawing.add(String(0, PLOT_HEIGHT + 8, title, fontName="Helvetica-Bold", fontSize=10))
    points = [(t, v) for t, v in series if v is not None and math.isfinite(v)]
    if len(points) < 2:
        drawing.add(String(40, PLOT_HEIGHT / 2, "no data", fontName="Helvetica", fontSize=9))
        return drawing
    plot = LinePlot()
    plot.x = 40
    plot.y = 20
    plot.width = PLOT_WIDTH - 60
    plot.height = PLOT_HEIGHT - 30
    plot.data = [points]
    plot.lines[0].strokeColor = color
    plot.lines[0].strokeWidth = 1
    plot.xValueAxis.labelTextFormat = "%.0f"
    plot.yValueAxis.labelTextFormat = "%.2f"
    drawing.add(plot)
    return drawing


def render_run_pdf(output, report, trace):
    """
    Write a one-document summary of a run.

    Args:
        output (str): PDF file to create; parent folders are created.
        report (RunReport): Run outcome.
        trace (list): TraceRow entries of the run.
    """
    output_dir = os.path.dirname(output)
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)

    styles = getSampleStyleSheet()
    doc = SimpleDocTemplate(output, pagesize=letter, title=f"Run report: {report.scenario}")
    elements = [
        Paragraph(f"Run report: {report.scenario}", styles["Title"]),
        Paragraph(f"seed {report.seed}, {report.sim_time:.1f} s simulated", styles["Normal"]),
        Spacer(1, 12),
    ]

    summary = [["Metric", "Value"]] + [
        [key.replace("_", " "), _value(value)]
        for key, value in report.to_dict().items()
        if key not in ("scenario", "seed", "sim_time")
    ]
    table = Table(summary, colWidths=[200, 200], hAlign="LEFT")
    table.setStyle(
        TableStyle(
            [
                ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
                ("LINEBELOW", (0, 0), (-1, 0), 1, colors.black),
                ("FONTSIZE", (0, 0), (-1, -1), 10),
                ("LEFTPADDING", (0, 0), (-1, -1), 6),
            ]
        )
    )
    elements += [table, Spacer(1, 12)]

    timeline = [["Phase", "From t (s)"]] + [[p, f"{t:.1f}"] for p, t in phase_timeline(trace)]
    phases = Table(timeline, colWidths=[200, 200], hAlign="LEFT")
    phases.setStyle(TableStyle([("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold")]))
    elements += [phases, Spacer(1, 12)]

    elements.append(_plot("Depth (m)", [(r.t, r.depth) for r in trace], colors.blue))
    elements.append(_plot("Yaw (rad)", [(r.t, r.yaw) for r in trace], colors.darkgreen))
    elements.append(_plot("Target dx (px)", [(r.t, r.dx) for r in trace], colors.orange))

    def footer(canvas, doc):  # pylint: disable=unused-argument
        canvas.setFont("Helvetica", 9)
        canvas.drawCentredString(letter[0] / 2, 20, f"{report.scenario} / seed {report.seed}")

    doc.build(elements, onFirstPage=footer, onLaterPages=footer)
