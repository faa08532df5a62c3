"""
Experiment report rendering: text, JSON and PDF.
Contract: same table in, byte-identical files out (no timestamps, invariant PDF).
"""
import logging
from pathlib import Path
from typing import List

from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from app.schemas.evaluation import ComparisonTable, SystemReport

logger = logging.getLogger(__name__)


class ReportWriter:
    """Writes comparison tables and per-system reports."""

    def __init__(self):
        self.styles = getSampleStyleSheet()
        self.styles.add(ParagraphStyle(
            name="ReportTitle",
            parent=self.styles["Heading1"],
            fontSize=18,
            alignment=TA_CENTER,
            spaceAfter=20,
            textColor=colors.HexColor("#2c3e50"),
        ))
        self.styles.add(ParagraphStyle(
            name="NoteText",
            parent=self.styles["Normal"],
            fontSize=9,
            spaceAfter=4,
            textColor=colors.HexColor("#7f8c8d"),
        ))

    def comparison_pdf(self, table: ComparisonTable, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = SimpleDocTemplate(
            str(path), pagesize=A4, rightMargin=54, leftMargin=54, topMargin=54, bottomMargin=54,
            invariant=1, title=table.title,
        )
        story = [Paragraph(table.title, self.styles["ReportTitle"])]

        data = [["Method", "BLEU", "BLEU-cased", "Training pairs", "Synthetic"]]
        for row in table.rows:
            data.append([
                row.method, f"{row.bleu:.2f}", f"{row.bleu_cased:.2f}",
                f"{row.training_pairs:,}", f"{row.synthetic_pairs:,}",
            ])
        grid = Table(data, repeatRows=1)
        grid.setStyle(TableStyle([
            ("BACKGROUND", (0, 0), (-1, 0), colors.HexColor("#2980b9")),
            ("TEXTCOLOR", (0, 0), (-1, 0), colors.white),
            ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
            ("ALIGN", (1, 0), (-1, -1), "RIGHT"),
            ("ROWBACKGROUNDS", (0, 1), (-1, -1), [colors.white, colors.HexColor("#ecf0f1")]),
            ("GRID", (0, 0), (-1, -1), 0.5, colors.grey),
        ]))
        story.append(grid)
        story.append(Spacer(1, 12))
        for note in table.notes:
            story.append(Paragraph(note, self.styles["NoteText"]))

        doc.build(story)
        return path

    def write_comparison(self, table: ComparisonTable, directory: Path,
                         stem: str = "comparison") -> List[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        text_path = directory / f"{stem}.txt"
        json_path = directory / f"{stem}.json"
        text_path.write_text(table.to_text(), encoding="utf-8")
        json_path.write_text(table.model_dump_json(indent=2), encoding="utf-8")
        pdf_path = self.comparison_pdf(table, directory / f"{stem}.pdf")
        logger.info(f"Comparison table written to {directory}")
        return [text_path, json_path, pdf_path]

    @staticmethod
    def write_system(report: SystemReport, directory: Path, stem: str) -> List[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        text_path = directory / f"{stem}.report.txt"
        json_path = directory / f"{stem}.report.json"
        text_path.write_text(report.to_text(), encoding="utf-8")
        json_path.write_text(report.model_dump_json(indent=2, exclude={"hypotheses"}), encoding="utf-8")
        return [text_path, json_path]
