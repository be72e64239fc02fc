"""
Result files: per-step report CSV, deformed VTK snapshots and the sweep table
(CSV plus a styled Excel workbook).
"""

import logging
from io import BytesIO
from pathlib import Path
from typing import Dict, List, Sequence, Union

import meshio
import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

from mesh.geometry import PolygonalMesh
from solver.loading import SolveReport

from .gap import deformed_vertices

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ['step', 'factor', 'iters', 'gap', 'reaction_x', 'reaction_y']
FLOAT_FORMAT = '%.17g'

SWEEP_COLUMNS = [
    'label', 'gamma', 'alpha_r', 'reg', 'status', 'steps',
    'final_factor', 'gap', 'reaction_y', 'halvings', 'doublings', 'message',
]
SWEEP_HEADERS = [
    "Run", "Gamma", "Alpha_r", "Regularization", "Status", "Steps",
    "Final Load Factor", "Gap", "Reaction (y)", "Halvings", "Doublings", "Message",
]
SWEEP_WIDTHS = [28, 12, 12, 16, 16, 10, 18, 18, 18, 12, 12, 40]


def report_frame(report: SolveReport) -> pd.DataFrame:
    return pd.DataFrame(report.rows(), columns=REPORT_COLUMNS)


def write_report_csv(report: SolveReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report_frame(report).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {path} ({len(report.steps)} step(s))")
    return path


def vtk_filename(step: int) -> str:
    return f"step_{step:04d}.vtk"


def to_meshio(mesh: PolygonalMesh, u: np.ndarray) -> meshio.Mesh:
    """Deformed mesh with displacement point data; polygons grouped per vertex count."""
    n = mesh.n_vertices
    displacement = np.asarray(u, dtype=float)[:2 * n].reshape(n, 2)
    points = np.zeros((n, 3))
    points[:, :2] = deformed_vertices(mesh, u)

    blocks: Dict[int, List[Sequence[int]]] = {}
    for ring in mesh.elements:
        blocks.setdefault(len(ring), []).append(ring)
    cells = [('polygon', np.asarray(rings, dtype=np.int64)) for _, rings in sorted(blocks.items())]

    displacement_3d = np.zeros((n, 3))
    displacement_3d[:, :2] = displacement
    return meshio.Mesh(
        points=points,
        cells=cells,
        point_data={
            'displacement': displacement_3d,
            'u_x': displacement[:, 0].copy(),
            'u_y': displacement[:, 1].copy(),
        },
    )


def write_vtk(mesh: PolygonalMesh, u: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meshio.write(str(path), to_meshio(mesh, u), file_format='vtk', binary=False)
    logger.debug(f"Wrote {path}")
    return path


# -------------------------------------------------------
# SWEEP TABLE
# -------------------------------------------------------
def sweep_frame(rows: List[Dict]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def gap_table(frame: pd.DataFrame) -> pd.DataFrame:
    """Gap per alpha_r (rows) and gamma (columns), one table per regularization kind."""
    completed = frame[frame['status'] == 'completed']
    if completed.empty:
        return pd.DataFrame()
    return completed.pivot_table(index=['reg', 'alpha_r'], columns='gamma', values='gap', aggfunc='first')


def generate_sweep_workbook(frame: pd.DataFrame) -> BytesIO:
    wb = Workbook()
    ws = wb.active
    ws.title = "Sweep"

    header_fill = PatternFill(start_color="1E3C72", end_color="1E3C72", fill_type="solid")
    header_font = Font(color="FFFFFF", bold=True, size=11)
    header_alignment = Alignment(horizontal='center', vertical='center', wrap_text=True)
    data_font = Font(size=10)
    number_alignment = Alignment(horizontal='right', vertical='center')
    text_alignment = Alignment(horizontal='left', vertical='center')
    failed_fill = PatternFill(start_color="F8D7DA", end_color="F8D7DA", fill_type="solid")
    thin_border = Border(
        left=Side(style='thin', color='CCCCCC'),
        right=Side(style='thin', color='CCCCCC'),
        top=Side(style='thin', color='CCCCCC'),
        bottom=Side(style='thin', color='CCCCCC')
    )

    for col_idx, width in enumerate(SWEEP_WIDTHS, 1):
        ws.column_dimensions[get_column_letter(col_idx)].width = width

    ws.row_dimensions[1].height = 30
    for col_idx, header in enumerate(SWEEP_HEADERS, 1):
        cell = ws.cell(row=1, column=col_idx, value=header)
        cell.fill = header_fill
        cell.font = header_font
        cell.alignment = header_alignment
        cell.border = thin_border

    for row_idx, row in enumerate(frame.to_dict('records'), 2):
        for col_idx, key in enumerate(SWEEP_COLUMNS, 1):
            value = row.get(key)
            if isinstance(value, float) and not np.isfinite(value):
                value = None
            cell = ws.cell(row=row_idx, column=col_idx, value=value)
            cell.font = data_font
            cell.border = thin_border
            if isinstance(value, float):
                cell.alignment = number_alignment
                cell.number_format = '0.000000E+00'
            else:
                cell.alignment = text_alignment
            if row.get('status') != 'completed':
                cell.fill = failed_fill

    ws.freeze_panes = 'A2'

    table = gap_table(frame)
    if not table.empty:
        gaps = wb.create_sheet("Gap Table")
        gammas = list(table.columns)
        headers = ["Regularization", "Alpha_r"] + [f"gamma = {g:g}" for g in gammas]
        for col_idx, header in enumerate(headers, 1):
            cell = gaps.cell(row=1, column=col_idx, value=header)
            cell.fill = header_fill
            cell.font = header_font
            cell.alignment = header_alignment
            cell.border = thin_border
            gaps.column_dimensions[get_column_letter(col_idx)].width = 18
        for row_idx, ((reg, alpha_r), values) in enumerate(table.iterrows(), 2):
            cells = [reg, float(alpha_r)] + [None if pd.isna(v) else float(v) for v in values]
            for col_idx, value in enumerate(cells, 1):
                cell = gaps.cell(row=row_idx, column=col_idx, value=value)
                cell.font = data_font
                cell.border = thin_border
                if col_idx > 2 and value is not None:
                    cell.number_format = '0.0000E+00'
        gaps.freeze_panes = 'C2'

    output = BytesIO()
    wb.save(output)
    output.seek(0)
    return output


def write_sweep(rows: List[Dict], out_dir: Union[str, Path]) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame = sweep_frame(rows)
    csv_path = out_dir / 'sweep.csv'
    frame.to_csv(csv_path, index=False, float_format=FLOAT_FORMAT)
    xlsx_path = out_dir / 'sweep.xlsx'
    xlsx_path.write_bytes(generate_sweep_workbook(frame).getvalue())
    logger.info(f"Wrote {csv_path} and {xlsx_path} ({len(frame)} run(s))")
    return {'csv': csv_path, 'xlsx': xlsx_path}
