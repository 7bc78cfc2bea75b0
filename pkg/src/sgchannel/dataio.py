"""Bit-stable data products: versioned CSV tables and binary snapshots.

Floats are printed with repr (shortest round-trip decimal); parsing a file
and re-serializing it reproduces the bytes exactly.
"""

import json
import math
import struct

import numpy as np

from .diagnostics import DiagnosticsRecord
from .dynamics import BranchKind, FlowState, branch_from_params, _Recovery
from .experiments import SweepRow
from .spectral import ChannelGrid, SpectralScalarField

TIMESERIES_SCHEMA = "sgchannel-timeseries-v1"
SWEEP_SCHEMA = "sgchannel-sweep-v1"

TIMESERIES_COLUMNS = (
    "t",
    "energy_alpha",
    "grad_sq",
    "q_norm_sq",
    "cum_dissipation",
    "strip_dissipation",
    "err_vs_ref_l2",
)

SWEEP_COLUMNS = (
    "alpha",
    "nu",
    "region",
    "delta_used",
    "sup_err",
    "kato_value",
    "ic_l2_gap",
    "ic_grad_term",
    "ic_h3_term",
)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, float) and math.isnan(value):
        return ""
    return repr(float(value))


class SchemaError(ValueError):
    pass


def write_timeseries(records, sink):
    """Records to CSV in time order with the pinned column set."""
    if not records:
        raise ValueError("no records to write")
    sink.write(f"# schema={TIMESERIES_SCHEMA}\n")
    sink.write(",".join(TIMESERIES_COLUMNS) + "\n")
    for r in records:
        row = (
            r.t,
            r.energy_alpha,
            r.grad_sq,
            r.q_norm_sq,
            r.cum_dissipation,
            r.strip_dissipation,
            r.err_vs_ref_l2,
        )
        sink.write(",".join(_fmt(v) for v in row) + "\n")


def write_sweep(rows, sink):
    """Sweep rows to CSV in the given (decreasing alpha) order."""
    if not rows:
        raise ValueError("no rows to write")
    sink.write(f"# schema={SWEEP_SCHEMA}\n")
    sink.write(",".join(SWEEP_COLUMNS) + "\n")
    for r in rows:
        row = (
            r.alpha,
            r.nu,
            r.region,
            r.delta_used,
            r.sup_err,
            r.kato_value,
            r.ic_l2_gap,
            r.ic_grad_term,
            r.ic_h3_term,
        )
        sink.write(",".join(_fmt(v) for v in row) + "\n")


def _read_table(text, schema, columns):
    lines = text.split("\n")
    if not lines or not lines[0].startswith("# schema="):
        raise SchemaError("missing schema line")
    found = lines[0][len("# schema="):]
    if found != schema:
        raise SchemaError(f"schema {found!r} does not match expected {schema!r}")
    if len(lines) < 2 or lines[1] != ",".join(columns):
        raise SchemaError("unexpected column header")
    rows = []
    for line in lines[2:]:
        if line == "":
            continue
        parts = line.split(",")
        if len(parts) != len(columns):
            raise SchemaError(f"row has {len(parts)} fields, expected {len(columns)}")
        rows.append(parts)
    return rows


def _opt_float(tok):
    return None if tok == "" else float(tok)


def read_timeseries(text):
    records = []
    for parts in _read_table(text, TIMESERIES_SCHEMA, TIMESERIES_COLUMNS):
        records.append(
            DiagnosticsRecord(
                t=float(parts[0]),
                energy_alpha=float(parts[1]),
                grad_sq=float(parts[2]),
                q_norm_sq=float(parts[3]),
                cum_dissipation=float(parts[4]),
                strip_dissipation=float(parts[5]),
                err_vs_ref_l2=_opt_float(parts[6]),
            )
        )
    return records


def read_sweep(text):
    rows = []
    for parts in _read_table(text, SWEEP_SCHEMA, SWEEP_COLUMNS):
        nan = math.nan

        def num(tok):
            return nan if tok == "" else float(tok)

        rows.append(
            SweepRow(
                alpha=float(parts[0]),
                nu=float(parts[1]),
                region=parts[2],
                delta_used=num(parts[3]),
                sup_err=num(parts[4]),
                kato_value=num(parts[5]),
                ic_l2_gap=num(parts[6]),
                ic_grad_term=num(parts[7]),
                ic_h3_term=num(parts[8]),
            )
        )
    return rows


# --- snapshots ---------------------------------------------------------------

_SNAP_MAGIC = b"SGCSNP01"
_SNAP_VERSION = 1


class SnapshotError(ValueError):
    pass


def save_snapshot(state, branch, path):
    """State container: magic, JSON header, then q coefficients.

    Payload is the complex128 coefficient array in C order, little-endian;
    psi, omega and u are re-derived on load (q is the single source of
    truth).
    """
    grid = state.q.grid
    header = {
        "version": _SNAP_VERSION,
        "nx": grid.nx,
        "ny": grid.ny,
        "lx": grid.lx,
        "kind": branch.kind.value,
        "alpha": branch.alpha,
        "nu": branch.nu,
        "t": state.t,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(state.q.coeffs.astype("<c16"))
    with open(path, "wb") as fh:
        fh.write(_SNAP_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload.tobytes())


def load_snapshot(path, expect_grid=None):
    """Rebuild (branch, FlowState); optionally enforce a target grid."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_SNAP_MAGIC))
        if magic != _SNAP_MAGIC:
            raise SnapshotError("not a state snapshot (bad magic)")
        (hlen,) = struct.unpack("<I", fh.read(4))
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SnapshotError(f"corrupted header: {exc}") from None
        if header.get("version") != _SNAP_VERSION:
            raise SnapshotError(
                f"snapshot version {header.get('version')} not supported "
                f"(expected {_SNAP_VERSION})"
            )
        grid = ChannelGrid(header["nx"], header["ny"], header["lx"])
        if expect_grid is not None and grid != expect_grid:
            raise SnapshotError(
                f"snapshot grid ({grid.nx}, {grid.ny}, lx={grid.lx}) does not match "
                f"the run grid ({expect_grid.nx}, {expect_grid.ny}, lx={expect_grid.lx})"
            )
        n_items = grid.nx * (grid.ny + 1)
        raw = fh.read(n_items * 16)
        if len(raw) != n_items * 16:
            raise SnapshotError("truncated payload")
        coeffs = np.frombuffer(raw, dtype="<c16").reshape(grid.nx, grid.ny + 1).copy()
    branch = branch_from_params(header["alpha"], header["nu"])
    if branch.kind.value != header["kind"]:
        raise SnapshotError("branch kind inconsistent with alpha/nu in header")
    q = SpectralScalarField(grid, coeffs)
    state = _Recovery(grid, branch)(q, t=header["t"])
    return branch, state
