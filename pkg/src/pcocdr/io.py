"""Text formats for spectra, PSFs, scan records, envelopes and reports.

Every numeric value is written with ``repr`` so that reading a file back
reproduces the original float64 bits. Files carry ``# key = value`` header
lines; the formats are described normatively in ``docs/formats.md``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import CorruptRecordError, FormatVersionError
from .psf import Psf
from .scan import FORMAT_VERSION, ScanConfig, ScanRecord
from .spectra import FrequencyGrid, SpectralDensity

SPECTRUM_MAGIC = "pcocdr-spectrum"
SCAN_MAGIC = "pcocdr-scan"


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _read_header(lines: list[str], magic: str) -> tuple[dict[str, str], int]:
    if not lines or lines[0].strip() != f"# {magic}":
        raise CorruptRecordError(f"missing '# {magic}' signature line")
    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        if "=" in body:
            key, _, value = body.partition("=")
            header[key.strip()] = value.strip()
        i += 1
    return header, i


def _check_version(header: Mapping[str, str]):
    try:
        version = int(header["format_version"])
    except (KeyError, ValueError) as exc:
        raise CorruptRecordError("format_version missing or malformed") from exc
    if version != FORMAT_VERSION:
        raise FormatVersionError(
            f"file has format_version {version}; this reader understands {FORMAT_VERSION}"
        )


def _parse_bool(text: str) -> bool:
    if text not in ("true", "false"):
        raise CorruptRecordError(f"expected true/false, got {text!r}")
    return text == "true"


# spectra


def write_spectrum(spectrum: SpectralDensity, path) -> Path:
    path = Path(path)
    g = spectrum.grid
    lines = [
        f"# {SPECTRUM_MAGIC}",
        f"# format_version = {FORMAT_VERSION}",
        f"# label = {spectrum.label}",
        f"# nu_min_hz = {_fmt(g.nu_min)}",
        f"# nu_max_hz = {_fmt(g.nu_max)}",
        f"# n_points = {g.n_points}",
        "frequency_hz,density_per_hz",
    ]
    lines += [f"{_fmt(n)},{_fmt(v)}" for n, v in zip(g.nu, spectrum.values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_spectrum(path) -> SpectralDensity:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header, i = _read_header(lines, SPECTRUM_MAGIC)
    _check_version(header)
    try:
        grid = FrequencyGrid(
            float(header["nu_min_hz"]), float(header["nu_max_hz"]), int(header["n_points"])
        )
        rows = lines[i + 1:]
        values = np.array([float(r.split(",")[1]) for r in rows if r.strip()])
    except (KeyError, ValueError, IndexError) as exc:
        raise CorruptRecordError(f"malformed spectrum file: {exc}") from exc
    if values.size != grid.n_points:
        raise CorruptRecordError(
            f"spectrum has {values.size} rows but the header declares {grid.n_points}"
        )
    return SpectralDensity(grid, values, label=header.get("label", ""))


# PSF


def write_psf(psf: Psf, path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# fwhm_um = {_fmt(psf.fwhm)}\n")
        fh.write(f"# center_wavelength_nm = {_fmt(psf.center_wavelength)}\n")
        fh.write("z_um,envelope,phase_rad\n")
        for z, e, p in zip(psf.z, psf.envelope, psf.phase):
            fh.write(f"{_fmt(z)},{_fmt(e)},{_fmt(p)}\n")
    return path


# scan records


def write_scan_record(record: ScanRecord, path) -> Path:
    """Write ``record`` as a self-describing CSV file.

    The header repeats every acquisition setting plus ``n_rows``, which the
    reader uses to detect truncation.
    """
    path = Path(path)
    cfg = record.config
    has_truth = record.truth is not None
    lines = [f"# {SCAN_MAGIC}", f"# format_version = {record.format_version}"]
    lines += [f"# {name} = {_fmt(getattr(cfg, name))}" for name in ScanConfig.field_names()]
    lines += [f"# n_rows = {len(record.counts)}", f"# has_truth = {_fmt(has_truth)}"]
    lines.append("z_um,counts" + (",truth_rate_cps" if has_truth else ""))
    if has_truth:
        rows = (
            f"{_fmt(z)},{int(n)},{_fmt(t)}"
            for z, n, t in zip(record.positions, record.counts, record.truth)
        )
    else:
        rows = (f"{_fmt(z)},{int(n)}" for z, n in zip(record.positions, record.counts))
    lines.extend(rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_scan_record(path) -> ScanRecord:
    """Read a file produced by :func:`write_scan_record`.

    Raises FormatVersionError for other format versions and
    CorruptRecordError for any structural damage, including a row count
    that disagrees with the header.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    header, i = _read_header(lines, SCAN_MAGIC)
    _check_version(header)

    kwargs = {}
    for f_name in ScanConfig.field_names():
        if f_name not in header:
            raise CorruptRecordError(f"header lacks {f_name}")
        raw = header[f_name]
        try:
            kwargs[f_name] = int(raw) if f_name == "rng_seed" else float(raw)
        except ValueError as exc:
            raise CorruptRecordError(f"bad value for {f_name}: {raw!r}") from exc
    try:
        n_rows = int(header["n_rows"])
        has_truth = _parse_bool(header["has_truth"])
    except (KeyError, ValueError) as exc:
        raise CorruptRecordError("n_rows/has_truth missing or malformed") from exc

    expected_cols = 3 if has_truth else 2
    if i >= len(lines) or len(lines[i].split(",")) != expected_cols:
        raise CorruptRecordError("column header line missing or wrong")
    data = [ln for ln in lines[i + 1:] if ln.strip()]
    if len(data) != n_rows:
        raise CorruptRecordError(f"found {len(data)} rows, header declares {n_rows}")
    if not text.endswith("\n"):
        raise CorruptRecordError("file does not end with a newline; last row may be cut")

    z = np.empty(n_rows)
    counts = np.empty(n_rows, dtype=np.int64)
    truth = np.empty(n_rows) if has_truth else None
    for k, ln in enumerate(data):
        parts = ln.split(",")
        if len(parts) != expected_cols:
            raise CorruptRecordError(f"row {k + 1} has {len(parts)} fields")
        try:
            z[k] = float(parts[0])
            counts[k] = int(parts[1])
            if has_truth:
                truth[k] = float(parts[2])
        except ValueError as exc:
            raise CorruptRecordError(f"row {k + 1}: {exc}") from exc
    try:
        config = ScanConfig(**kwargs)
    except ValueError as exc:
        raise CorruptRecordError(f"invalid acquisition settings: {exc}") from exc
    return ScanRecord(config=config, positions=z, counts=counts, truth=truth)


# tables, envelopes, reports


def write_table(rows: Iterable[Mapping], path, columns: list[str] | None = None) -> Path:
    """CSV with one row per mapping; floats in repr form."""
    path = Path(path)
    rows = list(rows)
    columns = columns or (list(rows[0]) if rows else [])
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(
                [_fmt(r[c]) if isinstance(r[c], (int, float, np.number)) else r[c] for c in columns]
            )
    return path


def read_table(path) -> list[dict[str, str]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def write_columns(path, **columns) -> Path:
    """CSV of equal-length numeric columns given as keyword arrays."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    rows = ({n: a[i] for n, a in zip(names, arrays)} for i in range(len(arrays[0])))
    return write_table(rows, path, names)


def write_envelope(result, path) -> tuple[Path, Path]:
    """Envelope CSV (z_um, envelope) plus a ``.summary.json`` sidecar with peaks and SNR."""
    path = Path(path)
    write_columns(path, z_um=result.z, envelope=result.envelope)
    summary = {
        "peaks": [
            {"position_um": p.position, "height": p.height, "fwhm_um": p.fwhm}
            for p in result.peaks
        ],
        "snr": result.snr_estimate,
        "snr_db": result.snr_db,
    }
    side = path.with_name(path.stem + ".summary.json")
    write_json(summary, side)
    return path, side


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(
        json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n",
        encoding="utf-8",
    )
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
