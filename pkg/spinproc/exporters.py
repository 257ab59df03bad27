"""
结果导出
CSV 以 %.17g 写出全精度浮点；JSON 由 orjson 生成，键排序，大整数写成十进制字符串。
耗时等非确定字段不写入文件，同一配置与种子的输出逐字节相同。
"""
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np
import orjson

from .models import MagnitudeSpectrum, RunResult, SweepResult, TransitionTable

PathLike = Union[str, Path]

_FLOAT_FMT = "%.17g"
_VOLATILE_KEYS = ("wall_time_s",)


def _savetxt(path: PathLike, header: str, columns: Sequence[np.ndarray]) -> Path:
    path = Path(path)
    np.savetxt(
        path,
        np.column_stack(columns),
        delimiter=",",
        header=header,
        comments="",
        fmt=_FLOAT_FMT,
    )
    return path


def write_fid_csv(path: PathLike, fid: np.ndarray, dwell: float) -> Path:
    t = np.arange(fid.size) * dwell
    return _savetxt(path, "t_s,re,im", [t, fid.real, fid.imag])


def write_spectrum_csv(path: PathLike, spectrum: MagnitudeSpectrum) -> Path:
    return _savetxt(path, "freq_hz,magnitude", [spectrum.freqs, spectrum.mags])


def write_complex_spectrum_csv(path: PathLike, spectrum: MagnitudeSpectrum) -> Path:
    return _savetxt(
        path, "freq_hz,re,im", [spectrum.freqs, spectrum.values.real, spectrum.values.imag]
    )


def write_transitions_csv(path: PathLike, table: TransitionTable) -> Path:
    path = Path(path)
    lines = ["i,j,omega_rad_s,freq_hz,weight"]
    for i, j, omega, weight in table.entries:
        lines.append(f"{i},{j},{omega:.17g},{omega / (2.0 * np.pi):.17g},{weight:.17g}")
    path.write_text("\n".join(lines) + "\n")
    return path


def dumps(payload: Any) -> bytes:
    return orjson.dumps(
        payload,
        option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY,
    )


def write_json(path: PathLike, payload: Any) -> Path:
    path = Path(path)
    path.write_bytes(dumps(payload) + b"\n")
    return path


def decoded_payload(result: RunResult) -> Dict[str, Any]:
    return {"bits_lsb_first": list(result.bits.bits), "value_decimal": result.value_decimal}


def result_payload(result: RunResult, include_arrays: bool = False) -> Dict[str, Any]:
    """RunResult 的可序列化表示（不含耗时）"""
    payload: Dict[str, Any] = {
        "kind": result.kind.value,
        "decoded": decoded_payload(result),
        "slot_amplitudes": list(result.slot_amplitudes),
        "regime": result.regime.to_json_dict(),
        "metadata": {k: v for k, v in result.metadata.items() if k not in _VOLATILE_KEYS},
    }
    if include_arrays:
        t = np.arange(result.fid.size) * result.dwell
        payload["fid"] = {
            "t_s": t.tolist(),
            "re": result.fid.real.tolist(),
            "im": result.fid.imag.tolist(),
        }
        payload["spectrum"] = {
            "freq_hz": result.spectrum.freqs.tolist(),
            "magnitude": result.spectrum.mags.tolist(),
        }
    return payload


def export_run(result: RunResult, out_dir: PathLike, fmt: str = "csv") -> List[Path]:
    """
    csv：<kind>_fid.csv、<kind>_spectrum.csv、<kind>_decoded.json、<kind>_run.json
    json：<kind>_run.json（含 FID 与谱数组）
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = result.kind.value
    if fmt == "json":
        return [write_json(out / f"{stem}_run.json", result_payload(result, include_arrays=True))]
    return [
        write_fid_csv(out / f"{stem}_fid.csv", result.fid, result.dwell),
        write_spectrum_csv(out / f"{stem}_spectrum.csv", result.spectrum),
        write_json(out / f"{stem}_decoded.json", decoded_payload(result)),
        write_json(out / f"{stem}_run.json", result_payload(result)),
    ]


def sweep_payload(result: SweepResult) -> Dict[str, Any]:
    return {
        "target_transition": result.target_transition,
        "target_freq_hz": result.target_freq_hz,
        "duration_s": result.duration,
        "rows": [row.model_dump() for row in result.rows],
    }


def export_sweep(result: SweepResult, out_dir: PathLike, fmt: str = "csv") -> List[Path]:
    """扫描表与每个幅度下的复数谱"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        payload = sweep_payload(result)
        payload["spectra"] = [
            {
                "freq_hz": s.freqs.tolist(),
                "re": s.values.real.tolist(),
                "im": s.values.imag.tolist(),
            }
            for s in result.spectra
        ]
        return [write_json(out / "sweep.json", payload)]

    table = out / "sweep.csv"
    lines = ["omega_rad_s,omega_hz,label,rank,peak_freq_hz,peak_magnitude,peak_re,peak_im"]
    for row in result.rows:
        values: Iterable[float] = (row.peak_freq_hz, row.peak_magnitude, row.peak_re, row.peak_im)
        lines.append(
            f"{row.omega:.17g},{row.omega / (2.0 * np.pi):.17g},{row.label},{row.rank:g},"
            + ",".join(f"{v:.17g}" for v in values)
        )
    table.write_text("\n".join(lines) + "\n")
    paths = [table]
    for k, spectrum in enumerate(result.spectra):
        paths.append(write_complex_spectrum_csv(out / f"sweep_spectrum_{k:03d}.csv", spectrum))
    return paths
