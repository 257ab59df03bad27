#!/usr/bin/env python3
"""
spinproc 命令行入口
标准输出只写 JSON 结果，日志走标准错误；退出码取自异常的 exit_code
"""
import argparse
import asyncio
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from spinproc import SpinProcessor, create_app
from spinproc.codec import parse_decimal
from spinproc.config import config
from spinproc.errors import ConfigError, OutputError, SpinProcessorError
from spinproc.exporters import (
    dumps,
    export_run,
    export_sweep,
    result_payload,
    sweep_payload,
    write_fid_csv,
    write_json,
    write_spectrum_csv,
    write_transitions_csv,
)
from spinproc.logger import get_logger, setup_logging
from spinproc.models import TWO_PI
from spinproc.regime import transition_density_check
from spinproc.specs import (
    AcquisitionSpec,
    ExperimentConfig,
    load_cluster_spec,
    load_experiment_config,
    load_model,
)
from spinproc.spin_model import transition_bound

logger = get_logger("cli")


def _emit(payload: Any) -> None:
    sys.stdout.write(dumps(payload).decode() + "\n")
    sys.stdout.flush()


def _parse_omegas(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"无效的幅度列表: {text!r}") from e


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_experiment_config(args.config)
    return cfg.with_overrides(seed=args.seed, n_transients=args.transients)


def _out_dir(args: argparse.Namespace) -> Optional[Path]:
    return Path(args.out) if args.out else None


# ========== 子命令 ==========

def cmd_transitions(app: SpinProcessor, args: argparse.Namespace) -> None:
    spec = load_cluster_spec(args.cluster)
    table = app.transitions(spec)
    n_spins = spec.n_spins if spec.n_spins is not None else len(spec.offsets_hz or [])
    payload: Dict[str, Any] = {
        "n_spins": n_spins,
        "count": len(table),
        "bound": transition_bound(n_spins),
        "omega_loc_hz": table.omega_loc / TWO_PI,
        "degenerate": table.degenerate_flag,
    }
    out = _out_dir(args)
    rows = [
        {"i": i, "j": j, "omega_rad_s": omega, "weight": weight}
        for i, j, omega, weight in table.entries
    ]
    if out is None:
        payload["transitions"] = rows
    else:
        out.mkdir(parents=True, exist_ok=True)
        if args.format == "json":
            path = write_json(out / "transitions.json", {**payload, "transitions": rows})
        else:
            path = write_transitions_csv(out / "transitions.csv", table)
        payload["files"] = [str(path)]
    _emit(payload)


def cmd_classify(app: SpinProcessor, args: argparse.Namespace) -> None:
    report = app.classify(args.omega_hz, args.n, args.omega_loc_hz, args.kappa)
    payload = report.to_json_dict()
    payload["transition_bound"] = transition_bound(args.n)
    payload["density_check"] = transition_density_check(args.n)
    _emit(payload)


async def cmd_calibrate(app: SpinProcessor, args: argparse.Namespace) -> None:
    engine = app.engine(_load_config(args))
    if args.search:
        result = await engine.search_write_amplitude()
    else:
        result = await engine.run_calibration()
    _emit_run(result, args)


async def cmd_encode(app: SpinProcessor, args: argparse.Namespace) -> None:
    cfg = _load_config(args)
    x = parse_decimal(args.x, app.engine(cfg).n_bits)
    _emit_run(await app.encode(cfg, x), args)


async def cmd_not(app: SpinProcessor, args: argparse.Namespace) -> None:
    cfg = _load_config(args)
    x = parse_decimal(args.x, app.engine(cfg).n_bits)
    _emit_run(await app.not_gate(cfg, x), args)


async def cmd_sweep(app: SpinProcessor, args: argparse.Namespace) -> None:
    result = await app.sweep(_load_config(args), _parse_omegas(args.omegas))
    payload = sweep_payload(result)
    out = _out_dir(args)
    if out is not None:
        payload["files"] = [str(p) for p in export_sweep(result, out, args.format)]
    _emit(payload)


async def cmd_tune(app: SpinProcessor, args: argparse.Namespace) -> None:
    source = Path(args.config)
    result = await app.tune(_load_config(args), args.slot)
    target_dir = _out_dir(args) or source.parent
    target_dir.mkdir(parents=True, exist_ok=True)
    target = target_dir / f"{source.stem}_tuned.json"
    target.write_bytes(result.config.dump_json() + b"\n")
    payload = result.model_dump(mode="json", exclude={"config"})
    payload["config_file"] = str(target)
    _emit(payload)


async def cmd_simulate(app: SpinProcessor, args: argparse.Namespace) -> None:
    acquisition = load_model(
        {"n_samples": args.n_samples, "dwell_s": args.dwell}, AcquisitionSpec
    )
    fid, spectrum = await app.simulate(args.cluster, args.pulse, acquisition)
    peak = int(spectrum.mags.argmax())
    payload: Dict[str, Any] = {
        "n_samples": acquisition.n_samples,
        "dwell_s": acquisition.dwell_s,
        "peak_freq_hz": float(spectrum.freqs[peak]),
        "peak_magnitude": float(spectrum.mags[peak]),
    }
    out = _out_dir(args)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if args.format == "json":
            files = [
                write_json(
                    out / "simulate.json",
                    {
                        **payload,
                        "fid_re": fid.real.tolist(),
                        "fid_im": fid.imag.tolist(),
                        "freq_hz": spectrum.freqs.tolist(),
                        "magnitude": spectrum.mags.tolist(),
                    },
                )
            ]
        else:
            files = [
                write_fid_csv(out / "simulate_fid.csv", fid, acquisition.dwell_s),
                write_spectrum_csv(out / "simulate_spectrum.csv", spectrum),
            ]
        payload["files"] = [str(p) for p in files]
    _emit(payload)


def _emit_run(result: Any, args: argparse.Namespace) -> None:
    payload = result_payload(result)
    out = _out_dir(args)
    if out is not None:
        payload["files"] = [str(p) for p in export_run(result, out, args.format)]
    _emit(payload)


# ========== 参数 ==========

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="详细输出")
    common.add_argument("--log-json", action="store_true", help="JSON 格式日志")
    common.add_argument("--out", help="输出目录")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="输出文件格式")

    experiment = argparse.ArgumentParser(add_help=False, parents=[common])
    experiment.add_argument("config", help="实验配置 JSON")
    experiment.add_argument("--seed", type=int, help="覆盖配置中的随机种子")
    experiment.add_argument("--transients", type=int, help="覆盖累加次数")

    parser = argparse.ArgumentParser(prog="spinproc", description="spinproc CLI")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transitions", parents=[common], help="跃迁表")
    p.add_argument("cluster", help="集群描述 JSON")

    p = sub.add_parser("classify", parents=[common], help="驱动幅度的响应区间")
    p.add_argument("--omega-hz", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--omega-loc-hz", type=float)
    p.add_argument("--kappa", type=float)

    p = sub.add_parser("calibrate", parents=[experiment], help="全 1 梳校准")
    p.add_argument("--search", action="store_true", help="失败时逐次提高写入幅度")

    for name, text in (("encode", "写入整数"), ("not", "按位取反")):
        p = sub.add_parser(name, parents=[experiment], help=text)
        p.add_argument("--x", required=True, help="十进制整数")

    p = sub.add_parser("sweep", parents=[experiment], help="单谐波幅度扫描")
    p.add_argument("--omegas", required=True, help="逗号分隔的幅度 (rad/s)")

    p = sub.add_parser("tune", parents=[experiment], help="二分调谐擦除幅度")
    p.add_argument("--slot", type=int, default=0)

    p = sub.add_parser("simulate", parents=[common], help="任意脉冲程序")
    p.add_argument("cluster", help="集群描述 JSON")
    p.add_argument("pulse", help="脉冲描述 JSON")
    p.add_argument("--n-samples", type=int, default=256)
    p.add_argument("--dwell", type=float, default=1e-4)
    return parser


SYNC_COMMANDS = {"transitions": cmd_transitions, "classify": cmd_classify}
ASYNC_COMMANDS = {
    "calibrate": cmd_calibrate,
    "encode": cmd_encode,
    "not": cmd_not,
    "sweep": cmd_sweep,
    "tune": cmd_tune,
    "simulate": cmd_simulate,
}


def _failed(command: str, error: SpinProcessorError) -> int:
    logger.error("command_failed", command=command, error=str(error), exit_code=error.exit_code)
    return error.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    # 设置日志
    settings = config.get_config()
    level = "DEBUG" if args.verbose else settings.log_level
    setup_logging(level, json=args.log_json)
    logger.debug("cli_start", app=settings.app_name, command=args.command)

    app = create_app()
    try:
        if args.command in SYNC_COMMANDS:
            SYNC_COMMANDS[args.command](app, args)
        else:
            asyncio.run(ASYNC_COMMANDS[args.command](app, args))
    except SpinProcessorError as e:
        return _failed(args.command, e)
    except OSError as e:
        return _failed(args.command, OutputError(f"写出失败: {e}", {"path": e.filename}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
