# app/cli.py

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
import pydantic

from app.config import settings
from app.core.bandwidth.plan import BandwidthPlan, PilotConfig
from app.core.bandwidth.plugin import plugin_global_c
from app.core.bench.comparison import compare_estimators
from app.core.bench.experiment import run_experiment
from app.core.data.ingest import ingest_csv
from app.core.data.sample import SurvivalSample
from app.core.data.simulation import simulate
from app.core.dynamic.estimator import LocalFitSpec, estimate_curve
from app.core.errors import ConfigError, DataValidationError, HazardError
from app.core.gof.statistics import default_kind
from app.core.gof.windows import expand_window, startup_interval
from app.core.parametric.families import get_family
from app.core.parametric.fitting import fit_weighted_mle
from app.core.parametric.sandwich import sandwich
from app.core.smoothing.kernels import get_kernel
from app.schemas.reports import ErrorRecord, FitReport, Provenance, RunReport
from app.schemas.run_config import RunConfig
from app.services.persistence import package_versions, persistence
from app.utils.logging import setup_logging
from app.utils.metrics import dump_metrics, measure_duration

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2

# Flags that steer the process, not the result; kept out of provenance
_PROCESS_FLAGS = ("output", "threads")


# ============================================
# ARGUMENTS
# ============================================

def _grid(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated times, got '{text}'")


def _law(text: str) -> Dict:
    """Inline JSON law or a path to one."""
    try:
        if text.lstrip().startswith("{"):
            return json.loads(text)
        return json.loads(Path(text).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise argparse.ArgumentTypeError(f"cannot read law '{text}': {e}")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=S, help="JSON file with RunConfig fields; flags override it")
    common.add_argument("-o", "--output", default=S, help="result CSV path; a .json companion is written next to it")
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--threads", type=int, default=S)
    common.add_argument("--log-level", dest="log_level", default=S)
    common.add_argument("--metrics-file", dest="metrics_file", default=S)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", default=S, help="CSV with time and status columns")
    data.add_argument("--time-column", dest="time_column", default=S, help="name of the time column (default: time)")
    data.add_argument("--status-column", dest="status_column", default=S,
                      help="name of the status column, 1 = failure (default: status)")
    data.add_argument("--law", type=_law, default=S, help="simulate the input from this law (JSON)")
    data.add_argument("--n", type=int, default=S, help="sample size for --law")
    data.add_argument("--family", default=S)
    data.add_argument("--kernel", default=S)
    data.add_argument("--grid", type=_grid, default=S, help="comma-separated evaluation times")
    data.add_argument("--grid-count", dest="grid_count", type=int, default=S,
                      help="equally spaced grid on [0, T] when --grid is absent")
    data.add_argument("--min-events", dest="min_events", type=int, default=S,
                      help=f"failures a window must hold (default {settings.MIN_EVENTS}); "
                           "points whose window holds fewer come back as insufficient_window gaps")
    data.add_argument("--level", type=float, default=S)
    data.add_argument("--kind", default=S, help="goodness-of-fit statistic")

    parser = argparse.ArgumentParser(prog="dynhazard", description="Dynamic likelihood hazard estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", parents=[common, data], help="dynamic hazard curve")
    est.add_argument("--bandwidth", default=S, help="fixed:<h> | adaptive:<c> | plugin | gof")
    est.add_argument("--startup", default=S,
                     help="gof (default) | half_window | none; gof scans for a boundary "
                          "interval and needs min-events failures to start")
    est.add_argument("--se-mode", dest="se_mode", default=S, help="formula | sandwich")
    est.add_argument("--band-level", dest="band_level", type=float, default=S)
    est.add_argument("--bias-correction", dest="bias_correction", action="store_true", default=S)
    est.add_argument("--slope-window-factor", dest="slope_window_factor", type=float, default=S)
    est.add_argument("--slope-smooth-span", dest="slope_smooth_span", type=float, default=S)
    est.add_argument("--pilot-h2", dest="pilot_h2", type=float, default=S)

    sub.add_parser("gof-scan", parents=[common, data], help="window expansion per grid point")

    for name, text in (("simulate", "Monte Carlo experiment, or a simulated sample"),
                       ("compare", "rank the estimators of an experiment")):
        cmd = sub.add_parser(name, parents=[common], help=text)
        cmd.add_argument("--law", type=_law, default=S)
        cmd.add_argument("--n", type=int, default=S)
        cmd.add_argument("--replications", type=int, default=S)

    bw = sub.add_parser("bandwidth", parents=[common, data], help="plug-in bandwidth constant")
    bw.add_argument("--pilot-h2", dest="pilot_h2", type=float, default=S)
    bw.add_argument("--weight-choice", dest="weight_choice", default=S, help="y45 | uniform")
    return parser


# ============================================
# COMMANDS
# ============================================

def _load_sample(config: RunConfig) -> SurvivalSample:
    if config.input is not None:
        return ingest_csv(config.input, time_column=config.time_column, status_column=config.status_column)
    return simulate(config.law.to_law(), config.n, seed=config.seed)


def _companion(output: str) -> str:
    return f"{output}.json"


def _global_fit_report(sample, family) -> Optional[FitReport]:
    try:
        fit = fit_weighted_mle(sample, family)
        return FitReport.from_fit(fit, sandwich(sample, family, None, None, fit.theta_hat))
    except (HazardError, ValueError) as e:
        logger.warning(f"Global {family.name} fit unavailable: {e}")
        return None


def _records(frame: pd.DataFrame) -> List[Dict]:
    return frame.to_dict(orient="records")


def cmd_estimate(config: RunConfig, provenance: Provenance) -> List[str]:
    sample = _load_sample(config)
    family = get_family(config.family)
    plan = BandwidthPlan.parse(config.bandwidth)
    if plan.kind == "plugin" and config.pilot_h2 is not None:
        plan = BandwidthPlan.plugin(PilotConfig(h2=config.pilot_h2))
    spec = LocalFitSpec(
        family=family,
        kernel=get_kernel(config.kernel),
        bandwidth=plan,
        grid=tuple(config.grid_points(sample.horizon)),
        min_events=config.min_events,
        startup=config.startup,
        se_mode=config.se_mode,
        band_level=config.band_level,
        bias_correction=config.bias_correction,
        slope_window_factor=config.slope_window_factor,
        slope_smooth_span=config.slope_smooth_span,
        gof_kind=config.kind,
        gof_level=config.level,
        threads=config.threads,
    )
    with measure_duration("estimate"):
        curve = estimate_curve(sample, spec)
    frame = curve.to_frame()
    persistence.save_frame(config.output, frame, provenance.model_dump())
    fit = _global_fit_report(sample, family)
    report = RunReport(provenance=provenance, summary=curve.describe(), records=_records(frame),
                       fits=[fit] if fit is not None else [])
    persistence.save_json(_companion(config.output), report)
    return [config.output, _companion(config.output)]


def cmd_gof_scan(config: RunConfig, provenance: Provenance) -> List[str]:
    sample = _load_sample(config)
    family = get_family(config.family)
    kind = config.kind or default_kind(family)
    rows = []
    with measure_duration("gof_scan"):
        for s in config.grid_points(sample.horizon):
            try:
                rows.append(expand_window(sample, family, s, kind, config.level, config.min_events).to_dict())
            except HazardError as e:
                logger.warning(f"No window expansion at s={s:g}: {e}")
                rows.append({"s": s, "h_hat": np.nan, "statistic_at_stop": np.nan, "kind": kind,
                             "level": config.level, "sentinel_flag": False})
    frame = pd.DataFrame(rows, columns=["s", "h_hat", "statistic_at_stop", "kind", "level", "sentinel_flag"])
    persistence.save_frame(config.output, frame, provenance.model_dump())

    boundaries = {}
    for side in ("left", "right"):
        try:
            choice = startup_interval(sample, family, kind, config.level, config.min_events, side=side)
            boundaries[side] = {"boundary": choice.boundary, "rejected_at": choice.rejected_at,
                                "theta": list(choice.theta_start)}
        except HazardError as e:
            boundaries[side] = {"error": str(e)}
    report = RunReport(provenance=provenance, summary={"startup": boundaries, "n": sample.n},
                       records=_records(frame))
    persistence.save_json(_companion(config.output), report)
    return [config.output, _companion(config.output)]


def _experiment(config: RunConfig):
    spec = config.experiment
    if config.replications is not None:
        spec = spec.model_copy(update={"replications": config.replications})
    return spec.to_experiment()


def cmd_simulate(config: RunConfig, provenance: Provenance) -> List[str]:
    if config.experiment is None:
        sample = simulate(config.law.to_law(), config.n, seed=config.seed)
        persistence.save_frame(config.output, sample.to_frame(), provenance.model_dump())
        return [config.output]
    with measure_duration("simulate"):
        report = run_experiment(_experiment(config), threads=config.threads)
    persistence.save_frame(config.output, report.to_long_frame(), provenance.model_dump())
    doc = RunReport(provenance=provenance, summary=report.summary(), records=_records(report.table))
    persistence.save_json(_companion(config.output), doc)
    return [config.output, _companion(config.output)]


def cmd_compare(config: RunConfig, provenance: Provenance) -> List[str]:
    with measure_duration("compare"):
        report = run_experiment(_experiment(config), threads=config.threads)
    ranking = compare_estimators(report)
    persistence.save_frame(config.output, ranking, provenance.model_dump())
    doc = RunReport(provenance=provenance, summary=report.summary(), records=_records(ranking))
    persistence.save_json(_companion(config.output), doc)
    return [config.output, _companion(config.output)]


def cmd_bandwidth(config: RunConfig, provenance: Provenance) -> List[str]:
    sample = _load_sample(config)
    family = get_family(config.family)
    plan = plugin_global_c(sample, get_kernel(config.kernel), family.tag,
                           PilotConfig(h2=config.pilot_h2), config.weight_choice)
    grid = np.asarray(config.grid_points(sample.horizon))
    at_risk = sample.at_risk(grid)
    frame = pd.DataFrame({"s": grid, "at_risk": at_risk, "h": plan.h_at(at_risk)})
    persistence.save_frame(config.output, frame, provenance.model_dump())
    doc = RunReport(provenance=provenance, summary={"plan": plan.to_dict()}, records=_records(frame))
    persistence.save_json(_companion(config.output), doc)
    return [config.output, _companion(config.output)]


COMMAND_HANDLERS: Dict[str, Callable[[RunConfig, Provenance], List[str]]] = {
    "estimate": cmd_estimate,
    "gof-scan": cmd_gof_scan,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "bandwidth": cmd_bandwidth,
}


# ============================================
# ENTRY
# ============================================

def _read_config(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError([f"cannot read config '{path}': {e}"])
    if not isinstance(payload, dict):
        raise ConfigError([f"config '{path}' must hold a JSON object"])
    return payload


def _fail(error: Exception, code: int, violations: Optional[List[str]] = None) -> int:
    record = ErrorRecord(error=type(error).__name__, message=str(error), violations=violations or [], exit_code=code)
    print(record.model_dump_json(), file=sys.stderr)
    return code


def run(command: str, flags: Dict[str, Any], config_file: Dict[str, Any]) -> int:
    try:
        config = RunConfig.model_validate({**config_file, **flags, "command": command})
        violations = config.violations()
        if violations:
            raise ConfigError(violations)
        resolved = {k: v for k, v in config.model_dump().items() if k not in _PROCESS_FLAGS}
        provenance = Provenance(
            command=command,
            config_file=config_file or None,
            flags={k: v for k, v in flags.items() if k not in _PROCESS_FLAGS},
            resolved=resolved,
            seed=config.seed,
            versions=package_versions(),
        )
        outputs = COMMAND_HANDLERS[command](config, provenance)
    except pydantic.ValidationError as e:
        found = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]
        return _fail(ConfigError(found), EXIT_VALIDATION, found)
    except (ConfigError, DataValidationError) as e:
        return _fail(e, EXIT_VALIDATION, e.violations)
    except HazardError as e:
        logger.error(f"{command} failed: {e}")
        return _fail(e, EXIT_RUNTIME)
    except Exception as e:
        logger.exception(f"{command} failed unexpectedly")
        return _fail(e, EXIT_RUNTIME)

    print(json.dumps({"status": "ok", "command": command, "outputs": outputs}))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    flags = vars(args)
    command = flags.pop("command")
    setup_logging(flags.pop("log_level", settings.LOG_LEVEL), settings.LOG_DIR, settings.LOG_TO_FILE)
    metrics_file = flags.pop("metrics_file", None)
    try:
        config_file = _read_config(flags.pop("config", None))
    except ConfigError as e:
        return _fail(e, EXIT_VALIDATION, e.violations)
    code = run(command, flags, config_file)
    if metrics_file and settings.METRICS_ENABLED:
        dump_metrics(metrics_file)
    return code


if __name__ == "__main__":
    sys.exit(main())
