from loguru import logger
import yaml, pathlib, os, sys

_OUTPUT_KEYS = ("report", "jsonl", "trace_dir", "db")


def setup_logging(level: str = "INFO", sink=None):
    logger.remove()
    logger.add(
        sink if sink is not None else sys.stderr,
        level=level.upper(),
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {name}: {message}",
    )
    return logger


def load_config(path: str) -> dict:
    """
    Load YAML experiment config and normalize output paths:
    - Expands env vars and ~ in output.* strings
    - Resolves relative paths relative to the config file directory
    """
    p = pathlib.Path(path).resolve()
    if not p.exists():
        raise FileNotFoundError(f"Config file not found: '{p}'")
    cfg = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    if not isinstance(cfg, dict):
        raise ValueError(f"Config file '{p}' must contain a mapping at the top level")

    out = cfg.get("output")
    if isinstance(out, dict):
        for key in _OUTPUT_KEYS:
            val = out.get(key)
            if isinstance(val, str) and val:
                out[key] = normalize_path(val, base=p.parent)

    return cfg


def normalize_path(value: str, base: pathlib.Path | None = None) -> str:
    expanded = os.path.expandvars(os.path.expanduser(value))
    resolved = pathlib.Path(expanded)
    if not resolved.is_absolute() and base is not None:
        resolved = (base / resolved).resolve()
    return str(resolved)
