import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

REPO_ROOT = Path(__file__).resolve().parent.parent


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")


@dataclass(frozen=True)
class Settings:
    """Run-wide knobs. Environment first, command-line flags override."""

    fuel: int = 50
    seed: int = 0
    instances: int = 20
    workers: int = 4
    heaps_per_instance: int = 6
    property_instances: int = 1000
    library_dir: Path = REPO_ROOT / "library"
    log_level: str = "WARNING"
    no_color: bool = False

    @classmethod
    def from_env(cls, env_file: Optional[str] = None) -> "Settings":
        load_dotenv(env_file)
        library = os.getenv("LMR_LIBRARY_DIR")
        return cls(
            fuel=_int_env("LMR_FUEL", cls.fuel),
            seed=_int_env("LMR_SEED", cls.seed),
            instances=_int_env("LMR_INSTANCES", cls.instances),
            workers=max(1, _int_env("LMR_WORKERS", cls.workers)),
            heaps_per_instance=_int_env("LMR_HEAPS_PER_INSTANCE", cls.heaps_per_instance),
            property_instances=max(1, _int_env("LMR_PROPERTY_INSTANCES", cls.property_instances)),
            library_dir=Path(library) if library else cls.library_dir,
            log_level=os.getenv("LMR_LOG_LEVEL", cls.log_level).upper(),
            no_color="NO_COLOR" in os.environ,
        )

    def override(self, **changes) -> "Settings":
        """Apply flag values; ``None`` means the flag was not given."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    @property
    def prelude_path(self) -> Path:
        return self.library_dir / "prelude.lmr"
