import os
from dataclasses import dataclass
from dotenv import load_dotenv

load_dotenv()

@dataclass
class Settings:
    # Output
    output_dir: str = os.getenv("NEUMANNLAB_OUTPUT_DIR", "").strip()
    log_level: str = os.getenv("NEUMANNLAB_LOG_LEVEL", "INFO").strip().upper()

    # Eigensolver
    # Above this many unknowns the shift-invert Lanczos path replaces the dense Cholesky reduction
    dense_limit: int = int(os.getenv("NEUMANNLAB_DENSE_LIMIT", "5000"))
    shift: float = float(os.getenv("NEUMANNLAB_SHIFT", "-0.01"))
    seed: int = int(os.getenv("NEUMANNLAB_SEED", "20240101"))

    # Verification
    lemma_rtol: float = float(os.getenv("NEUMANNLAB_LEMMA_RTOL", "1e-8"))
    workers: int = int(os.getenv("NEUMANNLAB_WORKERS", "1"))

settings = Settings()
