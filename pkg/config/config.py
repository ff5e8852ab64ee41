"""
Configuration module for the ElastoScan toolkit
Runtime settings come from the environment (or a .env file)
"""
import os
from typing import Dict, List
from dotenv import load_dotenv
from loguru import logger

# Load environment variables
load_dotenv()


class Config:
    """Main configuration class"""

    # Output locations
    OUTPUT_DIR = os.getenv('OUTPUT_DIR', './results')
    DATASET_DIR = os.getenv('DATASET_DIR', './datasets')

    # Logging
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('LOG_FILE', './logs/elastoscan.log')

    # Compute
    THREADS = int(os.getenv('THREADS', '0'))
    NODES_PER_WAVELENGTH = float(os.getenv('NODES_PER_WAVELENGTH', '10'))
    DEFAULT_SEED = int(os.getenv('DEFAULT_SEED', '20240607'))

    @classmethod
    def validate_config(cls) -> bool:
        """Validate configuration values"""
        problems = []

        if cls.THREADS < 0:
            problems.append('THREADS must be >= 0')
        if cls.NODES_PER_WAVELENGTH < 10:
            problems.append('NODES_PER_WAVELENGTH must be >= 10')
        if cls.LOG_LEVEL.upper() not in ('TRACE', 'DEBUG', 'INFO', 'SUCCESS', 'WARNING', 'ERROR', 'CRITICAL'):
            problems.append(f'unknown LOG_LEVEL {cls.LOG_LEVEL}')

        if problems:
            logger.error(f"Invalid configuration: {', '.join(problems)}")
            return False

        return True

    @classmethod
    def worker_count(cls) -> int:
        """Number of worker threads (0 means one per core)"""
        if cls.THREADS > 0:
            return cls.THREADS
        return os.cpu_count() or 1

    @classmethod
    def get_paths(cls) -> Dict[str, str]:
        """Get the configured output paths"""
        return {
            'output_dir': cls.OUTPUT_DIR,
            'dataset_dir': cls.DATASET_DIR,
            'log_file': cls.LOG_FILE,
        }


# Create directories if they don't exist
def ensure_directories(extra: List[str] = None):
    """Ensure required directories exist"""
    directories = [
        Config.OUTPUT_DIR,
        Config.DATASET_DIR,
        os.path.dirname(Config.LOG_FILE),
    ] + list(extra or [])

    for directory in directories:
        if directory and not os.path.exists(directory):
            os.makedirs(directory, exist_ok=True)
