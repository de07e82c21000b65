import logging
import re

from container_app_conf import ConfigBase
from container_app_conf.entry.float import FloatConfigEntry
from container_app_conf.entry.int import IntConfigEntry
from container_app_conf.entry.string import StringConfigEntry
from container_app_conf.source.env_source import EnvSource
from container_app_conf.source.toml_source import TomlSource
from container_app_conf.source.yaml_source import YamlSource
from py_range_parse import parse_range

from robust_qcd.const import *


class AppConfig(ConfigBase):

    def __new__(cls, *args, **kwargs):
        yaml_source = YamlSource(file_name=[CONFIG_NODE_ROOT, f".{CONFIG_NODE_ROOT}"])
        toml_source = TomlSource(file_name=[CONFIG_NODE_ROOT, f".{CONFIG_NODE_ROOT}"])
        data_sources = [
            EnvSource(),
            yaml_source,
            toml_source,
        ]
        return super(AppConfig, cls).__new__(cls, data_sources=data_sources)

    LOG_LEVEL = StringConfigEntry(
        description="Log level",
        key_path=[
            CONFIG_NODE_ROOT,
            "log_level"
        ],
        regex=re.compile(f" {'|'.join(logging._nameToLevel.keys())}", flags=re.IGNORECASE),
        default="INFO",
    )

    MAX_WORKERS = IntConfigEntry(
        description="Max worker threads for replication chunks and table cells",
        key_path=[
            CONFIG_NODE_ROOT,
            CONFIG_NODE_MONTE_CARLO,
            "max_workers"
        ],
        range=parse_range("[1..256]"),
        default=4,
    )

    CHUNK_SIZE = IntConfigEntry(
        description="Number of replications simulated per seeded chunk",
        key_path=[
            CONFIG_NODE_ROOT,
            CONFIG_NODE_MONTE_CARLO,
            "chunk_size"
        ],
        range=parse_range("[1..1000000]"),
        default=1000,
    )

    BLOCK_SIZE = IntConfigEntry(
        description="Number of observations drawn per vectorised block",
        key_path=[
            CONFIG_NODE_ROOT,
            CONFIG_NODE_MONTE_CARLO,
            "block_size"
        ],
        range=parse_range("[1..65536]"),
        default=256,
    )

    CALIBRATION_INITIAL_RUNS = IntConfigEntry(
        description="Replications used for the first threshold search iterate",
        key_path=[
            CONFIG_NODE_ROOT,
            CONFIG_NODE_CALIBRATION,
            "initial_runs"
        ],
        range=parse_range("[100..10000000]"),
        default=1000,
    )

    CALIBRATION_MAX_ITERATIONS = IntConfigEntry(
        description="Max number of bracket expansions plus bisection steps",
        key_path=[
            CONFIG_NODE_ROOT,
            CONFIG_NODE_CALIBRATION,
            "max_iterations"
        ],
        range=parse_range("[1..1000]"),
        default=30,
    )

    CALIBRATION_RELATIVE_TOLERANCE = FloatConfigEntry(
        description="Relative distance to the target at which the threshold search may stop early",
        key_path=[
            CONFIG_NODE_ROOT,
            CONFIG_NODE_CALIBRATION,
            "relative_tolerance"
        ],
        default=0.005,
    )

    CALIBRATION_MAX_TOTAL_RUNS = IntConfigEntry(
        description="Cap on the total number of replications spent calibrating one threshold",
        key_path=[
            CONFIG_NODE_ROOT,
            CONFIG_NODE_CALIBRATION,
            "max_total_runs"
        ],
        range=parse_range("[100..1000000000]"),
        default=100000,
    )

    CALIBRATION_FAR_MAX_RELATIVE_STDERR = FloatConfigEntry(
        description="Largest relative standard error of the mean time to false alarm accepted by the threshold search",
        key_path=[
            CONFIG_NODE_ROOT,
            CONFIG_NODE_CALIBRATION,
            "far_max_relative_stderr"
        ],
        default=0.02,
    )

    CALIBRATION_PFA_MAX_RELATIVE_STDERR = FloatConfigEntry(
        description="Largest relative standard error of the false alarm probability accepted by the threshold search",
        key_path=[
            CONFIG_NODE_ROOT,
            CONFIG_NODE_CALIBRATION,
            "pfa_max_relative_stderr"
        ],
        default=0.1,
    )
