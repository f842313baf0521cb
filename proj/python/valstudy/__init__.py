"""Python interface to the validation-study library.

Configs may be given as dicts or JSON text; they follow the same schema as
the command-line tool.
"""

import json
import os

from . import _valstudy
from ._valstudy import (
    DAYS_PER_MONTH,
    REPORT_SCHEMA_VERSION,
    ConfigError,
    DataError,
    NumericalError,
    ValstudyError,
    bias_regime,
    daily_to_monthly,
    ols,
    reliability_classical,
)

__all__ = [
    "DAYS_PER_MONTH",
    "REPORT_SCHEMA_VERSION",
    "ConfigError",
    "DataError",
    "NumericalError",
    "ValstudyError",
    "analyze",
    "bias_regime",
    "daily_to_monthly",
    "harmonize",
    "ols",
    "oracle",
    "reliability_classical",
    "simulate",
]


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def oracle(config):
    """Closed-form population values for the config's dgp section."""
    return json.loads(_valstudy.oracle(_text(config)))


def simulate(config, out_dir, base_dir="."):
    """Writes panel.csv and oracle.json into out_dir; returns the panel path."""
    _valstudy.simulate(_text(config), os.fspath(out_dir), os.fspath(base_dir))
    return os.path.join(os.fspath(out_dir), "panel.csv")


def analyze(config, panel_csv, out_dir=None, base_dir="."):
    """Runs the analysis pipeline and returns the report as a dict.

    When out_dir is given the report and plot CSVs are also written there.
    """
    if out_dir is not None:
        _valstudy.analyze_to_dir(_text(config), os.fspath(panel_csv), os.fspath(out_dir), os.fspath(base_dir))
        with open(os.path.join(os.fspath(out_dir), "report.json")) as fh:
            return json.load(fh)
    return json.loads(_valstudy.analyze(_text(config), os.fspath(panel_csv), os.fspath(base_dir)))


def harmonize(config, spells_csv, survey_csv, out_dir, base_dir="."):
    """Links survey responses to register spells; returns the restriction ledger."""
    _valstudy.harmonize(_text(config), os.fspath(spells_csv), os.fspath(survey_csv), os.fspath(out_dir),
                        os.fspath(base_dir))
    with open(os.path.join(os.fspath(out_dir), "ledger.json")) as fh:
        return json.load(fh)["ledger"]
