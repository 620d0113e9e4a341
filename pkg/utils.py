import json
import os

import numpy as np
import pandas as pd

from constants import EXIT_INFEASIBLE, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, FD_STEP, TOOL_NAME, VERSION


class ArqPolicyError(Exception):
    """Base class of every error raised by the package."""


class ConfigurationError(ArqPolicyError):
    pass


class DomainError(ArqPolicyError, ValueError):
    pass


class InvariantViolation(ArqPolicyError):
    pass


class BracketError(ArqPolicyError):
    pass


class BudgetError(ArqPolicyError):
    pass


class InfeasibleError(ArqPolicyError):
    pass


class UnboundedError(ArqPolicyError):
    pass


class NumericalError(ArqPolicyError):
    pass


class ModeError(ArqPolicyError):
    pass


"""
    Maps an exception raised while running a command to the process exit code:
    0 ok, 2 usage or configuration, 3 infeasible, 4 internal numerical failure.
"""
def exit_code_for(exc):
    if exc is None:
        return EXIT_OK
    if isinstance(exc, InfeasibleError):
        return EXIT_INFEASIBLE
    if isinstance(exc, (ConfigurationError, DomainError, InvariantViolation, BudgetError, ModeError)):
        return EXIT_USAGE
    return EXIT_NUMERICAL


def load_json_config(path):
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ConfigurationError(f"ERROR: config file {path} does not exist. Check inputs!")
    with open(path, "r") as fp:
        try:
            config = json.load(fp)
        except json.JSONDecodeError as err:
            raise ConfigurationError(f"ERROR: malformed JSON in {path}: {err}")
    if not isinstance(config, dict):
        raise ConfigurationError(f"ERROR: config {path} must hold a JSON object. Check inputs!")
    return config


def to_json(obj):
    return json.dumps(obj, indent=4)


def write_json(obj, path=None):
    text = to_json(obj)
    if path is None:
        print(text)
    else:
        with open(path, "w") as fp:
            fp.write(text + "\n")
    return text


def metadata_line(seed=None, **extra):
    fields = [f"tool={TOOL_NAME}", f"version={VERSION}"]
    if seed is not None:
        fields.append(f"seed={seed}")
    fields += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(fields)


# Data rows carry no timestamps, so identical inputs give byte-identical files
def dataframe_to_csv_text(df, seed=None, **extra):
    body = df.to_csv(index=False, float_format="%.10g")
    return metadata_line(seed=seed, **extra) + "\n" + body


def write_csv(df, path=None, seed=None, **extra):
    text = dataframe_to_csv_text(df, seed=seed, **extra)
    if path is None:
        print(text, end="")
    else:
        with open(path, "w") as fp:
            fp.write(text)
    return text


# One CSV row from a nested result: dict keys joined with "_", list entries suffixed by their index
def flatten_row(obj, prefix=""):
    row = {}
    for key, value in obj.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            row.update(flatten_row(value, prefix=f"{name}_"))
        elif isinstance(value, (list, tuple)):
            row.update({f"{name}_{i}": v for i, v in enumerate(value)})
        else:
            row[name] = value
    return row


def read_csv_with_metadata(path):
    with open(path, "r") as fp:
        header = fp.readline().strip()
    return header, pd.read_csv(path, comment="#")


"""
    Derivative of fn along coordinate `index` of the probability vector x. Central
    differences in the interior, second-order one-sided differences within h of 0 or 1.
"""
def finite_difference(fn, x, index, h=FD_STEP):
    x = np.asarray(x, dtype=float)

    def shifted(step):
        y = x.copy()
        y[index] += step
        return fn(y)

    if x[index] - h < 0.0:
        return (-3.0 * fn(x) + 4.0 * shifted(h) - shifted(2.0 * h)) / (2.0 * h)
    if x[index] + h > 1.0:
        return (3.0 * fn(x) - 4.0 * shifted(-h) + shifted(-2.0 * h)) / (2.0 * h)
    return (shifted(h) - shifted(-h)) / (2.0 * h)


def relative_error(value, reference, floor=1e-12):
    return abs(value - reference) / max(abs(reference), floor)
