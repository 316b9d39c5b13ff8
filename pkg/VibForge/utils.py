import ast
import logging

import h5py
import numpy

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", datefmt="%Y-%m-%d %H:%M:%S")


class SimulationError(RuntimeError):
    """
    Raised when a closed-loop run produces non-finite signals.

    Parameters:
    ----------
    message : str
        Human readable description
    tick : int, optional
        Controller tick at which the failure was detected
    time : float, optional
        Simulation time of that tick [s]
    """

    def __init__(self, message, tick=None, time=None):
        self.tick = tick
        self.time = time
        if tick is not None:
            message = f"{message} (tick {tick}, t = {time:.6f} s)"
        super().__init__(message)


class ConfigurationError(ValueError):
    """Raised for unknown sections or keys and unparsable values in an INI file."""


def remove_special_characters(input_string, characters_to_remove=["+", "-", "_", " ", "#"]):
    """
    Remove specified special characters from a given input string.

    Parameters
    ----------
    input_string : str
        The input string from which to remove special characters.
    characters_to_remove : list of str, optional
        Characters to strip. Defaults to ["+", "-", "_", " ", "#"].

    Returns
    -------
    str
        The input string with specified special characters removed.
    """
    return "".join(char for char in input_string if char not in characters_to_remove)


def custom_optionxform(option):
    # INI keys may use hyphens; internally every key is the python field name
    return option.strip().replace("-", "_")


def parse_value(value):
    """
    Convert an INI string into a python object.

    Numbers, lists, tuples, dicts and booleans go through ``ast.literal_eval``;
    anything that is not a literal is returned as a stripped string.
    """
    value = value.strip()
    lowered = value.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    if lowered in ("inf", "+inf", "infinity"):
        return numpy.inf
    try:
        return ast.literal_eval(value)
    except (ValueError, SyntaxError):
        return value


def hdf_append(f, key, value):
    """
    Append rows to an HDF5 dataset or create it if the key does not exist.

    Parameters:
    ----------
    f : (h5py.File or h5py.Group)
        Open HDF5 handle.
    key : (str)
        Dataset name inside ``f``.
    value : (float or numpy.ndarray)
        Scalar, 1-D array (appended element-wise) or 2-D array (appended row-wise).

    Datasets are created resizable along the first axis so repeated appends do not rewrite the file.
    """
    value = numpy.atleast_1d(numpy.asarray(value, dtype=float))
    if key in f:
        dataset = f[key]
        if dataset.shape[1:] != value.shape[1:]:
            raise ValueError(f"Cannot append shape {value.shape} to dataset {key} with shape {dataset.shape}")
        start = dataset.shape[0]
        dataset.resize(start + value.shape[0], axis=0)
        dataset[start:] = value
    else:
        f.create_dataset(key, data=value, maxshape=(None,) + value.shape[1:], chunks=True)


def write_hdf(path, groups):
    """
    Write a mapping ``{group: {dataset: array}}`` to ``path``, appending to existing datasets.
    """
    try:
        with h5py.File(path, "a") as f:
            for group_name, datasets in groups.items():
                group = f.require_group(group_name)
                for key, value in datasets.items():
                    hdf_append(group, key, value)
    except OSError as error:
        raise OSError(f"Could not write {path}: {error}") from error
    logging.info(f"Wrote {path}")
