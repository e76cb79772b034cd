"""
Input/Output functions
"""

from __future__ import annotations

import argparse
import json
import os
from enum import auto, Enum
from typing import TYPE_CHECKING

import matplotlib
import matplotlib.pyplot as plt
import pandas as pd

from src.extra.config import EXPERIMENT_KINDS

if TYPE_CHECKING:
    from typing import Any, Dict, Iterable, List, Optional, Sequence

    from src.extra.config import ExperimentConfig

# Fixed svg ids and no date metadata so identical figures give identical files
matplotlib.rcParams['svg.hashsalt'] = 'icl-caps'


class ImageFormat(Enum):
    """
    Image format
    """
    SVG = auto()
    PNG = auto()
    PDF = auto()


def save_plot(name: str, folder: str = 'figs', additional: str = '', lgd=None, dpi=300,
              image_formats: Iterable[ImageFormat] = (ImageFormat.SVG,)) -> List[str]:
    """
    Saves the plot to a file of the particular image format

    :param name: The plot name
    :param folder: The save folder name
    :param additional: Additional information to add to the filename
    :param lgd: The legend to be added to the plot when saved
    :param dpi: The dpi of the images
    :param image_formats: The image format list
    :return: The saved filenames
    """
    if lgd:
        lgd = (lgd,)

    filenames = []
    for image_format in image_formats:
        extension = image_format.name.lower()
        os.makedirs(folder, exist_ok=True)
        filename = os.path.join(folder, f'{name}{additional}.{extension}')
        print(f'Save file location: {filename}')
        metadata = {'Date': None} if image_format == ImageFormat.SVG else {'CreationDate': None} \
            if image_format == ImageFormat.PDF else None
        plt.savefig(filename, format=extension, dpi=dpi, bbox_extra_artists=lgd, bbox_inches='tight',
                    metadata=metadata)
        filenames.append(filename)
    return filenames


def results_filename(test_name: str, config: ExperimentConfig, extension: str = 'json') -> str:
    """
    Generates the save filename for results, inside the output folder of the experiment

    :param test_name: The test name
    :param config: The experiment config
    :param extension: The file extension
    :return: The filename
    """
    return os.path.join(config.output_dir, f'{test_name}_{config.kind}.{extension}')


def write_json(filename: str, data: Any):
    os.makedirs(os.path.dirname(os.path.abspath(filename)), exist_ok=True)
    with open(filename, 'w') as file:
        json.dump(data, file, indent=2, sort_keys=True)


def read_json(filename: str) -> Any:
    with open(filename) as file:
        return json.load(file)


def write_csv(filename: str, rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> str:
    """
    Writes rows to a csv file with a fixed column order and float format

    :param filename: The csv filename
    :param rows: List of rows
    :param columns: The column order
    :return: The filename
    """
    os.makedirs(os.path.dirname(os.path.abspath(filename)), exist_ok=True)
    pd.DataFrame(list(rows), columns=columns).to_csv(filename, index=False, float_format='%.10g')
    return filename


def read_csv(filename: str) -> pd.DataFrame:
    """
    Reads a results csv

    :param filename: The csv filename
    :return: The data frame
    """
    try:
        data = pd.read_csv(filename)
    except pd.errors.EmptyDataError:
        raise ValueError(f'Results file {filename} is empty')
    if data.empty:
        raise ValueError(f'Results file {filename} has no rows')
    return data


def parse_args(args: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """
    Gets all of the arguments and places in a dictionary

    :param args: The arguments, by default the command line
    :return: Return the parsed arguments
    """
    parser = argparse.ArgumentParser(description='In-context learning on hyperspherical caps experiments')
    parser.add_argument('kind', choices=EXPERIMENT_KINDS + ('plots',), help='The experiment kind')
    parser.add_argument('-c', '--config', help='Config file or preset name (desk or full)', default=None)
    parser.add_argument('-o', '--output', help='Output folder', default=None)
    parser.add_argument('-s', '--seed', help='Run seed, replaces the seeds of the config', type=int, default=None)
    parser.add_argument('-w', '--workers', help='Number of parallel runs', type=int, default=None)
    parser.add_argument('--desk', help='Use the desk scale preset', action='store_true')
    parser.add_argument('--force', help='Rerun completed runs', action='store_true')
    parser.add_argument('csvs', nargs='*', help='Csv files to plot (plots only)')

    parsed = parser.parse_args(args)
    if parsed.config is None:
        parsed.config = 'desk' if parsed.desk else 'full'
    return parsed


def frame_records(data: pd.DataFrame) -> List[Dict[str, Any]]:
    """Rows of a data frame as json serialisable dictionaries"""
    return json.loads(data.to_json(orient='records'))
