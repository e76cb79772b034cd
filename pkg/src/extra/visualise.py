"""Plots of the results csv files: loss against the test angle or training angle, NSR, phase heatmaps, context
length, radius, interpolation path and loss trace curves"""

from __future__ import annotations

import os
from typing import TYPE_CHECKING

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt
import numpy as np
import seaborn as sns

from src.extra.io import read_csv, save_plot
from src.metrics.phase import NSR_THRESHOLD

if TYPE_CHECKING:
    from typing import Iterable, List

    import pandas as pd

matplotlib.rcParams['font.family'] = 'monospace'
matplotlib.rcParams['svg.fonttype'] = 'none'

MODEL_COLUMNS = ['family', 'dim', 'layers', 'noise_var', 'N', 'variant']
PHASE_ORDER = ('IWL', 'IN_DIST_ICL', 'OOD_ICL')


def _name(filename: str) -> str:
    return os.path.splitext(os.path.basename(filename))[0]


def _model_label(values) -> str:
    return '_'.join(f'{column}{value}' for column, value in zip(MODEL_COLUMNS, values))


def plot_loss_against_delta(records: pd.DataFrame, name: str, folder: str) -> List[str]:
    """
    Transformer loss against the test angle, one line per training angle and one figure per model

    :param records: The evaluation records
    :param name: The plot name
    :param folder: The save folder
    :return: The saved filenames
    """
    filenames = []
    columns = [column for column in MODEL_COLUMNS if column in records.columns]
    for key, group in records.groupby(columns, sort=True):
        key = key if isinstance(key, tuple) else (key,)
        figure, ax = plt.subplots(figsize=(6, 4))
        transformer = group[group['predictor'] == 'transformer']
        sns.lineplot(data=transformer, x='test_delta', y='raw_loss', hue='train_phi', palette='viridis',
                     errorbar=None, marker='o', ax=ax)
        for predictor, estimator in group[group['predictor'] != 'transformer'].groupby('predictor', sort=True):
            mean = estimator.groupby('test_delta', sort=True)['raw_loss'].mean()
            ax.plot(mean.index, mean.values, linestyle='--', color='black', alpha=0.6, label=predictor)
        ax.set_xlabel('Test angle (deg)')
        ax.set_ylabel('Test loss')
        ax.set_yscale('log')
        ax.legend(title='Train angle', fontsize='small')
        filenames += save_plot(f'{name}_delta_{_model_label(key)}', folder)
        plt.close(figure)
    return filenames


def plot_loss_against_phi(records: pd.DataFrame, name: str, folder: str) -> List[str]:
    """
    Normalised transformer loss at the largest test angle against the training angle, one line per depth and dimension

    :param records: The evaluation records
    :param name: The plot name
    :param folder: The save folder
    :return: The saved filenames
    """
    transformer = records[(records['predictor'] == 'transformer') &
                          (records['test_delta'] == records['test_delta'].max())].copy()
    transformer['model'] = 'L=' + transformer['layers'].astype(str) + ', d=' + transformer['dim'].astype(str)
    figure, ax = plt.subplots(figsize=(6, 4))
    sns.lineplot(data=transformer, x='train_phi', y='normalized_loss', hue='model', errorbar=None, marker='o', ax=ax)
    ax.set_xlabel('Train angle (deg)')
    ax.set_ylabel(f"Normalised loss at {records['test_delta'].max():g} deg")
    ax.set_yscale('log')
    filenames = save_plot(f'{name}_phi', folder)
    plt.close(figure)
    return filenames


def plot_nsr(nsr_rows: pd.DataFrame, name: str, folder: str) -> List[str]:
    """
    NSR against the training angle of the seed mean with the transition threshold

    :param nsr_rows: The nsr table
    :param name: The plot name
    :param folder: The save folder
    :return: The saved filenames
    """
    mean = nsr_rows[nsr_rows['seed'].astype(str) == 'mean'].copy()
    columns = [column for column in MODEL_COLUMNS if column in mean.columns]
    mean['model'] = mean[columns].astype(str).agg(', '.join, axis=1)
    figure, ax = plt.subplots(figsize=(6, 4))
    sns.lineplot(data=mean, x='train_phi', y='nsr', hue='model', errorbar=None, marker='o', ax=ax)
    ax.axhline(NSR_THRESHOLD, color='grey', linestyle=':')
    ax.set_xlabel('Train angle (deg)')
    ax.set_ylabel('NSR')
    filenames = save_plot(name, folder)
    plt.close(figure)
    return filenames


def plot_heatmap(heatmap: pd.DataFrame, name: str, folder: str) -> List[str]:
    """
    Heatmap with the number of tasks as rows and the training angle as columns, phases are drawn as categories

    :param heatmap: The heatmap table, the first column is N
    :param name: The plot name
    :param folder: The save folder
    :return: The saved filenames
    """
    table = heatmap.set_index('N')
    x_labels = [f'{float(phi):g}' for phi in table.columns]
    y_labels = [f'{num_tasks:g}' if isinstance(num_tasks, float) else str(num_tasks) for num_tasks in table.index]
    figure, ax = plt.subplots(figsize=(7, 5))
    if table.dtypes.apply(lambda dtype: dtype == object).any():
        codes = table.apply(lambda column: column.map({phase: index for index, phase in enumerate(PHASE_ORDER)}))
        sns.heatmap(codes.astype(float), cmap=sns.color_palette('viridis', len(PHASE_ORDER)), vmin=-0.5,
                    vmax=len(PHASE_ORDER) - 0.5, cbar_kws={'ticks': list(range(len(PHASE_ORDER)))},
                    xticklabels=x_labels, yticklabels=y_labels, ax=ax)
        ax.collections[0].colorbar.set_ticklabels(PHASE_ORDER)
    else:
        sns.heatmap(np.log10(table.astype(float).clip(lower=1e-12)), cmap='viridis', xticklabels=x_labels,
                    yticklabels=y_labels, cbar_kws={'label': 'log10 normalised loss'}, ax=ax)
    ax.tick_params(axis='y', labelrotation=0)
    ax.set_xlabel('Train angle (deg)')
    ax.set_ylabel('Number of tasks')
    filenames = save_plot(name, folder)
    plt.close(figure)
    return filenames


def plot_context(curve: pd.DataFrame, name: str, folder: str) -> List[str]:
    """
    Transformer loss (solid) and least squares loss (dashed) against the context length

    :param curve: The context length curves
    :param name: The plot name
    :param folder: The save folder
    :return: The saved filenames
    """
    figure, ax = plt.subplots(figsize=(6, 4))
    baseline = [column for column in curve.columns if column.endswith('_loss') and column != 'model_loss'][0]
    for index, (phi, group) in enumerate(curve.groupby('train_phi', sort=True)):
        mean = group.groupby('k', sort=True)[['model_loss', baseline]].mean()
        color = plt.cm.viridis(index / max(curve['train_phi'].nunique() - 1, 1))
        ax.plot(mean.index, mean['model_loss'], color=color, label=f'{phi:g}')
        ax.plot(mean.index, mean[baseline], color=color, linestyle='--')
    ax.set_xlabel('Context length')
    ax.set_ylabel('Test loss')
    ax.set_yscale('log')
    ax.legend(title='Train angle', fontsize='small')
    filenames = save_plot(name, folder)
    plt.close(figure)
    return filenames


def plot_radius(records: pd.DataFrame, name: str, folder: str) -> List[str]:
    figure, ax = plt.subplots(figsize=(6, 4))
    sns.lineplot(data=records, x='radius', y='raw_loss', hue='train_phi', palette='viridis', errorbar=None,
                 marker='o', ax=ax)
    ax.set_xlabel('Task radius')
    ax.set_ylabel('Test loss')
    ax.set_yscale('log')
    filenames = save_plot(name, folder)
    plt.close(figure)
    return filenames


def plot_path(path: pd.DataFrame, name: str, folder: str) -> List[str]:
    """
    Transformer and dMMSE loss along the great circle between two pool tasks

    :param path: The path losses
    :param name: The plot name
    :param folder: The save folder
    :return: The saved filenames
    """
    figure, ax = plt.subplots(figsize=(6, 4))
    for index, (key, group) in enumerate(path.groupby(['train_phi', 'N'], sort=True)):
        color = plt.cm.viridis(index / max(path.groupby(['train_phi', 'N']).ngroups - 1, 1))
        ax.plot(group['alpha'], group['model_loss'], color=color, label=f'phi {key[0]:g}, N {key[1]}')
        ax.plot(group['alpha'], group['dmmse_loss'], color=color, linestyle='--')
    ax.set_xlabel('Interpolation fraction')
    ax.set_ylabel('Test loss')
    ax.set_yscale('log')
    ax.legend(fontsize='small')
    filenames = save_plot(name, folder)
    plt.close(figure)
    return filenames


def plot_traces(traces: pd.DataFrame, name: str, folder: str) -> List[str]:
    figure, ax = plt.subplots(figsize=(6, 4))
    for column in traces.columns:
        if column != 'step':
            ax.plot(traces['step'], traces[column], label=column)
    ax.set_xlabel('Training step')
    ax.set_ylabel('Smoothed training loss')
    ax.set_yscale('log')
    ax.legend(fontsize='small')
    filenames = save_plot(name, folder)
    plt.close(figure)
    return filenames


def emit_plots(filenames: Iterable[str], folder: str = 'figs') -> List[str]:
    """
    Plots every csv file as svg, the plot kind follows from the csv columns

    :param filenames: The csv filenames
    :param folder: The save folder
    :return: The saved svg filenames
    """
    saved = []
    for filename in filenames:
        data, name = read_csv(filename), _name(filename)
        columns = set(data.columns)
        if 'alpha' in columns:
            saved += plot_path(data, name, folder)
        elif 'k' in columns:
            saved += plot_context(data, name, folder)
        elif 'nsr' in columns:
            saved += plot_nsr(data, name, folder)
        elif 'step' in columns:
            saved += plot_traces(data, name, folder)
        elif data.columns[0] == 'N':
            saved += plot_heatmap(data, name, folder)
        elif 'radius' in columns and data['radius'].nunique() > 1:
            saved += plot_radius(data, name, folder)
        elif 'test_delta' in columns:
            saved += plot_loss_against_delta(data, name, folder)
            if data['train_phi'].nunique() > 1:
                saved += plot_loss_against_phi(data, name, folder)
        else:
            raise ValueError(f'Unknown results file {filename} with columns {", ".join(data.columns)}')
    return saved

