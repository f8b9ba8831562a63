"""Report rendering: markdown tables, CSV frames and SVG charts.

Tables are built as pandas frames first; the CSV is the frame verbatim and the
markdown is a formatted view of it. Charts are written with a fixed SVG hash
salt and no timestamp so repeated runs produce identical files.
"""

import logging
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from prettytable import PrettyTable, TableStyle  # noqa: E402

from .diagnostics import BatteryReport, TEST_LABELS, level_key  # noqa: E402
from .evaluation import CLIMATE_CAVEAT, ComparisonRow, ModelKind  # noqa: E402
from .models import MonthlySeries  # noqa: E402

logger = logging.getLogger(__name__)

SVG_SETTINGS = {'svg.hashsalt': 'utilcast', 'svg.fonttype': 'none', 'font.size': 9}


def fmt(value, digits: int = 2) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ''
    if isinstance(value, float):
        if math.isinf(value):
            return 'inf'
        return f'{value:,.{digits}f}'
    return str(value)


def bold(text: str, flag: bool = True) -> str:
    return f'**{text}**' if flag and text else text


def markdown_table(field_names: Sequence[str], rows: Iterable[Sequence]) -> str:
    table = PrettyTable(list(field_names))
    table.set_style(TableStyle.MARKDOWN)
    table.align = 'l'
    for row in rows:
        table.add_row([cell if isinstance(cell, str) else fmt(cell) for cell in row])
    return table.get_string()


def frame_to_markdown(frame: pd.DataFrame, digits: int = 2) -> str:
    rows = [[fmt(value, digits) if isinstance(value, float) else value for value in row]
            for row in frame.itertuples(index=False)]
    return markdown_table([str(column) for column in frame.columns], rows)


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator='\n')
    return path


def write_markdown(path: Union[str, Path], title: str, sections: Sequence[tuple], footnotes=()) -> Path:
    """Write `# title`, then each (heading, body) pair, then footnotes."""
    lines = [f'# {title}', '']
    for heading, body in sections:
        if heading:
            lines += [f'## {heading}', '']
        lines += [body, '']
    for note in footnotes:
        lines += [f'> {note}', '']
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text('\n'.join(lines), encoding='utf-8')
    return path


def summary_frame(series_list: Sequence[MonthlySeries]) -> pd.DataFrame:
    """Observation count and moments per series."""
    return pd.DataFrame([series.summary() for series in series_list])


def diagnostics_frame(report: BatteryReport) -> pd.DataFrame:
    rows = []
    for name, label in TEST_LABELS.items():
        result = report.results.get(name)
        if result is None:
            rows.append({'series': report.series, 'test': label, 'statistic': np.nan,
                         'critical_value_5': np.nan, 'p_value': np.nan, 'conclusion': '',
                         'error': report.errors.get(name, '')})
            continue
        rows.append({
            'series': report.series,
            'test': label,
            'statistic': result.statistic,
            'critical_value_5': result.critical_values.get(level_key(0.05), np.nan),
            'p_value': np.nan if result.p_value is None else result.p_value,
            'conclusion': str(result.conclusion),
            'error': '',
        })
    return pd.DataFrame(rows)


def diagnostics_markdown(frame: pd.DataFrame, alpha: float) -> str:
    level = f'{alpha * 100:g}%'
    rows = []
    for row in frame.itertuples(index=False):
        conclusion = row.conclusion or f'error: {row.error}'
        rows.append([row.series, row.test, level, fmt(row.statistic, 4), fmt(row.p_value, 5), conclusion])
    return markdown_table(['Series', 'Test', 'Critical value', 'Statistic', 'P-value', 'Conclusion'], rows)


def correlogram_frame(report: BatteryReport) -> pd.DataFrame:
    frames = []
    for name, correlogram in (('acf', report.acf), ('pacf', report.pacf)):
        if correlogram is None:
            continue
        frames.append(pd.DataFrame({
            'series': report.series,
            'function': name,
            'lag': correlogram.lags,
            'coefficient': correlogram.coefficients,
            'band': correlogram.confidence_band,
        }))
    if not frames:
        return pd.DataFrame(columns=['series', 'function', 'lag', 'coefficient', 'band'])
    return pd.concat(frames, ignore_index=True)


def comparison_frame(rows: Sequence[ComparisonRow], series: str = '') -> pd.DataFrame:
    return pd.DataFrame([{
        'series': series,
        'model': row.model_kind.value,
        'feature_config': row.feature_config.value,
        'mape_percent': row.mape_percent,
        'rmse': row.rmse,
        'best_mape': row.best_mape,
        'best_rmse': row.best_rmse,
    } for row in rows])


def comparison_markdown(rows: Sequence[ComparisonRow], with_arm: bool = True) -> str:
    """Best cells are bold."""
    field_names = ['Model', 'Features', 'MAPE (%)', 'RMSE'] if with_arm else ['Model', 'MAPE (%)', 'RMSE']
    table_rows = []
    for row in rows:
        cells = [ModelKind(row.model_kind).label]
        if with_arm:
            cells.append(row.feature_config.value)
        cells += [bold(fmt(row.mape_percent), row.best_mape), bold(fmt(row.rmse), row.best_rmse)]
        table_rows.append(cells)
    return markdown_table(field_names, table_rows)


def caveat_footnotes(with_climate: bool) -> tuple:
    return (CLIMATE_CAVEAT,) if with_climate else ()


def _save_svg(figure, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path, format='svg', metadata={'Date': None})
    plt.close(figure)
    return path


def _plot_forecast(axes, months_train, train, months_test, actuals, predictions, title: str):
    x_train = [month.to_timestamp() for month in months_train]
    x_test = [month.to_timestamp() for month in months_test]
    (line,) = axes.plot(x_train, train, color='tab:blue', label='train')
    line.set_gid('train')
    (line,) = axes.plot(x_test, actuals, color='tab:green', label='test')
    line.set_gid('test')
    (line,) = axes.plot(x_test, predictions, color='tab:red', linestyle='--', label='predicted')
    line.set_gid('predicted')
    axes.set_title(title)
    axes.legend(loc='upper left')


def forecast_chart(path, months_train, train, months_test, actuals, predictions, title: str = '') -> Path:
    """Train, test and predicted traces for one forecast."""
    with plt.rc_context(SVG_SETTINGS):
        figure, axes = plt.subplots(figsize=(8, 4))
        _plot_forecast(axes, months_train, train, months_test, actuals, predictions, title)
        axes.set_ylabel('consumption')
        figure.autofmt_xdate()
        return _save_svg(figure, path)


def forecast_panel_chart(path, series: MonthlySeries, panels: Sequence[tuple], horizon: int) -> Path:
    """Up to four forecasts of one series side by side; panels are (title, predictions)."""
    months = series.months
    with plt.rc_context(SVG_SETTINGS):
        figure, grid = plt.subplots(2, 2, figsize=(11, 7), sharey=True)
        for axes, (title, predictions) in zip(grid.ravel(), panels):
            _plot_forecast(axes, months[:-horizon], series.values[:-horizon], months[-horizon:],
                           series.values[-horizon:], predictions, title)
        for axes in grid.ravel()[len(panels):]:
            axes.set_visible(False)
        figure.autofmt_xdate()
        figure.tight_layout()
        return _save_svg(figure, path)


def overview_chart(path, series_list: Sequence[MonthlySeries]) -> Path:
    """One stacked panel per consumption series."""
    with plt.rc_context(SVG_SETTINGS):
        figure, grid = plt.subplots(len(series_list), 1, figsize=(8, 3 * len(series_list)), squeeze=False)
        for axes, series in zip(grid[:, 0], series_list):
            x = [month.to_timestamp() for month in series.months]
            (line,) = axes.plot(x, series.values, color='tab:blue')
            line.set_gid(series.name)
            axes.set_title(series.name)
            axes.set_ylabel(series.unit)
        figure.autofmt_xdate()
        figure.tight_layout()
        return _save_svg(figure, path)


def ga_frame(rows: Sequence[dict]) -> pd.DataFrame:
    """Best individual per optimisation run; wall time is kept out of the CSV."""
    return pd.DataFrame(rows).drop(columns=['time_seconds'], errors='ignore')


def _gene_cell(value, gene: str) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return fmt(value, 5 if gene == 'epsilon' else 2)
    return str(value)


def ga_markdown(rows: Sequence[dict], genes: Sequence[str]) -> str:
    field_names = ['Series', 'Features', 'Population', 'Generations', *genes, 'Time (s)', 'Fitness']
    table_rows = []
    for row in rows:
        fitness = f"error: {row['error']}" if row.get('error') else fmt(row.get('fitness'))
        table_rows.append([
            row['series'], row['feature_config'], str(row['population']), str(row['generations']),
            *[_gene_cell(row.get(gene), gene) for gene in genes],
            fmt(row.get('time_seconds')), fitness,
        ])
    return markdown_table(field_names, table_rows)


def write_report(directory: Union[str, Path], stem: str, frame: pd.DataFrame, title: str,
                 markdown: Optional[str] = None, footnotes=()) -> tuple:
    """Write `<stem>.csv` and `<stem>.md` side by side."""
    directory = Path(directory)
    csv_path = write_csv(frame, directory / f'{stem}.csv')
    md_path = write_markdown(directory / f'{stem}.md', title,
                             [('', markdown if markdown is not None else frame_to_markdown(frame))], footnotes)
    logger.info('Wrote %s and %s', csv_path, md_path)
    return csv_path, md_path
