"""
Command line of the experiments

Example: python -m evaluation transition --desk -w 4
"""

from __future__ import annotations

from evaluation.named import run_named
from evaluation.phase_diagram import run_phase_diagram
from evaluation.transition import run_transition
from src.extra.config import apply_overrides, get_config
from src.extra.io import parse_args
from src.extra.visualise import emit_plots


def main(args=None):
    args = parse_args(args)
    if args.kind == 'plots':
        if not args.csvs:
            raise ValueError('No csv files to plot')
        emit_plots(args.csvs, args.output or 'figs')
        return

    config = apply_overrides(get_config(args.config, args.kind), args.output, args.seed, args.workers)
    if config.kind != args.kind:
        raise ValueError(f'Config {config.name} is a {config.kind} experiment, not {args.kind}')

    if config.kind == 'transition':
        run_transition(config, args.force)
    elif config.kind == 'phase_diagram':
        run_phase_diagram(config, args.force)
    else:
        run_named(config, args.force)


if __name__ == "__main__":
    main()
