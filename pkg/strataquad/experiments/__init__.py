"""Configs, schedules, fits, plots and the experiment pipeline."""
