import argparse

# Import registration hooks from controller modules
from app.cli.controllers import analyze, evaluate, experiment, forecast, train

# Create the top-level parser
parser = argparse.ArgumentParser(
    prog="spectral-moe",
    description="Frequency-specialized mixture of linear experts for time-series forecasting",
)
subparsers = parser.add_subparsers(dest="command", required=True)

# Register all the specific subcommands
train.register(subparsers)
forecast.register(subparsers)
evaluate.register(subparsers)
analyze.register(subparsers)
experiment.register(subparsers)
