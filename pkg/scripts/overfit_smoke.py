"""Train a small model on two clean sinusoids and print the per-epoch log."""

from twsforecast.config import RunConfig
from twsforecast.evaluation import prepare
from twsforecast.forecaster import Forecaster
from twsforecast.synthetic import sinusoids
from twsforecast.training import batch_loss, train

cfg = RunConfig(d_model=16, heads=2, blocks=1, dropout=0.0, lr=3e-3, horizon=96,
                epochs=50, patience=50, max_steps=200)
data = prepare(sinusoids(1000), cfg)
model = Forecaster(cfg, data.whitener)
samples = data.samples(cfg, "train")
_, report = train(model, samples, data.samples(cfg, "val"))
print(report.to_tsv(), end="")
print(f"train MSE after {report.steps} steps: {batch_loss(model, samples):.3e}")
