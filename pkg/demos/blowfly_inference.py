"""Small-scale likelihood-free inference on the blowfly simulator.

Simulates (parameter, series) pairs under the prior, fits one convolutional
copula regression per parameter with the log-parameter as response, and
reads approximate marginal posteriors off the predictive distributions.
Desk-scale settings keep this to a few minutes; scale n_total and the
network for production runs.
"""

import numpy as np

from copreg.lfi import (
    LfiFitConfig,
    blowfly_model,
    composite_scores,
    eval_simulation,
    generate_training,
    lfi_fit,
    marginal_calibration_distance,
)
from copreg.predict import predictive_expectation

SEED = 5
model = blowfly_model(series_length=150)
print(f"simulator: {model.name}, T={model.series_length}, "
      f"parameters: {model.prior.names}")

train_b, test_b = generate_training(model, 700, split=0.8, seed=SEED)
print(f"simulated {train_b.n} training and {test_b.n} test series")

cfg = LfiFitConfig(kernel_sizes=(15, 7), filter_counts=(12, 5),
                   dense_width=40, epochs=30, variant="horseshoe",
                   burnin=300, draws=300)
models = []
for j, name in enumerate(model.prior.names):
    pm = lfi_fit(train_b, j, config=cfg, seed=SEED * 7919 + j)
    models.append(pm)
    print(f"  fitted regressor for {name}")

table = eval_simulation(models, test_b)
prior_ref = np.log(model.prior.sample_matrix(np.random.default_rng(99),
                                             20_000))
print(f"{'parameter':22s} {'mse':>7s} {'se':>7s} {'cover':>6s} {'margcal':>8s}")
for j, name in enumerate(model.prior.names):
    row = table[name]
    dist = marginal_calibration_distance(models[j], test_b, prior_ref[:, j])
    print(f"{name:22s} {row['mse']:7.3f} {row['se']:7.3f} "
          f"{row['coverage']:6.2f} {dist:8.3f}")

# composite out-of-sample scores at the posterior-mean parameters for one
# held-out series, treated as the observed data
observed = test_b.series[0].astype(float)
rho_hat = np.array([predictive_expectation(models[j], observed[None, :],
                                           func=np.exp)[0]
                    for j in range(len(models))])
rho_hat[4] = max(1.0, round(rho_hat[4]))  # the lag is an integer
cls, ces = composite_scores(rho_hat, observed, model, reps=400,
                            rng=np.random.default_rng(123))
print(f"composite log score {cls:.2f}, negated energy score {ces:.2f}")
