import numpy as np

from hdapprox.models import simulate_logistic
from hdapprox.utils.io_utils import encode_dataset_csv

n, p = 500, 5
beta0 = np.asarray([0.5, -0.25, 0.0, 0.0, 0.0])

model = simulate_logistic(n, p, beta0=beta0, seed=2021)
encode_dataset_csv(model.X, model.y, "logistic-data.csv")
print("wrote %d rows with %d covariates to logistic-data.csv" % (n, p))
