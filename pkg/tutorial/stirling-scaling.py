import numpy as np

import hdapprox
from hdapprox.models import StirlingModel, stirling_ratio

ns = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000]
cells = []
for n in ns:
    model = StirlingModel(n)
    mode = hdapprox.find_mode(model)
    log_ratio = hdapprox.laplace_log_normalizer(mode) - model.exact_log_normalizer()
    cells.append((n, 1, abs(np.expm1(log_ratio))))
    print("n=%5d  Laplace/exact=%.8f  Stirling ratio=%.8f" % (n, np.exp(log_ratio), stirling_ratio(n)))

fit = hdapprox.fit_scaling(cells)
print("relative error ~ n^%.3f (se %.3f)" % (fit.b, fit.se_b))
