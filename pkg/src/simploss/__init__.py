"""Low-loss simplexes in neural network parameter space.

Subpackages cover exact simplex geometry, a micro MLP engine with
manual backpropagation, SGD training, volume-regularized growth of
low-loss simplexes and complexes, in-simplex ensembling, calibration
metrics, toy dataset generators, loss-plane export, and a CLI driver.
"""

__version__ = "0.1.0"
