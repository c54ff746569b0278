"""QoT estimation for WDM links: GN-model labels, dense-network regressors, evaluation."""

__version__ = "0.1.0"
