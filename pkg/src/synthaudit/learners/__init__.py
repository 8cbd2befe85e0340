from synthaudit.learners.forest import ForestParams, RandomForest, fit_forest
from synthaudit.learners.linear import LinearAttackModel, fit_linear, posterior_density

__all__ = [
    "ForestParams",
    "RandomForest",
    "fit_forest",
    "LinearAttackModel",
    "fit_linear",
    "posterior_density",
]
