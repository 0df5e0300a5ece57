from scipy.constants import c as C0
from scipy.constants import epsilon_0 as EPS0
from scipy.constants import mu_0 as MU0

ETA0 = float((MU0 / EPS0) ** 0.5)

__all__ = ["C0", "EPS0", "MU0", "ETA0"]
