import numpy as np
from scipy.special import erfcx, rgamma


# E_{α,β}(z) = Σ_j z^j / Γ(αj + β), summed with reciprocal gammas so large
# orders underflow to zero instead of overflowing. The plain series loses
# digits to cancellation for large negative z; desk use stays at |z| ≲ 2.
def mittag_leffler(alpha: float, z: float, beta: float = 1.0, terms: int = 200) -> float:
    j = np.arange(terms, dtype=np.float64)
    powers = np.power(float(z), j)
    return float(np.sum(powers * rgamma(alpha * j + beta)))


# Closed form E_{1/2}(z) = exp(z²)·erfc(−z); erfcx keeps it finite for large |z|.
def mittag_leffler_half(z: float) -> float:
    return float(erfcx(-z))
