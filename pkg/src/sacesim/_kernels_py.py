"""Pure NumPy batched step, used when the compiled kernel is unavailable.

This is literally the composition of the module operators applied to a
``(B, N)`` coefficient array, so each row matches the single-field step.
"""

from .operators import nemytskii_array, taming_factor_array

BACKEND = "python"


def step_batch(V, noise, disc):
    """One scheme step for every row of ``V``; returns a new array."""
    out = disc.decay * V
    if disc.drift:
        drift = disc.phi * nemytskii_array(V, disc.params, disc.m_points)
        if disc.tamed:
            G = taming_factor_array(V, disc.tau, disc.beta, disc.m_points)
            drift = G[..., None] * drift
        out = out + drift
    return out + noise
