"""
Strouhal spectrum of a lift signal
==================================

Vortex shedding shows up in the lift coefficient as a narrow peak.  Here a
synthetic lift history (a shedding tone, its first harmonic and noise) is
passed through the Welch estimator used by ``dgles psd``.
"""

import numpy as np

from dgles import PsdConfig, welch_psd
from dgles.spectral import dominant_peaks

rng = np.random.default_rng(7)
dt, chord, u_inf = 2e-3, 1.0, 1.0
t = np.arange(200_000) * dt
st0 = 0.21
cl = 0.4 * np.sin(2 * np.pi * st0 * t) + 0.05 * np.sin(4 * np.pi * st0 * t + 0.3) + 0.02 * rng.standard_normal(t.size)

# %%
# Segments of 62 500 samples with 50 % overlap and a Hamming window.
cfg = PsdConfig(segment_length=62_500, overlap=0.5, window="Hamming", dt=dt, chord=chord, u_inf=u_inf)
res = welch_psd(cl, cfg)
print(f"{res.segments} segments, resolution dSt = {res.df * chord / u_inf:.2e}")

# %%
# The dominant peaks, ranked by power.
for st, p in dominant_peaks(res, 3):
    print(f"  St = {st:.4f}  PSD = {p:.3e}")

# %%
# Parseval: the integral of the one-sided PSD recovers the signal variance.
print(f"integrated PSD / variance = {np.sum(res.psd) * res.df / np.var(cl):.4f}")
