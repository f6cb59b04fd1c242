# %% [markdown]
# # The intermittent RSSI channel
#
# A target emits on a random subset of time steps.  Each tracker reads the
# received power in milliwatts: path loss and log-normal shadowing when the
# target transmits, thermal noise always.  This script walks through the
# measurement model, its mixture likelihood, and the straight-line approach
# traces.

# %%
import numpy as np

from rftrack import ChannelParams, expected_measurement, noise_covariance, sample_measurement
from rftrack.channel import measurement_log_likelihood
from rftrack.sim import fig4_scenario, fig4_traces

params = ChannelParams()  # 30 dBm transmit power, q = 0.2, unit shadowing
print(params)

# %% [markdown]
# ## Mean and covariance
#
# The shared transmit state correlates the trackers' readings, so the noise
# covariance has off-diagonal terms whenever `0 < q < 1`.

# %%
d = np.array([100.0, 150.0])
print("mean power [mW]:", expected_measurement(params, d))
print("noise covariance:\n", noise_covariance(params, d))

rng = np.random.default_rng(0)
draws = np.array([sample_measurement(params, d, rng).z for _ in range(20_000)])
print("sample mean:", draws.mean(axis=0))
print("sample covariance:\n", np.cov(draws.T))

# %% [markdown]
# ## Likelihood of a reading
#
# The likelihood mixes a transmit branch (fade convolved with thermal noise)
# and a silence branch (thermal noise alone).  A reading at the thermal floor
# is far better explained by silence.

# %%
for label, z in [("strong", [0.08, 0.03]), ("at the floor", [params.p_th_mean] * 2)]:
    log_l, log_a, log_b = measurement_log_likelihood(params, np.array(z), d)
    print(f"{label:>12}: log alpha {float(log_a):9.2f}   log beta {float(log_b):12.2f}")

# %% [markdown]
# ## Approach traces
#
# Four trackers close in on a stationary emitter from 300 m at 5 m/s with
# `q = 0.5`.  Roughly half of the sampled readings sit on the thermal floor.

# %%
cfg = fig4_scenario()
tr = fig4_traces(cfg)
p = cfg.channel
floor = np.abs(tr["sampled"] - p.p_th_mean) <= 5 * p.sigma_th
print("fraction of floor-only readings:", floor.mean())
for k in (0, 250, 500, 750, 999):
    print(f"t = {tr['time'][k]:5.2f} s  d = {tr['distance'][k, 0]:6.1f} m  "
          f"noiseless {tr['noiseless'][k, 0]:.3e}  sampled {tr['sampled'][k, 0]:.3e}")
