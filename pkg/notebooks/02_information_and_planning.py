# %% [markdown]
# # Fisher information and heading selection
#
# The posterior information about the target state is carried forward by a
# recursion with a motion term and a measurement term.  The measurement term
# has no closed form under this channel, so it is estimated by Monte Carlo
# over measurement noise with finite-difference Hessians.

# %%
import numpy as np

from rftrack import ChannelParams, HessianMCConfig, PlannerConfig, build_motion_model
from rftrack.fisher import d_criterion, fim_predict, fim_update, measurement_info_d4, process_info
from rftrack.planner import bio_inspired_plan, steepest_descent_plan

params = ChannelParams(q=0.2)
model = build_motion_model(dt=1.0)
pi = process_info(model)

# %% [markdown]
# ## Measurement information for one tracker
#
# For a detected transmission the log of the reading is Gaussian in the log
# distance, which gives radial information `4 / (sigma_sh^2 d^2)`.  Silent steps
# carry none, so the expected value is `(1 - q)` times that.

# %%
rng = np.random.default_rng(0)
for d in (5.0, 20.0, 100.0):
    d4 = measurement_info_d4(params, [[d, 0.0]], np.zeros(4), HessianMCConfig(n_samples=2000), rng)
    print(f"d = {d:5.1f} m   radial {d4[0, 0]:.3e}   expected {(1 - params.q) * 4 / d**2:.3e}")

# %% [markdown]
# ## The recursion over a few steps
#
# Prediction loses information through process noise and the measurement term
# adds it back.  The D-criterion is `10 log10 det J`.

# %%
geom = np.array([[0.0, 0.0], [20.0, 0.0]])
x = np.array([60.0, 40.0, 0.0, 0.0])
J = np.linalg.inv(np.diag([100.0, 100.0, 1.0, 1.0]))
for k in range(5):
    J = fim_update(fim_predict(J, pi), measurement_info_d4(params, geom, x, HessianMCConfig(), rng))
    print(f"step {k + 1}: D-criterion {d_criterion(J):7.2f} dB")

# %% [markdown]
# ## One planning step
#
# The exhaustive planner scores all 16 x 16 joint headings by the
# log-determinant of next step's information.  The bio-inspired rule simply
# points both trackers at the estimate.

# %%
cfg = PlannerConfig(planner_kind="steepest_descent")
plan = steepest_descent_plan(J, x, geom, params, model, cfg, HessianMCConfig(n_samples=50), rng)
bio = bio_inspired_plan(x, geom, cfg.v_max * model.dt)
print("steepest headings [deg]:", np.degrees(plan.headings).round(1), "score", round(plan.score, 3))
print("bio headings      [deg]:", np.degrees(bio.headings).round(1))
