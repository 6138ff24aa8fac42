import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cobotsafe.config import build_setup, load_config
from cobotsafe.robot import RobotModel
from cobotsafe.trajectory import JointTrajectory

settings.register_profile("ci", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture(scope="session")
def model():
    return RobotModel.default()


@pytest.fixture(scope="session")
def setup():
    return build_setup(load_config())


def constant_velocity(model, qd, duration=2.0, dt=0.005, q0=None):
    """Sampled trajectory moving every joint at constant velocity ``qd``."""
    n = model.n_joints
    t = np.arange(int(round(duration / dt)) + 1) * dt
    q0 = np.zeros(n) if q0 is None else np.asarray(q0, dtype=float)
    qd = np.broadcast_to(np.asarray(qd, dtype=float), (n,))
    q = q0 + np.outer(t, qd)
    return JointTrajectory(t=t, q=q, qd=np.tile(qd, (t.size, 1)), qdd=np.zeros((t.size, n)),
                           vel_limit=model.vel_limit, accel_min=model.accel_min, accel_max=model.accel_max, dt=dt)
