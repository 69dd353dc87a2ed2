import numpy as np

from clockctl.model import ModelConfig, build_grid, system_operator
from clockctl.runner import load_config

# Box (-2, 4) with n = 1024 resolves the unit bump well enough for 1e-6
# comparisons; samples 0.1 apart are whole multiples of dt.
SMALL = {
    "x_min": -2.0,
    "x_max": 4.0,
    "n": 1024,
    "t_start": -0.9,
    "t_max": 2.9,
    "sample_count": 30,
    "random_vectors": 20,
}


def small_model(n=1024, g_integral=np.pi / 4, coupling="sigma_z", hamiltonian="zero", **kwargs):
    return ModelConfig(
        grid=build_grid(-2.0, 4.0, n),
        delta=1.0,
        k0=0.0,
        coupling_width=1.0,
        g_integral=g_integral,
        system_hamiltonian=system_operator(hamiltonian),
        coupling_operator=system_operator(coupling),
        **kwargs,
    )


def small_experiment(scenario, **overrides):
    return load_config(overrides={"scenario": scenario, **SMALL, **overrides})
