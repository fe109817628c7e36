"""Named experiments. Each preset is stored as config text so that
``preset NAME --emit-config`` prints exactly what ``run`` would execute."""
from __future__ import annotations

from .config import ConfigError, ExperimentConfig, parse_config

_PRESETS = {
    # bounded solution: sup U decays like t^{-n/(n(m-1)+2)} from source-type data
    "thm11_bound": """
[experiment]
name = thm11_bound
seed = 0

[model]
k = 1
m = 2.0

[coupler]
kind = sum

[flux]
kind = identity

[drift]
kind = none

[grid]
dims = 2
lo = -2.0
hi = 2.0
cells = 128
bc = zero_flux

[initial]
kind = barenblatt
mass = 1.0
time = 0.005

[solver]
t_start = 0.005
t_end = 0.1
snapshot_interval = 0.0025
clip_negative = false
ledger_every = 500

[check.sup_monotone]
kind = sup_monotone
threshold = sup_monotone_tolerance

[check.k_hat]
kind = k_hat_rate
t0 = 0.01, 0.02, 0.04, 0.08
threshold = k_hat_rate_relative

[check.mass]
kind = mass_conservation
threshold = mass_drift_conservative
""",
    # m = 1 with a rotated flux: coercive with c = 0.5, bounded by C3 = 2
    "thm12_mass_m1": """
[experiment]
name = thm12_mass_m1
seed = 0

[model]
k = 2
m = 1.0

[coupler]
kind = sum

[flux]
kind = rotation
a = 0.5
b = 1.5
c = 0.5
C3 = 2.0

[drift]
kind = none

[grid]
dims = 2
lo = -4.0
hi = 4.0
cells = 128
bc = zero_flux

[initial]
kind = gaussian
center = 0.0, 0.0
width = 0.4
height = 1.0, 0.5

[solver]
t_end = 0.1
snapshot_interval = 0.02
clip_negative = false
ledger_every = 100

[check.mass]
kind = mass_conservation
threshold = mass_drift_conservative

[check.boundary]
kind = boundary_guard
threshold = boundary_mass_fraction
""",
    "thm13_mass_degenerate": """
[experiment]
name = thm13_mass_degenerate
seed = 0

[model]
k = 2
m = 2.0
beta = 1.0

[coupler]
kind = sum

[flux]
kind = identity

[drift]
kind = none

[grid]
dims = 1
lo = -8.0
hi = 8.0
cells = 4096
bc = zero_flux

[initial]
kind = bump
center = 0.0
radius = 1.0
height = 0.3, 0.2

[solver]
t_end = 0.5
snapshot_interval = 0.05
clip_negative = false
ledger_every = 10000

[check.mass]
kind = mass_conservation
threshold = mass_drift_conservative

[check.clipped]
kind = clipped_mass
threshold = clipped_mass_fraction

[check.boundary]
kind = boundary_guard
threshold = boundary_mass_fraction

[check.sup_monotone]
kind = sup_monotone
threshold = sup_monotone_tolerance
""",
    # m = 0.95 lies above the two-dimensional singular threshold 10/11
    "thm14_mass_singular": """
[experiment]
name = thm14_mass_singular
seed = 0

[model]
k = 2
m = 0.95
beta = 1.0

[coupler]
kind = sum

[flux]
kind = identity

[drift]
kind = none

[grid]
dims = 2
lo = -4.0
hi = 4.0
cells = 256
bc = zero_flux

[initial]
kind = bump
center = 0.0, 0.0
radius = 0.5
height = 0.6, 0.4

[solver]
t_end = 0.05
snapshot_interval = 0.01
clip_negative = false
epsilon_reg = 1e-12
ledger_every = 500

[check.mass]
kind = mass_conservation
threshold = mass_drift_singular

[check.boundary]
kind = boundary_guard
threshold = boundary_mass_fraction
""",
    "thm16_continuity": """
[experiment]
name = thm16_continuity
seed = 0

[model]
k = 2
m = 2.0

[coupler]
kind = sum

[flux]
kind = identity

[drift]
kind = none

[grid]
dims = 1
lo = -2.0
hi = 2.0
cells = 1024
bc = zero_flux

[initial]
kind = bump
center = 0.0
radius = 0.5
height = 0.6, 0.4

[solver]
t_end = 0.1
snapshot_interval = 0.0002
clip_negative = false
ledger_every = 5000

[check.oscillation]
kind = oscillation_decay
component = 0
points = 0.84; 0.4; 0.0
R0 = 0.25
levels = 5
epsilon = 0.1
threshold = oscillation_max_ratio

[check.mass]
kind = mass_conservation
threshold = mass_drift_conservative
""",
    "oracle_convergence": """
[experiment]
name = oracle_convergence
seed = 0

[model]
k = 1
m = 2.0

[coupler]
kind = sum

[flux]
kind = identity

[drift]
kind = none

[grid]
dims = 1
lo = -2.0
hi = 2.0
cells = 4096
bc = zero_flux

[initial]
kind = barenblatt
mass = 1.0
time = 0.2

[solver]
t_start = 0.2
t_end = 0.5
cfl_safety = 0.9
clip_negative = false
ledger_every = 100000

[check.oracle]
kind = oracle_convergence
cells = 1024, 2048, 4096
threshold = oracle_order_min
error_threshold = oracle_final_l1_per_mass
""",
    "harnack_fit": """
[experiment]
name = harnack_fit
seed = 0

[model]
k = 1
m = 0.95

[coupler]
kind = sum

[flux]
kind = identity

[drift]
kind = none

[grid]
dims = 2
lo = -4.0
hi = 4.0
cells = 256
bc = zero_flux

[initial]
kind = barenblatt
mass = 1.0
time = 0.05

[solver]
t_start = 0.05
t_end = 0.3
snapshot_interval = 0.01
clip_negative = false
epsilon_reg = 1e-12
ledger_every = 1000

[check.harnack]
kind = harnack
component = 0
points = 0 0; 0.5 0; 0 0.75; 1 1; -0.5 0.5
rho = 0.5
s = 0.2
t = 0.3
cells = 128, 256
threshold = harnack_refinement_relative
""",
}

PRESET_NAMES = tuple(_PRESETS)


def preset_text(name: str) -> str:
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; valid names: {', '.join(PRESET_NAMES)}")
    return _PRESETS[name].lstrip()


def preset(name: str) -> ExperimentConfig:
    return parse_config(preset_text(name))
