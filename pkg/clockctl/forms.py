import numpy as np
from django import forms
from django.core.exceptions import ValidationError

from .model import COUPLING_SHAPES, ModelConfig, build_grid, system_operator, validate_no_wrap
from .scenarios import SCENARIO_NAMES
from .statelib import PureState

# Every key the config file may contain, with its default value.
DEFAULTS = {
    "scenario": "example1-dephasing",
    "x_min": -4.0,
    "x_max": 12.0,
    "n": 4096,
    "delta": 1.0,
    "k0": 0.0,
    "coupling_width": 1.0,
    "coupling_shape": "bump",
    "g_integral": np.pi / 4,
    "system_hamiltonian": "zero",
    "coupling_operator": "sigma_z",
    "initial_state": [2**-0.5, 2**-0.5],
    "hbar": 1.0,
    "t_start": -2.0,
    "t_max": 4.0,
    "dt": 1e-3,
    "sample_count": 200,
    "seed": 12345,
    "random_vectors": 100,
    "tolerance": 1e-6,
    "mt_tolerance": 1e-9,
    "support_epsilon": 1e-8,
    "full_deviation_threshold": 1e-3,
    "sweep_integrals": [0.1, 0.5, 1.0, np.pi / 2, np.pi],
    "truncation_divisors": [8, 4, 2, 1],
    "output_dir": "",
    "emit_plot": False,
}

# Model validation codes and the key they are reported under.
FIELD_FOR_CODE = {
    "wrap": "t_max",
    "packet": "delta",
    "coupling": "coupling_width",
    "hbar": "hbar",
    "dimension_mismatch": "initial_state",
}


def _complex(entry):
    """A JSON number or an [re, im] pair."""
    if isinstance(entry, bool):
        raise ValidationError("Booleans are not amplitudes.", code="invalid")
    if isinstance(entry, (int, float)):
        return complex(entry)
    if isinstance(entry, (list, tuple)) and len(entry) == 2:
        return complex(_real(entry[0]), _real(entry[1]))
    raise ValidationError(
        "%(entry)r is neither a number nor an [re, im] pair.",
        code="invalid",
        params={"entry": entry},
    )


def _real(entry):
    if isinstance(entry, bool) or not isinstance(entry, (int, float)):
        raise ValidationError("%(entry)r is not a number.", code="invalid", params={"entry": entry})
    return float(entry)


def _sequence(value):
    if not isinstance(value, (list, tuple)) or not value:
        raise ValidationError("Expected a non-empty list.", code="invalid")
    return value


class ComplexVectorField(forms.Field):
    """List of amplitudes, each a number or an [re, im] pair"""

    def to_python(self, value):
        if value in self.empty_values:
            return None
        return tuple(_complex(entry) for entry in _sequence(value))


class OperatorField(forms.Field):
    """Named qubit operator or a Hermitian matrix given as nested lists"""

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, str):
            return system_operator(value)
        rows = [[_complex(entry) for entry in _sequence(row)] for row in _sequence(value)]
        if len({len(row) for row in rows}) != 1:
            raise ValidationError("Operator rows differ in length.", code="shape")
        return system_operator(np.array(rows, dtype=complex))


class FloatListField(forms.Field):
    def to_python(self, value):
        if value in self.empty_values:
            return None
        return tuple(_real(entry) for entry in _sequence(value))


class IntegerListField(forms.Field):
    def to_python(self, value):
        if value in self.empty_values:
            return None
        entries = _sequence(value)
        if any(isinstance(entry, bool) or not isinstance(entry, int) or entry < 1 for entry in entries):
            raise ValidationError("Expected positive integers.", code="invalid")
        return tuple(entries)


class ExperimentConfigForm(forms.Form):
    """Schema of the experiment config file (one field per key)"""

    scenario = forms.ChoiceField(choices=[(name, name) for name in SCENARIO_NAMES])

    # Grid and clock packet
    x_min = forms.FloatField()
    x_max = forms.FloatField()
    n = forms.IntegerField(min_value=2, max_value=2**20)
    delta = forms.FloatField()
    k0 = forms.FloatField()

    # Coupling and system
    coupling_width = forms.FloatField()
    coupling_shape = forms.ChoiceField(choices=[(shape, shape) for shape in COUPLING_SHAPES])
    g_integral = forms.FloatField(help_text="∫g in units of ħ")
    system_hamiltonian = OperatorField()
    coupling_operator = OperatorField()
    initial_state = ComplexVectorField()
    hbar = forms.FloatField()

    # Time sampling
    t_start = forms.FloatField(max_value=0.0, help_text="Start of the runs before t = 0")
    t_max = forms.FloatField(min_value=0.0)
    dt = forms.FloatField(min_value=0.0)
    sample_count = forms.IntegerField(min_value=2)
    seed = forms.IntegerField(min_value=0)

    # Checks
    random_vectors = forms.IntegerField(min_value=0)
    tolerance = forms.FloatField(min_value=0.0)
    mt_tolerance = forms.FloatField(min_value=0.0)
    support_epsilon = forms.FloatField(min_value=0.0)
    full_deviation_threshold = forms.FloatField(min_value=0.0, max_value=1.0)
    sweep_integrals = FloatListField(help_text="∫g values in units of ħ")
    truncation_divisors = IntegerListField(help_text="Keep n/divisor momentum modes")

    # Outputs
    output_dir = forms.CharField(required=False)
    emit_plot = forms.BooleanField(required=False)

    def clean_dt(self):
        dt = self.cleaned_data["dt"]
        if dt <= 0:
            raise ValidationError("Time step must be positive.", code="step")
        return dt

    def clean_support_epsilon(self):
        epsilon = self.cleaned_data["support_epsilon"]
        if epsilon <= 0:
            raise ValidationError("Support threshold must be positive.", code="threshold")
        return epsilon

    def clean(self):
        cleaned_data = super().clean()
        if self.errors:
            return cleaned_data

        try:
            hbar = cleaned_data["hbar"]
            model = ModelConfig(
                grid=build_grid(cleaned_data["x_min"], cleaned_data["x_max"], cleaned_data["n"]),
                delta=cleaned_data["delta"],
                k0=cleaned_data["k0"],
                coupling_width=cleaned_data["coupling_width"],
                g_integral=cleaned_data["g_integral"] * hbar,
                system_hamiltonian=cleaned_data["system_hamiltonian"],
                coupling_operator=cleaned_data["coupling_operator"],
                hbar=hbar,
                coupling_shape=cleaned_data["coupling_shape"],
            )
            initial_state = PureState.normalized(np.array(cleaned_data["initial_state"]))
            if initial_state.dim != model.system_dim:
                raise ValidationError(
                    "Initial state has %(got)s amplitudes, the system has dimension %(dim)s.",
                    code="dimension_mismatch",
                    params={"got": initial_state.dim, "dim": model.system_dim},
                )
            # Build packet and coupling now so their errors surface here.
            _ = (model.packet, model.coupling)
            validate_no_wrap(model, cleaned_data["t_max"], t_min=cleaned_data["t_start"])
        except ValidationError as exc:
            self.add_error(FIELD_FOR_CODE.get(getattr(exc, "code", None)), exc)
            return cleaned_data

        cleaned_data["model"] = model
        cleaned_data["initial_state"] = initial_state
        return cleaned_data
