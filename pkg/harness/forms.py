"""
Validation of experiment configuration files.

Config values arrive as strings from a flat ``key = value`` file. The form
casts them, enforces the documented parameter ranges and checks that the
estimator can run under the chosen noise model.
"""

from django import forms
from django.core.exceptions import ValidationError

from .models import ESTIMATORS, NOISE_MODELS, PRESETS, estimator_mismatch


def _choices(values):
    return [(value, value) for value in values]


class ExperimentConfigForm(forms.Form):
    """
    Form behind ``harness.config.load_config``.

    Field names match ExperimentConfig; ``KEY_FIELDS`` maps the dotted file
    keys onto them.

    Validation:
        - The n list is strictly increasing, every n at least 2
        - replications >= 1, 0 < pi <= 1, L > 0, 0 < delta < 1/2
        - k >= 1, or 0 to derive it from d and delta
        - The bump preset needs 0 < gamma <= kappa / 4
        - The estimator matches the noise model
    """

    preset = forms.ChoiceField(choices=_choices(PRESETS))
    radius = forms.FloatField()
    noise = forms.ChoiceField(choices=_choices(NOISE_MODELS))
    pi = forms.FloatField()
    box_padding = forms.FloatField(min_value=0.0)
    kappa = forms.FloatField()
    gamma = forms.FloatField()
    estimator = forms.ChoiceField(choices=_choices(ESTIMATORS))
    slab_K = forms.FloatField()
    slab_b1 = forms.FloatField()
    slab_b2 = forms.FloatField()
    slab_offsets = forms.IntegerField(min_value=1)
    deconv_k = forms.IntegerField(min_value=0)
    deconv_L = forms.FloatField()
    deconv_delta = forms.FloatField()
    deconv_grid_factor = forms.FloatField()
    deconv_radius = forms.FloatField()
    resolution = forms.FloatField()
    ns = forms.CharField(help_text="Comma-separated, strictly increasing")
    replications = forms.IntegerField()
    seed = forms.IntegerField(min_value=0)
    threads = forms.IntegerField(min_value=1)
    output_dir = forms.CharField()

    POSITIVE = (
        "radius",
        "kappa",
        "slab_K",
        "slab_b1",
        "slab_b2",
        "deconv_grid_factor",
        "deconv_radius",
        "resolution",
    )

    def clean(self):
        """
        Cross-field validation.

        Positive-only fields are checked here so every offending key is
        reported at once.

        Raises:
            ValidationError: If the estimator cannot run under the noise model.
        """
        cleaned_data = super().clean()

        for name in self.POSITIVE:
            value = cleaned_data.get(name)
            if value is not None and not value > 0:
                self.add_error(name, f"{name} must be positive")

        preset = cleaned_data.get("preset")
        gamma, kappa = cleaned_data.get("gamma"), cleaned_data.get("kappa")
        if preset in ("bump", "cosine") and gamma is not None and not gamma > 0:
            self.add_error("gamma", f"the {preset} preset needs gamma > 0")
        if preset == "bump" and gamma and kappa and gamma > kappa / 4:
            self.add_error("gamma", "the bump preset needs gamma <= kappa / 4")

        mismatch = estimator_mismatch(
            cleaned_data.get("estimator"), cleaned_data.get("noise")
        )
        if mismatch:
            raise ValidationError(mismatch)

        return cleaned_data

    def clean_ns(self):
        """
        Parse the n list.

        Returns:
            tuple: Sample sizes as integers.

        Raises:
            ValidationError: If an entry is not an integer >= 2 or the list is
                not strictly increasing.
        """
        text = self.cleaned_data.get("ns", "")
        try:
            ns = tuple(int(part) for part in text.split(",") if part.strip())
        except ValueError:
            raise ValidationError(f"n list must hold integers, got {text!r}")
        if not ns:
            raise ValidationError("n list is empty")
        if min(ns) < 2:
            raise ValidationError("every sample size must be at least 2")
        if any(a >= b for a, b in zip(ns, ns[1:])):
            raise ValidationError("n list must be strictly increasing")
        return ns

    def clean_replications(self):
        replications = self.cleaned_data.get("replications")
        if replications is not None and replications < 1:
            raise ValidationError("replications must be at least 1")
        return replications

    def clean_pi(self):
        pi = self.cleaned_data.get("pi")
        if pi is not None and not 0 < pi <= 1:
            raise ValidationError("clutter weight must satisfy 0 < pi <= 1")
        return pi

    def clean_deconv_L(self):
        L = self.cleaned_data.get("deconv_L")
        if L is not None and not L > 0:
            raise ValidationError("tube factor L must be positive")
        return L

    def clean_deconv_delta(self):
        delta = self.cleaned_data.get("deconv_delta")
        if delta is not None and not 0 < delta < 0.5:
            raise ValidationError("delta must satisfy 0 < delta < 1/2")
        return delta
