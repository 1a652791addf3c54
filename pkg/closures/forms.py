from django import forms
from django.core.exceptions import ValidationError
import os

from .exceptions import ConfigurationError


COMMAND_CHOICES = (
    ('fit-map', 'Build one renormalization map'),
    ('compare-maps', 'Compare beta, Taylor and optimized maps'),
    ('error-table', 'L2 fit errors over K and L'),
    ('invert-beam', 'Single Dirac beam inversion'),
    ('invert-double-beam', 'Double Dirac beam inversion'),
    ('invert-six-gaussian', 'Six-Gaussian inversion'),
    ('error-decay', 'Six-Gaussian L2 error against N'),
)
MAP_COMMANDS = {'fit-map', 'invert-beam', 'invert-double-beam', 'invert-six-gaussian'}
INVERSION_COMMANDS = {'invert-beam', 'invert-double-beam', 'invert-six-gaussian'}


def _number_list(value, name, minimum=None, integer=False):
    if not isinstance(value, list) or not value:
        raise ValidationError(f"{name} must be a non-empty list of numbers.")
    out = []
    for item in value:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ValidationError(f"{name} entries must be numbers, got {item!r}.")
        if integer and int(item) != item:
            raise ValidationError(f"{name} entries must be integers, got {item!r}.")
        if minimum is not None and item < minimum:
            raise ValidationError(f"{name} entries must be >= {minimum}, got {item!r}.")
        out.append(int(item) if integer else float(item))
    return out


class RunConfigForm(forms.Form):
    """Flat run configuration: config file keys merged with command-line overrides"""

    command = forms.ChoiceField(choices=COMMAND_CHOICES)
    family = forms.ChoiceField(
        choices=(('beta', 'phi-divergence beta_K'), ('taylor', 'Taylor T_2K+1'), ('optimized', 'L2-optimized O_2K+1')),
        required=False,
    )
    target = forms.ChoiceField(choices=(('BS', 'Boltzmann-Shannon'), ('BE', 'Bose-Einstein')), required=False)
    K = forms.IntegerField(min_value=0, required=False, help_text='Odd degree for beta; degree 2K+1 otherwise.')
    N = forms.IntegerField(min_value=0, required=False, help_text='Maximum spherical harmonic degree.')
    interval = forms.JSONField(required=False)
    x0 = forms.FloatField(required=False)
    seed = forms.IntegerField(min_value=0, required=False)
    starts = forms.IntegerField(min_value=1, required=False)
    workers = forms.IntegerField(min_value=1, required=False)
    exactness = forms.IntegerField(min_value=0, required=False)
    lebedev = forms.CharField(required=False)
    window = forms.JSONField(required=False)
    points = forms.IntegerField(min_value=2, required=False)
    tol = forms.FloatField(required=False)
    max_iter = forms.IntegerField(min_value=1, required=False)
    sigma = forms.FloatField(min_value=0.0, required=False)
    Ks = forms.JSONField(required=False)
    Ls = forms.JSONField(required=False)
    Ns = forms.JSONField(required=False)
    models = forms.JSONField(required=False)
    out = forms.CharField(required=False)

    OUTPUT_CHOICES = (
        ('csv', 'CSV'),
        ('json', 'JSON'),
        ('xlsx', 'Excel (.xlsx)'),
    )
    format = forms.ChoiceField(choices=OUTPUT_CHOICES, required=False)

    def clean_target(self):
        return self.cleaned_data.get('target') or 'BS'

    def clean_format(self):
        return self.cleaned_data.get('format') or 'csv'

    def _pair(self, name):
        value = self.cleaned_data.get(name)
        if value is None:
            return None
        values = _number_list(value, name)
        if len(values) != 2:
            raise ValidationError(f"{name} must be a pair [a, b], got {len(values)} values.")
        if not values[0] < values[1]:
            raise ValidationError(f"{name} must satisfy a < b, got [{values[0]}, {values[1]}].")
        return values

    def clean_interval(self):
        return self._pair('interval')

    def clean_window(self):
        return self._pair('window')

    def clean_tol(self):
        tol = self.cleaned_data.get('tol')
        if tol is not None and not tol > 0:
            raise ValidationError("tol must be positive.")
        return tol

    def clean_lebedev(self):
        path = self.cleaned_data.get('lebedev')
        if path and not os.path.isfile(path):
            raise ValidationError(f"Lebedev rule file '{path}' does not exist.")
        return path or None

    def clean_Ks(self):
        value = self.cleaned_data.get('Ks')
        return None if value is None else _number_list(value, 'Ks', minimum=0, integer=True)

    def clean_Ls(self):
        value = self.cleaned_data.get('Ls')
        return None if value is None else _number_list(value, 'Ls', minimum=0)

    def clean_Ns(self):
        value = self.cleaned_data.get('Ns')
        return None if value is None else _number_list(value, 'Ns', minimum=0, integer=True)

    def clean_models(self):
        value = self.cleaned_data.get('models')
        if value is None:
            return None
        if not isinstance(value, list) or not value or not all(isinstance(v, str) for v in value):
            raise ValidationError("models must be a non-empty list of labels such as \"O_5[-5,5]\".")
        from .services import parse_model_label
        for label in value:
            try:
                parse_model_label(label)
            except ConfigurationError as exc:
                raise ValidationError(exc.message)
        return value

    def clean(self):
        cleaned = super().clean()
        command = cleaned.get('command')
        target = cleaned.get('target') or 'BS'
        family = cleaned.get('family')
        K = cleaned.get('K')
        interval = cleaned.get('interval')
        x0 = cleaned.get('x0')

        if target == 'BE':
            if interval is not None and interval[1] >= 0:
                self.add_error('interval', "Bose-Einstein target requires a strictly negative interval (b < 0).")
            if x0 is not None and x0 >= 0:
                self.add_error('x0', "Bose-Einstein target requires x0 < 0.")
            if family == 'beta':
                self.add_error('family', "beta_K maps approximate the exponential; use target BS.")
            if cleaned.get('Ls') and any(L <= 1 for L in cleaned['Ls']):
                self.add_error('Ls', "Bose-Einstein intervals [-L, -1/L] need L > 1.")

        if command in MAP_COMMANDS:
            if not family:
                self.add_error('family', f"{command} requires a map family.")
            if K is None:
                self.add_error('K', f"{command} requires K.")
            elif family == 'beta' and K % 2 == 0:
                self.add_error('K', f"beta_K requires an odd K, got {K}.")
            elif family == 'beta' and K == 0:
                self.add_error('K', "beta_K requires K >= 1.")
            if family == 'taylor' and x0 is None:
                self.add_error('x0', "Taylor maps require x0.")
            if family == 'optimized' and interval is None:
                self.add_error('interval', "Optimized maps require an interval [a, b].")

        if command == 'compare-maps' and K is None:
            self.add_error('K', "compare-maps requires K (maps of degree 2K+1).")

        if command in INVERSION_COMMANDS and cleaned.get('N') is None:
            self.add_error('N', f"{command} requires N.")
        if command == 'invert-double-beam' and cleaned.get('N') is not None and cleaned['N'] < 2:
            self.add_error('N', "A model with N = 1 cannot represent two beams; double-beam inversion needs N >= 2.")
        return cleaned

    def to_config(self):
        """Cleaned values without the unset keys, for the run and its metadata echo"""
        return {key: value for key, value in self.cleaned_data.items() if value is not None and value != ''}

    def error_summary(self):
        parts = []
        for name, errors in self.errors.items():
            prefix = '' if name == '__all__' else f"{name}: "
            parts.extend(f"{prefix}{error}" for error in errors)
        return '; '.join(parts)
