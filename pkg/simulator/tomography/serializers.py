from rest_framework import serializers

REGIMES = ['low-noise', 'high-noise', 'turbulence', 'custom']
MODES = ['sgqt-pure', 'sgqt-mixed', 'baseline-mub', 'compare']


class CommaFloatListField(serializers.ListField):
    """Accepts a list of numbers or a comma-separated string such as ``1.0, 0.9, 0.8``."""

    child = serializers.FloatField()

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [item.strip() for item in data.split(',') if item.strip()]
        return super().to_internal_value(data)


class ScheduleSerializer(serializers.Serializer):
    a = serializers.FloatField(min_value=0, required=False)
    A = serializers.FloatField(min_value=0, required=False)
    s = serializers.FloatField(min_value=0, required=False)
    b = serializers.FloatField(min_value=0, required=False)
    t = serializers.FloatField(min_value=0, required=False)

    def validate(self, attrs):
        for name in ('a', 's', 'b', 't'):
            if attrs.get(name) == 0:
                raise serializers.ValidationError({name: 'Must be positive.'})
        return attrs


class NoiseSerializer(serializers.Serializer):
    copies_per_setting = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    rate_hz = serializers.FloatField(min_value=0, required=False, allow_null=True)
    integration_time_s = serializers.FloatField(min_value=0, required=False)
    dark_rate_hz = serializers.FloatField(min_value=0, required=False)
    dark_counts_per_setting = serializers.FloatField(min_value=0, required=False)
    crosstalk_strength = serializers.FloatField(min_value=0, max_value=1, required=False)
    crosstalk_model = serializers.ChoiceField(choices=['uniform', 'nearest'], required=False)
    loss = CommaFloatListField(required=False, allow_null=True, allow_empty=False)
    loss_model = serializers.ChoiceField(choices=['detection', 'amplitude'], required=False)
    shot_noise = serializers.BooleanField(required=False)

    def validate_loss(self, value):
        if value is not None and any(not 0 < eta <= 1 for eta in value):
            raise serializers.ValidationError('Transmissions must lie in (0, 1].')
        return value


class TurbulenceSerializer(serializers.Serializer):
    cn2 = serializers.FloatField(min_value=0, required=False)
    distance_m = serializers.FloatField(min_value=0, required=False)
    wavelength_m = serializers.FloatField(min_value=0, required=False)
    beam_waist_m = serializers.FloatField(min_value=0, required=False, allow_null=True)
    grid_size = serializers.IntegerField(min_value=64, required=False)
    grid_extent_m = serializers.FloatField(min_value=0, required=False, allow_null=True)
    subharmonics = serializers.BooleanField(required=False)


class CompareSerializer(serializers.Serializer):
    loss_span = serializers.FloatField(min_value=0, max_value=0.99, required=False)


class RunConfigSerializer(serializers.Serializer):
    dimension = serializers.IntegerField(min_value=2)
    regime = serializers.ChoiceField(choices=REGIMES)
    preset = serializers.CharField(required=False, allow_null=True)
    mode = serializers.ChoiceField(choices=MODES)
    trials = serializers.IntegerField(min_value=1)
    iterations = serializers.IntegerField(min_value=1)
    master_seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1)
    reference = serializers.ChoiceField(choices=['prepared', 'apparent'], required=False)
    initial = serializers.ChoiceField(choices=['haar', 'basis'], required=False)
    mixed_rank = serializers.IntegerField(min_value=1, required=False)
    mixed_measure = serializers.ChoiceField(choices=['bures', 'hilbert-schmidt'], required=False)
    settings_per_objective = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    schedule = ScheduleSerializer(required=False)
    noise = NoiseSerializer(required=False)
    turbulence = TurbulenceSerializer(required=False, allow_null=True)
    compare = CompareSerializer(required=False)

    def validate(self, attrs):
        dim = attrs['dimension']
        if attrs.get('mixed_rank') and attrs['mixed_rank'] > dim:
            raise serializers.ValidationError({'mixed_rank': f'Must not exceed the dimension {dim}.'})
        loss = (attrs.get('noise') or {}).get('loss')
        if loss is not None and len(loss) != dim:
            raise serializers.ValidationError({'noise': {'loss': [f'Expected {dim} transmissions, got {len(loss)}.']}})
        spo = attrs.get('settings_per_objective')
        if spo is not None and spo > dim * (dim + 1):
            raise serializers.ValidationError(
                {'settings_per_objective': f'Must not exceed the {dim * (dim + 1)} MUB settings.'}
            )
        return attrs
