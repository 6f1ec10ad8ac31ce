from rest_framework import serializers


# ============================================
# FIELD TYPES
# ============================================

class FloatListField(serializers.Field):
    """Whitespace-separated reals, e.g. '1.0 1.0'"""
    default_error_messages = {
        'invalid': 'Expected whitespace-separated numbers, got {value!r}.',
        'length': 'Expected {length} numbers, got {count}.',
    }

    def __init__(self, length=None, **kwargs):
        self.length = length
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        try:
            values = [float(item) for item in str(data).split()]
        except ValueError:
            self.fail('invalid', value=data)
        if self.length is not None and len(values) != self.length:
            self.fail('length', length=self.length, count=len(values))
        return values

    def to_representation(self, value):
        return ' '.join(repr(float(v)) for v in value)


class IntListField(FloatListField):

    def to_internal_value(self, data):
        values = super().to_internal_value(data)
        if any(v != int(v) for v in values):
            self.fail('invalid', value=data)
        return [int(v) for v in values]

    def to_representation(self, value):
        return ' '.join(str(int(v)) for v in value)


class PointListField(serializers.Field):
    """Points separated by ';', coordinates by whitespace: '0.25 0.5; 0.75 0.5'"""
    default_error_messages = {
        'invalid': 'Expected points as "x y; x y", got {value!r}.',
    }

    def to_internal_value(self, data):
        points = []
        for chunk in str(data).split(';'):
            if not chunk.strip():
                continue
            try:
                x, y = (float(item) for item in chunk.split())
            except ValueError:
                self.fail('invalid', value=data)
            points.append((x, y))
        return points

    def to_representation(self, value):
        return '; '.join(f'{float(x)!r} {float(y)!r}' for x, y in value)


# ============================================
# SECTIONS
# ============================================

class DomainSerializer(serializers.Serializer):
    periods = FloatListField(length=2)
    n = serializers.IntegerField(min_value=16)
    offset = FloatListField(length=2, required=False)

    def validate_periods(self, value):
        if any(p <= 0 for p in value):
            raise serializers.ValidationError('Periods must be positive.')
        return value

    def validate_n(self, value):
        if value % 2:
            raise serializers.ValidationError('Grid size must be even.')
        return value

    def validate_offset(self, value):
        if any(not 0 <= o < 1 for o in value):
            raise serializers.ValidationError('Offsets must lie in [0, 1).')
        return value


class VorticesSerializer(serializers.Serializer):
    points = PointListField()
    multiplicities = IntListField(required=False)

    def validate(self, attrs):
        points = attrs['points']
        if not points:
            raise serializers.ValidationError({'points': 'At least one vortex point is required.'})
        multiplicities = attrs.get('multiplicities') or [1] * len(points)
        if len(multiplicities) != len(points):
            raise serializers.ValidationError({'multiplicities': 'One multiplicity is needed per point.'})
        if any(m < 1 for m in multiplicities):
            raise serializers.ValidationError({'multiplicities': 'Multiplicities must be positive.'})
        attrs['multiplicities'] = multiplicities
        return attrs


class BubblesSerializer(serializers.Serializer):
    k = serializers.IntegerField(min_value=1)
    seed = PointListField()
    d = serializers.FloatField(min_value=0.0, required=False)
    alpha = serializers.FloatField(required=False)
    mu = serializers.FloatField(required=False)

    def validate_alpha(self, value):
        if not 0 < value < 0.5:
            raise serializers.ValidationError('alpha must lie in (0, 1/2).')
        return value

    def validate(self, attrs):
        if len(attrs['seed']) != attrs['k']:
            raise serializers.ValidationError({'seed': f"Expected {attrs['k']} seed points."})
        return attrs


class SweepSerializer(serializers.Serializer):
    eps = FloatListField(required=False)
    eps_max = serializers.FloatField(required=False)
    eps_min = serializers.FloatField(required=False)
    count = serializers.IntegerField(min_value=1, required=False)
    beta0 = serializers.FloatField(required=False)
    beta1 = serializers.FloatField(required=False)

    def validate(self, attrs):
        if 'eps' not in attrs:
            missing = [name for name in ('eps_max', 'eps_min', 'count') if name not in attrs]
            if missing:
                raise serializers.ValidationError(
                    {'eps': f"Give an eps list or eps_max, eps_min and count (missing {', '.join(missing)})."})
        eps = attrs.get('eps') or [attrs['eps_max']]
        if any(e <= 0 for e in eps) or attrs.get('eps_min', 1.0) <= 0:
            raise serializers.ValidationError({'eps': 'eps must be positive.'})
        beta0, beta1 = attrs.get('beta0'), attrs.get('beta1')
        if beta0 is not None and beta1 is not None and not 0 < beta0 < beta1:
            raise serializers.ValidationError({'beta1': 'Need 0 < beta0 < beta1.'})
        return attrs


class TolerancesSerializer(serializers.Serializer):
    newton_tol = serializers.FloatField(min_value=0.0, required=False)
    tol_reduced = serializers.FloatField(min_value=0.0, required=False)
    levels = serializers.IntegerField(min_value=4, required=False)


class OutputsSerializer(serializers.Serializer):
    FORMAT_CHOICES = ['field', 'csv', 'report', 'plots']

    directory = serializers.CharField(required=False)
    formats = serializers.CharField(required=False)

    def validate_formats(self, value):
        formats = value.split()
        unknown = sorted(set(formats) - set(self.FORMAT_CHOICES))
        if unknown:
            raise serializers.ValidationError(f"Unknown formats: {', '.join(unknown)}.")
        return ' '.join(formats)


class ExperimentConfigSerializer(serializers.Serializer):
    """The whole experiment file, one nested serializer per section"""
    domain = DomainSerializer()
    vortices = VorticesSerializer()
    bubbles = BubblesSerializer()
    sweep = SweepSerializer(required=False)
    tolerances = TolerancesSerializer(required=False)
    outputs = OutputsSerializer(required=False)

    def validate(self, attrs):
        N = sum(attrs['vortices']['multiplicities'])
        if N != 2 * attrs['bubbles']['k']:
            raise serializers.ValidationError({'bubbles': f'k must equal N/2 = {N / 2:g}.'})
        return attrs
