"""
Loss-weight schedules

Each schedule maps an epoch t to a weight lambda(t):

  zero                0
  constant            l0
  annealing           l0 (1 - a)^round(t / T)
  cold_start_sigmoid  l0 sigmoid(a (t - Ta))
  quick_drop          l0 (1 + a)^min(0, Ta - t)
  quick_start         l0 (1 - (1 + a)^min(0, Ta - t))
  inverse_sigmoid     l0 (1 - sigmoid(a (t - Ta)))

round() is round-half-away-from-zero.

"""

import math


ZERO = "zero"
CONSTANT = "constant"
ANNEALING = "annealing"
COLD_START_SIGMOID = "cold_start_sigmoid"
QUICK_DROP = "quick_drop"
QUICK_START = "quick_start"
INVERSE_SIGMOID = "inverse_sigmoid"

KINDS = (ZERO, CONSTANT, ANNEALING, COLD_START_SIGMOID, QUICK_DROP,
         QUICK_START, INVERSE_SIGMOID)


class ScheduleError (ValueError):
    pass


class ScheduleSpec (object):
    """
    A schedule kind and its parameters

    lambda0 -- scale
    alpha   -- decay or ramp rate
    period  -- annealing block length T
    offset  -- ramp center T_a
    """

    def __init__(self, kind, lambda0=0.0, alpha=0.0, period=1, offset=0.0):
        self.kind = kind
        self.lambda0 = float(lambda0)
        self.alpha = float(alpha)
        self.period = period
        self.offset = float(offset)
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ScheduleError("unknown schedule kind '%s'" % self.kind)
        for name in ("lambda0", "alpha", "offset"):
            if not math.isfinite(getattr(self, name)):
                raise ScheduleError("schedule %s must be finite" % name)
        if self.lambda0 < 0:
            raise ScheduleError("schedule lambda0 must be >= 0")
        if self.kind == ANNEALING:
            if int(self.period) != self.period or self.period < 1:
                raise ScheduleError("annealing period must be an integer "
                                    ">= 1")
        if self.kind in (ANNEALING, QUICK_DROP, QUICK_START):
            if not 0 <= self.alpha < 1:
                raise ScheduleError("%s alpha must lie in [0, 1)" %
                                    self.kind)

    def scaled(self, factor):
        return ScheduleSpec(self.kind, self.lambda0 * factor, self.alpha,
                            self.period, self.offset)

    def to_dict(self):
        return {"kind": self.kind, "lambda0": self.lambda0,
                "alpha": self.alpha, "period": self.period,
                "offset": self.offset}

    @classmethod
    def from_dict(cls, dct):
        try:
            return cls(**dct)
        except TypeError as e:
            raise ScheduleError("bad schedule fields: %s" % e)

    def __eq__(self, other):
        if not isinstance(other, ScheduleSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    __hash__ = None

    def __repr__(self):
        return ("ScheduleSpec(%r, lambda0=%r, alpha=%r, period=%r, "
                "offset=%r)" % (self.kind, self.lambda0, self.alpha,
                                self.period, self.offset))


# named schedules addressable from configs
PRESETS = {
    "zero": ScheduleSpec(ZERO),
    "annealing": ScheduleSpec(ANNEALING, 2.3, 0.14, period=50),
    "cold_start_sigmoid": ScheduleSpec(COLD_START_SIGMOID, 0.85, 0.17,
                                       offset=51.0),
    "sigmoid_search": ScheduleSpec(COLD_START_SIGMOID, 0.846349, 0.020170,
                                   offset=51.0),
    "quick_drop": ScheduleSpec(QUICK_DROP, 0.836881, 0.062851, offset=14.0),
    "quick_start": ScheduleSpec(QUICK_START, 0.936669, 0.073074,
                                offset=61.2),
    "inverse_sigmoid": ScheduleSpec(INVERSE_SIGMOID, 0.939779, 0.171778,
                                    offset=59.2),
    "pgnn_c": ScheduleSpec(CONSTANT, 0.85),
    "pgnn_s": ScheduleSpec(CONSTANT, 2.3),
}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ScheduleError("unknown schedule preset '%s'" % name)


def constant(value):
    return ScheduleSpec(CONSTANT, value)


#=============================================================================
# evaluation


def sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def round_half_away(x):
    if x >= 0:
        return math.floor(x + 0.5)
    return -math.floor(-x + 0.5)


def weight_at(spec, t):
    """Weight of schedule 'spec' at epoch t >= 0"""
    if t < 0:
        raise ScheduleError("epoch must be >= 0, got %r" % t)

    kind = spec.kind
    l0 = spec.lambda0
    if kind == ZERO:
        return 0.0
    elif kind == CONSTANT:
        return l0
    elif kind == ANNEALING:
        return l0 * (1.0 - spec.alpha) ** round_half_away(
            t / float(spec.period))
    elif kind == COLD_START_SIGMOID:
        return l0 * sigmoid(spec.alpha * (t - spec.offset))
    elif kind == QUICK_DROP:
        return l0 * (1.0 + spec.alpha) ** min(0.0, spec.offset - t)
    elif kind == QUICK_START:
        return l0 * (1.0 - (1.0 + spec.alpha) ** min(0.0, spec.offset - t))
    elif kind == INVERSE_SIGMOID:
        return l0 * (1.0 - sigmoid(spec.alpha * (t - spec.offset)))
    else:
        raise ScheduleError("unknown schedule kind '%s'" % kind)


def schedule_table(spec, epochs):
    """[(t, weight_at(spec, t)) for t in 0..epochs-1]"""
    if epochs < 1:
        raise ScheduleError("epochs must be >= 1")
    return [(t, weight_at(spec, t)) for t in range(epochs)]
