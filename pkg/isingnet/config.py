"""
Experiment configuration

A config file is a JSON document whose sections override the defaults
below.  Unknown keys and badly typed values are rejected before any
work is done.

"""

import copy
import hashlib
import json

from isingnet import autodiff
from isingnet import linalg
from isingnet import losses
from isingnet import schedules
from isingnet.training import TrainingConfig


DEFAULTS = {
    "dataset": {
        "n": 4,
        "train_size": 20000,
        "test_size": 2000,
        "validation_size": 1000,
        "train_bx_range": [0.0, 0.5],
        "test_bx_range": [0.0, 2.0],
        "bz": 0.01,
        "seed": 0,
        "subsample": 1000,
    },
    "model": {
        "hidden": [100, 100, 100, 100],
    },
    "optimizer": {
        "lr": 0.002,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
    },
    "training": {
        "epochs": 500,
        "batch_size": 128,
        "full_batch": False,
        "direction": linalg.SMALLEST,
        "train_loss": losses.MSE,
        "snapshot_every": 1,
        "log_every": 10,
    },
    "schedules": {
        "lambda_c": "cold_start_sigmoid",
        "lambda_s": "annealing",
        "constant_c": 0.85,
        "constant_s": 2.3,
    },
    "mode": losses.COPHY,
    "seed": 0,
    "seeds": [0, 1, 2],
    "sweep": {
        "train_sizes": [1000],
        "modes": [losses.COPHY, losses.BLACK_BOX],
    },
    "eval": {
        "bin_width": 0.1,
    },
    "bench": {
        "repetitions": 5,
        "matrices": 200,
    },
    "diagnostics": {
        "grid_range": 1.0,
        "grid_size": 21,
        "seed": 0,
        "stride": 1,
    },
    "output_dir": "runs",
}

SCHEDULE_FIELDS = ("kind", "lambda0", "alpha", "period", "offset")


class ConfigError (ValueError):
    """A configuration value is missing, unknown or invalid"""
    def __init__(self, path, msg):
        ValueError.__init__(self, "%s: %s" % (path or "<config>", msg))
        self.path = path
        self.msg = msg

    def __reduce__(self):
        return (ConfigError, (self.path, self.msg))


def _join(path, key):
    return "%s.%s" % (path, key) if path else key


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_value(path, value, default):
    """Type check 'value' against the default at the same path"""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true or false")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, "expected an integer")
    elif isinstance(default, float):
        if not _is_number(value):
            raise ConfigError(path, "expected a number")
        value = float(value)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
    elif isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(path, "expected a list")
        if default:
            value = [_check_value("%s[%d]" % (path, i), x, default[0])
                     for i, x in enumerate(value)]
    return value


def _merge(path, defaults, values):
    if not isinstance(values, dict):
        raise ConfigError(path, "expected an object")
    merged = copy.deepcopy(defaults)
    for key, value in values.items():
        sub = _join(path, key)
        if key not in defaults:
            raise ConfigError(sub, "unknown key")
        default = defaults[key]
        if isinstance(default, dict):
            merged[key] = _merge(sub, default, value)
        elif path == "schedules" and key in ("lambda_c", "lambda_s"):
            merged[key] = _check_schedule(sub, value)
        else:
            merged[key] = _check_value(sub, value, default)
    return merged


def _check_schedule(path, value):
    if isinstance(value, str):
        if value not in schedules.PRESETS:
            raise ConfigError(path, "unknown schedule preset '%s'" % value)
        return value
    if not isinstance(value, dict):
        raise ConfigError(path, "expected a preset name or an object")
    for key in value:
        if key not in SCHEDULE_FIELDS:
            raise ConfigError(_join(path, key), "unknown key")
    if "kind" not in value:
        raise ConfigError(_join(path, "kind"), "missing")
    try:
        schedules.ScheduleSpec.from_dict(value)
    except (schedules.ScheduleError, TypeError, ValueError) as e:
        raise ConfigError(path, str(e))
    return dict(value)


def _require(path, ok, msg):
    if not ok:
        raise ConfigError(path, msg)


def _validate(data):
    """Range checks that go beyond types"""
    ds = data["dataset"]
    _require("dataset.n", 1 <= ds["n"] <= linalg.MAX_SPINS,
             "must be in 1..%d" % linalg.MAX_SPINS)
    for key in ("train_size", "test_size", "validation_size", "subsample"):
        _require("dataset." + key, ds[key] >= 0, "must be >= 0")
    _require("dataset.validation_size",
             ds["validation_size"] <= ds["train_size"],
             "exceeds dataset.train_size")
    for key in ("train_bx_range", "test_bx_range"):
        lo_hi = ds[key]
        _require("dataset." + key, len(lo_hi) == 2 and lo_hi[0] <= lo_hi[1],
                 "must be [lo, hi] with lo <= hi")

    _require("model.hidden", all(w >= 1 for w in data["model"]["hidden"]),
             "widths must be >= 1")

    opt = data["optimizer"]
    _require("optimizer.lr", opt["lr"] > 0, "must be positive")
    for key in ("beta1", "beta2"):
        _require("optimizer." + key, 0 <= opt[key] < 1, "must be in [0, 1)")
    _require("optimizer.eps", opt["eps"] > 0, "must be positive")

    tr = data["training"]
    _require("training.epochs", tr["epochs"] >= 1, "must be >= 1")
    _require("training.batch_size", tr["batch_size"] >= 1, "must be >= 1")
    _require("training.direction", tr["direction"] in linalg.DIRECTIONS,
             "must be one of %s" % ", ".join(linalg.DIRECTIONS))
    _require("training.train_loss", tr["train_loss"] in losses.TRAIN_LOSSES,
             "must be one of %s" % ", ".join(losses.TRAIN_LOSSES))
    for key in ("snapshot_every", "log_every"):
        _require("training." + key, tr[key] >= 0, "must be >= 0")

    sch = data["schedules"]
    for key in ("constant_c", "constant_s"):
        _require("schedules." + key, sch[key] >= 0, "must be >= 0")

    _require("mode", data["mode"] in losses.MODES,
             "must be one of %s" % ", ".join(losses.MODES))
    _require("seeds", len(data["seeds"]) > 0, "must not be empty")
    _require("sweep.train_sizes",
             len(data["sweep"]["train_sizes"]) > 0 and
             all(x >= 1 for x in data["sweep"]["train_sizes"]),
             "must be a non-empty list of sizes >= 1")
    for i, mode in enumerate(data["sweep"]["modes"]):
        _require("sweep.modes[%d]" % i, mode in losses.MODES,
                 "unknown mode '%s'" % mode)
    _require("sweep.modes", len(data["sweep"]["modes"]) > 0,
             "must not be empty")
    _require("eval.bin_width", data["eval"]["bin_width"] > 0,
             "must be positive")
    _require("bench.repetitions", data["bench"]["repetitions"] >= 1,
             "must be >= 1")
    _require("bench.matrices", data["bench"]["matrices"] >= 1,
             "must be >= 1")

    diag = data["diagnostics"]
    _require("diagnostics.grid_size",
             diag["grid_size"] >= 1 and diag["grid_size"] % 2 == 1,
             "must be a positive odd integer")
    _require("diagnostics.grid_range", diag["grid_range"] >= 0,
             "must be >= 0")
    _require("diagnostics.stride", diag["stride"] >= 1, "must be >= 1")


class ExperimentConfig (object):
    """Validated experiment settings"""

    def __init__(self, values=None):
        self.data = _merge("", DEFAULTS, values if values is not None
                           else {})
        _validate(self.data)

    @classmethod
    def load(cls, filename):
        try:
            with open(filename) as infile:
                values = json.load(infile)
        except ValueError as e:
            raise ConfigError("", "%s is not valid JSON: %s" % (filename, e))
        return cls(values)

    def __getitem__(self, key):
        return self.data[key]

    def override(self, seed=None, mode=None, output_dir=None,
                 dataset_seed=None):
        """Copy of this config with command-line overrides applied"""
        data = copy.deepcopy(self.data)
        if seed is not None:
            data["seed"] = seed
        if mode is not None:
            data["mode"] = mode
        if output_dir is not None:
            data["output_dir"] = output_dir
        if dataset_seed is not None:
            data["dataset"]["seed"] = dataset_seed
        return ExperimentConfig(data)

    def to_json(self):
        return json.dumps(self.data, sort_keys=True, indent=2) + "\n"

    def config_hash(self):
        """SHA-256 of the canonical JSON form"""
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def write(self, filename):
        with open(filename, "w") as out:
            out.write(self.to_json())

    def schedule(self, key):
        value = self.data["schedules"][key]
        if isinstance(value, str):
            return schedules.get_preset(value)
        return schedules.ScheduleSpec.from_dict(value)

    def dims(self):
        return autodiff.default_dims(self.data["dataset"]["n"],
                                     self.data["model"]["hidden"])

    def dataset_kwargs(self):
        ds = self.data["dataset"]
        return dict(n=ds["n"], train_size=ds["train_size"],
                    test_size=ds["test_size"],
                    validation_size=ds["validation_size"],
                    train_bx_range=ds["train_bx_range"],
                    test_bx_range=ds["test_bx_range"],
                    bz=ds["bz"], seed=ds["seed"])

    def training_config(self, mode=None, seed=None):
        tr = self.data["training"]
        opt = self.data["optimizer"]
        sch = self.data["schedules"]
        return TrainingConfig(
            self.dims(), epochs=tr["epochs"], batch_size=tr["batch_size"],
            full_batch=tr["full_batch"], lr=opt["lr"], beta1=opt["beta1"],
            beta2=opt["beta2"], eps=opt["eps"],
            schedule_c=self.schedule("lambda_c"),
            schedule_s=self.schedule("lambda_s"),
            constant_c=sch["constant_c"], constant_s=sch["constant_s"],
            direction=tr["direction"],
            mode=mode if mode is not None else self.data["mode"],
            train_loss=tr["train_loss"],
            seed=seed if seed is not None else self.data["seed"],
            snapshot_every=tr["snapshot_every"],
            log_every=tr["log_every"])
