"""
Command-line programs

Each bin/ising-* program calls main(<command>, argv).  Exit codes are 0
on success, 1 for usage and configuration errors and 2 for runtime
failures; failures also print one machine-readable line to stderr:

    error<TAB>code=<n><TAB>kind=<exception><TAB>message=<text>

Every command writes manifest.txt next to its outputs; ising-diag writes
diag_manifest.txt so the manifest of the run it reads is kept.

"""

import hashlib
import optparse
import os
import platform
import sys

import numpy as np

import isingnet
from isingnet import autodiff
from isingnet import data
from isingnet import diagnostics
from isingnet import losses
from isingnet import training
from isingnet.config import ConfigError, ExperimentConfig

from rasmus import util


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

COMMANDS = ("gen-data", "train", "eval", "sweep", "bench", "diag")

DATASET_FILE = "dataset.bin"
CHECKPOINT_FILE = "checkpoint.bin"
BEST_CHECKPOINT_FILE = "best_checkpoint.bin"
SNAPSHOTS_FILE = "snapshots.bin"
RUNLOG_FILE = "runlog.csv"
CONFIG_FILE = "config.json"
TIMINGS_FILE = "timings.txt"
MANIFEST_FILE = "manifest.txt"
DIAG_MANIFEST_FILE = "diag_manifest.txt"


class UsageError (Exception):
    pass


class OptionParser (optparse.OptionParser):
    """optparse parser that raises UsageError instead of exiting"""

    def error(self, msg):
        raise UsageError(msg)


#=============================================================================
# option parsing


_DESCRIPTIONS = {
    "gen-data": "Generate a labeled Ising dataset (dataset.bin).",
    "train": "Train a network on a dataset (checkpoints, runlog.csv).",
    "eval": "Evaluate a checkpoint on the test split "
            "(eval_summary.csv, eval_bins.csv).",
    "sweep": "Train over modes, train sizes and seeds "
             "(aggregate.csv, runs.csv).",
    "bench": "Time the network against the eigensolver (bench.csv).",
    "diag": "Gradient projections and a loss landscape of a training run "
            "(projection.csv, landscape.csv).",
}


def make_parser(command):
    o = OptionParser(prog="ising-" + command,
                     usage="%prog [options]",
                     description=_DESCRIPTIONS[command])
    o.add_option("-c", "--config", metavar="FILE",
                 help="JSON experiment config (defaults are used otherwise)")
    o.add_option("-s", "--seed", type="int",
                 help="random seed (dataset seed for gen-data, landscape "
                 "seed for diag)")
    o.add_option("-o", "--out", metavar="DIR",
                 help="output directory (default: config output_dir)")
    o.add_option("-j", "--jobs", type="int", default=1,
                 help="number of worker processes (default: 1)")
    o.add_option("-m", "--mode", type="choice", choices=list(losses.MODES),
                 help="training mode: " + ", ".join(losses.MODES))
    o.add_option("-q", "--quiet", action="store_true",
                 help="suppress progress output")

    if command in ("train", "eval", "sweep", "bench", "diag"):
        o.add_option("-d", "--dataset", metavar="FILE",
                     help="dataset file written by ising-gen-data")
    if command in ("eval", "bench"):
        o.add_option("-k", "--checkpoint", metavar="FILE",
                     help="network checkpoint written by ising-train")
    if command == "eval":
        o.add_option("--oracle", action="store_true",
                     help="evaluate the eigensolver instead of a network")
    if command == "sweep":
        o.add_option("--seeds", metavar="LIST",
                     help="comma separated seeds (default: config seeds)")
        o.add_option("--sizes", metavar="LIST",
                     help="comma separated train sizes "
                     "(default: config sweep.train_sizes)")
    if command == "diag":
        o.add_option("-r", "--run-dir", metavar="DIR",
                     help="output directory of ising-train")
        o.add_option("--reference", metavar="FILE",
                     help="checkpoint to use as theta* instead of the "
                     "run's final model")
    return o


def parse_int_list(text, name):
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError("%s must be a comma separated list of integers" %
                         name)
    if not values:
        raise UsageError("%s must not be empty" % name)
    return values


def require_file(path, name):
    if not path:
        raise UsageError("%s is required" % name)
    if not os.path.isfile(path):
        raise UsageError("%s '%s' does not exist" % (name, path))
    return path


def load_config(conf):
    if conf.config:
        config = ExperimentConfig.load(require_file(conf.config, "--config"))
    else:
        config = ExperimentConfig()
    return config


#=============================================================================
# outputs


def file_sha256(filename):
    digest = hashlib.sha256()
    with open(filename, "rb") as infile:
        for chunk in iter(lambda: infile.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, command, config, seed, inputs=(), extra=(),
                   filename=MANIFEST_FILE):
    """Record what produced the outputs of 'out_dir'"""
    manifest = [
        ("command", command),
        ("program", isingnet.PROGRAM_NAME),
        ("version", isingnet.PROGRAM_VERSION_TEXT),
        ("numpy", np.__version__),
        ("python", platform.python_version()),
        ("config_hash", config.config_hash()),
        ("seed", seed),
    ]
    for name, path in inputs:
        manifest.append(("input.%s" % name, path))
        manifest.append(("input.%s.sha256" % name, file_sha256(path)))
    manifest.extend(extra)
    util.write_dict(os.path.join(out_dir, filename), dict(manifest))


def write_timings(filename, timings):
    util.write_dict(filename, dict((k, "%.6f" % v)
                                   for k, v in sorted(timings.items())))


def load_bundle(path):
    return data.load_dataset(require_file(path, "--dataset"))


def load_checkpoint(path, bundle=None):
    model = autodiff.load_model(require_file(path, "--checkpoint"))
    if bundle is not None:
        try:
            training.check_model_fits(model.dims, bundle)
        except ValueError as e:
            raise UsageError(str(e))
    return model


def prepare_bundle(config, bundle, seed):
    """Apply the configured train subsample"""
    size = config["dataset"]["subsample"]
    if size == 0:
        return bundle
    if size > len(bundle.train):
        raise UsageError("dataset.subsample %d exceeds the %d train samples "
                         "of the dataset" % (size, len(bundle.train)))
    return data.subsample_train(bundle, size, seed)


def check_config_fits(config, bundle):
    if config["dataset"]["n"] != bundle.n:
        raise UsageError("config is for n=%d spins but the dataset has n=%d" %
                         (config["dataset"]["n"], bundle.n))


#=============================================================================
# commands


def cmd_gen_data(conf):
    config = load_config(conf).override(dataset_seed=conf.seed,
                                        output_dir=conf.out)
    out_dir = config["output_dir"]

    util.tic("generate dataset")
    bundle = data.generate_dataset(jobs=conf.jobs, **config.dataset_kwargs())
    util.toc()

    util.makedirs(out_dir)
    data.save_dataset(bundle, os.path.join(out_dir, DATASET_FILE))
    write_manifest(out_dir, "gen-data", config, config["dataset"]["seed"])


def cmd_train(conf):
    config = load_config(conf).override(seed=conf.seed, mode=conf.mode,
                                        output_dir=conf.out)
    bundle = load_bundle(conf.dataset)
    check_config_fits(config, bundle)
    seed = config["seed"]
    bundle = prepare_bundle(config, bundle, seed)
    tconfig = config.training_config()
    out_dir = config["output_dir"]

    model, runlog = training.train(tconfig, bundle)

    util.makedirs(out_dir)
    autodiff.save_model(model, os.path.join(out_dir, CHECKPOINT_FILE))
    autodiff.save_model(training.best_model(runlog, tconfig.dims),
                        os.path.join(out_dir, BEST_CHECKPOINT_FILE))
    training.save_snapshots(os.path.join(out_dir, SNAPSHOTS_FILE),
                            tconfig.dims, runlog.snapshots)
    runlog.write(os.path.join(out_dir, RUNLOG_FILE))
    config.write(os.path.join(out_dir, CONFIG_FILE))
    write_timings(os.path.join(out_dir, TIMINGS_FILE), runlog.timings)
    write_manifest(out_dir, "train", config, seed,
                   [("dataset", conf.dataset)],
                   [("mode", tconfig.mode),
                    ("best_epoch", runlog.best_epoch),
                    ("exp_clamps", runlog.exp_clamps),
                    ("label_reads", runlog.label_reads)])


def cmd_eval(conf):
    config = load_config(conf).override(output_dir=conf.out)
    if bool(conf.oracle) == bool(conf.checkpoint):
        raise UsageError("give exactly one of --checkpoint and --oracle")
    bundle = load_bundle(conf.dataset)
    out_dir = config["output_dir"]
    inputs = [("dataset", conf.dataset)]

    if conf.oracle:
        name = "oracle"
        direction = config["training"]["direction"]
        model = None

        def predictor(features):
            return training.oracle_predict(features, direction)
    else:
        model = load_checkpoint(conf.checkpoint, bundle)
        name = os.path.basename(conf.checkpoint)
        predictor = None
        inputs.append(("checkpoint", conf.checkpoint))

    report = training.evaluate(model, bundle.test,
                               config["eval"]["bin_width"],
                               bundle.test_bx_range, predictor)
    util.log("%s: test mse %.6g, cosine similarity %.6f" %
             (name, report.mse, report.cosine))

    util.makedirs(out_dir)
    report.summary_table("test", name).write(
        os.path.join(out_dir, "eval_summary.csv"), delim=",")
    report.bins_table().write(os.path.join(out_dir, "eval_bins.csv"),
                              delim=",")
    write_manifest(out_dir, "eval", config, config["seed"], inputs)


def cmd_sweep(conf):
    config = load_config(conf).override(output_dir=conf.out)
    seeds = (parse_int_list(conf.seeds, "--seeds") if conf.seeds
             else config["seeds"])
    sizes = (parse_int_list(conf.sizes, "--sizes") if conf.sizes
             else config["sweep"]["train_sizes"])
    modes = [conf.mode] if conf.mode else config["sweep"]["modes"]
    if conf.jobs < 1:
        raise UsageError("--jobs must be >= 1")

    bundle = load_bundle(conf.dataset)
    check_config_fits(config, bundle)
    for size in sizes:
        if not 1 <= size <= len(bundle.train):
            raise UsageError("train size %d is outside 1..%d" %
                             (size, len(bundle.train)))
    out_dir = config["output_dir"]

    aggregate, runs = training.multi_run(
        config.training_config(), bundle, seeds, sizes, modes,
        config["eval"]["bin_width"], conf.jobs)

    util.makedirs(out_dir)
    aggregate.write(os.path.join(out_dir, "aggregate.csv"), delim=",")
    runs.write(os.path.join(out_dir, "runs.csv"), delim=",")
    failures = sum(row["failures"] for row in aggregate)
    write_manifest(out_dir, "sweep", config, config["seed"],
                   [("dataset", conf.dataset)],
                   [("seeds", ",".join(str(x) for x in seeds)),
                    ("sizes", ",".join(str(x) for x in sizes)),
                    ("modes", ",".join(modes)),
                    ("failures", failures)])


def cmd_bench(conf):
    config = load_config(conf).override(output_dir=conf.out)
    bundle = load_bundle(conf.dataset)
    model = load_checkpoint(conf.checkpoint, bundle)
    count = min(config["bench"]["matrices"], len(bundle.test))
    if count == 0:
        raise UsageError("the dataset has no test matrices")
    out_dir = config["output_dir"]

    table = training.bench_solver(model, bundle.test.features[:count],
                                  config["bench"]["repetitions"],
                                  config["training"]["direction"])

    util.makedirs(out_dir)
    table.write(os.path.join(out_dir, "bench.csv"), delim=",")
    write_manifest(out_dir, "bench", config, config["seed"],
                   [("dataset", conf.dataset),
                    ("checkpoint", conf.checkpoint)])


def cmd_diag(conf):
    if not conf.run_dir or not os.path.isdir(conf.run_dir):
        raise UsageError("--run-dir must be an ising-train output directory")
    run_dir = conf.run_dir
    config = ExperimentConfig.load(
        require_file(os.path.join(run_dir, CONFIG_FILE), "run config"))
    config = config.override(output_dir=conf.out or run_dir)

    dataset_path = conf.dataset
    if not dataset_path:
        manifest = util.read_dict(
            require_file(os.path.join(run_dir, MANIFEST_FILE),
                         "run manifest"))
        dataset_path = manifest.get("input.dataset")
    bundle = load_bundle(dataset_path)
    check_config_fits(config, bundle)

    final = load_checkpoint(os.path.join(run_dir, CHECKPOINT_FILE), bundle)
    dims, snapshots = training.load_snapshots(
        require_file(os.path.join(run_dir, SNAPSHOTS_FILE), "snapshots"))
    if dims != final.dims:
        raise UsageError("snapshots do not match the run checkpoint")
    theta_final = autodiff.flatten_params(final)
    inputs = [("dataset", dataset_path),
              ("checkpoint", os.path.join(run_dir, CHECKPOINT_FILE))]
    extra = []
    if conf.reference:
        reference = load_checkpoint(conf.reference, bundle)
        if reference.dims != final.dims:
            raise UsageError("reference checkpoint has dims %s, the run "
                             "has %s" % (reference.dims, final.dims))
        theta_star = autodiff.flatten_params(reference)
        inputs.append(("reference", conf.reference))
        extra.append(("reference_similarity", repr(
            diagnostics.parameter_similarity(theta_final, theta_star))))
    else:
        theta_star = theta_final

    diag = config["diagnostics"]
    seed = conf.seed if conf.seed is not None else diag["seed"]
    tconfig = config.training_config()
    sub = prepare_bundle(config, bundle, config["seed"])
    if tconfig.mode == losses.ONLY_DTR:
        pool = sub.train.features
    else:
        pool = sub.unlabeled_pool
    netdata = diagnostics.NetworkData(sub.train, pool, tconfig.direction,
                                      tconfig.train_loss)
    out_dir = config["output_dir"]

    util.tic("gradient projections")
    trace = diagnostics.gradient_projection(
        snapshots[::diag["stride"]], theta_star,
        diagnostics.network_loss_terms(dims), netdata)
    util.toc()

    loss_fn = diagnostics.network_objective(
        dims, netdata, tconfig.epochs - 1, tconfig.resolve_schedules(),
        tconfig.mode)
    grid = diagnostics.landscape_slice(theta_star, loss_fn,
                                       diag["grid_range"], diag["grid_size"],
                                       seed, dims)
    extra.append(("landscape_missing", grid.missing()))

    util.makedirs(out_dir)
    trace.write(os.path.join(out_dir, "projection.csv"))
    grid.write(os.path.join(out_dir, "landscape.csv"))
    write_manifest(out_dir, "diag", config, seed, inputs, extra,
                   DIAG_MANIFEST_FILE)


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
    "diag": cmd_diag,
}


#=============================================================================
# entry point


def report_error(code, error):
    message = " ".join(str(error).split())
    sys.stderr.write("error\tcode=%d\tkind=%s\tmessage=%s\n" %
                     (code, type(error).__name__, message))


def main(command, argv=None):
    """Run one command; returns the exit code"""
    if command not in _COMMANDS:
        raise ValueError("unknown command '%s'" % command)
    if argv is None:
        argv = sys.argv[1:]

    quiet = False
    try:
        conf, args = make_parser(command).parse_args(argv)
        if args:
            raise UsageError("unexpected arguments: %s" % " ".join(args))
        if conf.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        if conf.quiet:
            quiet = True
            util.globalTimer().suppress()
        _COMMANDS[command](conf)
    except (UsageError, ConfigError) as e:
        report_error(EXIT_USAGE, e)
        return EXIT_USAGE
    except Exception as e:
        report_error(EXIT_RUNTIME, e)
        return EXIT_RUNTIME
    finally:
        if quiet:
            util.globalTimer().unsuppress()
        util.globalTimer().reset()

    return EXIT_OK
