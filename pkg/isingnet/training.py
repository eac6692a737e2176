"""
Training, evaluation, sweeps and the solver benchmark

"""

from multiprocessing import Pool

import numpy as np

from rasmus import stats
from rasmus import util
from rasmus.tablelib import Table

from isingnet import autodiff
from isingnet import fileio
from isingnet import linalg
from isingnet import losses
from isingnet import schedules
from isingnet.data import subsample_train
from isingnet.losses import LossBatch


SNAPSHOTS_KIND = "snapshots"

RUNLOG_COLUMNS = ["epoch", "objective", "train_mse", "validation_mse",
                  "test_mse", "c_loss", "s_loss", "lambda_c", "lambda_s",
                  "exp_clamps", "label_reads"]

SUMMARY_COLUMNS = ["split", "model", "samples", "mse", "cosine_similarity"]

BIN_COLUMNS = ["bin", "bx_lo", "bx_hi", "count", "cosine_similarity"]

RUN_COLUMNS = ["mode", "train_size", "seed", "status", "final_test_mse",
               "final_cosine", "best_test_mse", "best_cosine", "best_epoch",
               "message"]

AGGREGATE_COLUMNS = ["mode", "train_size", "runs", "failures",
                     "final_test_mse_mean", "final_test_mse_std",
                     "final_cosine_mean", "final_cosine_std",
                     "best_test_mse_mean", "best_test_mse_std",
                     "best_cosine_mean", "best_cosine_std"]

BENCH_COLUMNS = ["method", "matrices", "repetitions", "mean_seconds",
                 "seconds_per_matrix", "mean_residual", "max_residual"]


class TrainingError (RuntimeError):
    """Training stopped on a non-finite objective or gradient"""
    def __init__(self, msg, epoch=None, step=None):
        self.msg = msg
        if epoch is not None:
            msg = "epoch %d step %d: %s" % (epoch, step, msg)
        RuntimeError.__init__(self, msg)
        self.epoch = epoch
        self.step = step

    def __reduce__(self):
        return (TrainingError, (self.msg, self.epoch, self.step))


class TrainingConfig (object):
    """
    Settings of one training run

    schedule_c and schedule_s are the adaptive schedules; constant_c and
    constant_s are the fixed weights of the pgnn, pinn and mtl modes.
    """

    def __init__(self, dims, epochs=500, batch_size=128, full_batch=False,
                 lr=2e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 schedule_c=None, schedule_s=None,
                 constant_c=0.85, constant_s=2.3,
                 direction=linalg.SMALLEST, mode=losses.COPHY,
                 train_loss=losses.MSE, seed=0, snapshot_every=1,
                 log_every=10):
        self.dims = list(dims)
        self.epochs = epochs
        self.batch_size = batch_size
        self.full_batch = full_batch
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.schedule_c = (schedule_c if schedule_c is not None else
                           schedules.get_preset("cold_start_sigmoid"))
        self.schedule_s = (schedule_s if schedule_s is not None else
                           schedules.get_preset("annealing"))
        self.constant_c = constant_c
        self.constant_s = constant_s
        self.direction = direction
        self.mode = mode
        self.train_loss = train_loss
        self.seed = seed
        self.snapshot_every = snapshot_every
        self.log_every = log_every
        self.validate()

    def validate(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError("epochs must be an integer >= 1")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValueError("batch_size must be an integer >= 1")
        if self.mode not in losses.MODES:
            raise ValueError("unknown mode '%s'" % self.mode)
        if self.direction not in linalg.DIRECTIONS:
            raise ValueError("unknown direction '%s'" % self.direction)
        if self.train_loss not in losses.TRAIN_LOSSES:
            raise ValueError("unknown train loss '%s'" % self.train_loss)
        if self.snapshot_every < 0 or self.log_every < 0:
            raise ValueError("snapshot_every and log_every must be >= 0")
        if self.constant_c < 0 or self.constant_s < 0:
            raise ValueError("constant weights must be >= 0")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if len(self.dims) < 2:
            raise ValueError("need at least one layer")

    def replace(self, **kwargs):
        settings = dict(self.__dict__)
        settings.update(kwargs)
        return TrainingConfig(**settings)

    def resolve_schedules(self):
        """(lambda_c schedule, lambda_s schedule) used by this mode"""
        mode = self.mode
        zero = schedules.get_preset("zero")
        if mode == losses.BLACK_BOX:
            return zero, zero
        elif mode in (losses.PGNN_ANALOGUE, losses.PINN_ANALOGUE,
                      losses.MTL_PGNN):
            return (schedules.constant(self.constant_c),
                    schedules.constant(self.constant_s))
        elif mode == losses.WO_SLOSS:
            return self.schedule_c, zero
        else:
            return self.schedule_c, self.schedule_s


class RunLog (object):
    """Per-epoch traces, snapshots and the best-validation model"""

    def __init__(self):
        self.rows = []
        self.initial = None
        self.snapshots = []
        self.best_epoch = None
        self.best_validation_mse = None
        self.best_params = None
        self.final = None
        self.timings = {}
        self.mtl_counts = dict((term, 0) for term in losses.TERMS)
        self.exp_clamps = 0
        self.label_reads = 0

    def __len__(self):
        return len(self.rows)

    def table(self):
        return Table(self.rows, headers=RUNLOG_COLUMNS)

    def write(self, filename):
        self.table().write(filename, delim=",")

    def column(self, name):
        return [row[name] for row in self.rows]


class CountingLabels (object):
    """Hands out train labels and counts every label read"""

    def __init__(self, split):
        self._split = split
        self.reads = 0

    def get(self, rows):
        self.reads += len(rows)
        return self._split.y[rows], self._split.b[rows]


#=============================================================================
# per-epoch metrics


def _batch(model, split_or_features, tape, dim, labeled=True):
    if hasattr(split_or_features, "features"):
        split = split_or_features
        pred = autodiff.forward(model, split.features, tape)
        if labeled:
            return LossBatch(split.matrices(), pred, split.y, split.b)
        return LossBatch(split.matrices(), pred)
    features = split_or_features
    pred = autodiff.forward(model, features, tape)
    return LossBatch(features.reshape(len(features), dim, dim), pred)


def split_mse(model, split, kind=losses.MSE):
    """Train-loss of 'model' on a labeled split; nan when empty"""
    if len(split) == 0:
        return float("nan")
    tape = autodiff.Tape()
    return float(losses.train_loss(_batch(model, split, tape, split.dim),
                                   kind).value)


def epoch_metrics(model, bundle, pool, t, config, schedules_cs, step=0):
    """
    Losses of 'model' on the full sets with the weights of epoch t

    The physics-guided terms use D_Tr joined with 'pool'.  A degenerate
    prediction raises TrainingError at (t, step).
    """
    tape = autodiff.Tape()
    dim = bundle.dim
    train = _batch(model, bundle.train, tape, dim)
    unlabeled = _batch(model, pool, tape, dim) if len(pool) else None
    pg = losses.concat_batches([train, unlabeled])

    w_train, lam_c, lam_s = losses.mode_weights(
        config.mode, t, schedules_cs[0], schedules_cs[1])
    train_mse = float(losses.train_mse(train).value)
    try:
        c_value = float(losses.c_loss(pg).value)
        s_value = float(losses.s_loss(pg, config.direction).value)
    except losses.LossError as e:
        raise TrainingError(str(e), t, step)

    parts = []
    if w_train:
        if config.train_loss == losses.MSE:
            parts.append(train_mse)
        else:
            parts.append(float(losses.l1_train_loss(train).value))
    if lam_c:
        parts.append(lam_c * c_value)
    if lam_s:
        parts.append(lam_s * s_value)

    return {
        "epoch": t,
        "objective": sum(parts) if parts else 0.0,
        "train_mse": train_mse,
        "validation_mse": split_mse(model, bundle.validation),
        "test_mse": split_mse(model, bundle.test),
        "c_loss": c_value,
        "s_loss": s_value,
        "lambda_c": lam_c,
        "lambda_s": lam_s,
    }


#=============================================================================
# training


def check_model_fits(dims, bundle):
    d = bundle.dim
    if dims[0] != d * d or dims[-1] != d + 1:
        raise ValueError("network dims %s do not fit %d-spin data "
                         "(need %d inputs and %d outputs)" %
                         (list(dims), bundle.n, d * d, d + 1))


def train(config, bundle, unlabeled=None):
    """
    Train a network on 'bundle'

    unlabeled -- features of the unlabeled pool; defaults to the bundle's
                 pool.  The only_dtr mode always draws from D_Tr.

    Returns (final model, RunLog).
    """
    config.validate()
    check_model_fits(config.dims, bundle)
    ntrain = len(bundle.train)
    if ntrain == 0:
        raise ValueError("the train split is empty")

    mode = config.mode
    schedules_cs = config.resolve_schedules()
    if mode == losses.ONLY_DTR:
        pool = bundle.train.features
    elif unlabeled is not None:
        pool = np.asarray(unlabeled, dtype=float)
    else:
        pool = bundle.unlabeled_pool
    dim = bundle.dim
    train_matrices = bundle.train.matrices()
    pool_matrices = pool.reshape(len(pool), dim, dim)

    init_seq, shuffle_seq, unlabeled_seq, mtl_seq = \
        np.random.SeedSequence(config.seed).spawn(4)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    unlabeled_rng = np.random.default_rng(unlabeled_seq)
    mtl_rng = np.random.default_rng(mtl_seq)

    model = autodiff.MlpModel.glorot(config.dims, init_seq)
    state = autodiff.AdamaxState(model.nparams(), config.lr, config.beta1,
                                 config.beta2, config.eps)
    labels = CountingLabels(bundle.train)
    runlog = RunLog()
    runlog.initial = epoch_metrics(model, bundle, pool, 0, config,
                                   schedules_cs)

    size = ntrain if config.full_batch else min(config.batch_size, ntrain)

    util.tic("train mode=%s seed=%d (%d samples, %d epochs)" %
             (mode, config.seed, ntrain, config.epochs))
    try:
        for t in range(config.epochs):
            clamps = 0
            if config.full_batch:
                order = np.arange(ntrain)
            else:
                order = shuffle_rng.permutation(ntrain)

            for step, start in enumerate(range(0, ntrain, size)):
                rows = order[start:start + size]
                term = None
                if mode == losses.MTL_PGNN:
                    k = int(mtl_rng.integers(len(losses.TERMS)))
                    term = losses.TERMS[k]
                    runlog.mtl_counts[term] += 1
                w_train, lam_c, lam_s = losses.mode_weights(
                    mode, t, schedules_cs[0], schedules_cs[1], term)

                tape = autodiff.Tape()
                pred = autodiff.forward(model, bundle.train.features[rows],
                                        tape)
                if w_train:
                    y, b = labels.get(rows)
                    batch = LossBatch(train_matrices[rows], pred, y, b)
                else:
                    batch = LossBatch(train_matrices[rows], pred)

                batch_unlabeled = None
                if (lam_c or lam_s) and len(pool):
                    urows = unlabeled_rng.integers(0, len(pool), len(rows))
                    batch_unlabeled = LossBatch(
                        pool_matrices[urows],
                        autodiff.forward(model, pool[urows], tape))

                try:
                    objective = losses.combined_objective(
                        t, batch, batch_unlabeled, schedules_cs,
                        config.direction, mode, config.train_loss, term)
                except losses.LossError as e:
                    raise TrainingError(str(e), t, step)
                if not np.isfinite(objective.value):
                    raise TrainingError("non-finite objective %r" %
                                        float(objective.value), t, step)

                grads = autodiff.backward(objective)
                try:
                    autodiff.adamax_step(model, grads, state)
                except autodiff.NonFiniteGradientError as e:
                    raise TrainingError(str(e), t, step)
                clamps += tape.exp_clamps

            if clamps:
                util.warn("epoch %d: %d S-Loss exp arguments clamped" %
                          (t, clamps))
            runlog.exp_clamps += clamps
            runlog.label_reads = labels.reads

            row = epoch_metrics(model, bundle, pool, t, config, schedules_cs,
                                step)
            row["exp_clamps"] = clamps
            row["label_reads"] = labels.reads
            for key in ("objective", "train_mse", "c_loss", "s_loss"):
                if not np.isfinite(row[key]):
                    raise TrainingError("non-finite %s after epoch" % key,
                                        t, step)
            runlog.rows.append(row)

            if config.snapshot_every and t % config.snapshot_every == 0:
                runlog.snapshots.append((t, autodiff.flatten_params(model)))

            vmse = row["validation_mse"]
            if np.isfinite(vmse) and (runlog.best_validation_mse is None or
                                      vmse < runlog.best_validation_mse):
                runlog.best_validation_mse = vmse
                runlog.best_epoch = t
                runlog.best_params = autodiff.flatten_params(model)

            if config.log_every and (t % config.log_every == 0 or
                                     t == config.epochs - 1):
                util.log(
                    "epoch %d objective=%.6g train=%.6g valid=%.6g "
                    "test=%.6g c=%.6g s=%.6g lambda_c=%.4g lambda_s=%.4g" %
                    (t, row["objective"], row["train_mse"],
                     row["validation_mse"], row["test_mse"], row["c_loss"],
                     row["s_loss"], row["lambda_c"], row["lambda_s"]))
    except Exception:
        util.toc()
        raise
    runlog.timings["train"] = util.toc()

    runlog.final = autodiff.flatten_params(model)
    if runlog.best_params is None:
        runlog.best_epoch = config.epochs - 1
        runlog.best_params = runlog.final

    return model, runlog


def best_model(runlog, dims):
    return autodiff.unflatten(runlog.best_params, dims)


#=============================================================================
# snapshots


def save_snapshots(filename, dims, snapshots):
    """Write (epoch, flat params) pairs"""
    epochs = [epoch for epoch, params in snapshots]
    if snapshots:
        values = np.concatenate([params for epoch, params in snapshots])
    else:
        values = np.zeros(0)
    fileio.write_container(filename, SNAPSHOTS_KIND,
                           [("dims", fileio.format_ints(dims)),
                            ("epochs", fileio.format_ints(epochs))],
                           values)


def load_snapshots(filename):
    """Returns (dims, [(epoch, flat params), ...])"""
    header, values = fileio.read_container(filename, SNAPSHOTS_KIND)
    dims = fileio.get_field(header, "dims", fileio.parse_ints, filename)
    epochs = fileio.get_field(header, "epochs", fileio.parse_ints, filename)
    nparams = autodiff.count_params(dims)
    if len(values) != nparams * len(epochs):
        raise fileio.FileFormatError("%s: payload does not match %d "
                                     "snapshots" % (filename, len(epochs)))
    return dims, [(epoch, values[i*nparams:(i+1)*nparams])
                  for i, epoch in enumerate(epochs)]


#=============================================================================
# evaluation


class EvalReport (object):
    """Test MSE, mean cosine similarity and its profile over B_x bins"""

    def __init__(self, samples, mse, cosine, bins):
        self.samples = samples
        self.mse = mse
        self.cosine = cosine
        self.bins = bins

    def summary_table(self, split="test", model="final"):
        return Table([{"split": split, "model": model,
                       "samples": self.samples, "mse": self.mse,
                       "cosine_similarity": self.cosine}],
                     headers=SUMMARY_COLUMNS)

    def bins_table(self):
        return Table(self.bins, headers=BIN_COLUMNS)


def oracle_predict(features, direction=linalg.SMALLEST):
    """Eigensolver predictions for a (N, d*d) feature array"""
    features = np.asarray(features, dtype=float)
    d = int(round(np.sqrt(features.shape[1])))
    y_hat = np.zeros((len(features), d))
    b_hat = np.zeros(len(features))
    for i, row in enumerate(features):
        b_hat[i], y_hat[i] = linalg.ground_state(row.reshape(d, d),
                                                 direction)
    return y_hat, b_hat


def model_predictor(model):
    return lambda features: autodiff.predict(model, features)


def evaluate(model, split, bin_width=0.1, bx_range=None, predictor=None):
    """
    Evaluate predictions on a labeled split

    predictor -- function from features to (y_hat, b_hat); defaults to
                 the network.  bx_range sets the span covered by the bins
                 (default: the split's own B_x span).

    Predicted eigenvectors are sign-normalized like the labels before
    the MSE and cosine similarity are taken.
    """
    if len(split) == 0:
        raise ValueError("cannot evaluate an empty split")
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    if predictor is None:
        predictor = model_predictor(model)
    y_hat, b_hat = predictor(split.features)
    # eigenvectors are defined up to sign; score them in the label convention
    y_hat = np.array([linalg.normalize_sign(v) for v in y_hat])

    tape = autodiff.Tape()
    pred = autodiff.Prediction(tape.constant(y_hat), tape.constant(b_hat))
    mse = float(losses.train_mse(
        LossBatch(split.matrices(), pred, split.y, split.b)).value)
    cosines = linalg.batch_cosine_similarity(y_hat, split.y)

    if bx_range is None:
        lo, hi = float(split.bx.min()), float(split.bx.max())
    else:
        lo, hi = [float(x) for x in bx_range]
    nbins = util.ceil_div(hi - lo, bin_width) if hi > lo else 1

    members = [[] for i in range(nbins)]
    for x, cosine in zip(split.bx, cosines):
        members[util.bucket_bin(max(x, lo), nbins, lo, bin_width)].append(
            cosine)

    bins = []
    for k, vals in enumerate(members):
        bins.append({
            "bin": k,
            "bx_lo": round(lo + k * bin_width, 12),
            "bx_hi": round(min(lo + (k + 1) * bin_width, hi), 12),
            "count": len(vals),
            "cosine_similarity": (float(np.mean(vals)) if vals
                                  else float("nan")),
        })

    return EvalReport(len(split), mse, float(np.mean(cosines)), bins)


#=============================================================================
# sweeps


_sweep_state = {}


def _init_sweep(config, bundle, bin_width):
    _sweep_state["config"] = config
    _sweep_state["bundle"] = bundle
    _sweep_state["bin_width"] = bin_width


def _clean_message(msg):
    return " ".join(str(msg).replace(",", ";").split())


def _sweep_task(task):
    mode, size, seed = task
    config = _sweep_state["config"].replace(mode=mode, seed=seed)
    bundle = _sweep_state["bundle"]
    bin_width = _sweep_state["bin_width"]
    row = {"mode": mode, "train_size": size, "seed": seed}

    try:
        sub = subsample_train(bundle, size, seed)
        model, runlog = train(config, sub)
        final = evaluate(model, sub.test, bin_width, sub.test_bx_range)
        best = evaluate(best_model(runlog, config.dims), sub.test,
                        bin_width, sub.test_bx_range)
    except Exception as e:
        util.warn("run mode=%s size=%d seed=%d failed: %s" %
                  (mode, size, seed, e))
        nan = float("nan")
        row.update(status="failed", final_test_mse=nan, final_cosine=nan,
                   best_test_mse=nan, best_cosine=nan, best_epoch=-1,
                   message=_clean_message("%s: %s" %
                                          (type(e).__name__, e)))
        return row

    row.update(status="ok", final_test_mse=final.mse,
               final_cosine=final.cosine, best_test_mse=best.mse,
               best_cosine=best.cosine, best_epoch=runlog.best_epoch,
               message="")
    return row


def aggregate_runs(runs, modes, train_sizes):
    """Mean and sample standard deviation per (mode, train size)"""
    table = Table(headers=AGGREGATE_COLUMNS)
    for mode in modes:
        for size in train_sizes:
            cell = [r for r in runs
                    if r["mode"] == mode and r["train_size"] == size]
            ok = [r for r in cell if r["status"] == "ok"]
            row = {"mode": mode, "train_size": size, "runs": len(cell),
                   "failures": len(cell) - len(ok)}
            for key in ("final_test_mse", "final_cosine", "best_test_mse",
                        "best_cosine"):
                row[key + "_mean"], row[key + "_std"] = stats.summarize(
                    [r[key] for r in ok])
            table.append(row)
    return table


def multi_run(config, bundle, seeds, train_sizes, modes=None,
              bin_width=0.1, jobs=1):
    """
    Train every (mode, train size, seed) combination

    Each run subsamples the train split with its seed and trains with the
    same seed.  Failed runs are recorded, not dropped.

    Returns (aggregate table, per-run table).
    """
    seeds = list(seeds)
    train_sizes = list(train_sizes)
    modes = [config.mode] if modes is None else list(modes)
    if not seeds or not train_sizes or not modes:
        raise ValueError("need at least one seed, train size and mode")

    tasks = [(mode, size, seed)
             for mode in modes for size in train_sizes for seed in seeds]

    util.tic("sweep %d runs" % len(tasks))
    if jobs > 1 and len(tasks) > 1:
        pool = Pool(jobs, _init_sweep, (config, bundle, bin_width))
        try:
            runs = pool.map(_sweep_task, tasks, 1)
        finally:
            pool.close()
            pool.join()
    else:
        _init_sweep(config, bundle, bin_width)
        try:
            runs = [_sweep_task(task) for task in tasks]
        finally:
            _sweep_state.clear()
    util.toc()

    return (aggregate_runs(runs, modes, train_sizes),
            Table(runs, headers=RUN_COLUMNS))


#=============================================================================
# benchmark


def prediction_residuals(matrices, y_hat, b_hat):
    """Per-sample |A y_hat - b_hat y_hat| for stacked matrices"""
    resid = (np.einsum("bij,bj->bi", matrices, y_hat) -
             b_hat[:, None] * y_hat)
    return np.sqrt(np.sum(resid * resid, axis=1))


def bench_solver(model, features, repetitions, direction=linalg.SMALLEST):
    """
    Time the network forward pass against the eigensolver

    Both methods are scored with the same residual |A y - b y|.
    Timings cover prediction only.
    """
    features = np.asarray(features, dtype=float)
    if int(repetitions) != repetitions or repetitions < 1:
        raise ValueError("repetitions must be an integer >= 1")
    if features.ndim != 2 or len(features) == 0:
        raise ValueError("need a non-empty (N, d*d) matrix array")
    if features.shape[1] != model.input_dim:
        raise ValueError("matrices of size %d do not fit network input %d" %
                         (features.shape[1], model.input_dim))
    d = int(round(np.sqrt(features.shape[1])))
    matrices = features.reshape(len(features), d, d)

    methods = [
        ("network", model_predictor(model)),
        ("eig_symmetric", lambda f: oracle_predict(f, direction)),
    ]

    table = Table(headers=BENCH_COLUMNS)
    for name, predictor in methods:
        durations = []
        for r in range(int(repetitions)):
            util.tic()
            y_hat, b_hat = predictor(features)
            durations.append(util.toc())
        resid = prediction_residuals(matrices, y_hat, b_hat)
        seconds = stats.mean(durations)
        util.log("%s: %.6gs per pass, mean residual %.3g" %
                 (name, seconds, float(np.mean(resid))))
        table.add(method=name, matrices=len(features),
                  repetitions=int(repetitions), mean_seconds=seconds,
                  seconds_per_matrix=seconds / len(features),
                  mean_residual=float(np.mean(resid)),
                  max_residual=float(np.max(resid)))
    return table
