"""
Quantum datasets

Labeled transverse-field Ising samples for the extrapolation protocol:
train and validation fields are drawn from a narrow B_x interval, the
test split covers a wider one and doubles as the unlabeled pool.

"""

from multiprocessing import Pool

import numpy as np

from rasmus import util

from isingnet import fileio
from isingnet import linalg


DATASET_KIND = "dataset"

# row layout of a stored split: pool index, B_x, b, y..., features...
ROW_PREFIX = 3


class DatasetError (ValueError):
    pass


class DatasetFormatError (DatasetError):
    pass


class DatasetVersionError (DatasetFormatError):
    pass


class SpinChainSpec (object):
    """Parameters of one transverse-field Ising ring"""

    def __init__(self, n, bx, bz):
        if int(n) != n or n < 1:
            raise DatasetError("spin count must be a positive integer")
        if not (np.isfinite(bx) and np.isfinite(bz)):
            raise DatasetError("field strengths must be finite")
        self.n = int(n)
        self.bx = float(bx)
        self.bz = float(bz)

    def hamiltonian(self):
        return linalg.ising_hamiltonian(self.n, self.bx, self.bz)

    def __repr__(self):
        return "SpinChainSpec(n=%d, bx=%r, bz=%r)" % (self.n, self.bx,
                                                      self.bz)


class SampleRecord (object):
    """One labeled sample: flattened Hamiltonian and its ground state"""

    def __init__(self, spec, features, y, b):
        self.spec = spec
        self.features = features
        self.y = y
        self.b = b

    def matrix(self):
        d = len(self.y)
        return self.features.reshape(d, d)


class DatasetSplit (object):
    """
    A split of samples stored column-wise

    index    -- position of each sample in the pool it was drawn from
    bx       -- transverse field of each sample
    features -- (N, d*d) flattened Hamiltonians
    y, b     -- (N, d) ground-state eigenvectors and (N,) eigenvalues
    """

    def __init__(self, n, bz, index, bx, features, y, b):
        self.n = n
        self.bz = bz
        self.dim = 2 ** n
        self.index = np.asarray(index, dtype=np.int64)
        self.bx = np.asarray(bx, dtype=float)
        self.features = np.asarray(features, dtype=float).reshape(
            len(self.bx), self.dim * self.dim)
        self.y = np.asarray(y, dtype=float).reshape(len(self.bx), self.dim)
        self.b = np.asarray(b, dtype=float).reshape(len(self.bx))

    def __len__(self):
        return len(self.bx)

    def __getitem__(self, i):
        return SampleRecord(SpinChainSpec(self.n, self.bx[i], self.bz),
                            self.features[i], self.y[i], self.b[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def matrices(self):
        return self.features.reshape(len(self), self.dim, self.dim)

    def take(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return DatasetSplit(self.n, self.bz, self.index[rows], self.bx[rows],
                            self.features[rows], self.y[rows], self.b[rows])

    def to_rows(self):
        return np.hstack([self.index[:, None].astype(float),
                          self.bx[:, None], self.b[:, None],
                          self.y, self.features])

    @classmethod
    def from_rows(cls, n, bz, rows):
        dim = 2 ** n
        rows = rows.reshape(-1, ROW_PREFIX + dim + dim * dim)
        return cls(n, bz, rows[:, 0].astype(np.int64), rows[:, 1],
                   rows[:, ROW_PREFIX + dim:], rows[:, ROW_PREFIX:
                                                    ROW_PREFIX + dim],
                   rows[:, 2])

    def __eq__(self, other):
        if not isinstance(other, DatasetSplit):
            return NotImplemented
        return (self.n == other.n and self.bz == other.bz and
                np.array_equal(self.index, other.index) and
                np.array_equal(self.bx, other.bx) and
                np.array_equal(self.features, other.features) and
                np.array_equal(self.y, other.y) and
                np.array_equal(self.b, other.b))

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    __hash__ = None


class DatasetBundle (object):
    """Train, validation and test splits plus the unlabeled pool"""

    def __init__(self, n, bz, seed, train_bx_range, test_bx_range,
                 train, validation, test):
        self.n = n
        self.bz = bz
        self.seed = seed
        self.train_bx_range = tuple(float(x) for x in train_bx_range)
        self.test_bx_range = tuple(float(x) for x in test_bx_range)
        self.train = train
        self.validation = validation
        self.test = test

    @property
    def dim(self):
        return 2 ** self.n

    @property
    def unlabeled_pool(self):
        """Features of the test split, used without their labels"""
        return self.test.features

    def replace(self, **splits):
        kwargs = dict(train=self.train, validation=self.validation,
                      test=self.test)
        kwargs.update(splits)
        return DatasetBundle(self.n, self.bz, self.seed,
                             self.train_bx_range, self.test_bx_range,
                             **kwargs)

    def __eq__(self, other):
        if not isinstance(other, DatasetBundle):
            return NotImplemented
        return (self.n == other.n and self.bz == other.bz and
                self.seed == other.seed and
                self.train_bx_range == other.train_bx_range and
                self.test_bx_range == other.test_bx_range and
                self.train == other.train and
                self.validation == other.validation and
                self.test == other.test)

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    __hash__ = None


#=============================================================================
# generation


def label_sample(n, bx, bz):
    """Returns (features, y, b) for one spin chain"""
    h = linalg.ising_hamiltonian(n, bx, bz)
    b, y = linalg.ground_state(h, linalg.SMALLEST)
    return h.ravel(), y, b


def _label_sample_args(args):
    return label_sample(*args)


def label_split(n, bz, bx, jobs=1):
    """Diagonalize one Hamiltonian per field value, in order"""
    args = [(n, x, bz) for x in bx]
    if jobs > 1 and len(args) > 1:
        pool = Pool(jobs)
        try:
            chunksize = max(1, len(args) // (4 * jobs))
            results = pool.map(_label_sample_args, args, chunksize)
        finally:
            pool.close()
            pool.join()
    else:
        results = [label_sample(*a) for a in args]

    dim = 2 ** n
    features = np.zeros((len(args), dim * dim))
    y = np.zeros((len(args), dim))
    b = np.zeros(len(args))
    for i, (f, yi, bi) in enumerate(results):
        features[i] = f
        y[i] = yi
        b[i] = bi
    return features, y, b


def _check_range(name, bx_range):
    try:
        lo, hi = [float(x) for x in bx_range]
    except (TypeError, ValueError):
        raise DatasetError("%s must be a pair of numbers" % name)
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
        raise DatasetError("%s [%r, %r] is not a valid interval" %
                           (name, lo, hi))
    return lo, hi


def _check_size(name, size):
    if int(size) != size or size < 0:
        raise DatasetError("%s must be a non-negative integer" % name)
    return int(size)


def generate_dataset(n, train_size, test_size, validation_size,
                     train_bx_range, test_bx_range, bz, seed, jobs=1):
    """
    Generate a labeled dataset bundle

    train_size is the size of the train pool; validation_size samples
    are drawn from it without replacement and removed from train.  The
    train, test and validation draws use independent substreams of
    'seed'.
    """
    train_lo, train_hi = _check_range("train_bx_range", train_bx_range)
    test_lo, test_hi = _check_range("test_bx_range", test_bx_range)
    train_size = _check_size("train_size", train_size)
    test_size = _check_size("test_size", test_size)
    validation_size = _check_size("validation_size", validation_size)
    if validation_size > train_size:
        raise DatasetError("validation_size %d exceeds the train pool %d" %
                           (validation_size, train_size))
    if int(n) != n or not 1 <= n <= linalg.MAX_SPINS:
        raise DatasetError("spin count must be in 1..%d" % linalg.MAX_SPINS)
    if not np.isfinite(bz):
        raise DatasetError("bz must be finite")
    n = int(n)
    bz = float(bz)

    train_seq, test_seq, validation_seq = \
        np.random.SeedSequence(seed).spawn(3)
    train_bx = np.random.default_rng(train_seq).uniform(
        train_lo, train_hi, train_size)
    test_bx = np.random.default_rng(test_seq).uniform(
        test_lo, test_hi, test_size)

    util.tic("label %d train and %d test samples (n=%d)" %
             (train_size, test_size, n))
    pool = DatasetSplit(n, bz, np.arange(train_size), train_bx,
                        *label_split(n, bz, train_bx, jobs))
    test = DatasetSplit(n, bz, np.arange(test_size), test_bx,
                        *label_split(n, bz, test_bx, jobs))
    util.toc()

    chosen = np.random.default_rng(validation_seq).choice(
        train_size, validation_size, replace=False)
    chosen = np.sort(chosen)
    rest = np.setdiff1d(np.arange(train_size), chosen)

    return DatasetBundle(n, bz, seed, (train_lo, train_hi),
                         (test_lo, test_hi),
                         pool.take(rest), pool.take(chosen), test)


def subsample_train(bundle, size, seed):
    """Uniform subsample of the train split without replacement"""
    if int(size) != size or size < 1:
        raise DatasetError("subsample size must be a positive integer")
    if size > len(bundle.train):
        raise DatasetError("subsample size %d exceeds the train split %d" %
                           (size, len(bundle.train)))
    rows = np.random.default_rng(seed).permutation(len(bundle.train))
    return bundle.replace(train=bundle.train.take(rows[:int(size)]))


#=============================================================================
# input/output


_SPLITS = ("train", "validation", "test")


def save_dataset(bundle, filename):
    """Write a bundle; loading it gives back identical arrays"""
    header = [
        ("n", bundle.n),
        ("bz", fileio.format_float(bundle.bz)),
        ("seed", bundle.seed),
        ("train_bx_range", ",".join(fileio.format_float(x)
                                    for x in bundle.train_bx_range)),
        ("test_bx_range", ",".join(fileio.format_float(x)
                                   for x in bundle.test_bx_range)),
    ]
    for name in _SPLITS:
        header.append(("%s_count" % name, len(getattr(bundle, name))))

    rows = [getattr(bundle, name).to_rows() for name in _SPLITS]
    fileio.write_container(filename, DATASET_KIND, header,
                           np.concatenate([r.ravel() for r in rows]))


def _parse_range(text):
    lo, hi = text.split(",")
    return float(lo), float(hi)


def load_dataset(filename):
    try:
        header, values = fileio.read_container(filename, DATASET_KIND)

        def field(key, parse):
            return fileio.get_field(header, key, parse, filename)

        n = field("n", int)
        bz = field("bz", float)
        seed = field("seed", int)
        train_bx_range = field("train_bx_range", _parse_range)
        test_bx_range = field("test_bx_range", _parse_range)
        counts = [field("%s_count" % name, int) for name in _SPLITS]
    except fileio.FileVersionError as e:
        raise DatasetVersionError(str(e))
    except fileio.FileFormatError as e:
        raise DatasetFormatError(str(e))

    if not 1 <= n <= linalg.MAX_SPINS:
        raise DatasetFormatError("%s: bad spin count %d" % (filename, n))
    dim = 2 ** n
    width = ROW_PREFIX + dim + dim * dim
    if len(values) != width * sum(counts):
        raise DatasetFormatError("%s: payload does not match split sizes" %
                                 filename)

    splits = []
    start = 0
    for count in counts:
        end = start + width * count
        splits.append(DatasetSplit.from_rows(n, bz, values[start:end]))
        start = end

    return DatasetBundle(n, bz, seed, train_bx_range, test_bx_range,
                         *splits)
