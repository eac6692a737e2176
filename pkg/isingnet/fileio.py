"""
Binary containers for datasets, checkpoints and parameter snapshots.

Every container starts with a short text header:

    #isingnet-<kind>
    version<TAB>1
    <key><TAB><value>
    ...
    count<TAB><number of values>
    #data

followed by 'count' little-endian 64-bit IEEE floats.

"""

import numpy as np


FORMAT_VERSION = 1
MAGIC_PREFIX = "#isingnet-"
DATA_MARKER = "#data"

# header lines are short; anything longer is not one of our files
MAX_HEADER_LINE = 1 << 16
MAX_HEADER_LINES = 1024


class FileFormatError (ValueError):
    """The file is not a well formed container"""


class FileVersionError (FileFormatError):
    """The container was written with another format version"""


def format_float(value):
    """Formats a float so that float(format_float(x)) == x"""
    return repr(float(value))


def format_ints(values):
    return ",".join(str(int(x)) for x in values)


def parse_ints(text):
    if text == "":
        return []
    return [int(x) for x in text.split(",")]


def write_container(filename, kind, header, values):
    """
    Write a container of 'kind'

    header -- sequence of (key, value) pairs, values already formatted
    values -- array of floats, written flattened in C order
    """
    values = np.ascontiguousarray(values, dtype="<f8").ravel()

    lines = [MAGIC_PREFIX + kind, "version\t%d" % FORMAT_VERSION]
    for key, value in header:
        key = str(key)
        value = str(value)
        if "\t" in key or "\n" in key or "\n" in value:
            raise FileFormatError("bad header entry '%s'" % key)
        lines.append("%s\t%s" % (key, value))
    lines.append("count\t%d" % len(values))
    lines.append(DATA_MARKER)

    with open(filename, "wb") as out:
        out.write(("\n".join(lines) + "\n").encode("ascii"))
        out.write(values.tobytes())


def read_container(filename, kind):
    """
    Read a container of 'kind'

    Returns (header, values) where header is a dict of strings.
    """
    with open(filename, "rb") as infile:
        header = _read_header(infile, filename, kind)
        payload = infile.read()

    try:
        count = int(header["count"])
    except (KeyError, ValueError):
        raise FileFormatError("%s: missing value count" % filename)

    if len(payload) != 8 * count:
        raise FileFormatError(
            "%s: truncated payload: expected %d values, found %d bytes" %
            (filename, count, len(payload)))

    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return header, values


def _read_header(infile, filename, kind):
    magic = infile.readline(MAX_HEADER_LINE).decode("ascii", "replace")
    if magic.rstrip("\n") != MAGIC_PREFIX + kind:
        raise FileFormatError("%s: not an isingnet %s file" %
                              (filename, kind))

    header = {}
    for i in range(MAX_HEADER_LINES):
        line = infile.readline(MAX_HEADER_LINE)
        if not line:
            raise FileFormatError("%s: truncated header" % filename)
        line = line.decode("ascii", "replace").rstrip("\n")
        if line == DATA_MARKER:
            break
        tokens = line.split("\t", 1)
        if len(tokens) != 2:
            raise FileFormatError("%s: malformed header line '%s'" %
                                  (filename, line))
        header[tokens[0]] = tokens[1]
    else:
        raise FileFormatError("%s: header too long" % filename)

    version = header.get("version")
    if version != str(FORMAT_VERSION):
        raise FileVersionError(
            "%s: format version %s is not supported (expected %d)" %
            (filename, version, FORMAT_VERSION))

    return header


def get_field(header, key, parse=str, filename=""):
    """Fetch and parse a header field, raising FileFormatError"""
    try:
        return parse(header[key])
    except KeyError:
        raise FileFormatError("%s: missing header field '%s'" %
                              (filename, key))
    except ValueError:
        raise FileFormatError("%s: bad header field '%s'" % (filename, key))
