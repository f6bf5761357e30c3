"""Electrode layout of the 9-channel stream."""

ACQUISITION = ("PO5", "PO3", "POZ", "PO4", "O1", "OZ", "O2")
REFERENCE = "Cz"
BIAS = "AFz"
STREAM_CHANNELS = ACQUISITION + (REFERENCE, BIAS)
N_STREAM_CHANNELS = len(STREAM_CHANNELS)
N_ACQUISITION = len(ACQUISITION)

FS_HZ = 250.0
LEAD_OFF_KOHM = 50.0


def channel_index(label):
    try:
        return STREAM_CHANNELS.index(label)
    except ValueError:
        raise KeyError(f"unknown electrode {label!r}; montage is {STREAM_CHANNELS}") from None


def montage_hash(labels=ACQUISITION):
    import zlib

    return zlib.crc32(",".join(labels).encode("ascii"))
